"""Divergence-form solver for graph constraints B = F(x, E) on T^3.

With E = e0 + grad u the graph condition is closed automatically in the
E-components, and closedness of B becomes div F(x, e0 + grad u) = 0.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .. import lambda2 as l2
from ..errors import EllipticityLost
from .common import SolveReport, SolverOptions, newton_krylov


@dataclass
class PotentialState:
    """Scalar potential plus the data it is measured against.

    Graph problems use ``e0``; Monge-Ampere problems use ``scale`` (the
    multiple of the reference Kaehler class), ``theta`` and ``density``.
    """

    kind: str
    grid: object
    field: np.ndarray
    e0: np.ndarray = None
    scale: float = 1.0
    theta: np.ndarray = None
    density: np.ndarray = None
    t: float = 0.0
    extra: dict = field(default_factory=dict)

    def copy(self):
        return replace(self, field=self.field.copy())


def _flux(fam):
    try:
        return fam.params["flux"], fam.params["flux_jacobian"]
    except KeyError:
        raise ValueError("graph_solve needs a graph family") from None


def graph_form(fam, state):
    """The closed 2-form on T^3 x R determined by a graph solution."""
    F, _ = _flux(fam)
    g = state.grid
    x = g.coords()
    E = np.asarray(state.e0, float).reshape(3, *([1] * g.dim)) + g.gradient(state.field)
    B = F(x, E, state.t)
    return l2.EBForm(E, B).to_two_form()


def _witness(grid, margins):
    idx = np.unravel_index(int(np.argmax(margins)), margins.shape)
    return {
        "index": [int(i) for i in idx],
        "x": [float(i / m) for i, m in zip(idx, grid.shape)],
        "margin": float(margins[idx]),
    }


def check_ellipticity(fam, grid, w, t, tol=1e-12):
    """Pointwise negativity margins; raises EllipticityLost at the worst point."""
    margins = fam.margin_field(w, grid.coords(), t)
    if np.max(margins) >= -tol:
        raise EllipticityLost(
            f"margin {np.max(margins):.3e} at t={t}", witness=_witness(grid, margins),
        )
    return margins


def graph_operator(fam, grid, e0, t=0.0):
    """Residual, Jacobian action and frozen-coefficient preconditioner."""
    F, HF = _flux(fam)
    x = grid.coords()
    e0 = np.asarray(e0, float).reshape(3, *([1] * grid.dim))
    shape = grid.shape
    null = grid.null_modes
    ds = grid.dsym

    def E_of(u):
        return e0 + grid.gradient(u.reshape(shape))

    def residual(u):
        r = grid.divergence(F(x, E_of(u), t))
        return r, r.ravel()

    def precompute(u):
        H = np.broadcast_to(HF(x, E_of(u), t), (3, 3) + shape)
        return {"H": H}

    def apply_jacobian(u, cache, v):
        v = v.reshape(shape)
        vh = grid.fft(v)
        pv_h = np.where(null, 0.0, vh)
        gv = np.stack([grid.ifft(s * pv_h) for s in ds])
        flux = np.einsum("ij...,j...->i...", cache["H"], gv)
        out = grid.divergence(flux) + grid.ifft(np.where(null, vh, 0.0))
        return out.ravel()

    def preconditioner(u, cache):
        Hbar = cache["H"].reshape(3, 3, -1).mean(axis=-1)
        sym = sum(Hbar[i, j] * ds[i] * ds[j] for i in range(3) for j in range(3))
        sym = np.where(null, 1.0, sym)

        def apply(v):
            return grid.ifft(grid.fft(v.reshape(shape)) / sym).ravel()

        return apply

    return residual, apply_jacobian, precompute, preconditioner


def graph_solve(fam, e0, grid, opts=None, u0=None, t=0.0):
    """Solve div F(x, e0 + grad u) = 0 for zero-mean u on a 3-torus grid."""
    opts = opts or SolverOptions(tol=1e-10)
    if grid.dim != 3:
        raise ValueError("graph_solve works on 3-dimensional grids")
    e0 = np.asarray(e0, dtype=float)
    residual, apply_jacobian, precompute, preconditioner = graph_operator(fam, grid, e0, t)
    u = np.zeros(grid.shape) if u0 is None else grid.project(np.asarray(u0, float))
    report = SolveReport(solver="graph", converged=False, tol=opts.tol)
    state = PotentialState("graph", grid, u, e0=e0, t=t)

    def checked_precompute(x):
        state.field = x.reshape(grid.shape)
        try:
            check_ellipticity(fam, grid, graph_form(fam, state), t, opts.margin_tol)
        except EllipticityLost as exc:
            exc.report = report
            raise
        return precompute(x)

    checked_precompute(u.ravel())
    x, report = newton_krylov(
        residual, apply_jacobian, u.ravel(), opts, preconditioner=preconditioner,
        precompute=checked_precompute, name="graph", report=report,
    )
    u = grid.project(x.reshape(grid.shape))
    state = PotentialState("graph", grid, u, e0=e0, t=t)
    w = graph_form(fam, state)
    try:
        margins = check_ellipticity(fam, grid, w, t, opts.margin_tol)
    except EllipticityLost as exc:
        exc.report = report
        raise
    report.diagnostics.update({
        "max_margin": float(margins.max()),
        "mean_u": float(grid.mean(u)),
        "K": float(np.sqrt(np.sum(w * w, axis=0)).max()),
    })
    return state, report
