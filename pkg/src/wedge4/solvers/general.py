"""Gauge-fixed solver for closed 2-forms with values in a fibre family on T^4.

Unknowns are a co-closed 1-form a (mean-free, off the derivative-null
modes) and coefficients h on a 3-dimensional positive slice of constant
forms. The represented form is

    w = w_ref + C + sum_i h_i basis_i + da

and the equations are d*a = 0 together with the fibre residual r(x, w) = 0.

The linearised operator is laid out as a square map on (a, h): slot 0 of
the output holds d*a, slots 1..3 hold the derivative-visible part of the
linearised residual, the last three entries its mean. Null-mode components
of a pass through as the identity so the map is invertible.
"""
from dataclasses import dataclass, field, replace
from types import SimpleNamespace

import numpy as np
from scipy.sparse.linalg import LinearOperator, lobpcg

from .. import lambda2 as l2
from ..errors import EllipticityLost, NonConvergence, UnexpectedKernel
from .common import SolveReport, SolverOptions, newton_krylov, sup


@dataclass
class SliceSpec:
    C: np.ndarray = field(default_factory=lambda: np.zeros(6))
    basis: np.ndarray = field(default_factory=lambda: l2.SD_BASIS.copy())

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float).reshape(6)
        self.basis = np.asarray(self.basis, dtype=float).reshape(3, 6)
        g = self.basis @ l2.GRAM @ self.basis.T
        if np.linalg.eigvalsh(0.5 * (g + g.T))[0] <= 0:
            raise ValueError("slice basis must span a positive 3-dimensional subspace")


@dataclass
class GeneralState:
    grid: object
    a: np.ndarray
    h: np.ndarray
    slice: SliceSpec = field(default_factory=SliceSpec)
    omega_ref: np.ndarray = None
    t: float = 0.0

    def form(self):
        g = self.grid
        const = self.slice.C + self.h @ self.slice.basis
        w = const.reshape(6, *([1] * g.dim)) + g.d1(self.a)
        if self.omega_ref is not None:
            w = w + self.omega_ref
        return w

    def copy(self):
        return replace(self, a=self.a.copy(), h=self.h.copy())


def default_state(fam, grid, slice_spec=None, t=0.0):
    """a = 0 and h chosen so the constant part matches the mean basepoint."""
    slice_spec = slice_spec or SliceSpec()
    base = np.broadcast_to(fam.basepoint(grid.coords(), t), (6,) + grid.shape)
    mean = np.array([grid.mean(c) for c in base]) - slice_spec.C
    B = slice_spec.basis
    G = B @ l2.GRAM @ B.T
    h = np.linalg.solve(G, B @ l2.GRAM @ mean)
    return GeneralState(grid, np.zeros((4,) + grid.shape), h, slice_spec, t=t)


def gauge_fix(grid, a):
    """Co-closed, mean-free representative of a with the same da."""
    ah = grid.project_hat(grid.fft(a))
    div = grid.dstar1_hat(ah)
    k2 = np.where(grid.null_modes, 1.0, grid.k2)
    g = np.where(grid.null_modes, 0.0, div / k2)
    # a - grad g with lap g = -d*a
    return grid.ifft(np.stack([ah[i] - grid.dsym[i] * g for i in range(grid.dim)]))


class Linearization:
    """Linearised (d*, fibre residual) operator at a fixed form field.

    ``consts`` is an (m, 6) array of constant directions (the slice basis
    for solves, all six coordinate forms for the moduli count).
    """

    def __init__(self, fam, grid, w, t, consts):
        self.grid = grid
        self.consts = np.asarray(consts, dtype=float)
        self.m = len(self.consts)
        D = np.asarray(fam.derivative(w, grid.coords(), t), dtype=float)
        self.D = np.broadcast_to(D, (3, 6) + grid.shape)
        self.Dbar = self.D.reshape(3, 6, -1).mean(axis=-1)
        self.N = grid.size
        self._mode_inv = None

    def split(self, v):
        g = self.grid
        return v[: 4 * self.N].reshape((4,) + g.shape), v[4 * self.N:]

    def apply(self, v):
        """Square (m = 3) or rectangular map; returns 4N + 3 entries."""
        g = self.grid
        a, c = self.split(v)
        ah = g.fft(a)
        pah = np.where(g.null_modes, 0.0, ah)
        da = g.ifft(g.d1_hat(pah))
        dw = da + (c @ self.consts).reshape(6, *([1] * g.dim))
        lin = np.einsum("ij...,j...->i...", self.D, dw)
        linh = g.fft(lin)
        out = np.empty((4,) + g.shape)
        out[0] = g.ifft(g.dstar1_hat(pah) + np.where(g.null_modes, ah[0], 0.0))
        out[1:] = g.ifft(g.project_hat(linh) + np.where(g.null_modes, ah[1:], 0.0))
        means = linh[(slice(None),) + (0,) * g.dim].real / self.N
        return np.concatenate([out.ravel(), means])

    def apply_adjoint(self, w):
        """L^2 adjoint of ``apply`` (fields weighted by the cell volume)."""
        g = self.grid
        slots = w[: 4 * self.N].reshape((4,) + g.shape)
        means = w[4 * self.N:]
        sh = g.fft(slots)
        z = g.ifft(g.project_hat(sh[1:])) + means.reshape(3, *([1] * g.dim))
        y = np.einsum("ij...,i...->j...", self.D, z)
        yh = g.fft(y)
        # <d*a, s0> = <a, grad s0>;  <da, y> = <a, d*y>
        pair_idx = g.pairs
        dstar_y = [0.0] * 4
        for k, (i, j) in enumerate(pair_idx):
            dstar_y[j] = dstar_y[j] - g.dsym[i] * yh[k]
            dstar_y[i] = dstar_y[i] + g.dsym[j] * yh[k]
        s0 = np.where(g.null_modes, 0.0, sh[0])
        out_a = np.stack([g.dsym[i] * s0 + dstar_y[i] for i in range(4)])
        out_a = np.where(g.null_modes, sh, out_a)
        out_a = g.ifft(out_a)
        ymean = yh[(slice(None),) + (0,) * g.dim].real / self.N
        return np.concatenate([out_a.ravel(), self.consts @ ymean])

    def mode_matrices(self):
        """Frozen-coefficient symbol [d*; Dbar d] at every spectral mode."""
        g = self.grid
        ds = np.broadcast_arrays(*g.dsym)
        S = np.zeros(g.spec_shape + (4, 4), dtype=complex)
        for i in range(4):
            S[..., 0, i] = -ds[i]
        for k, (i, j) in enumerate(g.pairs):
            for r in range(3):
                S[..., 1 + r, j] += self.Dbar[r, k] * ds[i]
                S[..., 1 + r, i] -= self.Dbar[r, k] * ds[j]
        S[g.null_modes] = np.eye(4)
        return S

    def solve_preconditioner(self):
        g = self.grid
        if self._mode_inv is None:
            self._mode_inv = np.linalg.inv(self.mode_matrices())
        Minv = self._mode_inv
        G0 = self.Dbar @ self.consts.T
        G0inv = np.linalg.inv(G0)

        def apply(v):
            slots, means = self.split(v)
            sh = np.moveaxis(g.fft(slots), 0, -1)
            xh = np.einsum("...ij,...j->...i", Minv, sh)
            out = g.ifft(np.moveaxis(xh, -1, 0))
            return np.concatenate([out.ravel(), G0inv @ means])

        return apply

    def normal_preconditioner(self, reg=1e-2):
        g = self.grid
        S = self.mode_matrices()
        SS = np.einsum("...ki,...kj->...ij", S.conj(), S)
        Minv = np.linalg.inv(SS)
        G0 = self.Dbar @ self.consts.T
        GG = G0.T @ G0
        GGinv = np.linalg.inv(GG + reg * np.trace(GG) / self.m * np.eye(self.m))

        def apply(v):
            a, c = self.split(v)
            sh = np.moveaxis(g.fft(a), 0, -1)
            xh = np.einsum("...ij,...j->...i", Minv, sh)
            out = g.ifft(np.moveaxis(xh, -1, 0))
            return np.concatenate([out.ravel(), GGinv @ c])

        return apply


def smallest_singular_values(lin, k=6, tol=1e-10, maxiter=500, seed=0):
    """Smallest k singular values of ``lin.apply`` in L^2 norms via LOBPCG."""
    N = lin.N
    n_in = 4 * N + lin.m
    scale = np.concatenate([np.full(4 * N, np.sqrt(N)), np.ones(lin.m)])
    out_scale = np.concatenate([np.full(4 * N, 1.0 / np.sqrt(N)), np.ones(3)])

    def normal(U):
        U = np.asarray(U).reshape(n_in, -1)
        cols = [lin.apply_adjoint(lin.apply(U[:, j] * scale)) / scale for j in range(U.shape[1])]
        return np.stack(cols, axis=1)

    pc = lin.normal_preconditioner()

    def precond(U):
        U = np.asarray(U).reshape(n_in, -1)
        return np.stack([pc(U[:, j] * scale) / scale for j in range(U.shape[1])], axis=1)

    A = LinearOperator((n_in, n_in), matmat=normal, matvec=lambda u: normal(u)[:, 0], dtype=float)
    M = LinearOperator((n_in, n_in), matmat=precond, matvec=lambda u: precond(u)[:, 0], dtype=float)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_in, k))
    _, V = lobpcg(A, X, M=M, largest=False, tol=tol, maxiter=maxiter)
    q, _ = np.linalg.qr(V)
    AQ = np.stack([lin.apply(q[:, j] * scale) * out_scale for j in range(k)], axis=1)
    return np.sort(np.linalg.svd(AQ, compute_uv=False))


def _margins(fam, grid, w, t):
    return fam.margin_field(w, grid.coords(), t)


def _check_margin(fam, grid, w, t, report, tol):
    margins = _margins(fam, grid, w, t)
    worst = float(margins.max())
    if worst >= -tol:
        idx = np.unravel_index(int(np.argmax(margins)), margins.shape)
        raise EllipticityLost(
            f"negativity margin {worst:.3e} >= 0 at witness",
            witness={"index": [int(i) for i in idx], "margin": worst}, report=report,
        )
    return margins


def _admissible_fn(fam, grid, t):
    if fam.kind not in ("calabi-yau", "translated-cy"):
        return None
    x = grid.coords()
    base = np.broadcast_to(fam.basepoint(x, t), (6,) + grid.shape)
    theta = fam.params.get("theta")
    shift = 0.0
    if theta is not None:
        th = np.asarray(theta(x, t), dtype=float)
        shift = th.reshape((6,) + (1,) * grid.dim) if th.ndim == 1 else th
    ref = base - shift

    def ok(w):
        return bool(np.all(l2.pairing(w - shift, ref) > 0))

    return ok


def general_operator(fam, state, t):
    """Residual, Jacobian action and preconditioner on packed (a, h) vectors.

    ``last`` holds the most recent linearisation; ``postprocess`` re-fixes
    the gauge of an iterate.
    """
    grid = state.grid
    slice_spec = state.slice
    x_coords = grid.coords()
    N = grid.size

    def unpack(xv):
        return replace(state, a=xv[: 4 * N].reshape((4,) + grid.shape), h=xv[4 * N:])

    def pack(st):
        return np.concatenate([st.a.ravel(), st.h])

    def residual(xv):
        st = unpack(xv)
        w = st.form()
        r = np.asarray(fam.residual(w, x_coords, t), dtype=float)
        gauge = grid.dstar1(st.a)
        rh = grid.fft(r)
        red = np.empty((4,) + grid.shape)
        red[0] = grid.project(gauge)
        red[1:] = grid.ifft(grid.project_hat(rh))
        means = rh[(slice(None),) + (0,) * grid.dim].real / N
        return np.concatenate([r.ravel(), gauge.ravel()]), np.concatenate([red.ravel(), means])

    last = {}

    def precompute(xv):
        last["lin"] = Linearization(fam, grid, unpack(xv).form(), t, slice_spec.basis)
        return last["lin"]

    def apply_jacobian(xv, lin, v):
        return lin.apply(v)

    def preconditioner(xv, lin):
        return lin.solve_preconditioner()

    def postprocess(xv):
        st = unpack(xv)
        return pack(replace(st, a=gauge_fix(grid, st.a)))

    return SimpleNamespace(
        residual=residual, apply_jacobian=apply_jacobian, precompute=precompute,
        preconditioner=preconditioner, pack=pack, unpack=unpack, postprocess=postprocess,
        last=last,
    )


def general_solve(fam, init, slice_spec=None, opts=None, t=None):
    """Newton-Krylov solve of d*a = 0, r(x, w_ref + C + h.basis + da) = 0."""
    opts = opts or SolverOptions(tol=1e-9)
    grid = init.grid
    if grid.dim != 4:
        raise ValueError("general_solve works on 4-dimensional grids")
    slice_spec = slice_spec or init.slice
    t = init.t if t is None else t
    state = GeneralState(grid, gauge_fix(grid, init.a), np.array(init.h, float), slice_spec,
                         init.omega_ref, t)
    if state.omega_ref is not None:
        ref = grid.check(state.omega_ref, 6)
        if sup(grid.d2(ref)) > 1e-8 or sup(grid.harmonic_parts(ref)) > 1e-12:
            raise ValueError("omega_ref must be exact (closed with zero mean)")
    x_coords = grid.coords()
    report = SolveReport(solver="general", converged=False, tol=opts.tol)
    admissible_form = _admissible_fn(fam, grid, t)
    ops = general_operator(fam, state, t)

    admissible = None
    if admissible_form is not None:
        admissible = lambda xv: admissible_form(ops.unpack(xv).form())  # noqa: E731

    _check_margin(fam, grid, state.form(), t, report, opts.margin_tol)
    try:
        xv, report = newton_krylov(
            ops.residual, ops.apply_jacobian, ops.pack(state), opts,
            preconditioner=ops.preconditioner, precompute=ops.precompute, admissible=admissible,
            postprocess=ops.postprocess, name="general", report=report,
        )
    except NonConvergence as exc:
        if "lin" not in ops.last:
            raise
        sv = smallest_singular_values(ops.last["lin"], k=4, tol=1e-8, maxiter=200)
        exc.witness = {"singular_values": sv.tolist()}
        if sv[0] < 1e-8:
            raise UnexpectedKernel(str(exc), witness={"singular_values": sv.tolist()},
                                   report=report) from exc
        raise
    out = ops.unpack(xv)
    out = replace(out, a=gauge_fix(grid, out.a))
    w = out.form()
    margins = _check_margin(fam, grid, w, t, report, opts.margin_tol)
    report.diagnostics.update({
        "h": out.h.tolist(),
        "gauge_residual": sup(grid.dstar1(out.a)),
        "fiber_residual": sup(fam.residual(w, x_coords, t)),
        "max_margin": float(margins.max()),
        "K": float(np.sqrt(np.sum(w * w, axis=0)).max()),
    })
    return out, report


def moduli_kernel(fam, state, grid=None, threshold=1e-8, k=6, t=None):
    """Kernel dimension of the linearisation over all closed perturbations.

    Perturbations are (a, c) with c any constant 2-form; returns
    (dimension, singular values sorted ascending).
    """
    grid = grid or state.grid
    t = getattr(state, "t", 0.0) if t is None else t
    w = state.form() if hasattr(state, "form") else np.asarray(state, dtype=float)
    w = np.broadcast_to(w.reshape((6,) + (1,) * grid.dim) if w.ndim == 1 else w, (6,) + grid.shape)
    lin = Linearization(fam, grid, w, t, np.eye(6))
    sv = smallest_singular_values(lin, k=k)
    return int(np.sum(sv < threshold)), sv
