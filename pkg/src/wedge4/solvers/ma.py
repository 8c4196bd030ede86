"""Potential form of the Calabi-Yau fibre: a complex Monge-Ampere solver on T^4.

With complex coordinates z1 = x1 + i x2, z2 = x3 + i x4 the closed (1,1)-form
built from phi is d(J dphi / 4), whose Hermitian matrix is

    h = 1/4 [[lap_12 phi, (d1d3 + d2d4)phi + i(d1d4 - d2d3)phi], [..., lap_34 phi]]

so in one variable det(I + h) = 1 + phi''/4. The solution form is
w = s * KAHLER_FORM + hermitian_form(h) and w - Theta lies on the fibre
det = rho = e^f.
"""
import numpy as np

from .. import kernels
from .. import lambda2 as l2
from ..errors import ClassVolumeMismatch, LeftPositiveCone
from .common import SolveReport, SolverOptions, newton_krylov
from .graph import PotentialState


def hessian_parts(grid, phi_hat):
    """(h11, h22, b, c) of the Hermitian matrix of phi, from its spectrum."""
    d = grid.dsym
    return (
        grid.ifft(0.25 * (d[0] * d[0] + d[1] * d[1]) * phi_hat),
        grid.ifft(0.25 * (d[2] * d[2] + d[3] * d[3]) * phi_hat),
        grid.ifft(0.25 * (d[0] * d[2] + d[1] * d[3]) * phi_hat),
        grid.ifft(0.25 * (d[0] * d[3] - d[1] * d[2]) * phi_hat),
    )


def _det(A11, A22, B, C):
    A = np.broadcast_arrays(A11, A22, B, C)
    return kernels.herm2_det(*A).reshape(A[0].shape)


def ma_form(state):
    """The closed 2-form s * w0 + (1,1)-form of phi, as a (6, ...) field."""
    g = state.grid
    h11, h22, b, c = hessian_parts(g, g.fft(state.field))
    w0 = l2.KAHLER_FORM.reshape(6, *([1] * g.dim))
    return state.scale * w0 + l2.hermitian_form(h11, h22, b, c)


def _standard_planes(fam):
    planes = fam.params.get("planes")
    if planes is None:
        raise ValueError("ma_solve needs a Calabi-Yau family")
    P = np.asarray(planes(None, 0.0) if callable(planes) else planes)
    if P.shape != (2, 6):
        raise ValueError("ma_solve needs a constant complex structure; use general_solve")
    others = np.vstack([l2.KAHLER_FORM, l2.ASD_BASIS])
    if np.abs(P @ l2.GRAM @ others.T).max() > 1e-12:
        raise ValueError("ma_solve needs the standard complex structure; use general_solve")


def _theta_field(fam, grid, t):
    th = fam.params.get("theta")
    if th is None:
        return None
    val = np.asarray(th(grid.coords(), t), dtype=float)
    val = np.broadcast_to(val.reshape((6,) + (1,) * (val.ndim - 1)) if val.ndim == 1 else val,
                          (6,) + grid.shape)
    a, d, b, c = l2.hermitian_parts(val)
    if np.abs(l2.hermitian_form(a, d, b, c) - val).max() > 1e-12:
        raise ValueError("Theta must be a (1,1)-form for the standard complex structure")
    return np.array(val)


def ma_operator(grid, f, theta=None):
    """Residual, Jacobian action, preconditioner and cone test for ma_solve.

    Unknowns are phi (flattened) followed by the class scale s when a
    translation Theta is given.
    """
    rho = np.exp(f)
    translated = theta is not None
    if translated:
        sa, sd, sb, sc = l2.hermitian_parts(theta)
    else:
        sa = sd = sb = sc = 0.0
    shape = grid.shape
    N = grid.size
    null = grid.null_modes
    d = grid.dsym

    def unpack(xv):
        phi = xv[:N].reshape(shape)
        s = xv[N] if translated else 1.0
        return phi, s

    def matrix(xv):
        phi, s = unpack(xv)
        h11, h22, b, c = hessian_parts(grid, grid.fft(phi))
        return s + h11 - sa, s + h22 - sd, b - sb, c - sc

    def residual(xv):
        A = matrix(xv)
        r = _det(*A) - rho
        red = grid.project(r).ravel()
        if translated:
            red = np.append(red, grid.mean(r))
        return r, red

    def admissible(xv):
        A11, A22, B, C = matrix(xv)
        return bool(np.all(A11 > 0) and np.all(_det(A11, A22, B, C) > 0))

    def precompute(xv):
        return matrix(xv)

    def linear(A, dphi_hat, ds):
        A11, A22, B, C = A
        e11, e22, eb, ec = hessian_parts(grid, dphi_hat)
        return A22 * e11 + A11 * e22 - 2 * B * eb - 2 * C * ec + (A11 + A22) * ds

    def apply_jacobian(xv, A, v):
        vphi = v[:N].reshape(shape)
        ds = v[N] if translated else 0.0
        vh = grid.fft(vphi)
        lin = linear(A, np.where(null, 0.0, vh), ds)
        out = grid.ifft(grid.project_hat(grid.fft(lin)) + np.where(null, vh, 0.0)).ravel()
        if translated:
            out = np.append(out, grid.mean(lin))
        return out

    def preconditioner(xv, A):
        A11, A22, B, C = (np.mean(a) for a in A)
        sym = 0.25 * (A22 * (d[0] ** 2 + d[1] ** 2) + A11 * (d[2] ** 2 + d[3] ** 2)
                      - 2 * B * (d[0] * d[2] + d[1] * d[3]) - 2 * C * (d[0] * d[3] - d[1] * d[2]))
        sym = np.where(null, 1.0, sym)
        trace = A11 + A22

        def apply(v):
            out = grid.ifft(grid.fft(v[:N].reshape(shape)) / sym).ravel()
            if translated:
                out = np.append(out, v[N] / trace)
            return out

        return apply

    return residual, apply_jacobian, precompute, preconditioner, admissible, matrix


def ma_solve(fam, f=None, grid=None, opts=None, phi0=None, t=0.0, scale0=1.0):
    """Solve det(s I + h(phi) - S_Theta) = e^f for zero-mean phi.

    ``f`` is the log-density field; when omitted it is log rho of the family
    at time t. Untranslated problems keep s = 1 and require the volume
    compatibility mean(e^f) = 1; translated problems solve for s too.
    """
    opts = opts or SolverOptions(tol=1e-9)
    if grid is None or grid.dim != 4:
        raise ValueError("ma_solve needs a 4-dimensional grid")
    _standard_planes(fam)
    x = grid.coords()
    if f is None:
        f = np.log(np.broadcast_to(fam.rho(x, t), grid.shape))
    f = np.array(np.broadcast_to(np.asarray(f, dtype=float), grid.shape))
    translated = fam.kind == "translated-cy"
    theta = _theta_field(fam, grid, t) if translated else None
    report = SolveReport(solver="ma", converged=False, tol=opts.tol)
    vol = grid.mean(np.exp(f))
    report.diagnostics["volume_defect"] = float(vol - 1.0)
    if not translated and abs(vol - 1.0) > opts.compatibility_tol:
        if opts.compatibility != "normalize":
            raise ClassVolumeMismatch(
                f"mean(e^f) - 1 = {vol - 1.0:.3e}", witness={"mean_density": float(vol)},
                report=report,
            )
        f = f - np.log(vol)
        report.diagnostics["normalized"] = True
    ops = ma_operator(grid, f, theta)
    residual, apply_jacobian, precompute, preconditioner, admissible, matrix = ops
    shape = grid.shape
    N = grid.size
    rho = np.exp(f)
    phi = np.zeros(shape) if phi0 is None else grid.project(np.asarray(phi0, float))
    x0 = phi.ravel()
    if translated:
        x0 = np.append(x0, scale0)
    try:
        xv, report = newton_krylov(
            residual, apply_jacobian, x0, opts, preconditioner=preconditioner,
            precompute=precompute, admissible=admissible, name="ma", report=report,
        )
    except LeftPositiveCone as exc:
        A11, A22, B, C = matrix(x0)
        det = _det(A11, A22, B, C)
        idx = np.unravel_index(int(np.argmin(np.minimum(det, A11))), shape)
        exc.witness = {"index": [int(i) for i in idx], "det": float(det[idx])}
        raise
    phi = grid.project(xv[:N].reshape(shape))
    s = xv[N] if translated else 1.0
    state = PotentialState("ma", grid, phi, scale=float(s), theta=theta, density=rho, t=t)
    A11, A22, B, C = matrix(xv)
    w = ma_form(state)
    report.diagnostics.update({
        "scale": float(s),
        "min_det": float(_det(A11, A22, B, C).min()),
        "min_h11": float(A11.min()),
        "mean_phi": float(grid.mean(phi)),
        "K": float(np.sqrt(np.sum(w * w, axis=0)).max()),
    })
    return state, report
