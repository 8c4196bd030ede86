"""Inexact Newton with restarted GMRES and sup-norm backtracking."""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from ..errors import LeftPositiveCone, NonConvergence


@dataclass
class SolverOptions:
    tol: float = 1e-9
    max_iter: int = 40
    krylov_rtol: float = 1e-3
    krylov_restart: int = 50
    krylov_maxiter: int = 20
    max_halvings: int = 20
    stagnation_window: int = 5
    stagnation_factor: float = 0.1
    compatibility: str = "reject"  # or "normalize"
    compatibility_tol: float = 1e-10
    margin_tol: float = 1e-12

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SolveReport:
    solver: str
    converged: bool
    tol: float
    residual: float = float("nan")
    iterations: int = 0
    history: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    witness: dict = field(default_factory=dict)

    def to_dict(self):
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def sup(x):
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def newton_krylov(residual, apply_jacobian, x0, opts, *, preconditioner=None, precompute=None,
                  admissible=None, postprocess=None, name="newton", report=None):
    """Solve residual(x) = 0 for a flat real vector x.

    residual(x) -> (raw, rhs): ``raw`` is the pointwise residual whose sup
    norm is the convergence measure; ``rhs`` the reduced vector fed to the
    Krylov solve (same length as x). ``apply_jacobian(x, cache, v)`` and
    ``preconditioner(x, cache)`` act in that reduced space; ``precompute(x)``
    builds the per-iterate cache; ``postprocess(x)`` maps an accepted iterate
    to an equivalent one (same residual), e.g. to re-fix a gauge.
    """
    report = report or SolveReport(solver=name, converged=False, tol=opts.tol)
    x = np.array(x0, dtype=float)
    if admissible is not None and not admissible(x):
        raise LeftPositiveCone("initial state is outside the admissible cone", report=report)
    raw, rhs = residual(x)
    res = sup(raw)
    report.history.append({"iteration": 0, "residual": res, "step": 0.0, "krylov": 0})
    it = 0
    while res > opts.tol:
        if it >= opts.max_iter:
            report.residual = res
            report.iterations = len(report.history)
            raise NonConvergence(f"{name}: no convergence in {opts.max_iter} steps", report=report)
        cache = precompute(x) if precompute is not None else None
        A = LinearOperator((x.size, x.size), matvec=lambda v: apply_jacobian(x, cache, v), dtype=float)
        M = None
        if preconditioner is not None:
            pc = preconditioner(x, cache)
            M = LinearOperator((x.size, x.size), matvec=pc, dtype=float)
        counter = [0]

        def cb(_):
            counter[0] += 1

        delta, _info = gmres(
            A, -rhs, rtol=opts.krylov_rtol, restart=opts.krylov_restart,
            maxiter=opts.krylov_maxiter, M=M, callback=cb, callback_type="pr_norm",
        )
        step = 1.0
        accepted = False
        saw_admissible = False
        for _ in range(opts.max_halvings + 1):
            xn = x + step * delta
            if admissible is None or admissible(xn):
                saw_admissible = True
                raw_n, rhs_n = residual(xn)
                res_n = sup(raw_n)
                if np.isfinite(res_n) and res_n < res:
                    accepted = True
                    break
            step *= 0.5
        it += 1
        if not accepted:
            report.residual = res
            report.iterations = len(report.history)
            if not saw_admissible:
                raise LeftPositiveCone(f"{name}: every damped step leaves the cone", report=report)
            raise NonConvergence(f"{name}: line search failed at residual {res:.3e}", report=report)
        if postprocess is not None:
            xn = postprocess(xn)
            raw_n, rhs_n = residual(xn)
            res_n = sup(raw_n)
        x, raw, rhs, res = xn, raw_n, rhs_n, res_n
        report.history.append({"iteration": it, "residual": res, "step": step, "krylov": counter[0]})
        w = opts.stagnation_window
        if len(report.history) > w and res > opts.tol:
            if res > opts.stagnation_factor * report.history[-1 - w]["residual"]:
                report.residual = res
                report.iterations = len(report.history)
                raise NonConvergence(
                    f"{name}: residual reduction below {opts.stagnation_factor} over {w} steps",
                    report=report,
                )
    report.converged = True
    report.residual = res
    report.iterations = len(report.history)
    return x, report
