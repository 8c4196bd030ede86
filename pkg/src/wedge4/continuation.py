"""Predictor-corrector continuation along a family P_t with event detection."""
import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics
from .grid import Ball
from .errors import EllipticityLost, LeftPositiveCone, NonConvergence, SolverError
from .solvers import GeneralState, PotentialState, SolverOptions
from .solvers.common import _jsonable
from .solvers.general import general_solve
from .solvers.graph import graph_form, graph_solve
from .solvers.ma import ma_form, ma_solve


@dataclass
class PathOptions:
    dt0: float = 0.1
    dt_min: float = 1e-4
    K_max: float = 1e3
    margin_min: float = -0.05
    easy_iterations: int = 3
    max_steps: int = 10000
    osc_max: float = None
    osc_radius: float = 0.125

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown continuation options: {sorted(unknown)}")
        return cls(**d)


def state_form(state, fam=None):
    """The 2-form field represented by a solver state (or the field itself)."""
    if isinstance(state, GeneralState):
        return state.form()
    if isinstance(state, PotentialState):
        if state.kind == "graph":
            return graph_form(fam, state)
        return ma_form(state)
    return np.asarray(state, dtype=float)


def _grid_of(state, grid):
    if grid is not None:
        return grid
    return state.grid


def detect_events(state, fam, t, opts=None, grid=None):
    """Flags for blow-up (K), loss of negativity (margin) and oscillation."""
    opts = opts or PathOptions()
    grid = _grid_of(state, grid)
    w = state_form(state, fam)
    norms = np.sqrt(np.sum(w * w, axis=0))
    kidx = np.unravel_index(int(np.argmax(norms)), norms.shape)
    K = float(norms[kidx])
    margins = fam.margin_field(w, grid.coords(), t)
    midx = np.unravel_index(int(np.argmax(margins)), margins.shape)
    margin = float(margins[midx])
    flags = {
        "K": {"flag": K > opts.K_max, "value": K, "witness": [int(i) for i in kidx]},
        "margin": {"flag": margin > opts.margin_min, "value": margin,
                   "witness": [int(i) for i in midx]},
    }
    if opts.osc_max is not None:
        osc = diagnostics.ball_oscillation(w, grid, Ball(tuple(int(i) for i in kidx), opts.osc_radius))
        flags["regularity"] = {"flag": osc > opts.osc_max, "value": osc,
                               "witness": [int(i) for i in kidx]}
    return flags


@dataclass
class PathReport:
    steps: list = field(default_factory=list)
    termination: dict = field(default_factory=dict)
    dt_history: list = field(default_factory=list)
    final_state: object = None
    snapshots: list = field(default_factory=list)

    @property
    def reason(self):
        return self.termination.get("reason")

    def to_dict(self):
        return _jsonable({"steps": self.steps, "termination": self.termination,
                          "dt_history": self.dt_history})

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "K", "margin", "grad_energy"])
        for s in self.steps:
            writer.writerow([repr(float(s[c])) for c in ("t", "K", "margin", "grad_energy")])
        return buf.getvalue()


def make_corrector(fam, start, solver_opts=None):
    """corrector(state, t) -> (state, report) matching the start state's solver."""
    if isinstance(start, GeneralState):
        opts = solver_opts or SolverOptions(tol=1e-9)
        return lambda st, t: general_solve(fam, replace(st, t=t), None, opts, t=t)
    if start.kind == "graph":
        opts = solver_opts or SolverOptions(tol=1e-10)
        return lambda st, t: graph_solve(fam, st.e0, st.grid, opts, u0=st.field, t=t)
    opts = solver_opts or SolverOptions(tol=1e-9)
    return lambda st, t: ma_solve(fam, None, st.grid, opts, phi0=st.field, t=t, scale0=st.scale)


def _record(fam, state, t, rep, opts, grid):
    w = state_form(state, fam)
    ev = detect_events(state, fam, t, opts, grid)
    return {
        "t": float(t),
        "K": ev["K"]["value"],
        "grad_energy": diagnostics.grad_energy(w, grid),
        "margin": ev["margin"]["value"],
        "newton_iterations": int(rep.iterations),
        "residual": float(rep.residual),
        "events": {k: v for k, v in ev.items() if v["flag"]},
    }


def continue_path(fam, start, t_end=1.0, opts=None, t0=0.0, solver_opts=None, snapshot_every=0):
    """Follow the solution from t0 to t_end (either direction)."""
    opts = opts or PathOptions()
    corrector = make_corrector(fam, start, solver_opts)
    grid = start.grid
    direction = 1.0 if t_end >= t0 else -1.0
    report = PathReport()
    try:
        state, rep = corrector(start, t0)
    except SolverError as exc:
        raise ValueError(f"start state does not solve the problem at t={t0}: {exc}") from exc
    if rep.history and rep.history[0]["residual"] > max(10 * rep.tol, 1e-8):
        raise ValueError(
            f"start state does not solve the problem at t={t0} "
            f"(residual {rep.history[0]['residual']:.3e})"
        )
    report.steps.append(_record(fam, state, t0, rep, opts, grid))
    t = t0
    dt = opts.dt0
    easy = 0
    while direction * (t_end - t) > 1e-14:
        if len(report.steps) > opts.max_steps:
            report.termination = {"reason": "max-steps", "t_star": float(t)}
            break
        step = min(dt, abs(t_end - t))
        t_try = t_end if step == abs(t_end - t) else t + direction * step
        try:
            new_state, rep = corrector(state, t_try)
        except (NonConvergence, EllipticityLost, LeftPositiveCone) as exc:
            report.dt_history.append({"t": float(t_try), "dt": float(step), "accepted": False,
                                      "reason": exc.reason})
            easy = 0
            if step / 2 < opts.dt_min:
                reason = "ellipticity-lost" if isinstance(exc, EllipticityLost) else "nonconvergence"
                report.termination = {
                    "reason": reason, "t_star": 0.5 * (t + t_try), "bracket": sorted([float(t), float(t_try)]),
                    "message": str(exc), "witness": exc.witness,
                }
                break
            dt = step / 2
            continue
        report.dt_history.append({"t": float(t_try), "dt": float(step), "accepted": True})
        t, state = t_try, new_state
        rec = _record(fam, state, t, rep, opts, grid)
        report.steps.append(rec)
        if snapshot_every and len(report.steps) % snapshot_every == 0:
            report.snapshots.append((t, state))
        if rec["K"] > opts.K_max:
            report.termination = {"reason": "K-exceeded", "t_star": float(t),
                                  "witness": rec["events"]["K"]["witness"]}
            break
        easy = easy + 1 if rep.iterations - 1 <= opts.easy_iterations else 0
        if easy >= 3:
            dt, easy = 2 * dt, 0
    else:
        report.termination = {"reason": "completed", "t_star": None}
    report.final_state = state
    return report


def normalized_density_family(g, J_planes=None):
    """CY family with rho_t = exp(t g) / mean(exp(t g)), compatible for every t.

    ``g`` is a callable of coordinates; the mean is taken over the points the
    family is evaluated on, so on a grid the volume condition is exact.
    """
    from .fibers import make_calabi_yau

    def rho(x, t=0.0):
        e = np.exp(t * np.asarray(g(x), dtype=float))
        return e / np.mean(e)

    return make_calabi_yau(J_planes, rho=rho)
