"""Command line front end: ``wedge4 run | describe | selftest``.

Exit codes: 0 success, 2 a diagnosed mathematical outcome (loss of
ellipticity, nonconvergence, class mismatch, ...), 1 usage or config errors.
"""
import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog, diagnostics
from . import fibers as fb
from . import lambda2 as l2
from .config import ConfigError, load_config, parse_config, resolved
from .continuation import PathOptions, continue_path, normalized_density_family, state_form
from .errors import SolverError
from .fieldio import write_field
from .grid import Grid, set_workers
from .solvers import SliceSpec, SolverOptions, default_state, general_solve, graph_solve, ma_solve
from .solvers.ma import ma_form

REPORT_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_DIAGNOSED = 0, 1, 2


class UsageError(Exception):
    pass


# -- building blocks ------------------------------------------------------
def build_grid(cfg):
    return Grid(cfg.grid.dim, cfg.grid.n if isinstance(cfg.grid.n, int) else tuple(cfg.grid.n))


def log_density(fam_cfg):
    """f(x) as a callable, from either f or the density e^f."""
    if fam_cfg.density is not None:
        dens = fam_cfg.density.series()

        def f(x):
            d = dens(x)
            if np.min(d) <= 0:
                raise UsageError("density must be positive everywhere")
            return np.log(d)

        return f
    return fam_cfg.f.series()


def _normalized_rho(f, grid):
    kappa = grid.mean(np.exp(f(grid.coords())))
    return lambda x, t=0.0: np.exp(f(x)) / kappa


def build_family(fam_cfg, grid, normalize=False):
    kind = fam_cfg.type
    if kind == "graph":
        if fam_cfg.flux == "identity":
            return fb.coefficient_graph(1.0)
        if fam_cfg.flux == "rotation":
            return fb.rotation_graph(fam_cfg.total_angle, fam_cfg.axis)
        if fam_cfg.flux == "coefficient":
            return fb.coefficient_graph(fam_cfg.coefficient.series())
        return fb.cubic_graph(fam_cfg.s.series(), fam_cfg.eps)
    if kind == "cy":
        f = log_density(fam_cfg)
        rho = _normalized_rho(f, grid) if normalize else (lambda x, t=0.0: np.exp(f(x)))
        return fb.make_calabi_yau(rho=rho)
    if kind == "translated-cy":
        f = log_density(fam_cfg)
        comps = [s.series() for s in fam_cfg.theta]
        theta = lambda x, t=0.0: np.stack([c(x) for c in comps])  # noqa: E731
        return fb.make_translated_cy(Theta=theta, rho=lambda x, t=0.0: np.exp(f(x)))
    if kind == "moment":
        return fb.moment_family(fb.standard_triple(), [s.series() for s in fam_cfg.f])
    split = l2.ConformalSplit.from_mu(np.asarray(fam_cfg.mu, dtype=float))
    return fb.make_linear_asd(split)


def solver_options(cfg, default_tol):
    d = cfg.solver.model_dump()
    d["tol"] = default_tol if d["tol"] is None else d["tol"]
    return SolverOptions.from_dict(d)


def slice_spec(cfg):
    basis = l2.SD_BASIS if cfg.slice.basis == "sd" else np.asarray(cfg.slice.basis, float)
    return SliceSpec(np.asarray(cfg.slice.C, float), basis)


def _sup(x):
    return float(np.max(np.abs(x)))


# -- problems -------------------------------------------------------------
def run_graph(cfg, grid, rng):
    fam = build_family(cfg.family, grid)
    state, rep = graph_solve(fam, cfg.family.e0, grid, solver_options(cfg, 1e-10))
    w = state_form(state, fam)
    result = {"solve": rep.to_dict(), "sup_u": _sup(state.field)}
    return result, {"u": state.field, "omega": w}, {}


def _ma_problem(cfg, grid):
    fc = cfg.family
    normalize = cfg.solver.compatibility == "normalize" or getattr(fc, "normalize", False)
    opts = solver_options(cfg, 1e-9)
    if normalize:
        opts.compatibility = "normalize"
    fam = build_family(fc, grid)
    f = log_density(fc)(grid.coords())
    return fam, f, opts


def run_cy(cfg, grid, rng):
    fam, f, opts = _ma_problem(cfg, grid)
    state, rep = ma_solve(fam, f, grid, opts)
    w = ma_form(state)
    shifted = w if state.theta is None else w - state.theta
    result = {
        "solve": rep.to_dict(),
        "sup_residual": float(rep.residual),
        "unimodular_defect": _sup(l2.quadratic(shifted) - 2 * state.density),
        "sup_phi": _sup(state.field),
        "scale": state.scale,
    }
    return result, {"phi": state.field, "omega": w}, {}


def _general(cfg, grid, rng, fam):
    spec = slice_spec(cfg)
    init = default_state(fam, grid, spec)
    if cfg.perturbation:
        init.a = grid.random_band_limited(rng, 4, amplitude=cfg.perturbation)
        init.h = init.h + cfg.perturbation * rng.standard_normal(3)
    state, rep = general_solve(fam, init, spec, solver_options(cfg, 1e-9))
    w = state.form()
    result = {"solve": rep.to_dict(), "h": state.h.tolist(), "C": spec.C.tolist()}
    return result, {"a": state.a, "omega": w}, {}


def run_translated(cfg, grid, rng):
    if cfg.family.type == "moment":
        fam = build_family(cfg.family, grid)
        result, fields, csvs = _general(cfg, grid, rng, fam)
        w = fields["omega"]
        mu = l2.moment_maps(fb.standard_triple(), w)
        target = np.stack([s.series()(grid.coords()) for s in cfg.family.f])
        result["moment_defect"] = _sup(np.stack(mu) - target)
        return result, fields, csvs
    return run_cy(cfg, grid, rng)


def run_general(cfg, grid, rng):
    normalize = getattr(cfg.family, "normalize", False) or cfg.solver.compatibility == "normalize"
    fam = build_family(cfg.family, grid, normalize=normalize)
    return _general(cfg, grid, rng, fam)


def _path_options(cfg):
    c = cfg.continuation
    return PathOptions(dt0=c.dt0, dt_min=c.dt_min, K_max=c.K_max, margin_min=c.margin_min)


def run_continue(cfg, grid, rng):
    fc = cfg.family
    popts = _path_options(cfg)
    t_end = cfg.continuation.t_end
    if fc.type == "graph":
        fam = build_family(fc, grid)
        opts = solver_options(cfg, 1e-10)
        start, _ = graph_solve(fam, fc.e0, grid, opts, t=0.0)
    elif fc.type == "cy":
        fam = normalized_density_family(log_density(fc))
        opts = solver_options(cfg, 1e-9)
        if cfg.continuation.solver == "general":
            start, _ = general_solve(fam, default_state(fam, grid, slice_spec(cfg)), None, opts)
        else:
            start, _ = ma_solve(fam, None, grid, opts, t=0.0)
    else:
        raise UsageError("continuation supports graph and cy families")
    path = continue_path(fam, start, t_end, popts, solver_opts=opts)
    result = {"path": path.to_dict()}
    fields = {"omega_start": state_form(start, fam), "omega_end": state_form(path.final_state, fam)}
    csvs = {"path": path.to_csv()}
    if cfg.continuation.reverse and path.reason == "completed":
        back = continue_path(fam, path.final_state, 0.0, popts, t0=t_end, solver_opts=opts)
        result["reverse"] = back.to_dict()
        result["reverse_deviation"] = _sup(state_form(back.final_state, fam) - fields["omega_start"])
        csvs["reverse_path"] = back.to_csv()
    return result, fields, csvs


def _centers(cfg, grid, rng):
    if cfg.diagnose.centers is not None:
        return [tuple(c) for c in cfg.diagnose.centers]
    return [tuple(int(rng.integers(0, m)) for m in grid.shape) for _ in range(cfg.diagnose.random_centers)]


def run_diagnose(cfg, grid, rng):
    if grid.dim != 4:
        raise UsageError("diagnose needs a 4-dimensional grid")
    fields = {}
    if cfg.diagnose.source == "bump":
        w = diagnostics.concentrated_bump(grid)
    else:
        if cfg.family is None or cfg.family.type != "cy":
            raise UsageError("diagnose with source 'solution' needs a cy family")
        fam, f, opts = _ma_problem(cfg, grid)
        state, _ = ma_solve(fam, f, grid, opts)
        w = ma_form(state)
        fields["omega"] = w
    d = cfg.diagnose
    table = diagnostics.regularity_table(w, grid, _centers(cfg, grid, rng), d.r0, d.depth, d.axis)
    result = {"table": table.to_dict(), "grad_energy": diagnostics.grad_energy(w, grid)}
    return result, fields, {"table": table.to_csv()}


def run_selftest(cfg, grid, rng, sizes=None):
    eig = np.linalg.eigvalsh(l2.GRAM)
    signature = {
        "eigenvalues": eig.tolist(),
        "ok": bool(np.allclose(eig, [-1, -1, -1, 1, 1, 1], atol=1e-15, rtol=0)),
    }
    sizes = sizes or [grid.shape[0]]
    ident = [diagnostics.identity3_selftest(Grid(4, n), seed=cfg.seed) for n in sizes]
    adj = [diagnostics.adjointness_selftest(Grid(d, 8), seed=cfg.seed) for d in (3, 4)]
    ok = signature["ok"] and all(r["ok"] for r in ident) and all(r["ok"] for r in adj)
    return {"signature": signature, "identity": ident, "adjointness": adj, "ok": ok}, {}, {}


RUNNERS = {
    "graph": run_graph, "cy": run_cy, "translated-cy": run_translated, "general": run_general,
    "continue": run_continue, "diagnose": run_diagnose, "selftest": run_selftest,
}


# -- driver ---------------------------------------------------------------
def _write_outputs(out, cfg, fields, csvs):
    written = {"fields": [], "csv": [], "skipped": []}
    out.mkdir(parents=True, exist_ok=True)
    if cfg.output.fields:
        for name, data in sorted(fields.items()):
            data = np.asarray(data)
            spatial = data.shape[-cfg.grid.dim:]
            if len(set(spatial)) != 1:
                written["skipped"].append(f"{name}: W4F1 stores cubic grids only")
                continue
            fname = f"{name}.w4f"
            write_field(out / fname, data, dim=cfg.grid.dim)
            written["fields"].append(fname)
    if cfg.output.csv:
        for name, text in sorted(csvs.items()):
            fname = f"{name}.csv"
            (out / fname).write_text(text)
            written["csv"].append(fname)
    return written


def execute(cfg, out, sizes=None):
    """Run a validated config; returns (exit code, report dict)."""
    set_workers(cfg.threads)
    rng = np.random.default_rng(cfg.seed)
    grid = build_grid(cfg)
    report = {"report_version": REPORT_VERSION, "problem": cfg.problem, "config": resolved(cfg)}
    code = EXIT_OK
    fields, csvs = {}, {}
    try:
        if cfg.problem == "selftest":
            result, fields, csvs = run_selftest(cfg, grid, rng, sizes)
            if not result["ok"]:
                code = EXIT_ERROR
        else:
            result, fields, csvs = RUNNERS[cfg.problem](cfg, grid, rng)
        report["status"] = "ok" if code == EXIT_OK else "failed"
        term = result.get("path", {}).get("termination", {})
        if term and term.get("reason") != "completed":
            report["status"] = "diagnosed"
            report["termination"] = term
            code = EXIT_DIAGNOSED
    except SolverError as exc:
        result = {"reason": exc.reason, "message": str(exc), "witness": exc.witness}
        if exc.report is not None:
            result["solve"] = exc.report.to_dict()
        report["status"] = "diagnosed"
        code = EXIT_DIAGNOSED
    report["result"] = result
    report["outputs"] = _write_outputs(out, cfg, fields, csvs)
    text = json.dumps(_clean(report), indent=2, sort_keys=True)
    (out / cfg.output.report).write_text(text + "\n")
    return code, report


def _clean(obj):
    from .solvers.common import _jsonable
    return _jsonable(obj)


def _apply_overrides(data, args):
    env_threads = os.environ.get("WEDGE4_THREADS")
    env_seed = os.environ.get("WEDGE4_SEED")
    try:
        if env_threads is not None:
            data["threads"] = int(env_threads)
        if env_seed is not None:
            data["seed"] = int(env_seed)
    except ValueError:
        raise ConfigError("WEDGE4_THREADS and WEDGE4_SEED must be integers") from None
    if getattr(args, "threads", None) is not None:
        data["threads"] = args.threads
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    return data


def _load(args):
    if args.config and args.experiment:
        raise ConfigError("give either --config or --experiment, not both")
    if args.experiment:
        if args.experiment not in catalog.ENTRIES:
            raise ConfigError(f"unknown experiment '{args.experiment}'; catalog: {', '.join(catalog.names())}")
        data = catalog.default_config(args.experiment)
    elif args.config:
        data = load_config(args.config).model_dump(exclude_unset=True)
    else:
        raise ConfigError("run needs --config PATH or --experiment NAME")
    return parse_config(_apply_overrides(data, args))


def cmd_run(args):
    try:
        cfg = _load(args)
        code, report = execute(cfg, Path(args.out))
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _summary(report)
    return code


def _summary(report):
    status = report.get("status")
    line = f"{report['problem']}: {status}"
    res = report.get("result", {})
    if "reason" in res:
        line += f" ({res['reason']})"
    if "termination" in report:
        t = report["termination"]
        line += f" ({t.get('reason')} at t*={t.get('t_star')})"
    if "solve" in res and "residual" in res["solve"]:
        line += f" residual={res['solve']['residual']:.3e}"
    print(line)


def cmd_describe(args):
    try:
        print(catalog.describe(args.name), end="")
    except KeyError:
        print(f"error: unknown name '{args.name}'. catalog:", file=sys.stderr)
        for name in catalog.names():
            print(f"  {name}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_selftest(args):
    data = _apply_overrides({"problem": "selftest", "grid": {"dim": 4, "n": args.n[0]}}, args)
    try:
        cfg = parse_config(data)
        code, report = execute(cfg, Path(args.out), sizes=args.n)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    res = report["result"]
    print(f"signature ok={res['signature']['ok']}")
    for r in res["identity"]:
        print(f"identity n={r['grid'][0]} max relative defect={r['max_relative_defect']:.2e} ok={r['ok']}")
    for r in res["adjointness"]:
        print(f"adjointness dim={len(r['grid'])} max defect={r['max_defect']:.2e} ok={r['ok']}")
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="wedge4", description="Closed 2-forms with values in constraint fibres on tori.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a configured problem")
    r.add_argument("--config", help="TOML run configuration")
    r.add_argument("--experiment", help="run a catalog entry with its default config")
    r.add_argument("--out", default="wedge4-out", help="output directory")
    r.add_argument("--threads", type=int)
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)
    d = sub.add_parser("describe", help="describe a catalog entry")
    d.add_argument("name")
    d.set_defaults(func=cmd_describe)
    s = sub.add_parser("selftest", help="algebra and calculus self-checks")
    s.add_argument("--n", type=int, nargs="+", default=[8, 16])
    s.add_argument("--out", default="wedge4-selftest")
    s.add_argument("--threads", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
