"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""
import filecmp
import os
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest
import scipy.sparse as sp

from wedge4 import diagnostics as dg
from wedge4 import fibers as fb
from wedge4 import lambda2 as l2
from wedge4.continuation import PathOptions, continue_path, normalized_density_family, state_form
from wedge4.grid import Grid
from wedge4.solvers import default_state, general_solve, graph_solve, ma_form, ma_solve, moduli_kernel


@contextmanager
def criterion(capsys, number, name, limit=None):
    """Time the block and print one result line; a blown budget fails the test."""
    info = {}
    t0 = time.perf_counter()

    def emit(tag, detail):
        elapsed = time.perf_counter() - t0
        budget = f"/{limit:g}s" if limit else ""
        with capsys.disabled():
            print(f"\n[{tag}] {number:>2} {name}: {detail} ({elapsed:.2f}s{budget})")
        return elapsed

    try:
        yield info
    except BaseException as exc:
        emit("FAIL", f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        raise
    detail = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())
    over = limit is not None and time.perf_counter() - t0 >= limit
    elapsed = emit("FAIL" if over else "PASS", detail + (" runtime over budget" if over else ""))
    assert not over, f"runtime {elapsed:.1f}s exceeds {limit}s"


def two_mode(x, alpha=0.2):
    return alpha * np.cos(2 * np.pi * x[0]) * np.cos(2 * np.pi * x[2])


def one_mode_family(alpha):
    return fb.make_calabi_yau(rho=lambda x, t=0.0: 1 + alpha * np.cos(2 * np.pi * x[0]))


# -- oracles ---------------------------------------------------------------
def coefficient_oracle(x, a):
    """Zero-mean u with (1 + a cos 2 pi x)(1 + u') constant, by direct quadrature."""
    theta = np.arctan2(np.sqrt(1 - a) * np.sin(np.pi * x), np.sqrt(1 + a) * np.cos(np.pi * x))
    u = theta / np.pi - x
    return u - u.mean()


def fourier_diff_matrix(n):
    """Dense spectral first-derivative matrix on n points of the unit circle."""
    j = np.arange(n)
    d = j[:, None] - j[None, :]
    with np.errstate(divide="ignore"):
        D = np.pi * (-1.0) ** d / np.tan(np.pi * d / n)
    D[d == 0] = 0.0
    return D


def dense_cubic_oracle(n, e0, s, eps, tol=1e-13):
    """Newton with assembled dense Jacobians for div(E + eps s |E|^2 E) = 0, E = e0 + grad u.

    The kernel of the discrete problem is spanned by all derivative-null modes
    (constants times (-1)^j along any subset of axes), so J + P is solved with
    P the orthogonal projector onto those eight vectors.
    """
    D1 = fourier_diff_matrix(n)
    eye = sp.identity(n)
    Ds = [sp.csr_matrix(sp.kron(sp.kron(D1 if a == 0 else eye, D1 if a == 1 else eye), D1 if a == 2 else eye))
          for a in range(3)]
    N = n**3
    alt = (-1.0) ** np.arange(n)
    V = np.array([
        np.einsum("i,j,k->ijk", *[alt if (m >> a) & 1 else np.ones(n) for a in range(3)]).ravel()
        for m in range(8)
    ]).T
    P = V @ V.T / N
    s = s.ravel()
    u = np.zeros(N)
    for _ in range(30):
        xi = np.stack([e0[a] + Ds[a] @ u for a in range(3)])
        q = np.sum(xi**2, axis=0)
        r = sum(Ds[a] @ (xi[a] * (1 + eps * s * q)) for a in range(3))
        if np.abs(r).max() < tol:
            break
        J = np.zeros((N, N))
        for i in range(3):
            for j in range(3):
                H = (i == j) * (1 + eps * s * q) + 2 * eps * s * xi[i] * xi[j]
                J += (Ds[i] @ sp.diags(H) @ Ds[j]).toarray()
        u = u - np.linalg.solve(J + P, r)
        u = u - P @ u
    return u.reshape(n, n, n)


# -- criteria --------------------------------------------------------------
def test_01_pairing_signature(capsys):
    with criterion(capsys, 1, "pairing signature (3,3)", 1.0) as info:
        ev = np.sort(np.linalg.eigvalsh(l2.GRAM))
        info["eigenvalues"] = ev.tolist()
        assert np.array_equal(ev, [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0])


def test_02_exact_form_identity(capsys):
    with criterion(capsys, 2, "wedge identity on exact forms", 30.0) as info:
        for n in (8, 16, 32):
            rep = dg.identity3_selftest(Grid(4, n), count=100, seed=n, tol=1e-10)
            info[f"defect_n{n}"] = rep["max_relative_defect"]
            assert rep["samples"] == 100 and rep["ok"]


def test_03_negative_chords(capsys):
    with criterion(capsys, 3, "CY fibre negative chords", 10.0) as info:
        spec = fb.SampleSpec(base_points=np.random.default_rng(3).random((4, 4)), points_per_fiber=200,
                             pairs_per_fiber=2600, seed=3)
        rho = lambda x, t=0.0: np.exp(0.3 * np.sin(2 * np.pi * x[0]))  # noqa: E731
        rep = fb.certify_negativity(fb.make_calabi_yau(rho=rho), 0.0, spec)
        info["pairs"] = rep.pairs
        info["max_chord"] = rep.max_chord
        assert rep.pairs >= 10**4 and rep.max_chord <= 1e-12 and rep.ok
        worst = 0.0
        for lam in (1.0, 2.0, 5.0):
            w = l2.hermitian_form(*l2.unimodular_hermitian(lam, np.eye(2)))
            chord = l2.chord_value(w, l2.KAHLER_FORM) / l2.quadratic(l2.KAHLER_FORM)
            worst = max(worst, abs(chord - (2 - (lam + 1 / lam))))
        info["lambda_family_err"] = worst
        assert worst <= 1e-12


def test_04_graph_oracles(capsys):
    with criterion(capsys, 4, "graph solver vs oracles", 120.0) as info:
        a = 0.3
        g = Grid(3, 64)
        fam = fb.coefficient_graph(fb.FourierSeries((((1, 0, 0), a, 0.0),), 1.0))
        state, _ = graph_solve(fam, [1.0, 0.0, 0.0], g)
        exact = coefficient_oracle(np.arange(64) / 64, a)
        info["linear_err"] = float(np.abs(state.field - exact[:, None, None]).max())
        assert info["linear_err"] <= 1e-8

        g = Grid(3, 16)
        x = g.coords()
        s = fb.FourierSeries((((1, 1, 0), 0.5, 0.0), ((1, -1, 0), 0.5, 0.0)))
        state, _ = graph_solve(fb.cubic_graph(s, 0.1), [1.0, 0.0, 0.0], g)
        oracle = dense_cubic_oracle(16, [1.0, 0.0, 0.0], np.cos(2 * np.pi * x[0]) * np.cos(2 * np.pi * x[1]), 0.1)
        info["cubic_err"] = float(np.abs(state.field - oracle).max())
        info["cubic_size"] = float(np.abs(oracle).max())
        assert info["cubic_err"] <= 1e-6 and info["cubic_size"] > 1e-3


def test_05_monge_ampere(capsys):
    with criterion(capsys, 5, "MA solver vs ODE oracle", 300.0) as info:
        alpha = 0.5
        g = Grid(4, (32, 4, 4, 4))
        x = g.coords()
        state, _ = ma_solve(one_mode_family(alpha), None, g)
        info["one_mode_err"] = float(np.abs(state.field + alpha / np.pi**2 * np.cos(2 * np.pi * x[0])).max())
        assert info["one_mode_err"] <= 1e-8

        g = Grid(4, 32)
        gx = two_mode(g.coords())
        f = gx - np.log(g.mean(np.exp(gx)))
        state, rep = ma_solve(fb.make_calabi_yau(), f, g)
        det = l2.quadratic(ma_form(state)) / 2
        info["two_mode_residual"] = float(np.abs(det - np.exp(f)).max())
        assert rep.converged and info["two_mode_residual"] <= 1e-9


def test_06_cross_solver(capsys):
    with criterion(capsys, 6, "general vs potential solver", 600.0) as info:
        g = Grid(4, 16)
        fam = normalized_density_family(two_mode)
        ma_state, _ = ma_solve(fam, None, g, t=1.0)
        st, rep = general_solve(fam, default_state(fam, g, t=1.0), t=1.0)
        info["sup_diff"] = float(np.abs(st.form() - ma_form(ma_state)).max())
        assert rep.converged and info["sup_diff"] <= 1e-7


def test_07_uniqueness(capsys):
    with criterion(capsys, 7, "uniqueness from 5 starts") as info:
        g = Grid(4, (16, 4, 16, 4))
        fam = normalized_density_family(two_mode)
        rng = np.random.default_rng(7)
        forms = []
        for k in range(5):
            init = default_state(fam, g, t=1.0)
            if k:
                init.a = g.random_band_limited(rng, 4, amplitude=0.01 * k)
                init.h = init.h + 0.05 * rng.standard_normal(3)
            assert np.all(l2.quadratic(init.form()) > 0)
            st, rep = general_solve(fam, init, t=1.0)
            assert rep.converged
            forms.append(st.form())
        spread = max(float(np.abs(w - forms[0]).max()) for w in forms[1:])
        info["max_spread"] = spread
        assert spread <= 1e-8


def test_08_moduli_dimension(capsys):
    with criterion(capsys, 8, "moduli dimension b2- = 3") as info:
        g = Grid(4, 8)
        fam = one_mode_family(0.3)
        st, _ = general_solve(fam, default_state(fam, g))
        dim, sv = moduli_kernel(fam, st, grid=g, threshold=1e-8)
        info["kernel_dim"] = dim
        info["sv3"] = float(sv[2])
        info["sv4"] = float(sv[3])
        assert dim == 3 and sv[2] < 1e-8 and sv[3] > 1e-3


def test_09_continuation(capsys):
    with criterion(capsys, 9, "continuation events and reversal") as info:
        g = Grid(3, 8)
        fam = fb.rotation_graph()
        start, _ = graph_solve(fam, [1.0, 0.0, 0.0], g)
        path = continue_path(fam, start, 1.0)
        info["t_star"] = path.termination["t_star"]
        assert path.reason == "ellipticity-lost" and 0.74 < path.termination["t_star"] < 0.76

        g = Grid(4, 16)
        fam = normalized_density_family(two_mode)
        start, _ = ma_solve(fam, None, g, t=0.0)
        path = continue_path(fam, start, 1.0, PathOptions(dt0=0.25))
        assert path.reason == "completed"
        direct, _ = ma_solve(fam, None, g, t=1.0)
        info["endpoint_err"] = float(np.abs(state_form(path.final_state) - state_form(direct)).max())
        back = continue_path(fam, path.final_state, 0.0, PathOptions(dt0=0.25), t0=1.0)
        assert back.reason == "completed"
        info["return_err"] = float(np.abs(state_form(back.final_state) - state_form(start)).max())
        assert info["endpoint_err"] <= 1e-7 and info["return_err"] <= 1e-6


def test_10_decay_diagnostics(capsys):
    with criterion(capsys, 10, "J(r) decay separates smooth and concentrated") as info:
        centres = [(1, 0, 6, 0), (5, 3, 2, 7)]
        g = Grid(4, 16)
        slopes = []
        # a field of x1 alone has w_v ^ w_v = 0 identically, so both data
        # depend on each complex coordinate
        mixed = lambda x: (0.15 * np.sin(2 * np.pi * (x[0] + x[1])) * np.cos(2 * np.pi * (x[2] - x[3]))  # noqa: E731
                           + 0.1 * np.cos(2 * np.pi * x[3]))
        for data in (two_mode, mixed):
            state, _ = ma_solve(normalized_density_family(data), None, g, t=1.0)
            slopes.append(dg.regularity_table(ma_form(state), g, centres).slopes["J"])
        info["smooth_slopes"] = [round(v, 3) for v in slopes]
        info["smooth_slope_min"] = min(slopes)
        gb = Grid(4, (256, 256, 4, 4))
        bump = dg.regularity_table(dg.concentrated_bump(gb), gb, [(0, 0, 0, 0)]).slopes["J"]
        info["bump_slope"] = bump
        assert min(slopes) >= 1.5 and min(slopes) - bump >= 1.0


def test_11_reproducibility(capsys, tmp_path):
    with criterion(capsys, 11, "bitwise reproducible CLI runs") as info:
        env = dict(os.environ)
        env.pop("WEDGE4_THREADS", None)
        env.pop("WEDGE4_SEED", None)
        outs = []
        for k in range(2):
            out = tmp_path / f"run{k}"
            proc = subprocess.run(
                [sys.executable, "-m", "wedge4.cli", "run", "--experiment", "cy-general",
                 "--out", str(out), "--threads", "1", "--seed", "5"],
                capture_output=True, text=True, env=env,
            )
            assert proc.returncode == 0, proc.stderr
            outs.append(out)
        names = sorted(p.name for p in outs[0].iterdir())
        assert "report.json" in names and any(n.endswith(".w4f") for n in names)
        assert names == sorted(p.name for p in outs[1].iterdir())
        match, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
        info["files"] = len(match)
        assert not mismatch and not errors


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
