import numpy as np
import pytest

from wedge4 import fibers as fb
from wedge4 import lambda2 as l2
from wedge4.errors import EllipticityLost
from wedge4.grid import Grid
from wedge4.solvers import SolverOptions, graph_form, graph_operator, graph_solve


def coefficient_oracle(x, a):
    """Zero-mean u with (1 + a cos 2 pi x)(1 + u') constant, in closed form."""
    theta = np.arctan2(np.sqrt(1 - a) * np.sin(np.pi * x), np.sqrt(1 + a) * np.cos(np.pi * x))
    u = theta / np.pi - x
    return u - u.mean()


def test_identity_flux_is_laplacian(rng):
    g = Grid(3, 16)
    residual, *_ = graph_operator(fb.coefficient_graph(1.0), g, [1.0, -0.5, 2.0])
    u = g.random_band_limited(rng)
    r, _ = residual(u.ravel())
    assert np.abs(r - g.laplacian(u)).max() < 1e-12


def test_jacobian_matches_finite_differences(rng):
    g = Grid(3, 8)
    s = fb.FourierSeries((((1, 1, 0), 0.5, 0.0), ((0, 1, 1), 0.5, 0.3)))
    fam = fb.cubic_graph(s, 0.3)
    residual, apply_jacobian, precompute, _ = graph_operator(fam, g, [1.0, 0.2, 0.0])
    u = g.random_band_limited(rng, amplitude=0.1).ravel()
    v = g.random_band_limited(rng).ravel()
    h = 1e-6
    fd = (residual(u + h * v)[1] - residual(u - h * v)[1]) / (2 * h)
    jv = apply_jacobian(u, precompute(u), v)
    assert np.abs(jv - fd).max() <= 1e-6 * max(1.0, np.abs(fd).max())


def test_coefficient_case_matches_closed_form():
    a = 0.3
    g = Grid(3, 32)
    fam = fb.coefficient_graph(fb.FourierSeries((((1, 0, 0), a, 0.0),), 1.0))
    state, rep = graph_solve(fam, [1.0, 0.0, 0.0], g)
    exact = coefficient_oracle(np.arange(32) / 32, a)
    assert rep.converged and rep.residual <= 1e-10
    assert np.abs(state.field - exact[:, None, None]).max() < 1e-8


def test_closed_form_oracle_is_consistent():
    # the flux c (1 + u') of the oracle is the harmonic mean sqrt(1 - a^2)
    x = np.linspace(0, 1, 2001)
    a = 0.3
    u = coefficient_oracle(x, a)
    du = np.gradient(u, x)
    flux = (1 + a * np.cos(2 * np.pi * x)) * (1 + du)
    assert np.abs(flux[5:-5] - np.sqrt(1 - a * a)).max() < 1e-4


def test_cubic_case_converges_and_is_closed():
    g = Grid(3, 16)
    s = fb.FourierSeries((((1, 1, 0), 0.5, 0.0), ((1, -1, 0), 0.5, 0.0)))
    fam = fb.cubic_graph(s, 0.1)
    state, rep = graph_solve(fam, [1.0, 0.0, 0.0], g)
    assert rep.residual < 1e-10 and rep.diagnostics["max_margin"] < 0
    w = graph_form(fam, state)
    # B = F(E) is divergence free: the 3-torus part of dw vanishes
    B = l2.EBForm.from_two_form(w).B
    assert np.abs(g.divergence(B)).max() < 1e-9


def test_rotation_beyond_critical_time_is_not_elliptic():
    g = Grid(3, 8)
    with pytest.raises(EllipticityLost) as info:
        graph_solve(fb.rotation_graph(), [1.0, 0.0, 0.0], g, t=0.8)
    assert info.value.witness["margin"] == pytest.approx(-2 * np.cos(0.8 * 2 * np.pi / 3))


def test_rotation_before_critical_time_solves():
    g = Grid(3, 8)
    state, rep = graph_solve(fb.rotation_graph(), [1.0, 0.0, 0.0], g, t=0.5)
    assert rep.residual < 1e-10
    assert np.abs(state.field).max() < 1e-12  # constant coefficients: u = 0


def test_graph_solve_rejects_wrong_inputs():
    with pytest.raises(ValueError):
        graph_solve(fb.coefficient_graph(1.0), [1, 0, 0], Grid(4, 8))
    with pytest.raises(ValueError):
        graph_solve(fb.make_calabi_yau(), [1, 0, 0], Grid(3, 8))
    with pytest.raises(ValueError):
        SolverOptions.from_dict({"tolerance": 1.0})
