import numpy as np
import pytest

from wedge4 import fibers as fb
from wedge4 import lambda2 as l2
from wedge4.errors import ClassVolumeMismatch, LeftPositiveCone
from wedge4.grid import Grid
from wedge4.solvers import SolverOptions, hessian_parts, ma_form, ma_operator, ma_solve


def two_mode_f(x, alpha=0.2):
    g = alpha * np.cos(2 * np.pi * x[0]) * np.cos(2 * np.pi * x[2])
    return g


def normalized(g, grid):
    return g - np.log(grid.mean(np.exp(g)))


def fd_hermitian(phi, h):
    """Second-order central-difference Hermitian matrix of phi."""
    def d2(i):
        return (np.roll(phi, -1, i) - 2 * phi + np.roll(phi, 1, i)) / h[i] ** 2

    def dd(i, j):
        pp = np.roll(np.roll(phi, -1, i), -1, j)
        pm = np.roll(np.roll(phi, -1, i), 1, j)
        mp = np.roll(np.roll(phi, 1, i), -1, j)
        mm = np.roll(np.roll(phi, 1, i), 1, j)
        return (pp - pm - mp + mm) / (4 * h[i] * h[j])

    return (0.25 * (d2(0) + d2(1)), 0.25 * (d2(2) + d2(3)),
            0.25 * (dd(0, 2) + dd(1, 3)), 0.25 * (dd(0, 3) - dd(1, 2)))


def test_hessian_parts_of_plane_wave():
    g = Grid(4, 8)
    x = g.coords()
    phi = np.cos(2 * np.pi * (x[0] + x[2]))
    h11, h22, b, c = hessian_parts(g, g.fft(phi))
    lap = -(2 * np.pi) ** 2 * phi
    assert np.allclose(h11, lap / 4) and np.allclose(h22, lap / 4) and np.allclose(b, lap / 4)
    assert np.abs(c).max() < 1e-12


def test_one_mode_matches_ode_solution():
    alpha = 0.5
    g = Grid(4, (16, 4, 4, 4))
    x = g.coords()
    fam = fb.make_calabi_yau(rho=lambda x, t=0.0: 1 + alpha * np.cos(2 * np.pi * x[0]))
    state, rep = ma_solve(fam, None, g)
    exact = -(alpha / np.pi**2) * np.cos(2 * np.pi * x[0])
    assert np.abs(state.field - exact).max() < 1e-12
    w = ma_form(state)
    assert np.allclose(l2.quadratic(w), 2 * (1 + alpha * np.cos(2 * np.pi * x[0])))


@pytest.mark.parametrize("translated", [False, True])
def test_jacobian_matches_finite_differences(translated, rng):
    g = Grid(4, 8)
    f = normalized(two_mode_f(g.coords()), g)
    theta = None
    if translated:
        theta = l2.hermitian_form(0.1, -0.05, 0.02, 0.03).reshape(6, 1, 1, 1, 1) * np.ones(g.shape)
    residual, apply_jacobian, precompute, _, _, _ = ma_operator(g, f, theta)
    x0 = g.random_band_limited(rng, amplitude=0.01).ravel()
    v = g.random_band_limited(rng).ravel()
    if translated:
        x0 = np.append(x0, 1.1)
        v = np.append(v, 0.7)
    h = 1e-6
    fd = (residual(x0 + h * v)[1] - residual(x0 - h * v)[1]) / (2 * h)
    jv = apply_jacobian(x0, precompute(x0), v)
    assert np.abs(jv - fd).max() <= 1e-6 * max(1.0, np.abs(fd).max())


def test_two_dimensional_case_and_fd_consistency():
    # the spectral solution satisfies a second-order FD discretisation to O(n^-2)
    errs = []
    for n in (16, 32):
        g = Grid(4, (n, 4, n, 4))
        f = normalized(two_mode_f(g.coords()), g)
        state, rep = ma_solve(fb.make_calabi_yau(), f, g)
        assert rep.residual <= 1e-9
        h11, h22, b, c = fd_hermitian(state.field, [1 / m for m in g.shape])
        det = (1 + h11) * (1 + h22) - b * b - c * c
        errs.append(np.abs(det - np.exp(f)).max())
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_volume_mismatch(rng):
    g = Grid(4, (8, 4, 4, 4))
    fam = fb.make_calabi_yau()
    f = 0.1 * np.ones(g.shape)
    with pytest.raises(ClassVolumeMismatch) as info:
        ma_solve(fam, f, g)
    assert info.value.witness["mean_density"] == pytest.approx(np.exp(0.1))
    state, rep = ma_solve(fam, f, g, SolverOptions(compatibility="normalize"))
    assert rep.diagnostics["normalized"] and np.abs(state.field).max() < 1e-14


def test_inadmissible_start_is_reported():
    g = Grid(4, (8, 4, 4, 4))
    x = g.coords()
    phi0 = 1.0 * np.cos(2 * np.pi * x[0])  # 1 + phi''/4 < 0 somewhere
    with pytest.raises(LeftPositiveCone) as info:
        ma_solve(fb.make_calabi_yau(), np.zeros(g.shape), g, phi0=phi0)
    assert info.value.witness["det"] <= 0


def test_translated_problem_solves_for_scale():
    g = Grid(4, (8, 4, 8, 4))
    x = g.coords()
    theta = lambda x, t=0.0: l2.hermitian_form(0.1 * np.cos(2 * np.pi * x[0]), 0.0 * x[0], 0.0, 0.0)  # noqa: E731
    fam = fb.make_translated_cy(Theta=theta, rho=1.3)
    state, rep = ma_solve(fam, None, g)
    assert rep.residual < 1e-9
    w = ma_form(state) - state.theta
    assert np.allclose(l2.quadratic(w), 2.6, atol=1e-8)
    # class of the solution is the scale multiple of the Kaehler class
    assert np.allclose([g.mean(c) for c in ma_form(state)], state.scale * l2.KAHLER_FORM, atol=1e-12)


def test_non_standard_structure_is_rejected():
    g = Grid(4, (8, 4, 4, 4))
    planes = np.array([l2.SD_BASIS[0], l2.SD_BASIS[2]])
    fam = fb.make_calabi_yau(J_planes=planes)
    with pytest.raises(ValueError):
        ma_solve(fam, np.zeros(g.shape), g)
    with pytest.raises(ValueError):
        ma_solve(fb.make_calabi_yau(), np.zeros((8, 8, 8)), Grid(3, 8))
