import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wedge4 import lambda2 as l2
from wedge4.errors import GridError
from wedge4.grid import Ball, Grid, get_workers, set_workers

seeds = st.integers(0, 2**32 - 1)


def test_grid_validation():
    with pytest.raises(GridError):
        Grid(5, 8)
    with pytest.raises(GridError):
        Grid(4, 7)
    with pytest.raises(GridError):
        Grid(3, (8, 8))
    with pytest.raises(GridError):
        Grid(4, (8, 8, 8, 8)).check(np.zeros((8, 8, 8)))
    g = Grid(4, (8, 8, 4, 4))
    with pytest.raises(GridError):
        g.n
    assert Grid(3, 8) == Grid(3, (8, 8, 8)) and Grid(3, 8).n == 8


def test_derivative_of_single_mode():
    g = Grid(3, 16)
    x = g.coords()
    f = np.sin(2 * np.pi * (2 * x[0] - 3 * x[2]))
    df = 2 * np.pi * np.cos(2 * np.pi * (2 * x[0] - 3 * x[2]))
    assert np.abs(g.partial(f, 0) - 2 * df).max() < 1e-11
    assert np.abs(g.partial(f, 2) + 3 * df).max() < 1e-11
    assert np.abs(g.laplacian(f) + (2 * np.pi) ** 2 * 13 * f).max() < 1e-9


def test_nyquist_dropped_from_derivatives():
    g = Grid(3, 8)
    x = g.coords()
    f = np.cos(2 * np.pi * 4 * x[0])
    assert np.abs(g.partial(f, 0)).max() < 1e-12
    assert g.null_modes[4, 0, 0]


@pytest.mark.parametrize("dim", [3, 4])
@given(seed=seeds)
def test_d_squared_vanishes(dim, seed):
    g = Grid(dim, 8)
    rng = np.random.default_rng(seed)
    assert np.abs(g.d1(g.gradient(g.random_band_limited(rng)))).max() < 1e-10
    a = g.random_band_limited(rng, dim)
    assert np.abs(g.d2(g.d1(a))).max() < 1e-9
    assert np.abs(g.dstar1(g.dstar2(g.random_band_limited(rng, len(g.pairs))))).max() < 1e-9


@pytest.mark.parametrize("dim", [3, 4])
def test_adjointness(dim, rng):
    g = Grid(dim, 8)
    for _ in range(5):
        a = g.random_band_limited(rng, dim)
        w = g.random_band_limited(rng, len(g.pairs))
        f = g.random_band_limited(rng)
        assert g.inner(g.d1(a), w) == pytest.approx(g.inner(a, g.dstar2(w)), abs=1e-12)
        assert g.inner(g.gradient(f), a) == pytest.approx(g.inner(f, g.dstar1(a)), abs=1e-12)
        assert g.divergence(a) == pytest.approx(-g.dstar1(a), abs=1e-12)


def test_integration_and_parseval(rng):
    g = Grid(4, 8)
    x = g.coords()
    assert g.integrate(np.cos(2 * np.pi * x[1]) + 3.0) == pytest.approx(3.0, abs=1e-15)
    f = g.random_band_limited(rng)
    assert g.parseval_norm2(f) == pytest.approx(g.inner(f, f), rel=1e-12)
    w = g.random_band_limited(rng, 6) + 1.0
    assert np.allclose(g.harmonic_parts(w), [g.mean(c) for c in w])


def test_wedge_integral_matches_pointwise_pairing(rng):
    g = Grid(4, 8)
    w = rng.standard_normal((6,) + g.shape)
    w2 = rng.standard_normal((6,) + g.shape)
    assert g.wedge_integral(w, w2) == pytest.approx(np.mean(l2.pairing(w, w2)), rel=1e-12)
    with pytest.raises(GridError):
        Grid(3, 8).wedge_integral(w[:3, :, :, :, 0], w2[:3, :, :, :, 0])


def test_project_removes_null_modes(rng):
    g = Grid(4, 8)
    f = rng.standard_normal(g.shape)
    p = g.project(f)
    assert abs(g.mean(p)) < 1e-15
    assert np.abs(g.fft(p)[g.null_modes]).max() < 1e-12
    assert g.mean(g.project(f, keep_mean=True)) == pytest.approx(g.mean(f))


def test_interpolation_reproduces_band_limited_field(rng):
    g = Grid(4, 8)
    a = rng.standard_normal(4)
    pts = [rng.uniform(0, 1, 5) for _ in range(4)]

    def field(x):
        return (np.cos(2 * np.pi * (x[0] + 2 * x[2]) + a[0]) + a[1] * np.sin(2 * np.pi * (3 * x[3] - x[1]))
                + a[2])

    vals = g.sample_lattice(field(g.coords()), pts)
    exact = field(np.meshgrid(*pts, indexing="ij"))
    assert np.abs(vals - exact).max() < 1e-12
    # at grid points the interpolant returns the samples
    f = rng.standard_normal(g.shape)
    grid_pts = [np.arange(m) / m for m in g.shape]
    assert np.abs(g.sample_lattice(f, grid_pts) - f).max() < 1e-12


def test_balls():
    g = Grid(4, 16)
    with pytest.raises(GridError):
        Ball((0, 0, 0, 0), 0.3)
    ball = Ball((0, 0, 0, 0), 0.25)
    mask = g.ball_mask(ball)
    assert mask[0, 0, 0, 0] and mask[15, 0, 0, 0] and not mask[4, 0, 0, 0]
    assert g.ball_integral(np.ones(g.shape), ball) == pytest.approx(mask.mean())
    x = g.coords()
    assert g.oscillation(x[0], Ball((8, 8, 8, 8), 0.125)) == pytest.approx(2 / 16)


def test_random_band_limited_properties(rng):
    g = Grid(4, 16)
    f = g.random_band_limited(rng, 3, amplitude=0.5)
    assert f.shape == (3,) + g.shape
    assert np.abs(f).max() == pytest.approx(0.5)
    fh = g.fft(f)
    assert np.abs(fh[:, g.kabs >= 4]).max() < 1e-10
    assert np.abs(fh[:, g.null_modes]).max() < 1e-10


def test_workers_do_not_change_results(rng):
    g = Grid(4, 16)
    f = rng.standard_normal((6,) + g.shape)
    old = get_workers()
    try:
        set_workers(1)
        one = g.d2(f)
        set_workers(4)
        four = g.d2(f)
    finally:
        set_workers(old)
    assert np.array_equal(one, four)


@pytest.mark.parametrize("shape,kmax", [((16, 16, 16, 16), 4), ((12, 12, 12), 3), ((8, 12, 4, 16), 2)])
def test_band_ifft_matches_full_inverse(shape, kmax, rng):
    g = Grid(len(shape), list(shape))
    sel = g.band(kmax)
    box = (slice(None),) + np.ix_(*sel)
    spec = np.zeros((2,) + g.spec_shape, dtype=complex)
    coef = rng.standard_normal(spec[box].shape) + 1j * rng.standard_normal(spec[box].shape)
    spec[box] = coef
    np.testing.assert_allclose(g.band_ifft(coef, sel), g.ifft(spec), atol=1e-15)


@pytest.mark.parametrize("dim,n", [(3, 32), (3, 64), (4, 16), (4, 32)])
def test_indicator_ball_volume_and_oscillation(dim, n):
    g = Grid(dim, n)
    r = 0.2
    exact = 4 / 3 * np.pi * r**3 if dim == 3 else np.pi**2 * r**4 / 2
    ball = Ball((0,) * dim, r)
    assert abs(g.ball_integral(np.ones(g.shape), ball) / exact - 1) <= 5 / n
    osc = g.oscillation(np.sin(2 * np.pi * g.coords()[0]), ball)
    assert abs(osc - 2 * np.sin(2 * np.pi * r)) <= 5 / n
