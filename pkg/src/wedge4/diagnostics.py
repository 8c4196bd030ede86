"""Energies, decay tables and self-tests for 2-form fields on the torus.

Ball quantities are computed from the trigonometric interpolant of the
field on a lattice scaled with the ball, so the quadrature is the same at
every radius and log-log slopes are not polluted by grid-counting noise.
"""
import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import lambda2 as l2
from .grid import Ball


def _spectral_weights(grid):
    w = np.full(grid.spec_shape[-1], 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def grad_energy(w, grid):
    """sum over components and axes of the integral of |d_i w_c|^2."""
    w = np.asarray(w, dtype=float)
    if w.ndim == grid.dim:
        w = w[None]
    wh = grid.fft(w)
    dens = np.abs(wh) ** 2 * grid.k2 * _spectral_weights(grid)
    return float(np.sum(dens)) / grid.size**2


def cutoff(s):
    """1 on [0, 1/2], 0 beyond 1, quintic C^2 join in between."""
    s = np.asarray(s, dtype=float)
    sig = np.clip(2 * s - 1, 0.0, 1.0)
    p = 1 - 10 * sig**3 + 15 * sig**4 - 6 * sig**5
    return np.where(s <= 0.5, 1.0, np.where(s >= 1.0, 0.0, p))


def _center(grid, ball):
    return [c / m for c, m in zip(ball.center, grid.shape)]


def _lattice(grid, ball, half_width, q, rule):
    if rule == "gauss":
        nodes, weights = np.polynomial.legendre.leggauss(q)
    else:
        nodes = -1 + (2 * np.arange(q) + 1) / q
        weights = np.full(q, 2.0 / q)
    offs = nodes * half_width
    wts = weights * half_width
    pts = [(c + offs) % 1.0 for c in _center(grid, ball)]
    grids = np.meshgrid(*([offs] * grid.dim), indexing="ij")
    radius = np.sqrt(sum(g**2 for g in grids))
    weight = np.ones(())
    for _ in range(grid.dim):
        weight = np.multiply.outer(weight, wts)
    return pts, radius, weight


def _default_q(grid):
    return 16 if grid.dim == 4 else 24


def _ball_samples(w, grid, ball, q=None):
    q = q or _default_q(grid)
    pts, radius, weight = _lattice(grid, ball, ball.radius, q, "midpoint")
    vals = grid.sample_lattice(w, pts)
    inside = radius < ball.radius
    return vals, inside, weight


def _gradients(w, grid):
    w = np.asarray(w, dtype=float)
    w = w[None] if w.ndim == grid.dim else w
    return np.concatenate([grid.partial(w, i) for i in range(grid.dim)])


def ball_grad_energy(w, grid, ball, q=None, grads=None):
    grads = _gradients(w, grid) if grads is None else grads
    vals, inside, weight = _ball_samples(grads, grid, ball, q)
    return float(np.sum(np.sum(vals**2, axis=0) * inside * weight))


def comparison_energy(w, ball, grid, q=None):
    """Integral over the ball of |w - w(center)|^2 with w frozen at the centre."""
    w = np.asarray(w, dtype=float)
    w = w[None] if w.ndim == grid.dim else w
    center = w[(slice(None),) + tuple(ball.center)]
    vals, inside, weight = _ball_samples(w, grid, ball, q)
    diff = vals - center.reshape((-1,) + (1,) * grid.dim)
    return float(np.sum(np.sum(diff**2, axis=0) * inside * weight))


def ball_oscillation(w, grid, ball, q=None):
    w = np.asarray(w, dtype=float)
    w = w[None] if w.ndim == grid.dim else w
    vals, inside, _ = _ball_samples(w, grid, ball, q)
    v = vals[:, inside]
    return float((v.max(axis=1) - v.min(axis=1)).max())


def cutoff_energy_I(w, v, ball, grid, q=None, wv=None):
    """Integral of beta(|y| / 2r) * (w_v ^ w_v) with w_v = d_v w componentwise.

    The cutoff equals 1 on the ball of radius r and vanishes outside 2r.
    The value is signed; the wedge square is an indefinite form.
    """
    if grid.dim != 4:
        raise ValueError("cutoff energy needs a 4-dimensional grid")
    if not 0 < ball.radius <= 0.125:
        raise ValueError("cutoff energy needs radius in (0, 1/8]")
    if wv is None:
        wv = grid.partial(np.asarray(w, dtype=float), v)
    q = q or _default_q(grid)
    pts, radius, weight = _lattice(grid, ball, 2 * ball.radius, q, "gauss")
    vals = grid.sample_lattice(wv, pts)
    dens = l2.pairing(vals, vals)
    return float(np.sum(cutoff(radius / (2 * ball.radius)) * dens * weight))


def _ball(center, radius):
    return Ball(tuple(int(c) for c in center), float(radius))


def _random_exact(grid, rng, kmax):
    """da for a random 1-form a with spectrum on 0 < |k| < kmax."""
    sel = grid.band(kmax)
    box = np.ix_(*sel)
    mask = (grid.kabs[box] < kmax) & (grid.kabs[box] > 0) & ~grid.null_modes[box]
    count = int(mask.sum())
    ah = np.zeros((grid.dim,) + mask.shape, dtype=complex)
    ah[:, mask] = rng.standard_normal((grid.dim, count)) + 1j * rng.standard_normal((grid.dim, count))
    ds = [d.reshape(-1)[ix].reshape([-1 if a == i else 1 for a in range(grid.dim)])
          for i, (d, ix) in enumerate(zip(grid.dsym, sel))]
    wh = np.stack([ds[i] * ah[j] - ds[j] * ah[i] for i, j in grid.pairs])
    return grid.band_ifft(wh, sel)


def identity3_selftest(grid, count=100, seed=0, tol=1e-10):
    """Check int da^da = |(da)+|^2 - |(da)-|^2 on random band-limited 1-forms.

    The left side is the wedge integral; the right side uses the SD and ASD
    coordinates, |w+|^2 = |SD w|^2 / 2 pointwise (the bases have norm^2 2).
    """
    rng = np.random.default_rng(seed)
    kmax = min(grid.shape) / 4
    worst = 0.0
    worst_harm = 0.0
    for _ in range(count):
        w = _random_exact(grid, rng, kmax)
        lhs = grid.wedge_integral(w, w)
        cp = np.tensordot(l2.SD_BASIS, w, axes=(1, 0))
        cm = np.tensordot(l2.ASD_BASIS, w, axes=(1, 0))
        rhs = 0.5 * grid.integrate(np.einsum("i...,i...->...", cp, cp) - np.einsum("i...,i...->...", cm, cm))
        scale = grid.inner(w, w)
        harm = w.reshape(len(w), -1).sum(axis=1) * grid.cell_volume
        worst = max(worst, abs(lhs - rhs) / scale)
        worst_harm = max(worst_harm, float(np.abs(harm).max()) / np.sqrt(scale))
    return {
        "grid": list(grid.shape), "samples": count, "max_relative_defect": worst,
        "max_harmonic_part": worst_harm, "ok": bool(worst <= tol and worst_harm <= 1e-12),
    }


def adjointness_selftest(grid, count=10, seed=0, tol=1e-12):
    """<da, w> = <a, d*w> and <df, a> = <f, d*a> on random fields."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        f = grid.random_band_limited(rng)
        a = grid.random_band_limited(rng, grid.dim)
        w = grid.random_band_limited(rng, len(grid.pairs))
        e1 = abs(grid.inner(grid.d1(a), w) - grid.inner(a, grid.dstar2(w)))
        e0 = abs(grid.inner(grid.gradient(f), a) - grid.inner(f, grid.dstar1(a)))
        worst = max(worst, e0, e1)
    return {"grid": list(grid.shape), "max_defect": worst, "ok": bool(worst <= tol)}


COLUMNS = ("r", "grad_over_r2", "comp_over_r4", "osc", "I", "J")


@dataclass
class RegularityTable:
    r: list
    grad_over_r2: list
    comp_over_r4: list
    osc: list
    I: list  # noqa: E741
    J: list
    centers: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    def rows(self):
        return [dict(zip(COLUMNS, vals)) for vals in zip(*(getattr(self, c) for c in COLUMNS))]

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in self.rows():
            writer.writerow([repr(float(row[c])) for c in COLUMNS])
        return buf.getvalue()


def loglog_slope(r, y, drop=2):
    """Least-squares slope of log y against log r, coarsest ``drop`` radii removed."""
    r = np.asarray(r, dtype=float)[drop:]
    y = np.asarray(y, dtype=float)[drop:]
    keep = y > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(r[keep]), np.log(y[keep]), 1)[0])


def regularity_table(w, grid, centers, r0=0.125, depth=5, v=0, q=None):
    """Dyadic table of ball energies, maximised over the given centres."""
    w = np.asarray(w, dtype=float)
    centers = [tuple(int(c) for c in ctr) for ctr in centers]
    radii = [r0 / 2**k for k in range(depth)]
    cols = {c: [] for c in COLUMNS[1:]}
    grads = _gradients(w, grid)
    wv = grid.partial(w, v) if grid.dim == 4 else None
    for r in radii:
        vals = {c: 0.0 for c in COLUMNS[1:]}
        for ctr in centers:
            ball = _ball(ctr, r)
            vals["grad_over_r2"] = max(vals["grad_over_r2"], ball_grad_energy(w, grid, ball, q, grads) / r**2)
            vals["comp_over_r4"] = max(vals["comp_over_r4"], comparison_energy(w, ball, grid, q) / r**4)
            vals["osc"] = max(vals["osc"], ball_oscillation(w, grid, ball, q))
            if grid.dim == 4:
                I = abs(cutoff_energy_I(w, v, ball, grid, q, wv))
                vals["I"] = max(vals["I"], I)
                vals["J"] = max(vals["J"], I / r**2)
        for c in cols:
            cols[c].append(float(vals[c]))
    slopes = {c: loglog_slope(radii, cols[c]) for c in ("grad_over_r2", "comp_over_r4", "J")}
    constants = {}
    # empirical surrogates: gamma = max comparison / r^4, and the C in
    # I(r) <= C r sqrt(I(2r))
    constants["gamma"] = max(cols["comp_over_r4"]) if cols["comp_over_r4"] else 0.0
    ratios = [
        cols["I"][k] / (radii[k] * np.sqrt(cols["I"][k - 1]))
        for k in range(1, len(radii)) if cols["I"][k - 1] > 0
    ]
    constants["decay_C"] = float(max(ratios)) if ratios else 0.0
    return RegularityTable(
        r=[float(r) for r in radii], centers=[list(c) for c in centers], slopes=slopes,
        constants=constants, **cols,
    )


def concentrated_bump(grid, center=None, scale=None):
    """Exact 2-form d(0, 0, y1 b, y2 b) with a Gaussian b of width ``scale``.

    y are periodic coordinates around ``center`` in the first two axes; the
    default width is 4 grid cells of the first axis. Its wedge energy is
    concentrated in a ball of that radius, so J(r) stops decaying above it.
    """
    center = (0,) * grid.dim if center is None else center
    scale = 4.0 / grid.shape[0] if scale is None else scale
    x = grid.coords()
    c = _center(grid, Ball(tuple(center), 0.25))
    y1 = np.sin(2 * np.pi * (x[0] - c[0])) / (2 * np.pi)
    y2 = np.sin(2 * np.pi * (x[1] - c[1])) / (2 * np.pi)
    b = np.exp(-(y1**2 + y2**2) / scale**2)
    zero = np.zeros(grid.shape)
    return grid.d1(np.stack([zero, zero, y1 * b, y2 * b]))
