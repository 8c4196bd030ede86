"""Fourier-spectral calculus on flat periodic unit tori T^3 and T^4.

Fields are numpy arrays. A scalar field has shape ``grid.shape``; a k-form
field carries its components on a leading axis in lexicographic order of
the index tuples (for 2-forms on T^4 this matches :mod:`wedge4.lambda2`).

First derivatives drop the Nyquist wavenumber of the differentiated axis,
and second derivatives are compositions of first derivatives. With that
convention d, d* and every Parseval-type identity hold to rounding error.
"""
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.fft as sfft

from . import kernels
from .errors import GridError

_WORKERS = 1


def set_workers(n):
    """Thread count for FFTs. One worker gives bitwise-reproducible output."""
    global _WORKERS
    _WORKERS = max(1, int(n))


def get_workers():
    return _WORKERS


class Grid:
    """Uniform periodic grid on the unit torus of dimension 3 or 4.

    ``n`` may be an int (cubic grid) or a tuple of per-axis sizes; each size
    must be even.
    """

    def __init__(self, dim, n):
        if dim not in (3, 4):
            raise GridError("grid dimension must be 3 or 4")
        shape = (int(n),) * dim if np.isscalar(n) else tuple(int(m) for m in n)
        if len(shape) != dim:
            raise GridError(f"expected {dim} axis sizes, got {len(shape)}")
        if any(m % 2 or m < 4 for m in shape):
            raise GridError("axis sizes must be even and >= 4")
        self.dim = dim
        self.shape = shape
        self.size = int(np.prod(shape))
        self.cell_volume = 1.0 / self.size
        self.pairs = list(combinations(range(dim), 2))
        self.triples = list(combinations(range(dim), 3))
        self._setup_symbols()

    @property
    def n(self):
        if len(set(self.shape)) != 1:
            raise GridError("grid is not cubic")
        return self.shape[0]

    def __eq__(self, other):
        return isinstance(other, Grid) and self.shape == other.shape

    def __hash__(self):
        return hash(self.shape)

    def __repr__(self):
        return f"Grid(dim={self.dim}, shape={self.shape})"

    def _setup_symbols(self):
        # real-to-complex transforms along all axes; last axis is half length
        self.spec_shape = self.shape[:-1] + (self.shape[-1] // 2 + 1,)
        ks, nyq = [], []
        for ax, m in enumerate(self.shape):
            if ax == self.dim - 1:
                k = np.arange(m // 2 + 1, dtype=float)
            else:
                k = np.fft.fftfreq(m, 1.0 / m)
            is_nyq = np.abs(np.abs(k) - m // 2) < 0.5
            shape = [1] * self.dim
            shape[ax] = k.size
            ks.append(k.reshape(shape))
            nyq.append(is_nyq.reshape(shape))
        self.k = ks
        # derivative symbols, Nyquist dropped
        self.dsym = [np.where(nq, 0.0, 2j * np.pi * k) for k, nq in zip(ks, nyq)]
        self.k2 = sum(np.where(nq, 0.0, (2 * np.pi * k) ** 2) for k, nq in zip(ks, nyq))
        # wavevectors whose every component is 0 or Nyquist: annihilated by
        # all first derivatives
        null = np.ones(self.spec_shape, dtype=bool)
        for k, nq in zip(ks, nyq):
            null = null & ((k == 0) | nq)
        self.null_modes = null
        self.kabs = np.sqrt(sum(k**2 for k in np.broadcast_arrays(*ks)))

    # -- transforms -------------------------------------------------------
    def _axes(self, f):
        return tuple(range(f.ndim - self.dim, f.ndim))

    def fft(self, f):
        f = np.asarray(f, dtype=float)
        return sfft.rfftn(f, axes=self._axes(f), workers=_WORKERS)

    def ifft(self, fh):
        axes = tuple(range(fh.ndim - self.dim, fh.ndim))
        return sfft.irfftn(fh, s=self.shape, axes=axes, workers=_WORKERS)

    def check(self, f, ncomp=None):
        f = np.asarray(f)
        tail = f.shape[f.ndim - self.dim:] if f.ndim >= self.dim else ()
        if tail != self.shape:
            raise GridError(f"field shape {f.shape} does not match {self}")
        if ncomp is not None and (f.ndim != self.dim + 1 or f.shape[0] != ncomp):
            raise GridError(f"expected {ncomp} components, got shape {f.shape}")
        return f

    # -- coordinates ------------------------------------------------------
    def coords(self):
        axes = [np.arange(m) / m for m in self.shape]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    # -- differentiation --------------------------------------------------
    def partial(self, f, axis):
        return self.ifft(self.dsym[axis] * self.fft(f))

    def gradient(self, f):
        fh = self.fft(f)
        return np.stack([self.ifft(s * fh) for s in self.dsym])

    def divergence(self, v):
        vh = self.fft(self.check(v, self.dim))
        return self.ifft(sum(self.dsym[i] * vh[i] for i in range(self.dim)))

    def laplacian(self, f):
        return self.ifft(-self.k2 * self.fft(f))

    def d1(self, a):
        """Exterior derivative of a 1-form: (da)_ij = d_i a_j - d_j a_i."""
        ah = self.fft(self.check(a, self.dim))
        return self.ifft(self.d1_hat(ah))

    def d1_hat(self, ah):
        return np.stack([self.dsym[i] * ah[j] - self.dsym[j] * ah[i] for i, j in self.pairs])

    def d2(self, w):
        """Exterior derivative of a 2-form; components ordered like ``triples``."""
        wh = self.fft(self.check(w, len(self.pairs)))
        idx = {p: k for k, p in enumerate(self.pairs)}
        out = []
        for i, j, k in self.triples:
            out.append(
                self.dsym[i] * wh[idx[(j, k)]]
                - self.dsym[j] * wh[idx[(i, k)]]
                + self.dsym[k] * wh[idx[(i, j)]]
            )
        return self.ifft(np.stack(out))

    def dstar1(self, a):
        """Codifferential of a 1-form: -sum_i d_i a_i."""
        return -self.divergence(a)

    def dstar1_hat(self, ah):
        return -sum(self.dsym[i] * ah[i] for i in range(self.dim))

    def dstar2(self, w):
        """Codifferential of a 2-form: (d*w)_j = -sum_i d_i w_ij."""
        wh = self.fft(self.check(w, len(self.pairs)))
        out = [0.0] * self.dim
        for k, (i, j) in enumerate(self.pairs):
            out[j] = out[j] - self.dsym[i] * wh[k]
            out[i] = out[i] + self.dsym[j] * wh[k]
        return self.ifft(np.stack(out))

    # -- projections ------------------------------------------------------
    def project_hat(self, fh, keep_mean=False):
        """Zero the modes killed by every derivative (optionally keep k = 0)."""
        mask = self.null_modes.copy()
        if keep_mean:
            mask[(0,) * self.dim] = False
        return np.where(mask, 0.0, fh)

    def project(self, f, keep_mean=False):
        return self.ifft(self.project_hat(self.fft(f), keep_mean=keep_mean))

    # -- integration ------------------------------------------------------
    def integrate(self, f):
        f = self.check(f)
        return kernels.pairwise_sum(f) * self.cell_volume

    def mean(self, f):
        return self.integrate(f)

    def inner(self, f, g):
        """L^2 pairing summed over components."""
        f = self.check(f)
        g = self.check(g)
        return self.integrate(np.asarray(f) * np.asarray(g))

    def wedge_integral(self, w, w2):
        if self.dim != 4:
            raise GridError("wedge integral needs a 4-dimensional grid")
        w = self.check(w, 6)
        w2 = self.check(w2, 6)
        return kernels.pairwise_sum(kernels.pairing_field(w, w2)) * self.cell_volume

    def harmonic_parts(self, w):
        w = self.check(w)
        return np.array([self.integrate(c) for c in w])

    def parseval_norm2(self, f):
        """Sum of |f|^2 computed from the spectrum (rfft half-plane weighting)."""
        fh = self.fft(f)
        m = self.shape[-1]
        weight = np.full(self.spec_shape[-1], 2.0)
        weight[0] = 1.0
        if m % 2 == 0:
            weight[-1] = 1.0
        total = np.sum(np.abs(fh) ** 2 * weight, axis=None)
        return float(total) / self.size**2

    def band(self, kmax):
        """Per-axis spectral indices with |k_i| < kmax: a box around the ball |k| < kmax."""
        return tuple(np.flatnonzero(np.abs(k.ravel()) < kmax) for k in self.k)

    def band_ifft(self, coef, sel):
        """ifft of a spectrum that vanishes outside the index box ``sel``.

        ``coef`` holds only the box. One axis is transformed at a time, on
        the smallest slab holding data, which is several times cheaper than
        a full inverse transform of a mostly zero spectrum.
        """
        f = np.asarray(coef, dtype=complex)
        lead = f.ndim - self.dim
        for ax in range(self.dim - 1):
            a = lead + ax
            shape = list(f.shape)
            shape[a] = self.spec_shape[ax]
            full = np.zeros(shape, dtype=complex)
            # the index set is a union of contiguous runs; copy run by run
            ix = np.asarray(sel[ax])
            breaks = np.flatnonzero(np.diff(ix) != 1) + 1
            pos = 0
            for run in np.split(ix, breaks):
                dst = [slice(None)] * f.ndim
                src = [slice(None)] * f.ndim
                dst[a] = slice(run[0], run[-1] + 1)
                src[a] = slice(pos, pos + run.size)
                full[tuple(dst)] = f[tuple(src)]
                pos += run.size
            f = sfft.ifft(full, axis=a, workers=_WORKERS, overwrite_x=True)
        last = np.asarray(sel[-1])
        if not np.array_equal(last, np.arange(last.size)):
            raise GridError("band along the last axis must start at k = 0")
        return sfft.irfft(f, n=self.shape[-1], axis=-1, workers=_WORKERS)

    # -- random fields ----------------------------------------------------
    def random_spectrum(self, rng, ncomp=None, kmax=None):
        """Random spectrum supported on 0 < |k| < kmax, off the null modes."""
        kmax = min(self.shape) / 4 if kmax is None else kmax
        lead = () if ncomp is None else (ncomp,)
        mask = (self.kabs < kmax) & (self.kabs > 0) & ~self.null_modes
        count = int(mask.sum())
        spec = np.zeros(lead + self.spec_shape, dtype=complex)
        spec[..., mask] = rng.standard_normal(lead + (count,)) + 1j * rng.standard_normal(lead + (count,))
        return spec

    def random_band_limited(self, rng, ncomp=None, kmax=None, amplitude=1.0):
        """Random real field whose spectrum is supported on 0 < |k| < kmax."""
        f = self.ifft(self.random_spectrum(rng, ncomp, kmax))
        scale = np.abs(f).max()
        return amplitude * f / scale if scale > 0 else f

    # -- balls ------------------------------------------------------------
    def ball_offsets(self, ball):
        """Periodic displacement of each grid point from the ball centre."""
        if not 0 < ball.radius <= 0.25:
            raise GridError("ball radius must lie in (0, 1/4]")
        disp = []
        for ax, m in enumerate(self.shape):
            x = np.arange(m) / m - ball.center[ax] / m
            x = (x + 0.5) % 1.0 - 0.5
            shape = [1] * self.dim
            shape[ax] = m
            disp.append(x.reshape(shape))
        return disp

    def ball_mask(self, ball):
        disp = self.ball_offsets(ball)
        r2 = sum(np.broadcast_arrays(*[x**2 for x in disp]))
        return r2 < ball.radius**2

    def ball_integral(self, f, ball):
        mask = self.ball_mask(ball)
        return kernels.pairwise_sum(np.where(mask, np.asarray(f, dtype=float), 0.0)) * self.cell_volume

    def oscillation(self, w, ball):
        mask = self.ball_mask(ball)
        w = np.asarray(w, dtype=float)
        if w.ndim == self.dim:
            w = w[None]
        vals = w[:, mask]
        return float((vals.max(axis=1) - vals.min(axis=1)).max())

    def interpolation_matrix(self, axis, points):
        """Real matrix evaluating the trigonometric interpolant along ``axis``.

        Nyquist modes are split evenly between +-n/2 so the interpolant is
        real and reproduces the grid values.
        """
        m = self.shape[axis]
        x = np.arange(m) / m
        k = np.arange(-(m // 2), m // 2 + 1)
        w = np.ones(k.size)
        w[0] = w[-1] = 0.5
        diff = np.asarray(points, dtype=float)[:, None, None] - x[None, :, None]
        return (w * np.cos(2 * np.pi * k * diff)).sum(axis=-1) / m

    def sample_lattice(self, f, axes_points):
        """Evaluate band-limited field(s) on a tensor lattice of points."""
        out = np.asarray(f, dtype=float)
        lead = out.ndim - self.dim
        for ax, pts in enumerate(axes_points):
            M = self.interpolation_matrix(ax, pts)
            out = np.moveaxis(np.tensordot(M, out, axes=([1], [lead + ax])), 0, lead + ax)
        return out


@dataclass(frozen=True)
class Ball:
    """Periodic Euclidean ball centred at a grid point (index tuple)."""

    center: tuple
    radius: float

    def __post_init__(self):
        if not 0 < self.radius <= 0.25:
            raise GridError("ball radius must lie in (0, 1/4]")


def pairing_density(w, w2):
    """Pointwise wedge pairing of two 2-form fields, shaped like the grid."""
    w = np.asarray(w, dtype=float)
    return kernels.pairing_field(w, w2).reshape(w.shape[1:])

