"""Constraint fibres P in Lambda^2 R^4 and families of them over a torus.

A fibre is the zero set of a residual map r: Lambda^2 -> R^3 (one connected
component, picked out by a basepoint). A family evaluates residuals and
their derivatives on whole grids at once:

    residual(w, x, t)    -> (3, ...)
    derivative(w, x, t)  -> (3, 6, ...)
    basepoint(x, t)      -> (6, ...)

where ``w`` has shape (6, ...) and ``x`` holds coordinates on its leading
axis. Everything broadcasts over the trailing axes.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import lambda2 as l2
from .errors import AlgebraError


@dataclass(frozen=True)
class FourierSeries:
    """f(x) = sum_j amplitude_j * cos(2 pi k_j . x + phase_j) on the unit torus."""

    terms: tuple = ()
    constant: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[1:], float(self.constant))
        for k, amp, phase in self.terms:
            k = np.asarray(k, dtype=float)
            arg = np.tensordot(k, x[: k.size], axes=(0, 0))
            out = out + amp * np.cos(2 * np.pi * arg + phase)
        return out

    @classmethod
    def from_config(cls, spec):
        terms = tuple((tuple(t[0]), float(t[1]), float(t[2])) for t in spec.get("terms", ()))
        return cls(terms, float(spec.get("constant", 0.0)))


def _as_field_fn(value):
    """Wrap constants / FourierSeries / callables as f(x, t)."""
    if callable(value) and not isinstance(value, FourierSeries):
        return value
    if isinstance(value, FourierSeries):
        return lambda x, t=0.0: value(x)
    c = float(value)
    return lambda x, t=0.0: np.full(np.shape(x)[1:], c)


@dataclass(frozen=True)
class ConstraintFiber:
    residual: Callable
    derivative: Callable
    basepoint: np.ndarray
    kind: str
    frame: Optional[Callable] = None

    def tangent_frame(self, w):
        if self.frame is not None:
            return np.asarray(self.frame(w))
        return _kernel_frames(np.asarray(self.derivative(w))[None])[0]

    def margin(self, w):
        return l2.negativity_margin(self.tangent_frame(w))


@dataclass(frozen=True)
class ConstraintFamily:
    kind: str
    residual: Callable
    derivative: Callable
    basepoint: Callable
    frame: Optional[Callable] = None
    sampler: Optional[Callable] = None
    rho: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    @property
    def unimodular(self):
        return self.rho is not None

    def fiber_at(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        frame = None
        if self.frame is not None:
            frame = lambda w: self.frame(np.asarray(w, dtype=float), x, t)  # noqa: E731
        return ConstraintFiber(
            residual=lambda w: self.residual(np.asarray(w, dtype=float), x, t),
            derivative=lambda w: self.derivative(np.asarray(w, dtype=float), x, t),
            basepoint=np.asarray(self.basepoint(x, t), dtype=float),
            kind=self.kind,
            frame=frame,
        )

    def margin_field(self, w, x, t=0.0):
        """Negativity margin of the fibre through w(x), for every point."""
        w = np.asarray(w, dtype=float)
        shape = w.shape[1:]
        if self.frame is not None:
            frames = np.asarray(self.frame(w, x, t))
            frames = np.broadcast_to(frames, (3, 6) + shape).reshape(3, 6, -1)
        else:
            D = np.broadcast_to(np.asarray(self.derivative(w, x, t)), (3, 6) + shape)
            frames = _kernel_frames(np.moveaxis(D.reshape(3, 6, -1), -1, 0))
            frames = np.moveaxis(frames, 0, -1)
        return l2.batched_margin(np.moveaxis(frames, -1, 0)).reshape(shape)


def _kernel_frames(D):
    """Euclidean-orthonormal kernel bases for a stack of 3 x 6 derivatives."""
    _, s, vt = np.linalg.svd(D)
    if np.any(s[:, -1] <= 1e-12 * np.maximum(s[:, 0], 1e-300)):
        raise AlgebraError("fibre derivative is rank deficient")
    return vt[:, 3:, :]


# --------------------------------------------------------------------------
# linear anti-self-dual fibre
# --------------------------------------------------------------------------
def make_linear_asd(split=None):
    split = split or l2.ConformalSplit.euclidean()
    P = split.plus_coordinates

    def residual(w, x=None, t=0.0):
        w = np.asarray(w, dtype=float)
        return np.tensordot(P, w, axes=(1, 0))

    def derivative(w, x=None, t=0.0):
        w = np.asarray(w, dtype=float)
        return np.broadcast_to(P.reshape(3, 6, *([1] * (w.ndim - 1))), (3, 6) + w.shape[1:])

    def basepoint(x, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.zeros((6,) + x.shape[1:])

    def frame(w, x=None, t=0.0):
        w = np.asarray(w, dtype=float)
        return np.broadcast_to(
            split.basis_minus.reshape(3, 6, *([1] * (w.ndim - 1))), (3, 6) + w.shape[1:]
        )

    def sampler(x, t, rng, count):
        coeffs = rng.standard_normal((count, 3))
        return coeffs @ split.basis_minus

    return ConstraintFamily(
        "linear-asd", residual, derivative, basepoint, frame=frame, sampler=sampler,
        params={"split_mu": split.mu.tolist()},
    )


# --------------------------------------------------------------------------
# graphs B = F(x, E)
# --------------------------------------------------------------------------
def make_graph(F, HF, name="graph", params=None):
    """Family {EBForm(E, F(x, E, t))}; F and HF take (x, xi, t)."""

    def split_eb(w):
        eb = np.tensordot(l2.FORM_TO_EB, w, axes=(1, 0))
        return eb[:3], eb[3:]

    def residual(w, x, t=0.0):
        w = np.asarray(w, dtype=float)
        E, B = split_eb(w)
        return B - F(x, E, t)

    def derivative(w, x, t=0.0):
        w = np.asarray(w, dtype=float)
        E, _ = split_eb(w)
        H = np.asarray(HF(x, E, t), dtype=float)
        H = np.broadcast_to(H, (3, 3) + w.shape[1:])
        eye = np.broadcast_to(np.eye(3).reshape((3, 3) + (1,) * (w.ndim - 1)), H.shape)
        D_eb = np.concatenate([-H, eye], axis=1)
        return np.einsum("ak...,kj->aj...", D_eb, l2.FORM_TO_EB)

    def basepoint(x, t=0.0):
        x = np.asarray(x, dtype=float)
        zero = np.zeros((3,) + x.shape[1:])
        B = np.broadcast_to(F(x, zero, t), zero.shape)
        return l2.EBForm(zero, B).to_two_form()

    def frame(w, x, t=0.0):
        w = np.asarray(w, dtype=float)
        E, _ = split_eb(w)
        H = np.broadcast_to(np.asarray(HF(x, E, t), dtype=float), (3, 3) + w.shape[1:])
        eye = np.broadcast_to(np.eye(3).reshape((3, 3) + (1,) * (w.ndim - 1)), H.shape)
        # tangent k = (e_k, H e_k)
        eb = np.concatenate([eye, H], axis=0)  # (6, 3, ...) columns are tangents
        return np.einsum("ij,jk...->ki...", l2.EB_TO_FORM, eb)

    def sampler(x, t, rng, count):
        E = rng.standard_normal((3, count))
        xs = np.broadcast_to(np.asarray(x, dtype=float).reshape(-1, 1), (len(x), count))
        B = F(xs, E, t)
        return l2.EBForm(E, B).to_two_form().T

    return ConstraintFamily(
        "graph", residual, derivative, basepoint, frame=frame, sampler=sampler,
        params={"name": name, "flux": F, "flux_jacobian": HF, **(params or {})},
    )


def rotation_matrix(angle, axis=2):
    c, s = np.cos(angle), np.sin(angle)
    i, j = [k for k in range(3) if k != axis]
    R = np.eye(3)
    R[i, i] = R[j, j] = c
    R[i, j] = -s
    R[j, i] = s
    return R


def rotation_graph(total_angle=2 * np.pi / 3, axis=2):
    """F_t(xi) = R(t * total_angle) xi; ellipticity fails where cos(t * angle) = 0."""

    def F(x, xi, t=0.0):
        return np.tensordot(rotation_matrix(t * total_angle, axis), xi, axes=(1, 0))

    def HF(x, xi, t=0.0):
        R = rotation_matrix(t * total_angle, axis)
        return R.reshape((3, 3) + (1,) * (np.ndim(xi) - 1))

    return make_graph(F, HF, name="rotation-family",
                      params={"total_angle": total_angle, "axis": axis})


def coefficient_graph(c):
    """F(x, xi) = c(x) xi for a scalar coefficient field c."""
    c = _as_field_fn(c)

    def F(x, xi, t=0.0):
        return c(x, t) * xi

    def HF(x, xi, t=0.0):
        cx = np.asarray(c(x, t))
        return np.eye(3).reshape((3, 3) + (1,) * cx.ndim) * cx

    return make_graph(F, HF, name="coefficient-graph")


def cubic_graph(s, eps=0.1):
    """F(x, xi) = xi + eps s(x) |xi|^2 xi."""
    s = _as_field_fn(s)

    def F(x, xi, t=0.0):
        return xi + eps * s(x, t) * np.sum(xi * xi, axis=0) * xi

    def HF(x, xi, t=0.0):
        xi = np.asarray(xi, dtype=float)
        sx = eps * np.asarray(s(x, t))
        n2 = np.sum(xi * xi, axis=0)
        eye = np.eye(3).reshape((3, 3) + (1,) * (xi.ndim - 1))
        return eye * (1 + sx * n2) + 2 * sx * xi[:, None] * xi[None, :]

    return make_graph(F, HF, name="cubic-graph", params={"eps": eps})


# --------------------------------------------------------------------------
# Calabi-Yau fibres: positive (1,1)-forms with prescribed square
# --------------------------------------------------------------------------
def _positive_direction(planes, orientation):
    """Unit-square positive form pairing-orthogonal to both planes (pointwise)."""
    planes = np.asarray(planes, dtype=float)
    if planes.ndim == 2:
        comp = l2._null_space(planes @ l2.GRAM)  # 6 x 4, signature (1, 3)
        g = comp.T @ l2.GRAM @ comp
        vals, vecs = np.linalg.eigh(g)
        if vals[-1] <= 0:
            raise AlgebraError("planes do not leave a positive direction")
        s = comp @ vecs[:, -1]
        s = s * np.sqrt(2.0 / l2.quadratic(s))
        if l2.pairing(s, orientation) < 0:
            s = -s
        return s
    flat = planes.reshape(2, 6, -1)
    out = np.stack([_positive_direction(flat[..., i], orientation) for i in range(flat.shape[-1])], -1)
    return out.reshape((6,) + planes.shape[2:])


def _check_planes(planes):
    planes = np.asarray(planes, dtype=float)
    flat = planes.reshape(2, 6, -1)
    g11 = l2.pairing(flat[0], flat[0])
    g22 = l2.pairing(flat[1], flat[1])
    g12 = l2.pairing(flat[0], flat[1])
    if np.any(g11 * g22 - g12**2 <= 0) or np.any(g11 <= 0):
        raise AlgebraError("Lambda^{2,0} spanning forms must span a positive plane")
    if np.any(np.abs(g12) > 1e-10 * np.abs(g11)):
        raise AlgebraError("Lambda^{2,0} spanning forms must be pairing-orthogonal")


def make_calabi_yau(J_planes=None, rho=1.0, kahler=None, orientation=None):
    """Family {w : w^2 = 2 rho, w paired to zero with Lambda^{2,0}, w positive}.

    ``J_planes`` is a (2, 6) array or a callable (x, t) -> (2, 6, ...);
    ``rho`` a constant, FourierSeries or callable (x, t).
    """
    planes_fn = _planes_fn(J_planes)
    rho_fn = _as_field_fn(rho)
    orientation = l2.KAHLER_FORM if orientation is None else np.asarray(orientation, float)
    const_planes = None if callable(J_planes) else planes_fn(None, 0.0)
    if const_planes is not None:
        _check_planes(const_planes)
    if kahler is not None:
        kahler_fn = _as_form_fn(kahler)
    elif const_planes is not None:
        s0 = _positive_direction(const_planes, orientation)
        kahler_fn = lambda x, t=0.0: s0  # noqa: E731
    else:
        kahler_fn = lambda x, t=0.0: _positive_direction(planes_fn(x, t), orientation)  # noqa: E731

    def residual(w, x, t=0.0):
        w = np.asarray(w, dtype=float)
        P = planes_fn(x, t)
        return np.stack([
            l2.quadratic(w) - 2.0 * rho_fn(x, t),
            l2.pairing(w, _expand(P[0], w)),
            l2.pairing(w, _expand(P[1], w)),
        ])

    def derivative(w, x, t=0.0):
        w = np.asarray(w, dtype=float)
        P = planes_fn(x, t)
        rows = [
            2.0 * np.tensordot(l2.GRAM, w, axes=(1, 0)),
            np.broadcast_to(np.tensordot(l2.GRAM, _expand(P[0], w), axes=(1, 0)), w.shape),
            np.broadcast_to(np.tensordot(l2.GRAM, _expand(P[1], w), axes=(1, 0)), w.shape),
        ]
        return np.stack(rows)

    def basepoint(x, t=0.0):
        s = np.asarray(kahler_fn(x, t), dtype=float)
        r = np.asarray(rho_fn(x, t), dtype=float)
        if s.ndim == 1 and r.ndim > 0:
            s = s.reshape((6,) + (1,) * r.ndim)
        return s * np.sqrt(2.0 * r / l2.quadratic(s))

    def sampler(x, t, rng, count, lam_range=(0.1, 10.0)):
        """Fibre points via U diag(lam, 1/lam) U^* in a frame adapted to the fibre."""
        base = basepoint(np.asarray(x, float), t)
        P = planes_fn(np.asarray(x, float), t)
        frame = _unitary_frame(base, P)
        lo, hi = np.log(lam_range[0]), np.log(lam_range[1])
        out = np.empty((count, 6))
        for i in range(count):
            lam = np.exp(rng.uniform(lo, hi))
            a, d, b, c = l2.unimodular_hermitian(lam, l2.random_unitary(rng))
            out[i] = frame @ l2.hermitian_form(a, d, b, c)
        return out

    return ConstraintFamily(
        "calabi-yau", residual, derivative, basepoint, sampler=sampler,
        rho=rho_fn, params={"planes": planes_fn, "kahler": kahler_fn},
    )


def _expand(v, w):
    v = np.asarray(v, dtype=float)
    if v.ndim == 1 and w.ndim > 1:
        return v.reshape((6,) + (1,) * (w.ndim - 1))
    return v


def _planes_fn(J_planes):
    if J_planes is None:
        J_planes = l2.HOLOMORPHIC_PAIR
    if callable(J_planes):
        return J_planes
    P = np.asarray(J_planes, dtype=float)
    return lambda x, t=0.0: P


def _as_form_fn(value):
    if callable(value):
        return value
    v = np.asarray(value, dtype=float)
    return lambda x, t=0.0: v


def _unitary_frame(base, planes):
    """Linear map sending the standard Kaehler picture to the fibre at hand.

    It maps (KAHLER_FORM, HOLOMORPHIC_PAIR, ASD_BASIS) to
    (base, planes, pairing-orthonormal complement), scaled so that pairings
    are preserved up to the fibre's volume factor.
    """
    base = np.asarray(base, dtype=float)
    P = np.asarray(planes, dtype=float)
    scale = np.sqrt(l2.quadratic(base) / 2.0)
    sd = [base / scale]
    for p in P:
        sd.append(p * np.sqrt(2.0 / l2.quadratic(p)))
    sd = np.array(sd)
    comp = l2._null_space(sd @ l2.GRAM)
    minus = l2._pairing_orthonormalize(comp.T, -1)
    src = np.vstack([l2.SD_BASIS, l2.ASD_BASIS])
    dst = np.vstack([sd, minus])
    # frame @ src_row = dst_row, so frame = dst^T src^{-T}
    return scale * (dst.T @ np.linalg.inv(src.T))


def make_translated_cy(J_planes=None, Theta=None, rho=1.0, kahler=None, orientation=None):
    """The CY fibre translated by a (1,1)-form field Theta."""
    base = make_calabi_yau(J_planes, rho, kahler=kahler, orientation=orientation)
    theta_fn = _as_form_fn(np.zeros(6) if Theta is None else Theta)

    def shift(w, x, t):
        th = np.asarray(theta_fn(x, t), dtype=float)
        return w - _expand(th, w)

    def residual(w, x, t=0.0):
        return base.residual(shift(np.asarray(w, float), x, t), x, t)

    def derivative(w, x, t=0.0):
        return base.derivative(shift(np.asarray(w, float), x, t), x, t)

    def basepoint(x, t=0.0):
        b = base.basepoint(x, t)
        return b + _expand(np.asarray(theta_fn(x, t), dtype=float), b)

    def sampler(x, t, rng, count):
        return base.sampler(x, t, rng, count) + np.asarray(theta_fn(np.asarray(x, float), t))

    params = dict(base.params)
    params["theta"] = theta_fn
    return ConstraintFamily(
        "translated-cy", residual, derivative, basepoint, sampler=sampler,
        rho=base.rho, params=params,
    )


# --------------------------------------------------------------------------
# moment-map problem on a hyperkaehler torus
# --------------------------------------------------------------------------
def standard_triple():
    """Constant SD triple with theta_i ^ theta_j = 2 delta_ij vol."""
    return l2.SD_BASIS.copy()


def assemble_moment_problem(theta, f):
    """Translate mu_i(w) = f_i into a translated-CY constraint.

    ``f`` is a sequence of three arrays (values on a grid, or scalars).
    Returns (Theta, rho, J_planes) with shapes (6, ...), (...), (2, 6, ...);
    rho follows the convention pairing(w - Theta, w - Theta) = 2 rho.
    """
    theta = np.asarray(theta, dtype=float)
    f = np.stack(np.broadcast_arrays(*[np.asarray(fi, dtype=float) for fi in f]))
    F = np.sqrt(np.sum(f * f, axis=0))
    if np.min(F) <= 0:
        raise AlgebraError("moment data vanishes: sqrt(sum f_i^2) must be positive everywhere")
    s = f / F  # unit vector in theta-coordinates
    # smooth complement: Gram-Schmidt of the reference axis least aligned with s
    ref = int(np.argmin(np.abs(s).reshape(3, -1).max(axis=1)))
    e = np.zeros_like(s)
    e[ref] = 1.0
    u = e - np.sum(e * s, axis=0) * s
    u = u / np.sqrt(np.sum(u * u, axis=0))
    v = np.cross(s, u, axis=0)
    sigma = np.tensordot(theta, s, axes=(0, 0))
    Theta = sigma / (2.0 * F)
    rho = l2.quadratic(sigma) / (8.0 * F**2)
    planes = np.stack([np.tensordot(theta, u, axes=(0, 0)), np.tensordot(theta, v, axes=(0, 0))])
    return Theta, rho, planes, sigma


def moment_family(theta, f_fns):
    """Translated-CY family for the moment problem, evaluated lazily on coordinates."""

    def pieces(x):
        vals = [np.asarray(fn(x), dtype=float) for fn in f_fns]
        return assemble_moment_problem(theta, vals)

    def planes(x, t=0.0):
        return pieces(x)[2]

    def Theta(x, t=0.0):
        return pieces(x)[0]

    def rho(x, t=0.0):
        return pieces(x)[1]

    def kahler(x, t=0.0):
        return pieces(x)[3]

    fam = make_translated_cy(planes, Theta, rho, kahler=kahler)
    params = dict(fam.params)
    params["moment_theta"] = theta
    return ConstraintFamily(
        "translated-cy", fam.residual, fam.derivative, fam.basepoint, sampler=fam.sampler,
        rho=fam.rho, params=params,
    )


# --------------------------------------------------------------------------
# certification
# --------------------------------------------------------------------------
@dataclass
class SampleSpec:
    base_points: np.ndarray
    points_per_fiber: int = 100
    pairs_per_fiber: int = 1000
    seed: int = 0
    chord_tol: float = 1e-12


def project_to_fiber(fiber, w, iters=50, tol=1e-13):
    """Gauss-Newton (minimum-norm) projection of w onto {residual = 0}."""
    w = np.array(w, dtype=float)
    for _ in range(iters):
        r = np.asarray(fiber.residual(w))
        if np.abs(r).max() < tol:
            break
        D = np.asarray(fiber.derivative(w))
        w = w - np.linalg.lstsq(D, r, rcond=None)[0]
    return w


def sample_fiber(fam, x, t, rng, count, scale=0.5):
    if fam.sampler is not None:
        return np.asarray(fam.sampler(x, t, rng, count))
    fiber = fam.fiber_at(x, t)
    pts = []
    while len(pts) < count:
        w = project_to_fiber(fiber, fiber.basepoint + scale * rng.standard_normal(6))
        if np.abs(fiber.residual(w)).max() < 1e-10 and l2.pairing(w, fiber.basepoint) > 0:
            pts.append(w)
    return np.array(pts)


@dataclass
class CertificationReport:
    min_margin: float
    max_margin: float
    max_chord: float
    tangent_violations: list
    chord_violations: list
    samples: int
    pairs: int

    @property
    def ok(self):
        return not self.tangent_violations and not self.chord_violations


def certify_negativity(fam, t, spec):
    rng = np.random.default_rng(spec.seed)
    margins, chords = [], []
    tangent_bad, chord_bad = [], []
    n_pairs = 0
    for x in np.atleast_2d(np.asarray(spec.base_points, dtype=float)):
        fiber = fam.fiber_at(x, t)
        pts = sample_fiber(fam, x, t, rng, spec.points_per_fiber)
        for w in pts:
            m = fiber.margin(w)
            margins.append(m)
            if m >= 0:
                tangent_bad.append({"x": x.tolist(), "w": w.tolist(), "margin": float(m)})
        if len(pts) > 1 and spec.pairs_per_fiber:
            i = rng.integers(0, len(pts), spec.pairs_per_fiber)
            j = rng.integers(0, len(pts), spec.pairs_per_fiber)
            keep = i != j
            diff = pts[i[keep]] - pts[j[keep]]
            c = l2.pairing(diff.T, diff.T)
            n_pairs += int(keep.sum())
            chords.append(c.max() if c.size else -np.inf)
            for k in np.flatnonzero(c > spec.chord_tol):
                chord_bad.append({
                    "x": x.tolist(), "w": pts[i[keep][k]].tolist(),
                    "w2": pts[j[keep][k]].tolist(), "chord": float(c[k]),
                })
    return CertificationReport(
        min_margin=float(np.min(margins)),
        max_margin=float(np.max(margins)),
        max_chord=float(np.max(chords)) if chords else float("-inf"),
        tangent_violations=tangent_bad,
        chord_violations=chord_bad,
        samples=len(margins),
        pairs=n_pairs,
    )
