"""Linear algebra of 2-forms on an oriented 4-dimensional vector space.

A 2-form is stored as its six coefficients in the lexicographic basis

    dx1^dx2, dx1^dx3, dx1^dx4, dx2^dx3, dx2^dx4, dx3^dx4

along the *leading* axis of an array, so the same routines act on a single
form (shape ``(6,)``) and on a grid field (shape ``(6, n, n, n, n)``).
The orientation is ``vol = dx1^dx2^dx3^dx4`` and the wedge pairing is
``w ^ w2 = pairing(w, w2) * vol``; it has signature (3, 3).
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import AlgebraError

LABELS = ("12", "13", "14", "23", "24", "34")
INDEX = {lab: k for k, lab in enumerate(LABELS)}

# pairing(w, w2) = w @ GRAM @ w2
GRAM = np.zeros((6, 6))
GRAM[0, 5] = GRAM[5, 0] = 1.0
GRAM[1, 4] = GRAM[4, 1] = -1.0
GRAM[2, 3] = GRAM[3, 2] = 1.0

# Euclidean self-dual / anti-self-dual bases; pairing is +2 / -2 on each.
SD_BASIS = np.array(
    [
        [1, 0, 0, 0, 0, 1],
        [0, 1, 0, 0, -1, 0],
        [0, 0, 1, 1, 0, 0],
    ],
    dtype=float,
)
ASD_BASIS = np.array(
    [
        [1, 0, 0, 0, 0, -1],
        [0, 1, 0, 0, 1, 0],
        [0, 0, 1, -1, 0, 0],
    ],
    dtype=float,
)

# Standard Kaehler form and the real/imaginary parts of dz1^dz2 for
# z1 = x1 + i x2, z2 = x3 + i x4.
KAHLER_FORM = SD_BASIS[0].copy()
HOLOMORPHIC_PAIR = SD_BASIS[1:].copy()

HODGE_STAR = np.zeros((6, 6))
for _i, _j in ((0, 5), (2, 3)):
    HODGE_STAR[_i, _j] = HODGE_STAR[_j, _i] = 1.0
HODGE_STAR[1, 4] = HODGE_STAR[4, 1] = -1.0


def two_form(c12=0.0, c13=0.0, c14=0.0, c23=0.0, c24=0.0, c34=0.0):
    return np.array([c12, c13, c14, c23, c24, c34], dtype=float)


def pairing(w, w2):
    """Symmetric wedge pairing along the leading axis (broadcasts over the rest)."""
    w = np.asarray(w, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    return (
        w[0] * w2[5]
        + w[5] * w2[0]
        - w[1] * w2[4]
        - w[4] * w2[1]
        + w[2] * w2[3]
        + w[3] * w2[2]
    )


def quadratic(w):
    """w ^ w / vol = 2 (c12 c34 - c13 c24 + c14 c23)."""
    return pairing(w, w)


def chord_value(w, w2):
    d = np.asarray(w, dtype=float) - np.asarray(w2, dtype=float)
    return pairing(d, d)


def euclidean_norm(w):
    w = np.asarray(w, dtype=float)
    return np.sqrt(np.sum(w * w, axis=0))


@dataclass(frozen=True)
class EBForm:
    """Electric/magnetic view of a 2-form on R^3 x R (t = x4).

    ``E_i = c_i4`` and ``B_i = -1/2 eps_ijk c_jk``. With this sign the pairing
    is ``-2 E.B`` and a graph ``B = F(E)`` has negative tangents exactly when
    ``H + H^T > 0`` for ``H = dF/dE``.
    """

    E: np.ndarray
    B: np.ndarray

    def to_two_form(self):
        E = np.asarray(self.E, dtype=float)
        B = np.asarray(self.B, dtype=float)
        return np.stack([-B[2], B[1], E[0], -B[0], E[1], E[2]])

    @classmethod
    def from_two_form(cls, w):
        w = np.asarray(w, dtype=float)
        E = np.stack([w[2], w[4], w[5]])
        B = np.stack([-w[3], w[1], -w[0]])
        return cls(E, B)


# Linear maps between (E, B) in R^6 and the 2-form coefficients.
EB_TO_FORM = np.array(
    [
        [0, 0, 0, 0, 0, -1],
        [0, 0, 0, 0, 1, 0],
        [1, 0, 0, 0, 0, 0],
        [0, 0, 0, -1, 0, 0],
        [0, 1, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0],
    ],
    dtype=float,
)
FORM_TO_EB = np.linalg.inv(EB_TO_FORM)


def _pairing_orthonormalize(vectors, sign):
    """Gram-Schmidt for a definite subspace, normalised to pairing = 2*sign."""
    out = []
    for v in vectors:
        v = np.array(v, dtype=float)
        for u in out:
            v = v - pairing(u, v) / pairing(u, u) * u
        q = sign * pairing(v, v)
        if q <= 0:
            raise AlgebraError("subspace is not definite for the wedge pairing")
        out.append(v * np.sqrt(2.0 / q))
    return np.array(out)


@dataclass(frozen=True)
class ConformalSplit:
    """A splitting of 2-forms into a maximal positive and a maximal negative subspace.

    ``mu`` records the split as a graph over the Euclidean one: the negative
    subspace is ``{s + mu s : s in ASD}``, with ``mu s`` read in SD
    coordinates. Both bases are pairing-orthonormal with pairing = +-2.
    """

    basis_plus: np.ndarray
    basis_minus: np.ndarray
    mu: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        P = np.asarray(self.basis_plus, dtype=float)
        M = np.asarray(self.basis_minus, dtype=float)
        if P.shape != (3, 6) or M.shape != (3, 6):
            raise AlgebraError("split bases must be 3 x 6")
        gp = P @ GRAM @ P.T
        gm = M @ GRAM @ M.T
        cross = P @ GRAM @ M.T
        scale = 1.0 + np.abs(gp).max()
        if np.linalg.eigvalsh(gp).min() <= 0 or np.linalg.eigvalsh(gm).max() >= 0:
            raise AlgebraError("split bases are not definite")
        if np.abs(cross).max() > 1e-10 * scale:
            raise AlgebraError("split subspaces are not pairing-orthogonal")
        object.__setattr__(self, "_inv", np.linalg.inv(np.vstack([P, M]).T))

    @classmethod
    def euclidean(cls):
        return cls(SD_BASIS.copy(), ASD_BASIS.copy())

    @classmethod
    def from_mu(cls, mu):
        mu = np.asarray(mu, dtype=float)
        if np.linalg.norm(mu, 2) >= 1:
            raise AlgebraError("|mu| must be < 1 for a definite split")
        minus = ASD_BASIS + mu.T @ SD_BASIS
        plus = SD_BASIS + mu @ ASD_BASIS
        return cls(_pairing_orthonormalize(plus, 1), _pairing_orthonormalize(minus, -1), mu)

    @classmethod
    def from_negative_subspace(cls, frame):
        """Split whose negative part is span(frame), e.g. a fibre tangent space."""
        frame = np.asarray(frame, dtype=float)
        minus = _pairing_orthonormalize(frame, -1)
        # positive part: pairing-orthogonal complement of span(minus)
        null = _null_space(minus @ GRAM)
        plus = _pairing_orthonormalize(null.T, 1)
        # express as a graph over the Euclidean split: minus = s + mu s
        cm = np.linalg.lstsq(np.vstack([SD_BASIS, ASD_BASIS]).T, minus.T, rcond=None)[0]
        mu = cm[:3] @ np.linalg.inv(cm[3:])
        return cls(plus, minus, mu)

    @property
    def plus_coordinates(self):
        """3 x 6 matrix giving the basis_plus coefficients of a form."""
        return self._inv[:3]

    def coordinates(self, w):
        """Coefficients of w on (basis_plus, basis_minus) along the leading axis."""
        w = np.asarray(w, dtype=float)
        flat = w.reshape(6, -1)
        c = self._inv @ flat
        return c[:3].reshape((3,) + w.shape[1:]), c[3:].reshape((3,) + w.shape[1:])


def _null_space(A, rtol=1e-12):
    u, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > rtol * max(s.max(), 1.0)))
    return vt[rank:].T


def sd_split(w, split=None):
    """Return (w_plus, w_minus) with w = w_plus + w_minus."""
    split = split or ConformalSplit.euclidean()
    w = np.asarray(w, dtype=float)
    p, m = split.coordinates(w)
    flat_shape = (6,) + w.shape[1:]
    wp = (split.basis_plus.T @ p.reshape(3, -1)).reshape(flat_shape)
    wm = (split.basis_minus.T @ m.reshape(3, -1)).reshape(flat_shape)
    return wp, wm


def negativity_margin(tangent_frame):
    """Largest eigenvalue of the pairing Gram matrix of the given frame.

    Negative tangents hold iff the margin is < 0. The value depends on the
    scaling of the frame; its sign does not.
    """
    T = np.asarray(tangent_frame, dtype=float)
    if T.shape != (3, 6):
        raise AlgebraError("expected three 6-component tangent vectors")
    s = np.linalg.svd(T, compute_uv=False)
    if s[-1] <= 1e-12 * max(s[0], 1e-300):
        raise AlgebraError("degenerate tangent frame")
    return float(np.linalg.eigvalsh(T @ GRAM @ T.T)[-1])


def batched_margin(frames):
    """negativity_margin for a stack of frames with shape (N, 3, 6)."""
    frames = np.asarray(frames, dtype=float)
    gram = np.einsum("nai,ij,nbj->nab", frames, GRAM, frames)
    return np.linalg.eigvalsh(gram)[:, -1]


@dataclass(frozen=True)
class GrassmannPoint:
    """An oriented 2-plane as a pair of unit vectors in SD x ASD coordinates."""

    omega_plus: np.ndarray
    omega_minus: np.ndarray

    def __post_init__(self):
        for v in (self.omega_plus, self.omega_minus):
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise AlgebraError("Grassmann coordinates must be unit vectors")

    def to_form(self, scale=1.0):
        """The null 2-form with these SD/ASD directions."""
        return scale * (
            np.asarray(self.omega_plus) @ SD_BASIS + np.asarray(self.omega_minus) @ ASD_BASIS
        )


def null_ray_decompose(w, tol=1e-9):
    w = np.asarray(w, dtype=float)
    n2 = float(np.dot(w, w))
    if n2 == 0.0:
        raise AlgebraError("not a 2-plane: zero form")
    if abs(quadratic(w)) > tol * n2:
        raise AlgebraError("not a 2-plane: form is not null")
    p, m = ConformalSplit.euclidean().coordinates(w)
    return GrassmannPoint(p / np.linalg.norm(p), m / np.linalg.norm(m))


def simple_form(v, u):
    """Coefficients of the decomposable 2-form v ^ u for v, u in R^4."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    return np.array([v[i] * u[j] - v[j] * u[i] for i, j in pairs])


def taming_check(Omega, planes):
    """Evaluate pairing(Omega, theta) over a sample of planes.

    Returns ``(tames, worst_margin)`` where tames is true iff every margin is
    strictly positive.
    """
    planes = list(planes)
    if not planes:
        raise AlgebraError("taming check needs at least one plane")
    thetas = np.array([p.to_form() for p in planes])
    margins = thetas @ GRAM @ np.asarray(Omega, dtype=float)
    worst = float(margins.min())
    return worst > 0, worst


def complex_lines(omega_plus, samples):
    """Planes {omega_plus} x S^2_-: the complex lines of the structure omega_plus defines."""
    wp = np.asarray(omega_plus, dtype=float)
    wp = wp / np.linalg.norm(wp)
    return [GrassmannPoint(wp, m / np.linalg.norm(m)) for m in np.asarray(samples, dtype=float)]


def moment_maps(theta, w):
    """mu_i = (theta_i ^ w) / (w ^ w)."""
    q = quadratic(w)
    if np.any(np.abs(q) < 1e-300):
        raise AlgebraError("null form: moment maps undefined")
    return tuple(pairing(t, w) / q for t in theta)


def hermitian_form(a, d, b, c):
    """Real (1,1)-form of the Hermitian matrix [[a, b + ic], [b - ic, d]].

    The identity matrix maps to the standard Kaehler form and
    ``quadratic(hermitian_form(A)) = 2 det A``. Arguments broadcast.
    """
    a, d, b, c = (np.asarray(x, dtype=float) for x in (a, d, b, c))
    return np.stack(np.broadcast_arrays(a, -c, b, -b, -c, d))


def hermitian_parts(w):
    """Inverse of hermitian_form on the (1,1) part: returns (a, d, b, c)."""
    w = np.asarray(w, dtype=float)
    return w[0], w[5], 0.5 * (w[2] - w[3]), -0.5 * (w[1] + w[4])


def random_unitary(rng):
    z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def unimodular_hermitian(lam, U):
    """U diag(lam, 1/lam) U^* as (a, d, b, c)."""
    A = U @ np.diag([lam, 1.0 / lam]) @ U.conj().T
    return A[0, 0].real, A[1, 1].real, A[0, 1].real, A[0, 1].imag
