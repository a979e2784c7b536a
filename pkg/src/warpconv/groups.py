"""Matrix Lie group and Lie algebra arithmetic for plane warp groups.

Everything here works with 3x3 real matrices acting on the plane through
homogeneous coordinates.  Four groups ship: the affine group (dim 6), the
homography group = unit-determinant 3x3 matrices (dim 8), and two abelian
subgroups used as controls, plane translations (dim 2) and uniform scalings
(dim 1).  The key derived quantity is the pullback of right Haar measure to
the Lie algebra,

    density(xi) = det( sum_k ad_xi^k / (k+1)! ),

which is what the Metropolis sampler in :mod:`warpconv.haar` targets.

All functions are pure; group elements and specs are immutable after
construction, so the module is safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GroupSpec",
    "GroupElement",
    "AFFINE",
    "HOMOGRAPHY",
    "TRANSLATION_ONLY",
    "SCALING_ONLY",
    "get_group",
    "to_matrix",
    "from_matrix",
    "exp_map",
    "log_map",
    "ad_matrix",
    "dexp_series",
    "haar_density",
    "act_on_plane",
    "action_jacobian_det",
    "include_aff_in_hom",
    "multiply",
    "inverse",
    "identity",
    "LieDomainError",
    "PointAtInfinityError",
]

_ATOL = 1e-9  # structural tolerance for membership checks


class LieDomainError(ValueError):
    """Input lies outside the domain of a group/algebra operation."""


class PointAtInfinityError(LieDomainError):
    """A homography sent the queried plane point to infinity."""


def _outer(i: int, j: int) -> np.ndarray:
    m = np.zeros((3, 3))
    m[i, j] = 1.0
    return m


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GroupSpec:
    """A matrix Lie group given by an ordered basis of its algebra.

    ``basis`` has shape (dim, 3, 3).  The basis must be linearly
    independent and closed under the commutator bracket; both are checked
    at construction.  User-supplied bases are allowed as long as they
    satisfy those two conditions.
    """

    name: str
    dim: int
    basis: np.ndarray
    # resolved lazily in __post_init__; not part of the public contract
    _pinv: np.ndarray = field(repr=False, default=None)
    _ad_basis: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        basis = _readonly(self.basis)
        if basis.shape != (self.dim, 3, 3):
            raise ValueError(f"basis shape {basis.shape} != ({self.dim}, 3, 3)")
        flat = basis.reshape(self.dim, 9).T  # (9, dim)
        gram = flat.T @ flat
        if abs(np.linalg.det(gram)) < 1e-12:
            raise ValueError("basis matrices are linearly dependent")
        pinv = np.linalg.pinv(flat)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "_pinv", _readonly(pinv))
        # structure constants: ad_basis[i] is the matrix of ad_{B_i}
        ad = np.empty((self.dim, self.dim, self.dim))
        for i in range(self.dim):
            for j in range(self.dim):
                br = basis[i] @ basis[j] - basis[j] @ basis[i]
                ad[i, :, j] = _project(self, br)
        object.__setattr__(self, "_ad_basis", _readonly(ad))

    def __eq__(self, other):
        return isinstance(other, GroupSpec) and other.name == self.name

    def __hash__(self):
        return hash(self.name)


def _project(spec: GroupSpec, m: np.ndarray) -> np.ndarray:
    """Coordinates of matrix ``m`` in the basis; error if not in the span."""
    coords = spec._pinv @ m.ravel()
    resid = np.abs(np.einsum("i,ijk->jk", coords, spec.basis) - m).max()
    if resid > _ATOL * max(1.0, np.abs(m).max()):
        raise LieDomainError(
            f"matrix is not in the {spec.name} algebra span (residual {resid:.2e})"
        )
    return coords


_I3 = np.eye(3)

AFFINE = GroupSpec(
    "affine",
    6,
    np.stack([_outer(0, 0), _outer(0, 1), _outer(0, 2),
              _outer(1, 0), _outer(1, 1), _outer(1, 2)]),
)

HOMOGRAPHY = GroupSpec(
    "homography",
    8,
    np.stack([_outer(0, 0) - _I3 / 3, _outer(0, 1), _outer(0, 2),
              _outer(1, 0), _outer(1, 1) - _I3 / 3, _outer(1, 2),
              _outer(2, 0), _outer(2, 1)]),
)

TRANSLATION_ONLY = GroupSpec("translation", 2, np.stack([_outer(0, 2), _outer(1, 2)]))

SCALING_ONLY = GroupSpec("scaling", 1, np.stack([_outer(0, 0) + _outer(1, 1)]))

_GROUPS = {g.name: g for g in (AFFINE, HOMOGRAPHY, TRANSLATION_ONLY, SCALING_ONLY)}
# common aliases accepted in config files
_GROUPS["aff"] = AFFINE
_GROUPS["hom"] = HOMOGRAPHY


def get_group(name: str) -> GroupSpec:
    try:
        return _GROUPS[name.lower()]
    except KeyError:
        raise LieDomainError(
            f"unknown group {name!r}; expected one of {sorted(set(_GROUPS))}"
        ) from None


class GroupElement:
    """A 3x3 matrix known to satisfy its group's membership invariants.

    Affine-family elements must have bottom row (0, 0, 1) and an
    invertible upper-left 2x2 block; homographies must have unit
    determinant to 1e-9.
    """

    __slots__ = ("matrix", "spec")

    def __init__(self, matrix: np.ndarray, spec: GroupSpec):
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise LieDomainError(f"expected a 3x3 matrix, got shape {m.shape}")
        if not np.isfinite(m).all():
            raise LieDomainError("group element contains non-finite entries")
        _check_membership(m, spec)
        self.matrix = _readonly(m)
        self.spec = spec

    def __repr__(self):
        return f"GroupElement({self.spec.name}, {self.matrix.tolist()})"

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def inv(self) -> "GroupElement":
        return inverse(self)


def _check_membership(m: np.ndarray, spec: GroupSpec) -> None:
    if spec.name == "homography":
        d = np.linalg.det(m)
        if abs(d - 1.0) > _ATOL:
            raise LieDomainError(f"homography determinant {d} is not 1 within {_ATOL}")
        return
    # affine family: exact bottom row, invertible linear part
    if np.abs(m[2] - (0.0, 0.0, 1.0)).max() > _ATOL:
        raise LieDomainError(f"affine bottom row {m[2]} is not (0, 0, 1)")
    d2 = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if abs(d2) < 1e-12:
        raise LieDomainError("affine upper-left 2x2 block is singular")
    if spec.name == "translation":
        if np.abs(m[:2, :2] - np.eye(2)).max() > _ATOL:
            raise LieDomainError("translation element has a non-identity linear part")
    elif spec.name == "scaling":
        if (abs(m[0, 0] - m[1, 1]) > _ATOL or np.abs(m[[0, 1], [1, 0]]).max() > _ATOL
                or np.abs(m[:2, 2]).max() > _ATOL or m[0, 0] <= 0):
            raise LieDomainError("scaling element is not diag(a, a, 1) with a > 0")


def _validate_coords(xi, spec: GroupSpec) -> np.ndarray:
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (spec.dim,):
        raise LieDomainError(
            f"coordinate vector has shape {xi.shape}, expected ({spec.dim},)"
        )
    if not np.isfinite(xi).all():
        raise LieDomainError("coordinate vector contains non-finite entries")
    return xi


def to_matrix(xi, spec: GroupSpec) -> np.ndarray:
    """Expand algebra coordinates into the 3x3 matrix sum_i xi_i B_i."""
    xi = _validate_coords(xi, spec)
    return np.einsum("i,ijk->jk", xi, spec.basis)


def from_matrix(m: np.ndarray, spec: GroupSpec) -> np.ndarray:
    """Coordinates of an algebra matrix; raises if outside the span."""
    return _project(spec, np.asarray(m, dtype=np.float64))


# --- matrix exponential: scaling and squaring with a degree-13 Taylor core ---

_TAYLOR_ORDER = 13


def _expm_many(mats: np.ndarray) -> np.ndarray:
    """exp of a stack (..., 3, 3); accurate to ~1e-15 for our warp scales."""
    mats = np.asarray(mats, dtype=np.float64)
    norm = np.abs(mats).sum(axis=-1).max() if mats.size else 0.0
    s = max(0, int(np.ceil(np.log2(max(norm, 1e-300) / 0.5))))
    a = mats / (2.0 ** s)
    out = np.zeros_like(a)
    out[...] = np.eye(3)
    term = np.broadcast_to(np.eye(3), a.shape).copy()
    fac = 1.0
    for k in range(1, _TAYLOR_ORDER + 1):
        term = term @ a
        fac /= k
        out += fac * term
    for _ in range(s):
        out = out @ out
    return out


def exp_map(xi, spec: GroupSpec) -> GroupElement:
    """Matrix exponential of ``to_matrix(xi, spec)`` as a group element."""
    return GroupElement(_expm_many(to_matrix(xi, spec)), spec)


def _sqrtm_db(a: np.ndarray) -> np.ndarray:
    """Principal square root via Denman-Beavers; needs no eigenvalue on R<=0."""
    y, z = a, np.eye(3)
    for _ in range(30):
        y, z = 0.5 * (y + np.linalg.inv(z)), 0.5 * (z + np.linalg.inv(y))
        if np.abs(y @ y - a).max() < 1e-14:
            break
    return y


def log_map(u: GroupElement) -> np.ndarray:
    """Principal matrix logarithm, returned in basis coordinates.

    Inverse scaling-and-squaring: repeated Denman-Beavers square roots pull
    the matrix toward the identity, then a Mercator series finishes.  Only
    valid on the principal branch; the spectral radius of u - I must be
    below 1 and is checked explicitly.
    """
    m = u.matrix
    radius = np.abs(np.linalg.eigvals(m - np.eye(3))).max()
    if radius >= 1.0:
        raise LieDomainError(
            f"log_map: spectral radius of u - I is {radius:.4f} >= 1; "
            "element is outside the principal-branch region"
        )
    y = m
    k = 0
    while np.abs(y - np.eye(3)).max() > 0.25:
        y = _sqrtm_db(y)
        k += 1
        if k > 60:  # unreachable for valid inputs; guards an inv() blowup
            raise LieDomainError("log_map: square-root reduction failed to converge")
    e = y - np.eye(3)
    term = np.eye(3)
    acc = np.zeros((3, 3))
    for n in range(1, 40):
        term = term @ e
        acc += ((-1.0) ** (n + 1) / n) * term
    log_m = acc * (2.0 ** k)
    # strip fp dust so subgroup logs project cleanly
    if u.spec.name != "homography":
        log_m[2] = 0.0
    return from_matrix(log_m, u.spec)


def ad_matrix(xi, spec: GroupSpec) -> np.ndarray:
    """Matrix of ad_xi = [to_matrix(xi), .] in the ordered basis."""
    xi = _validate_coords(xi, spec)
    return np.einsum("i,ijk->jk", xi, spec._ad_basis)


def _ad_many(xis: np.ndarray, spec: GroupSpec) -> np.ndarray:
    return np.einsum("ni,ijk->njk", xis, spec._ad_basis)


def _dexp_series_many(ad: np.ndarray, terms: int) -> np.ndarray:
    """sum_{k=0..terms} (-1)^k/(k+1)! ad^k for a stack of ad matrices."""
    d = ad.shape[-1]
    out = np.zeros_like(ad)
    out[...] = np.eye(d)
    term = out.copy()
    coef = 1.0
    for k in range(1, terms + 1):
        term = term @ ad
        coef *= -1.0 / (k + 1)
        out += coef * term
    return out


def dexp_series(xi, spec: GroupSpec, terms: int = 20) -> np.ndarray:
    """Truncated power series sum_k (-1)^k/(k+1)! ad_xi^k.

    This is the left-trivialized derivative of the exponential map.  With
    the default 20 terms the truncation tail is below 1e-15 anywhere in
    the sampler's |xi| <= 1 operating region (factorial decay).
    """
    if terms < 1:
        raise LieDomainError("dexp_series needs terms >= 1")
    return _dexp_series_many(ad_matrix(xi, spec)[None], terms)[0]


def haar_density_many(xis: np.ndarray, spec: GroupSpec, terms: int = 20) -> np.ndarray:
    """Vectorized right-Haar density; raises on non-positive values."""
    xis = np.asarray(xis, dtype=np.float64)
    dens = np.linalg.det(_dexp_series_many(_ad_many(-xis, spec), terms))
    if np.any(dens <= 0.0) or not np.isfinite(dens).all():
        raise LieDomainError(
            "Haar density is not strictly positive on the requested points; "
            "the coordinate chart region is too large for this group"
        )
    return dens


def haar_density(xi, spec: GroupSpec) -> float:
    """Density of right Haar measure pulled back to algebra coordinates.

    Equal to det(dexp_series(-xi)); equals 1 at xi = 0 and stays strictly
    positive on the sampling region (enforced).
    """
    xi = _validate_coords(xi, spec)
    return float(haar_density_many(xi[None], spec))


def _act_many(mats: np.ndarray, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply a stack of elements (M,3,3) to points (P,2).

    Returns (images (M,P,2), denominators (M,P)).  Callers decide how to
    treat vanishing denominators.
    """
    pts = np.asarray(pts, dtype=np.float64)
    homog = np.concatenate([pts, np.ones((len(pts), 1))], axis=1)  # (P, 3)
    y = mats @ homog.T  # (M, 3, P)
    w = y[:, 2, :]
    safe = np.where(np.abs(w) < 1e-300, 1.0, w)
    return np.stack([y[:, 0, :] / safe, y[:, 1, :] / safe], axis=-1), w


def act_on_plane(u: GroupElement, x) -> np.ndarray:
    """Action of u on a plane point: homogeneous multiply, then dehomogenize.

    For affine-family elements this reduces to the familiar
    (u1 x1 + u2 x2 + u3, u4 x1 + u5 x2 + u6).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2,):
        raise LieDomainError(f"expected a plane point of shape (2,), got {x.shape}")
    img, w = _act_many(u.matrix[None], x[None])
    if abs(w[0, 0]) < 1e-12:
        raise PointAtInfinityError(
            f"homography sends point {x.tolist()} to infinity (denominator {w[0, 0]:.2e})"
        )
    return img[0, 0]


def action_jacobian_det(u: GroupElement, x) -> float:
    """det of the 2x2 derivative of y -> u . y at x.

    Closed form det(u) / w^3 with w the third homogeneous coordinate of
    u . x; for affine u this is the constant u1 u5 - u2 u4.
    """
    x = np.asarray(x, dtype=np.float64)
    homog = np.array([x[0], x[1], 1.0])
    w = float(u.matrix[2] @ homog)
    if abs(w) < 1e-12:
        raise PointAtInfinityError(
            f"action Jacobian undefined: point {x.tolist()} maps to infinity"
        )
    return float(np.linalg.det(u.matrix) / w**3)


def include_aff_in_hom(u: GroupElement) -> GroupElement:
    """Inclusion of the affine group into the homography group.

    Rescales by det(u)^(-1/3) so the result has unit determinant.  Only
    defined for det(u) > 0: a real cube root of a negative determinant
    does not exist, so orientation-reversing affine maps are rejected
    rather than silently complexified.
    """
    if u.spec is not AFFINE and u.spec.name not in ("translation", "scaling"):
        raise LieDomainError(f"inclusion expects an affine-family element, got {u.spec.name}")
    d = float(np.linalg.det(u.matrix))
    if d <= 0.0:
        raise LieDomainError(f"inclusion requires det > 0, got det = {d:.6g}")
    return GroupElement(d ** (-1.0 / 3.0) * u.matrix, HOMOGRAPHY)


def multiply(u: GroupElement, v: GroupElement) -> GroupElement:
    if u.spec != v.spec:
        raise LieDomainError(f"cannot multiply {u.spec.name} by {v.spec.name}")
    return GroupElement(u.matrix @ v.matrix, u.spec)


def inverse(u: GroupElement) -> GroupElement:
    return GroupElement(np.linalg.inv(u.matrix), u.spec)


def identity(spec: GroupSpec) -> GroupElement:
    return GroupElement(np.eye(3), spec)
