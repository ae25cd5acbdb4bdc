"""Core geometric types: points, correspondences, similarity transforms.

Points are float64 arrays, one point per row for (N, 3) collections or a
flat (3,) vector for a single point. A similarity transform maps a source
point a to s * (R @ a) + t with s > 0 and R orthogonal. Reflections
(det R = -1) are representable and flagged, never silently repaired; how
to handle them is a pipeline decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TypeAlias

import numpy as np
from numpy.typing import NDArray

from .errors import InputError

Vec3: TypeAlias = NDArray[np.float64]
Mat3: TypeAlias = NDArray[np.float64]
Points: TypeAlias = NDArray[np.float64]

# Frobenius tolerance on R'R - I for constructed transforms. Rounded
# estimates coming out of the SDP stage satisfy this by construction.
ORTHOGONALITY_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_points(x, name: str = "points", min_rows: int = 1) -> Points:
    """Coerce to a finite float64 array of shape (N, 3)."""
    arr = np.array(x, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InputError(f"{name}: expected shape (N, 3), got {arr.shape}")
    if arr.shape[0] < min_rows:
        raise InputError(f"{name}: need at least {min_rows} rows, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: contains non-finite values")
    return arr


def as_point3(x, name: str = "point") -> Vec3:
    """Coerce to a finite float64 vector of shape (3,)."""
    arr = np.array(x, dtype=np.float64, copy=True).reshape(-1)
    if arr.shape != (3,):
        raise InputError(f"{name}: expected 3 components, got shape {np.shape(x)}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: contains non-finite values")
    return arr


def as_positive_vector(x, n: int, name: str = "values") -> NDArray[np.float64]:
    """Coerce to a finite, strictly positive float64 vector of length n."""
    arr = np.array(x, dtype=np.float64, copy=True)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise InputError(f"{name}: expected {n} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise InputError(f"{name}: entries must be finite and > 0")
    return arr


@dataclass(frozen=True)
class TlsParams:
    """Truncation threshold c_bar_sq for every truncated-least-squares stage."""

    c_bar_sq: float = 1.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.c_bar_sq) or self.c_bar_sq <= 0.0:
            raise InputError(f"c_bar_sq must be finite and > 0, got {self.c_bar_sq}")

    @property
    def c_bar(self) -> float:
        return float(np.sqrt(self.c_bar_sq))


@dataclass(frozen=True)
class CorrespondenceSet:
    """Putative point pairs (a_i, b_i) with per-pair noise bounds beta_i.

    The generative model is b_i = s*R*a_i + t + noise for inliers, with
    ||noise|| <= beta_i, and arbitrary b_i for outliers.
    """

    source: Points
    target: Points
    betas: NDArray[np.float64]

    def __post_init__(self) -> None:
        src = as_points(self.source, "source")
        dst = as_points(self.target, "target")
        if src.shape != dst.shape:
            raise InputError(
                f"source/target shape mismatch: {src.shape} vs {dst.shape}"
            )
        betas = as_positive_vector(self.betas, src.shape[0], "betas")
        object.__setattr__(self, "source", _freeze(src))
        object.__setattr__(self, "target", _freeze(dst))
        object.__setattr__(self, "betas", _freeze(betas))

    def __len__(self) -> int:
        return self.source.shape[0]

    def subset(self, indices) -> "CorrespondenceSet":
        idx = np.asarray(indices)
        return CorrespondenceSet(self.source[idx], self.target[idx], self.betas[idx])


@dataclass(frozen=True)
class Transform:
    """Similarity transform p -> s * R @ p + t with R in O(3).

    det_r records O(3) membership explicitly: +1 for a proper rotation,
    -1 for a reflection.
    """

    s: float
    R: Mat3
    t: Vec3
    det_r: float = field(init=False)

    def __post_init__(self) -> None:
        if not np.isfinite(self.s) or self.s <= 0.0:
            raise InputError(f"scale must be finite and > 0, got {self.s}")
        R = np.array(self.R, dtype=np.float64, copy=True)
        if R.shape != (3, 3) or not np.all(np.isfinite(R)):
            raise InputError("R must be a finite 3x3 matrix")
        err = np.linalg.norm(R.T @ R - np.eye(3))
        if err > ORTHOGONALITY_TOL:
            raise InputError(f"R is not orthogonal: ||R'R - I||_F = {err:.3e}")
        t = as_point3(self.t, "t")
        det = float(np.round(np.linalg.det(R)))
        object.__setattr__(self, "R", _freeze(R))
        object.__setattr__(self, "t", _freeze(t))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "det_r", det)

    @classmethod
    def identity(cls) -> "Transform":
        return cls(1.0, np.eye(3), np.zeros(3))

    @property
    def is_proper(self) -> bool:
        return self.det_r > 0.0

    def apply(self, points) -> Points:
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        out = self.s * np.atleast_2d(pts) @ self.R.T + self.t
        return out[0] if single else out

    def inverse(self) -> "Transform":
        Rt = self.R.T
        return Transform(1.0 / self.s, Rt, -(Rt @ self.t) / self.s)

    def matrix(self) -> NDArray[np.float64]:
        """Homogeneous 4x4 matrix acting on column vectors [p; 1]."""
        m = np.eye(4)
        m[:3, :3] = self.s * self.R
        m[:3, 3] = self.t
        return m


def apply_transform(transform: Transform, points) -> Points:
    """Apply s * R @ p + t to one point or to rows of an (N, 3) array."""
    return transform.apply(points)


def rotation_geodesic_error(r_est, r_gt) -> float:
    """Geodesic distance |arccos((trace(R_gt' R_est) - 1) / 2)| in radians.

    The arccos argument is clamped to [-1, 1] so that round-off near 0 or
    pi cannot produce NaN.
    """
    r_est = np.asarray(r_est, dtype=np.float64)
    r_gt = np.asarray(r_gt, dtype=np.float64)
    for name, r in (("r_est", r_est), ("r_gt", r_gt)):
        if r.shape != (3, 3):
            raise InputError(f"{name}: expected a 3x3 matrix, got {r.shape}")
        if np.linalg.norm(r.T @ r - np.eye(3)) > 1e-6:
            raise InputError(f"{name}: not orthogonal within 1e-6")
    c = (np.trace(r_gt.T @ r_est) - 1.0) / 2.0
    return float(abs(np.arccos(np.clip(c, -1.0, 1.0))))


def random_rotation(rng: np.random.Generator) -> Mat3:
    """Uniformly distributed rotation matrix (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    # fix the QR sign ambiguity, then force det +1
    d = np.sign(np.diag(r))
    d[d == 0.0] = 1.0
    q = q * d
    if np.linalg.det(q) < 0.0:
        q[:, 0] = -q[:, 0]
    return q
