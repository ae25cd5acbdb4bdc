"""Component-wise robust translation estimation.

With scale and rotation fixed, each residual point r_i = b_i - s*R*a_i
equals t + noise for inliers. Estimating each coordinate of t by scalar
truncated least squares with bound beta_i relaxes the Euclidean noise ball
to its bounding box (axis bound beta_i per component), so every true inlier
stays an inlier of all three component problems. The joint inlier set
reported here is the intersection of the three component consensus sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .errors import InputError
from .geometry import _freeze, as_points, as_positive_vector
from .scalar_tls import ScalarMeasurementSet, ScalarTlsSolution, solve_scalar_tls


@dataclass(frozen=True)
class TranslationProblem:
    """Residual points b_i - s_hat * R_hat @ a_i with their noise bounds."""

    residual_points: NDArray[np.float64]
    betas: NDArray[np.float64]
    c_bar_sq: float = 1.0

    def __post_init__(self) -> None:
        pts = as_points(self.residual_points, "residual_points")
        betas = as_positive_vector(self.betas, pts.shape[0], "betas")
        if not np.isfinite(self.c_bar_sq) or self.c_bar_sq <= 0.0:
            raise InputError(f"c_bar_sq must be finite and > 0, got {self.c_bar_sq}")
        object.__setattr__(self, "residual_points", _freeze(pts))
        object.__setattr__(self, "betas", _freeze(betas))

    @property
    def n(self) -> int:
        return self.residual_points.shape[0]


class TranslationResult(NamedTuple):
    t_hat: NDArray[np.float64]
    component_consensus: tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]]
    joint_inliers: NDArray[np.int64]
    component_solutions: tuple[ScalarTlsSolution, ScalarTlsSolution, ScalarTlsSolution]


def solve_translation(p: TranslationProblem) -> TranslationResult:
    """Solve the three coordinates independently and intersect their inliers."""
    c_bar = float(np.sqrt(p.c_bar_sq))
    solutions = tuple(
        solve_scalar_tls(
            ScalarMeasurementSet(
                values=p.residual_points[:, j], alphas=p.betas, c_bar=c_bar
            )
        )
        for j in range(3)
    )
    t_hat = np.array([s.estimate for s in solutions])
    consensus = tuple(s.consensus for s in solutions)
    joint = reduce(np.intersect1d, consensus).astype(np.int64)
    return TranslationResult(
        t_hat=t_hat,
        component_consensus=consensus,
        joint_inliers=joint,
        component_solutions=solutions,
    )
