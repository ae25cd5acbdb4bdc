"""Scikit-learn style estimator facade over the registration pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .conic import SolverSettings
from .errors import InputError
from .geometry import CorrespondenceSet, TlsParams
from .pipeline import PipelineConfig, register
from .tim_graph import Chain, Complete, RandomK


class TlsRegistration(TransformerMixin, BaseEstimator):
    """Robust similarity-transform estimator with outlier rejection.

    fit(X, y) estimates scale, rotation, and translation mapping source
    points X to target points y, tolerating a large fraction of gross
    outlier pairs; transform(X) applies the fitted map. Truncated least
    squares drives every stage, and the rotation comes with a per-instance
    optimality certificate (see `certificate_`).

    Parameters
    ----------
    noise_bound : float or array-like, required at fit
        Per-correspondence bound on the inlier noise norm (beta).
    c_bar_sq : float, default 1.0
        Truncation threshold of the robust cost.
    known_scale : float, optional
        Fix the scale instead of estimating it.
    topology : {"complete", "chain", "random"}, default "complete"
        Pairwise measurement graph over the correspondences.
    random_degree : int, default 6
        Average degree when topology="random".
    max_rotation_tims : int, default 40
        Cap on pairwise measurements in the semidefinite rotation stage.
    clique_budget : int, default 10_000_000
        Node-expansion budget for the exact maximum-clique search.
    seed : int, default 0
        Seed for the random topology and heuristic fallbacks.
    solver_feas_tol, solver_gap_tol : float
        Semidefinite solver tolerances.
    solver_max_iters : int
        Semidefinite solver iteration cap.

    Attributes
    ----------
    scale_ : float
    rotation_ : (3, 3) ndarray
    translation_ : (3,) ndarray
    transform_ : Transform
    certificate_ : RotationCertificate
    inlier_indices_ : ndarray of joint translation inliers
    result_ : RegistrationResult with every stage's evidence
    """

    def __init__(
        self,
        noise_bound=None,
        c_bar_sq: float = 1.0,
        known_scale: float | None = None,
        topology: str = "complete",
        random_degree: int = 6,
        max_rotation_tims: int = 40,
        clique_budget: int = 10_000_000,
        seed: int = 0,
        solver_feas_tol: float = 1e-7,
        solver_gap_tol: float = 1e-6,
        solver_max_iters: int = 50_000,
    ):
        self.noise_bound = noise_bound
        self.c_bar_sq = c_bar_sq
        self.known_scale = known_scale
        self.topology = topology
        self.random_degree = random_degree
        self.max_rotation_tims = max_rotation_tims
        self.clique_budget = clique_budget
        self.seed = seed
        self.solver_feas_tol = solver_feas_tol
        self.solver_gap_tol = solver_gap_tol
        self.solver_max_iters = solver_max_iters

    def _topology(self):
        if self.topology == "complete":
            return Complete()
        if self.topology == "chain":
            return Chain()
        if self.topology == "random":
            return RandomK(degree=self.random_degree, seed=self.seed)
        raise InputError(f"unknown topology {self.topology!r}")

    def fit(self, X, y):
        """Estimate the transform mapping source points X to target points y."""
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64)
        if X.shape[1] != 3 or y.shape[1] != 3:
            raise InputError("points must have 3 columns")
        if X.shape != y.shape:
            raise InputError(f"source/target shape mismatch: {X.shape} vs {y.shape}")
        if self.noise_bound is None:
            raise InputError(
                "noise_bound must be set: the per-pair inlier noise norm bound"
            )
        betas = np.broadcast_to(
            np.asarray(self.noise_bound, dtype=np.float64), (X.shape[0],)
        ).copy()
        c = CorrespondenceSet(X, y, betas)
        cfg = PipelineConfig(
            tls=TlsParams(c_bar_sq=self.c_bar_sq),
            topology=self._topology(),
            known_scale=self.known_scale,
            max_rotation_tims=self.max_rotation_tims,
            solver=SolverSettings(
                feas_tol=self.solver_feas_tol,
                gap_tol=self.solver_gap_tol,
                max_iters=self.solver_max_iters,
            ),
            clique_budget=self.clique_budget,
            seed=self.seed,
        )
        result = register(c, cfg)
        self.result_ = result
        self.transform_ = result.transform
        self.scale_ = result.transform.s
        self.rotation_ = result.transform.R
        self.translation_ = result.transform.t
        self.certificate_ = result.rotation_cert
        self.inlier_indices_ = result.translation.joint_inliers
        self.n_features_in_ = 3
        return self

    def transform(self, X):
        """Apply the fitted similarity transform to points X."""
        check_is_fitted(self, "transform_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 3:
            raise InputError("points must have 3 columns")
        return self.transform_.apply(X)

    def inverse_transform(self, X):
        """Map points back from the target frame to the source frame."""
        check_is_fitted(self, "transform_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 3:
            raise InputError("points must have 3 columns")
        return self.transform_.inverse().apply(X)

    def score(self, X, y):
        """Fraction of pairs within their noise bound under the fitted map."""
        check_is_fitted(self, "transform_")
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64)
        betas = np.broadcast_to(
            np.asarray(self.noise_bound, dtype=np.float64), (X.shape[0],)
        )
        resid = np.linalg.norm(y - self.transform_.apply(X), axis=1)
        return float(np.mean(resid <= betas * np.sqrt(self.c_bar_sq)))
