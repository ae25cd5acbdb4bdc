"""Synthetic Monte Carlo benchmark harness.

Instances follow a fixed protocol: source points uniform in the unit cube,
a random similarity transform (scale in [1, 5], translation norm <= 1),
isotropic Gaussian noise rejection-sampled to respect the noise bound, and
a fraction of targets replaced by uniform draws from a large sphere. Modes
restrict the transform so individual stages can be measured in isolation.
Each trial gets a seed derived from the master seed and the trial index
through numpy's SeedSequence (a counter-hash), so runs are reproducible
and trials independent.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .clique import prune_by_scale
from .errors import InputError, NoModelFound, TlsregError
from .geometry import (
    CorrespondenceSet,
    Transform,
    random_rotation,
    rotation_geodesic_error,
)
from .pipeline import PipelineConfig, RegistrationResult, register
from .scalar_tls import ScalarMeasurementSet, solve_scalar_tls
from .tim_graph import build_tim_graph
from .translation import TranslationProblem, solve_translation

MODES = ("full", "known_scale", "scale_only", "rotation_only", "translation_only")


@dataclass
class BenchConfig:
    """Protocol parameters; defaults reproduce the reference setup."""

    n_points: int = 50
    outlier_rate: float = 0.0
    sigma: float = 0.01
    beta: float = 0.0554
    scale_low: float = 1.0
    scale_high: float = 5.0
    translation_bound: float = 1.0
    outlier_radius: float = 5.0
    trials: int = 40
    seed: int = 0
    mode: str = "full"
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self) -> None:
        if self.n_points < 3:
            raise InputError(f"n_points must be >= 3, got {self.n_points}")
        if not 0.0 <= self.outlier_rate < 1.0:
            raise InputError(f"outlier_rate must be in [0, 1), got {self.outlier_rate}")
        if self.sigma <= 0.0 or self.beta <= 0.0:
            raise InputError("sigma and beta must be > 0")
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.scale_low <= self.scale_high:
            raise InputError("need 0 < scale_low <= scale_high")
        if self.trials < 1:
            raise InputError("trials must be >= 1")


@dataclass
class TrialRecord:
    """Per-trial metrics; NaN marks quantities a mode does not produce."""

    trial: int
    seed: int
    scale_error: float = math.nan
    rotation_error: float = math.nan
    translation_error: float = math.nan
    stable_rank: float = math.nan
    tight: bool | None = None
    pre_mcis_outlier_ratio: float = math.nan
    post_mcis_outlier_ratio: float = math.nan
    elapsed: float = math.nan
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "seed": self.seed,
            "scale_error": self.scale_error,
            "rotation_error": self.rotation_error,
            "translation_error": self.translation_error,
            "stable_rank": self.stable_rank,
            "tight": self.tight,
            "pre_mcis_outlier_ratio": self.pre_mcis_outlier_ratio,
            "post_mcis_outlier_ratio": self.post_mcis_outlier_ratio,
            "elapsed": self.elapsed,
            "error": self.error,
        }


def trial_seed(master_seed: int, trial: int) -> int:
    """Derived per-trial seed: hash of (master seed, trial counter)."""
    return int(np.random.SeedSequence([master_seed, trial]).generate_state(1)[0])


def _sample_in_ball(rng: np.random.Generator, n: int, radius: float) -> NDArray[np.float64]:
    direction = rng.standard_normal((n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / 3.0)
    return direction * r[:, None]


def _truncated_noise(
    rng: np.random.Generator, n: int, sigma: float, beta: float
) -> NDArray[np.float64]:
    """N(0, sigma^2 I3) draws, resampled until every norm is <= beta."""
    eps = rng.normal(0.0, sigma, size=(n, 3))
    bad = np.linalg.norm(eps, axis=1) > beta
    while np.any(bad):
        eps[bad] = rng.normal(0.0, sigma, size=(int(bad.sum()), 3))
        bad = np.linalg.norm(eps, axis=1) > beta
    return eps


def _sample_transform(cfg: BenchConfig, rng: np.random.Generator) -> Transform:
    if cfg.mode in ("full", "scale_only"):
        s = float(rng.uniform(cfg.scale_low, cfg.scale_high))
    else:
        s = 1.0
    r = np.eye(3) if cfg.mode == "translation_only" else random_rotation(rng)
    if cfg.mode == "rotation_only":
        t = np.zeros(3)
    else:
        t = _sample_in_ball(rng, 1, cfg.translation_bound)[0]
    return Transform(s, r, t)


def generate_instance(
    cfg: BenchConfig, seed: int | None = None
) -> tuple[CorrespondenceSet, Transform, NDArray[np.bool_]]:
    """One synthetic instance: correspondences, true transform, inlier mask."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    a = rng.random((cfg.n_points, 3))
    gt = _sample_transform(cfg, rng)
    b = gt.apply(a) + _truncated_noise(rng, cfg.n_points, cfg.sigma, cfg.beta)
    n_out = int(cfg.outlier_rate * cfg.n_points)
    inlier_mask = np.ones(cfg.n_points, dtype=bool)
    if n_out:
        out_idx = rng.choice(cfg.n_points, size=n_out, replace=False)
        b[out_idx] = _sample_in_ball(rng, n_out, cfg.outlier_radius)
        inlier_mask[out_idx] = False
    betas = np.full(cfg.n_points, cfg.beta)
    return CorrespondenceSet(a, b, betas), gt, inlier_mask


def _edge_outlier_ratio(edges: NDArray[np.int64], inlier_mask: NDArray[np.bool_]) -> float:
    """Fraction of edges touching at least one outlier correspondence."""
    if edges.shape[0] == 0:
        return math.nan
    good = inlier_mask[edges[:, 0]] & inlier_mask[edges[:, 1]]
    return float(1.0 - good.mean())


def _run_trial(cfg: BenchConfig, trial: int) -> TrialRecord:
    seed = trial_seed(cfg.seed, trial)
    rec = TrialRecord(trial=trial, seed=seed)
    c, gt, inlier_mask = generate_instance(cfg, seed)
    c_bar_sq = cfg.pipeline.tls.c_bar_sq
    t0 = time.perf_counter()
    try:
        if cfg.mode == "scale_only":
            graph = build_tim_graph(c, cfg.pipeline.topology)
            sol = solve_scalar_tls(
                ScalarMeasurementSet(
                    values=graph.trim, alphas=graph.alpha, c_bar=cfg.pipeline.tls.c_bar
                )
            )
            rec.scale_error = abs(sol.estimate - gt.s)
        elif cfg.mode == "translation_only":
            # scale and rotation are identity by construction in this mode
            sol = solve_translation(
                TranslationProblem(
                    residual_points=c.target - c.source,
                    betas=c.betas,
                    c_bar_sq=c_bar_sq,
                )
            )
            rec.translation_error = float(np.linalg.norm(sol.t_hat - gt.t))
        else:
            pipe_cfg = cfg.pipeline
            if cfg.mode in ("known_scale", "rotation_only"):
                pipe_cfg = replace(pipe_cfg, known_scale=1.0)
            result = register(c, pipe_cfg)
            rec.scale_error = abs(result.transform.s - gt.s)
            rec.rotation_error = rotation_geodesic_error(result.transform.R, gt.R)
            rec.translation_error = float(np.linalg.norm(result.transform.t - gt.t))
            rec.stable_rank = result.rotation_cert.stable_rank
            rec.tight = result.rotation_cert.tight
            rec.pre_mcis_outlier_ratio, rec.post_mcis_outlier_ratio = _mcis_ratios(
                c, result, inlier_mask, c_bar_sq, cfg
            )
    except TlsregError as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.elapsed = time.perf_counter() - t0
    return rec


def _mcis_ratios(
    c: CorrespondenceSet,
    result: RegistrationResult,
    inlier_mask: NDArray[np.bool_],
    c_bar_sq: float,
    cfg: BenchConfig,
) -> tuple[float, float]:
    """Outlier ratio among the edges before and after clique restriction."""
    graph = build_tim_graph(c, cfg.pipeline.topology)
    pruned = prune_by_scale(graph, result.transform.s, c_bar_sq)
    pre = _edge_outlier_ratio(pruned.edges, inlier_mask)
    post = _edge_outlier_ratio(result.clique.clique_edges, inlier_mask)
    return pre, post


_METRICS = (
    "scale_error",
    "rotation_error",
    "translation_error",
    "stable_rank",
    "pre_mcis_outlier_ratio",
    "post_mcis_outlier_ratio",
    "elapsed",
)


def summarize(records: list[TrialRecord]) -> dict:
    """Median / quartiles / max per metric over trials that produced it."""
    out: dict = {"n_trials": len(records)}
    out["n_failed"] = sum(1 for r in records if r.error is not None)
    for name in _METRICS:
        vals = np.array(
            [getattr(r, name) for r in records if not math.isnan(getattr(r, name))]
        )
        if vals.size == 0:
            out[name] = None
            continue
        q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0])
        out[name] = {
            "median": float(med),
            "q1": float(q1),
            "q3": float(q3),
            "max": float(vals.max()),
        }
    tights = [r.tight for r in records if r.tight is not None]
    out["tight_fraction"] = (
        float(np.mean([1.0 if t else 0.0 for t in tights])) if tights else None
    )
    return out


def run_bench(cfg: BenchConfig) -> tuple[list[TrialRecord], dict]:
    """Run cfg.trials independent trials and summarize them."""
    records = [_run_trial(cfg, t) for t in range(cfg.trials)]
    return records, summarize(records)


def summary_table(summary: dict) -> str:
    """Aligned-column text rendering of a summary dict."""
    lines = [f"{'metric':<26} {'median':>12} {'q1':>12} {'q3':>12} {'max':>12}"]
    for name in _METRICS:
        stats = summary.get(name)
        if stats is None:
            continue
        lines.append(
            f"{name:<26} {stats['median']:>12.6g} {stats['q1']:>12.6g} "
            f"{stats['q3']:>12.6g} {stats['max']:>12.6g}"
        )
    lines.append(
        f"trials {summary['n_trials']}, failed {summary['n_failed']}, "
        f"tight fraction {summary['tight_fraction']}"
    )
    return "\n".join(lines) + "\n"


# -- closed-form similarity and the RANSAC baseline ----------------------------


def horn_similarity(source, target) -> Transform:
    """Closed-form least-squares similarity (SVD of the cross-covariance).

    Exact on noiseless data; used by the RANSAC baseline and sanity checks,
    not by the robust pipeline.
    """
    src = np.asarray(source, dtype=np.float64)
    dst = np.asarray(target, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3 or src.shape[0] < 3:
        raise InputError("horn_similarity needs matching (N>=3, 3) arrays")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    sc = src - mu_s
    dc = dst - mu_d
    h = dc.T @ sc
    u, sing, vt = np.linalg.svd(h)
    # collinear or coincident samples leave the rotation underdetermined
    if sing[1] <= 1e-12 * max(sing[0], 1e-300):
        raise NoModelFound("degenerate sample: points are (nearly) collinear")
    d = np.sign(np.linalg.det(u @ vt))
    corr = np.array([1.0, 1.0, d])
    r = (u * corr) @ vt
    denom = float(np.sum(sc**2))
    s = float((sing * corr).sum()) / denom
    if s <= 0.0 or not np.isfinite(s):
        raise NoModelFound("degenerate sample: non-positive scale")
    t = mu_d - s * r @ mu_s
    return Transform(s, r, t)


def baseline_ransac(
    c: CorrespondenceSet,
    iterations: int = 1000,
    seed: int = 0,
    c_bar: float = 1.0,
) -> Transform:
    """Classic 3-point minimal-solver RANSAC with per-pair inlier thresholds.

    A candidate similarity is fit to each random 3-subset; pairs with
    ||b_i - s R a_i - t|| <= beta_i * c_bar count as inliers; the best
    model is refit on its inlier set.
    """
    n = len(c)
    if n < 3:
        raise InputError(f"need at least 3 correspondences, got {n}")
    rng = np.random.default_rng(seed)
    thresholds = c.betas * c_bar
    best_count = 0
    best_inliers: NDArray[np.int64] | None = None
    for _ in range(iterations):
        idx = rng.choice(n, size=3, replace=False)
        try:
            model = horn_similarity(c.source[idx], c.target[idx])
        except NoModelFound:
            continue
        resid = np.linalg.norm(c.target - model.apply(c.source), axis=1)
        inliers = resid <= thresholds
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = np.flatnonzero(inliers)
    if best_inliers is None or best_count < 3:
        raise NoModelFound(
            f"no model with >= 3 inliers found in {iterations} iterations"
        )
    return horn_similarity(c.source[best_inliers], c.target[best_inliers])
