"""Benchmark harness: instance protocol, metrics, baselines."""

import math

import numpy as np
import pytest

from tlsreg.bench import (
    BenchConfig,
    TrialRecord,
    baseline_ransac,
    generate_instance,
    horn_similarity,
    run_bench,
    summarize,
    summary_table,
    trial_seed,
)
from tlsreg.errors import InputError, NoModelFound
from tlsreg.geometry import CorrespondenceSet, geodesic_error, random_rotation
from tlsreg.pipeline import PipelineConfig


def test_config_validation():
    with pytest.raises(InputError):
        BenchConfig(n_points=2)
    with pytest.raises(InputError):
        BenchConfig(outlier_rate=1.0)
    with pytest.raises(InputError):
        BenchConfig(outlier_rate=-0.1)
    with pytest.raises(InputError):
        BenchConfig(sigma=0.0)
    with pytest.raises(InputError):
        BenchConfig(beta=-1.0)
    with pytest.raises(InputError):
        BenchConfig(mode="fast")
    with pytest.raises(InputError):
        BenchConfig(scale_low=3.0, scale_high=2.0)
    with pytest.raises(InputError):
        BenchConfig(trials=0)


def test_trial_seeds_deterministic_and_distinct():
    seeds = [trial_seed(7, t) for t in range(20)]
    assert seeds == [trial_seed(7, t) for t in range(20)]
    assert len(set(seeds)) == 20
    assert trial_seed(8, 0) != trial_seed(7, 0)


def test_instance_protocol():
    cfg = BenchConfig(n_points=40, outlier_rate=0.25, sigma=0.01, beta=0.0554)
    c, gt, mask = generate_instance(cfg, seed=123)
    assert len(c) == 40
    assert mask.sum() == 30  # int(0.25 * 40) = 10 outliers
    assert 1.0 <= gt.s <= 5.0
    assert np.linalg.norm(gt.t) <= 1.0
    # inliers respect the noise bound, outliers live in the big ball
    resid = np.linalg.norm(c.target - gt.apply(c.source), axis=1)
    assert np.all(resid[mask] <= cfg.beta + 1e-12)
    assert np.all(np.linalg.norm(c.target[~mask], axis=1) <= cfg.outlier_radius)
    assert np.all(c.betas == cfg.beta)
    # same seed, same instance; different seed, different instance
    c2, gt2, mask2 = generate_instance(cfg, seed=123)
    assert np.array_equal(c.source, c2.source)
    assert np.array_equal(c.target, c2.target)
    assert gt2.s == gt.s
    c3, _, _ = generate_instance(cfg, seed=124)
    assert not np.array_equal(c.target, c3.target)


def test_mode_specific_transforms():
    base = dict(n_points=10, sigma=0.001, beta=0.01)
    _, gt, _ = generate_instance(BenchConfig(mode="known_scale", **base), seed=1)
    assert gt.s == 1.0
    _, gt, _ = generate_instance(BenchConfig(mode="rotation_only", **base), seed=1)
    assert gt.s == 1.0
    assert np.all(gt.t == 0.0)
    _, gt, _ = generate_instance(BenchConfig(mode="translation_only", **base), seed=1)
    assert np.array_equal(gt.R, np.eye(3))
    _, gt, _ = generate_instance(BenchConfig(mode="scale_only", **base), seed=1)
    assert 1.0 <= gt.s <= 5.0


def test_horn_similarity_exact_on_clean_data():
    rng = np.random.default_rng(5)
    r = random_rotation(rng)
    s, t = 2.3, np.array([0.4, -1.2, 0.9])
    src = rng.normal(size=(12, 3))
    tgt = s * src @ r.T + t
    est = horn_similarity(src, tgt)
    assert abs(est.s - s) < 1e-10
    assert geodesic_error(est.R, r) < 1e-10
    assert np.linalg.norm(est.t - t) < 1e-10
    assert est.det_r == 1.0


def test_horn_similarity_degenerate_and_invalid():
    line = np.outer(np.arange(4, dtype=float), np.ones(3))
    with pytest.raises(NoModelFound):
        horn_similarity(line, 2.0 * line)
    with pytest.raises(InputError):
        horn_similarity(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(InputError):
        horn_similarity(np.zeros((4, 3)), np.zeros((5, 3)))


def test_ransac_baseline_recovers_under_outliers():
    rng = np.random.default_rng(9)
    r = random_rotation(rng)
    s, t = 1.8, np.array([0.2, 0.5, -0.3])
    src = rng.random((30, 3))
    tgt = s * src @ r.T + t + rng.normal(0.0, 1e-3, size=(30, 3))
    tgt[:8] = rng.uniform(-5.0, 5.0, size=(8, 3))
    c = CorrespondenceSet(src, tgt, np.full(30, 5e-3))
    est = baseline_ransac(c, iterations=500, seed=3)
    assert abs(est.s - s) < 0.01
    assert geodesic_error(est.R, r) < 0.01
    assert np.linalg.norm(est.t - t) < 0.02
    with pytest.raises(InputError):
        baseline_ransac(CorrespondenceSet(src[:2], tgt[:2], np.full(2, 1e-3)))


def test_run_bench_scale_only_reproducible():
    cfg = BenchConfig(
        n_points=30, outlier_rate=0.2, trials=6, seed=11, mode="scale_only"
    )
    records, summary = run_bench(cfg)
    assert len(records) == 6
    assert summary["n_trials"] == 6
    assert summary["n_failed"] == 0
    assert summary["scale_error"]["median"] <= 0.05
    # modes fill only their own metrics
    assert all(math.isnan(r.rotation_error) for r in records)
    assert summary["rotation_error"] is None
    _, summary2 = run_bench(cfg)
    assert summary2["scale_error"] == summary["scale_error"]


def test_run_bench_translation_only():
    cfg = BenchConfig(
        n_points=40, outlier_rate=0.3, trials=5, seed=2, mode="translation_only"
    )
    records, summary = run_bench(cfg)
    assert summary["n_failed"] == 0
    assert summary["translation_error"]["median"] <= 0.05
    assert summary["scale_error"] is None


def test_run_bench_full_mode_smoke():
    cfg = BenchConfig(
        n_points=10,
        outlier_rate=0.2,
        sigma=0.005,
        beta=0.0277,
        trials=1,
        seed=4,
        mode="full",
        pipeline=PipelineConfig(max_rotation_tims=8),
    )
    records, summary = run_bench(cfg)
    rec = records[0]
    assert rec.error is None
    assert rec.scale_error < 0.05
    assert rec.rotation_error < 0.05
    assert rec.translation_error < 0.1
    assert rec.stable_rank <= 3.05
    assert rec.tight
    assert rec.post_mcis_outlier_ratio == 0.0
    assert rec.elapsed > 0.0
    assert summary["tight_fraction"] == 1.0


def test_summarize_and_table_shapes():
    recs = [
        TrialRecord(trial=0, seed=1, scale_error=0.1, elapsed=1.0),
        TrialRecord(trial=1, seed=2, scale_error=0.3, elapsed=2.0),
        TrialRecord(trial=2, seed=3, scale_error=0.2, elapsed=3.0, error="boom"),
        TrialRecord(trial=3, seed=4, scale_error=0.4, elapsed=4.0, tight=True),
    ]
    summary = summarize(recs)
    assert summary["n_trials"] == 4
    assert summary["n_failed"] == 1
    assert summary["scale_error"]["median"] == pytest.approx(0.25)
    assert summary["scale_error"]["max"] == pytest.approx(0.4)
    assert summary["rotation_error"] is None
    assert summary["tight_fraction"] == 1.0
    text = summary_table(summary)
    assert "metric" in text.splitlines()[0]
    assert "scale_error" in text
    assert "rotation_error" not in text
    assert text.rstrip().endswith("tight fraction 1.0")
