"""Command-line interface.

Subcommands: `register` estimates a similarity transform from a
correspondence file (or two PLY clouds plus an index-pair file, or a
built-in demo instance) and emits a JSON report; `bench` runs the
synthetic Monte Carlo harness; `gen` writes a synthetic instance plus its
ground truth for external tools. Exit codes: 0 success, 1 input error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import __version__
from .bench import BenchConfig, generate_instance, run_bench, summary_table
from .conic import SolverSettings
from .errors import InputError, NumericalError, TlsregError
from .fileio import (
    format_correspondences,
    parse_pairs,
    parse_ply_ascii,
    read_correspondences,
    report_to_json,
)
from .geometry import CorrespondenceSet, TlsParams, Transform, random_rotation
from .pipeline import PipelineConfig, register
from .tim_graph import Chain, Complete, RandomK


def _topology_from_args(name: str, degree: int, seed: int):
    if name == "complete":
        return Complete()
    if name == "chain":
        return Chain()
    if name == "random":
        return RandomK(degree=degree, seed=seed)
    raise InputError(f"unknown topology {name!r}")


def _demo_correspondences() -> CorrespondenceSet:
    """Fixed noiseless instance used by `register --demo`."""
    rng = np.random.default_rng(1234)
    source = rng.random((12, 3))
    gt = Transform(1.7, random_rotation(rng), np.array([0.3, -0.2, 0.5]))
    return CorrespondenceSet(source, gt.apply(source), np.full(12, 0.01))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlsreg",
        description="Robust similarity registration from point correspondences.",
    )
    parser.add_argument("--version", action="version", version=f"tlsreg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_reg = sub.add_parser("register", help="estimate a transform and emit a report")
    p_reg.add_argument("input", nargs="?", help="correspondence file (ax ay az bx by bz [beta])")
    p_reg.add_argument("--demo", action="store_true", help="run a built-in noiseless instance")
    p_reg.add_argument("--source-ply", help="source cloud (ASCII PLY); needs --target-ply and --pairs")
    p_reg.add_argument("--target-ply", help="target cloud (ASCII PLY)")
    p_reg.add_argument("--pairs", help="index-pair file (i j [beta]) joining the two clouds")
    p_reg.add_argument("--beta", type=float, default=None, help="default noise bound for rows without one")
    p_reg.add_argument("--cbar2", type=float, default=1.0, help="truncation threshold (default 1)")
    p_reg.add_argument("--known-scale", type=float, default=None, help="skip scale estimation")
    p_reg.add_argument("--topology", choices=["complete", "chain", "random"], default="complete")
    p_reg.add_argument("--random-degree", type=int, default=6, help="average degree for --topology random")
    p_reg.add_argument("--max-tims", type=int, default=40, help="cap on rotation measurements")
    p_reg.add_argument("--clique-budget", type=int, default=10_000_000)
    p_reg.add_argument("--seed", type=int, default=0)
    p_reg.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")
    p_reg.add_argument("--out", help="write the JSON report here instead of stdout")

    p_bench = sub.add_parser("bench", help="synthetic Monte Carlo benchmark")
    p_bench.add_argument("--n", type=int, default=50)
    p_bench.add_argument("--outlier-rate", type=float, default=0.0)
    p_bench.add_argument("--sigma", type=float, default=0.01)
    p_bench.add_argument("--beta", type=float, default=0.0554)
    p_bench.add_argument("--trials", type=int, default=40)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument(
        "--mode",
        choices=["full", "known_scale", "scale_only", "rotation_only", "translation_only"],
        default="full",
    )
    p_bench.add_argument("--cbar2", type=float, default=1.0)
    p_bench.add_argument("--max-tims", type=int, default=40)
    p_bench.add_argument("--timings", action="store_true", help="include per-trial timing in the JSON")
    p_bench.add_argument("--out", help="write the JSON summary here")

    p_gen = sub.add_parser("gen", help="write a synthetic instance and its ground truth")
    p_gen.add_argument("--n", type=int, default=50)
    p_gen.add_argument("--outlier-rate", type=float, default=0.0)
    p_gen.add_argument("--sigma", type=float, default=0.01)
    p_gen.add_argument("--beta", type=float, default=0.0554)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument(
        "--mode",
        choices=["full", "known_scale", "scale_only", "rotation_only", "translation_only"],
        default="full",
    )
    p_gen.add_argument("--out-prefix", required=True, help="files <prefix>_correspondences.txt and <prefix>_truth.json")
    return parser


def _load_register_input(args) -> CorrespondenceSet:
    chosen = [
        bool(args.input),
        bool(args.demo),
        bool(args.source_ply or args.target_ply or args.pairs),
    ]
    if sum(chosen) != 1:
        raise InputError(
            "give exactly one input: a correspondence file, --demo, or "
            "--source-ply/--target-ply/--pairs"
        )
    if args.demo:
        return _demo_correspondences()
    if args.input:
        return read_correspondences(args.input, default_beta=args.beta)
    if not (args.source_ply and args.target_ply and args.pairs):
        raise InputError("--source-ply, --target-ply and --pairs must be given together")
    with open(args.source_ply, "rb") as fh:
        source = parse_ply_ascii(fh.read())
    with open(args.target_ply, "rb") as fh:
        target = parse_ply_ascii(fh.read())
    with open(args.pairs, "r", encoding="utf-8") as fh:
        pairs, betas = parse_pairs(fh.read())
    if np.any(pairs[:, 0] >= source.shape[0]) or np.any(pairs[:, 1] >= target.shape[0]):
        raise InputError("pair index out of range for the given clouds")
    if betas is None:
        if args.beta is None:
            raise InputError("pairs file has no beta column; pass --beta")
        betas = np.full(pairs.shape[0], args.beta)
    return CorrespondenceSet(source[pairs[:, 0]], target[pairs[:, 1]], betas)


def _cmd_register(args) -> int:
    c = _load_register_input(args)
    cfg = PipelineConfig(
        tls=TlsParams(c_bar_sq=args.cbar2),
        topology=_topology_from_args(args.topology, args.random_degree, args.seed),
        known_scale=args.known_scale,
        max_rotation_tims=args.max_tims,
        clique_budget=args.clique_budget,
        seed=args.seed,
    )
    result = register(c, cfg)
    echo = {
        "cbar2": args.cbar2,
        "known_scale": args.known_scale,
        "topology": args.topology,
        "max_tims": args.max_tims,
        "seed": args.seed,
        "n_correspondences": len(c),
    }
    text = report_to_json(result, config_echo=echo, include_timings=args.timings)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_bench(args) -> int:
    cfg = BenchConfig(
        n_points=args.n,
        outlier_rate=args.outlier_rate,
        sigma=args.sigma,
        beta=args.beta,
        trials=args.trials,
        seed=args.seed,
        mode=args.mode,
        pipeline=PipelineConfig(
            tls=TlsParams(c_bar_sq=args.cbar2), max_rotation_tims=args.max_tims
        ),
    )
    records, summary = run_bench(cfg)
    doc = {
        "format_version": "1.0",
        "config": {
            "n_points": cfg.n_points,
            "outlier_rate": cfg.outlier_rate,
            "sigma": cfg.sigma,
            "beta": cfg.beta,
            "trials": cfg.trials,
            "seed": cfg.seed,
            "mode": cfg.mode,
            "cbar2": args.cbar2,
            "max_tims": args.max_tims,
        },
        "summary": summary,
        "trials": [r.to_dict() for r in records],
    }
    if not args.timings:
        doc["summary"].pop("elapsed", None)
        for rec in doc["trials"]:
            rec.pop("elapsed", None)
    text = json.dumps(doc, indent=2) + "\n"
    sys.stdout.write(summary_table(summary))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_gen(args) -> int:
    cfg = BenchConfig(
        n_points=args.n,
        outlier_rate=args.outlier_rate,
        sigma=args.sigma,
        beta=args.beta,
        seed=args.seed,
        mode=args.mode,
    )
    c, gt, mask = generate_instance(cfg)
    corr_path = f"{args.out_prefix}_correspondences.txt"
    truth_path = f"{args.out_prefix}_truth.json"
    with open(corr_path, "w", encoding="utf-8") as fh:
        fh.write(format_correspondences(c))
    truth = {
        "format_version": "1.0",
        "scale": gt.s,
        "rotation_row_major": [float(v) for v in gt.R.reshape(-1)],
        "translation": [float(v) for v in gt.t],
        "inlier_mask": [bool(v) for v in mask],
        "config": {
            "n_points": cfg.n_points,
            "outlier_rate": cfg.outlier_rate,
            "sigma": cfg.sigma,
            "beta": cfg.beta,
            "seed": cfg.seed,
            "mode": cfg.mode,
        },
    }
    with open(truth_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(truth, indent=2) + "\n")
    sys.stdout.write(f"wrote {corr_path} and {truth_path}\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse prints usage itself; normalize its exit code
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "register":
            return _cmd_register(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "gen":
            return _cmd_gen(args)
        raise InputError(f"unknown command {args.command!r}")
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
