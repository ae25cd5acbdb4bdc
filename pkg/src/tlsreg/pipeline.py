"""The decoupled registration cascade.

Scale, rotation, and translation are estimated in sequence, each by a
robust subproblem on measurements invariant to the still-unknown parts:
pairwise ratio voting fixes the scale, the scale-consistent maximum clique
prunes outlier pairs, a certified semidefinite relaxation recovers the
rotation from the surviving pairwise differences, and component-wise
scalar voting recovers the translation from all original correspondences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .clique import CliqueResult, max_clique, prune_by_scale, restrict_graph
from .conic import SolverSettings
from .errors import InputError, NumericalFailure, TooFewCorrespondences
from .geometry import CorrespondenceSet, TlsParams, Transform
from .rotation import (
    RotationCertificate,
    RotationProblem,
    SdpSolution,
    assemble_qbar,
    build_sdp,
    lift,
    local_rotation_guess,
    round_and_certify,
    solve_sdp,
)
from .scalar_tls import ScalarMeasurementSet, ScalarTlsSolution, solve_scalar_tls
from .tim_graph import Complete, GraphTopology, build_tim_graph
from .translation import TranslationProblem, TranslationResult, solve_translation


@dataclass
class PipelineConfig:
    """Everything register() needs besides the data.

    known_scale skips scale voting (pruning still runs at that scale).
    max_rotation_tims caps the number of pairwise measurements handed to
    the semidefinite stage, keeping the ones with the smallest noise-to-
    length ratio alpha; the cap is applied after clique restriction, never
    before scale voting. warm_start seeds the semidefinite solver with the
    lifted point of a fast local estimate, which shortens solves without
    changing what they converge to.
    """

    tls: TlsParams = field(default_factory=TlsParams)
    topology: GraphTopology = field(default_factory=Complete)
    known_scale: float | None = None
    max_rotation_tims: int = 40
    solver: SolverSettings = field(default_factory=SolverSettings)
    warm_start: bool = True
    clique_budget: int = 10_000_000
    seed: int = 0
    degenerate_edge_policy: str = "drop"
    rank_tol: float = 0.05


@dataclass
class RegistrationResult:
    """Estimated transform plus every stage's evidence.

    scale_solution is None in known-scale mode. translation carries the
    three component consensus sets and their intersection. timings are
    wall-clock seconds per stage.
    """

    transform: Transform
    scale_solution: ScalarTlsSolution | None
    clique: CliqueResult
    rotation_cert: RotationCertificate
    sdp_solution: SdpSolution
    translation: TranslationResult
    timings: dict[str, float]
    warnings: list[str]


def register(c: CorrespondenceSet, cfg: PipelineConfig | None = None) -> RegistrationResult:
    """Run the full cascade on a correspondence set."""
    cfg = cfg or PipelineConfig()
    if len(c) < 3:
        raise TooFewCorrespondences(f"need at least 3 correspondences, got {len(c)}")
    if cfg.known_scale is not None and (
        not np.isfinite(cfg.known_scale) or cfg.known_scale <= 0.0
    ):
        raise InputError(f"known_scale must be finite and > 0, got {cfg.known_scale}")

    warnings: list[str] = []
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    graph = build_tim_graph(c, cfg.topology, cfg.degenerate_edge_policy)
    timings["graph"] = time.perf_counter() - t0
    if graph.n_dropped:
        warnings.append(f"dropped {graph.n_dropped} degenerate edge(s)")

    c_bar_sq = cfg.tls.c_bar_sq

    t0 = time.perf_counter()
    scale_solution: ScalarTlsSolution | None = None
    if cfg.known_scale is not None:
        s_hat = float(cfg.known_scale)
    else:
        scale_solution = solve_scalar_tls(
            ScalarMeasurementSet(
                values=graph.trim, alphas=graph.alpha, c_bar=cfg.tls.c_bar
            )
        )
        s_hat = scale_solution.estimate
        if scale_solution.consensus.size <= 1:
            warnings.append(
                "scale consensus is trivial (<= 1 measurement); proceeding anyway"
            )
    timings["scale"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pruned = prune_by_scale(graph, s_hat, c_bar_sq)
    clique = max_clique(pruned, budget=cfg.clique_budget, seed=cfg.seed)
    if clique.method == "greedy":
        warnings.append("clique search hit its expansion budget; used greedy fallback")
    restricted = restrict_graph(graph, clique)
    timings["clique"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if restricted.n_edges > cfg.max_rotation_tims:
        # keep the most informative measurements: smallest noise-to-length ratio
        order = np.argsort(restricted.alpha, kind="stable")[: cfg.max_rotation_tims]
        sel = np.sort(order)
    else:
        sel = np.arange(restricted.n_edges)
    rot_problem = RotationProblem(
        a_bar=s_hat * restricted.a_bar[sel],
        b_bar=restricted.b_bar[sel],
        beta_edge=restricted.beta_edge[sel],
        c_bar_sq=c_bar_sq,
    )
    try:
        qbar = assemble_qbar(rot_problem)
        conic = build_sdp(rot_problem, qbar, k_cap=cfg.max_rotation_tims)
        z0 = None
        if cfg.warm_start:
            guess_r, guess_th, _ = local_rotation_guess(rot_problem)
            z0 = lift(guess_r, guess_th)
        sdp = solve_sdp(conic, cfg.solver, initial_z=z0)
    except NumericalFailure as exc:
        raise NumericalFailure(f"[rotation] {exc}") from exc
    if not sdp.converged:
        warnings.append(
            f"rotation relaxation stopped before reaching tolerance "
            f"(iterations={sdp.iterations})"
        )
    cert = round_and_certify(rot_problem, sdp, rank_tol=cfg.rank_tol)
    if cert.det_r < 0.0:
        proper = round_and_certify(
            rot_problem, sdp, rank_tol=cfg.rank_tol, proper_only=True
        )
        warnings.append(
            "relaxation rounded to a reflection; compared against the best "
            "proper rotation"
        )
        if proper.f_rounded <= cert.f_rounded:
            cert = proper
    if not cert.tight:
        warnings.append(
            f"relaxation not certified tight (stable_rank={cert.stable_rank:.4f})"
        )
    timings["rotation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    residuals = c.target - s_hat * c.source @ cert.r_hat.T
    try:
        translation = solve_translation(
            TranslationProblem(
                residual_points=residuals, betas=c.betas, c_bar_sq=c_bar_sq
            )
        )
    except NumericalFailure as exc:
        raise NumericalFailure(f"[translation] {exc}") from exc
    timings["translation"] = time.perf_counter() - t0

    timings["total"] = time.perf_counter() - t_start
    return RegistrationResult(
        transform=Transform(s_hat, cert.r_hat, translation.t_hat),
        scale_solution=scale_solution,
        clique=clique,
        rotation_cert=cert,
        sdp_solution=sdp,
        translation=translation,
        timings=timings,
        warnings=warnings,
    )
