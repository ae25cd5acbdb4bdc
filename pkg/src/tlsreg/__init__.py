"""Robust point-cloud registration via truncated least squares.

Estimates a similarity transform (scale, rotation, translation) between
corresponded 3-D point sets while tolerating extreme outlier fractions.
The cascade decouples the three unknowns through invariant pairwise
measurements, prunes outliers with a maximum-clique search, and solves the
rotation by a certified semidefinite relaxation.

Entry points: register() for the functional pipeline, TlsRegistration for
a scikit-learn style estimator, and the `tlsreg` command-line tool.
"""

from .bench import (
    BenchConfig,
    TrialRecord,
    baseline_ransac,
    generate_instance,
    horn_similarity,
    run_bench,
)
from .clique import CliqueResult, PrunedGraph, max_clique, prune_by_scale, restrict_graph
from .conic import ConicProblem, SolverSettings, solve_conic
from .errors import (
    CliqueTooSmall,
    DegenerateEdge,
    EmptyGraph,
    EmptyInput,
    InputError,
    MalformedHeader,
    NoModelFound,
    NumericalError,
    NumericalFailure,
    ProblemTooLarge,
    ShortFile,
    TlsregError,
    TooFewCorrespondences,
    UnsupportedFormat,
)
from .estimator import TlsRegistration
from .geometry import (
    CorrespondenceSet,
    TlsParams,
    Transform,
    apply_transform,
    random_rotation,
    rotation_geodesic_error,
)
from .pipeline import PipelineConfig, RegistrationResult, register
from .rotation import (
    QbarMatrix,
    RotationCertificate,
    RotationProblem,
    SdpSolution,
    assemble_qbar,
    binary_cloning_objective,
    build_sdp,
    round_and_certify,
    solve_sdp,
)
from .scalar_tls import (
    ScalarMeasurementSet,
    ScalarTlsSolution,
    solve_max_consensus,
    solve_scalar_tls,
    tls_cost,
)
from .tim_graph import (
    Chain,
    Complete,
    GraphTopology,
    RandomK,
    TimGraph,
    build_tim_graph,
    incidence_matrix,
)
from .translation import TranslationProblem, TranslationResult, solve_translation

__version__ = "0.1.0"

__all__ = [
    "BenchConfig",
    "Chain",
    "CliqueResult",
    "CliqueTooSmall",
    "Complete",
    "ConicProblem",
    "CorrespondenceSet",
    "DegenerateEdge",
    "EmptyGraph",
    "EmptyInput",
    "GraphTopology",
    "InputError",
    "MalformedHeader",
    "NoModelFound",
    "NumericalError",
    "NumericalFailure",
    "PipelineConfig",
    "ProblemTooLarge",
    "PrunedGraph",
    "QbarMatrix",
    "RandomK",
    "RegistrationResult",
    "RotationCertificate",
    "RotationProblem",
    "ScalarMeasurementSet",
    "ScalarTlsSolution",
    "SdpSolution",
    "ShortFile",
    "SolverSettings",
    "TimGraph",
    "TlsParams",
    "TlsRegistration",
    "TlsregError",
    "TooFewCorrespondences",
    "Transform",
    "TranslationProblem",
    "TranslationResult",
    "TrialRecord",
    "UnsupportedFormat",
    "apply_transform",
    "assemble_qbar",
    "baseline_ransac",
    "binary_cloning_objective",
    "build_sdp",
    "build_tim_graph",
    "generate_instance",
    "horn_similarity",
    "incidence_matrix",
    "max_clique",
    "prune_by_scale",
    "random_rotation",
    "register",
    "restrict_graph",
    "rotation_geodesic_error",
    "round_and_certify",
    "run_bench",
    "solve_conic",
    "solve_max_consensus",
    "solve_scalar_tls",
    "solve_sdp",
    "solve_translation",
    "tls_cost",
]
