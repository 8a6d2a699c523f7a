"""Robustness of incompatibility and local state-discrimination bounds."""

__version__ = "0.1.0"

from .config import Tolerances, DEFAULT_TOL
from .errors import (
    LocalRoiError,
    ShapeError,
    ResourceError,
    SolverError,
    InaccurateCertificateError,
    DegenerateCertificateError,
    GenerationError,
    SchemaError,
)
from .measurements import (
    Povm,
    MeasurementSet,
    ResponseTable,
    DeterministicResponse,
    validate_set,
    deterministic_strings,
    tensor_sets,
    apply_parent,
    random_set,
)
from .incompatibility import (
    RoiCertificate,
    roi_primal,
    roi_dual,
    compute_roi,
    is_compatible,
    extract_noise,
    tensor_roi,
)
from .discrimination import (
    DiscriminationTask,
    LocalStrategy,
    psg_fixed,
    psg_best_lo,
    psg_best_locc1,
    psg_best_lo_n,
    psg_parents,
    psg_compatible_seesaw,
    bound_report,
    random_task,
)
from .construction import (
    OptimalTaskBundle,
    build_optimal_task,
    single_party_factors,
    verify_achievability,
)
from .oracle import (
    SimulationResult,
    brute_force_psg,
    simulate_game,
    random_compatible_set,
)
