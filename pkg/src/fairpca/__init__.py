"""Fair PCA with an MMD fairness constraint, solved on the Stiefel manifold."""

from .data import (
    DataSet,
    SplitSpec,
    Standardization,
    apply_standardization,
    load_csv,
    split,
    standardize,
    synth1,
    synth2,
    write_csv,
)
from .estimator import MMDFairPCA
from .exceptions import (
    ConfigurationError,
    CsvParseError,
    DegenerateDataError,
    RetractionError,
    SolverStallError,
    StratificationError,
)
from .kernels import (
    BandwidthSelection,
    GroupedSamples,
    KernelConfig,
    median_heuristic,
    mmd_squared,
    mmd_squared_gradient,
    rbf_kernel,
)
from .metrics import (
    FitReport,
    KernelLogisticClassifier,
    classifier_accuracy,
    communalities,
    delta_dp,
    explained_variance,
    fairness_mmd2,
    train_downstream_classifier,
)
from .objective import (
    Covariance,
    PenaltyProblem,
    constraint_h,
    objective_f,
    objective_f_gradient,
    pca_loadings,
    penalty_Q,
    penalty_Q_gradient,
)
from .solver import (
    FitOutcome,
    FitStatus,
    IterationRecord,
    RepmsConfig,
    default_config,
    inner_solve,
    repms_fit,
)
from .stiefel import retract, riemannian_gradient, tangent_project

__version__ = "0.1.0"

__all__ = [
    "BandwidthSelection",
    "ConfigurationError",
    "Covariance",
    "CsvParseError",
    "DataSet",
    "DegenerateDataError",
    "FitOutcome",
    "FitReport",
    "FitStatus",
    "GroupedSamples",
    "IterationRecord",
    "KernelConfig",
    "KernelLogisticClassifier",
    "MMDFairPCA",
    "PenaltyProblem",
    "RepmsConfig",
    "RetractionError",
    "SolverStallError",
    "SplitSpec",
    "Standardization",
    "StratificationError",
    "apply_standardization",
    "classifier_accuracy",
    "communalities",
    "constraint_h",
    "default_config",
    "delta_dp",
    "explained_variance",
    "fairness_mmd2",
    "inner_solve",
    "load_csv",
    "median_heuristic",
    "mmd_squared",
    "mmd_squared_gradient",
    "objective_f",
    "objective_f_gradient",
    "pca_loadings",
    "penalty_Q",
    "penalty_Q_gradient",
    "rbf_kernel",
    "repms_fit",
    "retract",
    "riemannian_gradient",
    "split",
    "standardize",
    "synth1",
    "synth2",
    "tangent_project",
    "train_downstream_classifier",
    "write_csv",
]
