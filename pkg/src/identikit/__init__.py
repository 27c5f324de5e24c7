"""identikit: identifiable latent-variable and causal-discovery methods,
with a numerical lab demonstrating when and why identification works."""

from .core import (
    DataError,
    Dataset,
    DegenerateDataError,
    IdentikitError,
    InsufficientDataError,
    LinearMixingModel,
    RecoveryScore,
    ShapeError,
    UndefinedCorrelationError,
    WhiteningResult,
    ZeroVarianceError,
    amari_index,
    mcc,
    read_dataset_csv,
    whiten,
    write_dataset_csv,
)
from .independence import TestReport, hsic_statistic, hsic_test, median_heuristic
from .linear_ica import IcaResult, estimate_ica, nongaussianity
from .lingam import (
    CyclicGraphError,
    NearSingularDiagonalError,
    SemModel,
    causal_order,
    estimate_lingam,
    row_permutation_for_diagonal,
)
from .nonlinear_ica import (
    FeatureExtractor,
    NicaResult,
    TrainConfig,
    TrainingDivergedError,
    mlp_forward,
    mlp_gradient,
    train_nica,
)
from .causal import (
    CausalVerdict,
    FlowConfig,
    discover_anm,
    discover_carefl,
    discover_nonsens,
    nonsens_decision,
)
from .lab import (
    EvdCheckReport,
    IsometryReport,
    bivariate_symmetry_demo,
    evd_check,
    gaussian_rotation_demo,
    isometry_check,
)
from .synth import (
    MlpFunction,
    NonstationarySpec,
    SourceDistribution,
    darmois_construct,
    gen_anm,
    gen_carefl,
    gen_demo_signals,
    gen_linear_ica,
    gen_lingam,
    gen_nonsens_sem,
    gen_nonstationary_nica,
    gen_pnl,
)

__version__ = "0.1.0"
