"""Robust linear classification under adversarial label corruption.

The package builds, certifies, and numerically verifies the full chain:
margin-separable data generation, label-corruption adversaries, the
dense-pancakes density condition, hereditary/linear sum norms of the
outliers, norm-constrained surrogate-loss training, and the premise and
conclusion checks that tie them together.
"""

__version__ = "0.1.0"

from .adversary import (
    CorruptionSpec,
    apply_corruption,
    flip_aligned,
    flip_boundary,
    flip_random,
    inject_malicious,
)
from .analysis import (
    ConclusionReport,
    ExperimentConfig,
    ExperimentReport,
    GradientBoundReport,
    PancakeMarginReport,
    TheoremPremises,
    check_theorem_premises,
    evaluate_conclusion,
    minimized_pancake_margin_bound,
    outlier_sum_norm,
    pancake_margin_bound,
    run_experiment,
    verify_hinge_gradient_active,
    verify_outlier_gradient_bound,
    verify_pancake_margin_lemma,
)
from .core import (
    INLIER,
    OUTLIER,
    Dataset,
    LabeledPoint,
    MarginCertificate,
    margin_of,
    project_to_ball,
    read_dataset_csv,
    validate_dataset,
    write_dataset_csv,
)
from .distributions import (
    ComponentSpec,
    GeneratorSpec,
    RejectionStats,
    clip_to_ball,
    generate_margin_separable,
    homogenize,
    mix,
    sample_component,
    translate,
)
from .errors import (
    DegenerateDirectionError,
    DivergenceError,
    EmptySelectionError,
    InfeasibleSpecError,
    InvalidInputError,
    SizeGuardError,
)
from .optimizer import (
    HINGE,
    LOGISTIC,
    SurrogateLoss,
    TrainConfig,
    TrainResult,
    grad_fd_check,
    loss_grad,
    loss_value,
    stationarity_gap,
    train,
)
from .pancakes import (
    CertificationReport,
    DirectionNet,
    PancakeParams,
    TransferParams,
    certify_empirical,
    chernoff_failure_bound,
    direction_net,
    estimate_density_floor,
    pancake_density,
    pancake_membership,
    required_sample_size,
)
from .seeds import derive_seed, make_rng
from .sumnorm import (
    BOX_SYMMETRIC_ONE,
    BOX_ZERO_ONE,
    RoundingCheck,
    SignedPointSet,
    SumNormReport,
    her_sum_norm_exact,
    her_sum_norm_heuristic,
    lin_sum_norm,
    rounding_check,
    witness_value,
)
