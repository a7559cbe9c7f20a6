"""Simulation-based Type I Error validation and calibration with the Tilt-Bound."""

from .calibration import (
    REJECT_NOTHING,
    AffineEstimand,
    CalibrationResult,
    Calibrator,
    ConfidenceSet,
    bootstrap_bias,
    calibrate,
    confidence_set,
    pointwise_threshold,
    tile_alpha_target,
)
from .designs import (
    DESIGNS,
    MultiArmBetaBinomialDesign,
    TwoStageSelectionDesign,
    ZTestDesign,
    design_from_config,
)
from .grid import NullHypothesis, Platten, Tile, assign_config, build_platten, refine, vertices
from .model import (
    BernoulliArms,
    CanonicalGLM,
    NormalLocation,
    log_partition,
    psi,
    renyi_divergence,
    sample_outcomes,
)
from .rng import RandomStream, SeedSpec
from .simengine import SimBatch, run_batch, run_batches
from .tiltbound import (
    BoundQuery,
    BoundResult,
    forward_bound,
    inverse_bound,
    lower_bound,
    optimize_forward,
    optimize_inverse,
    pinsker_bound,
    rescale_bounded,
    taylor_bound,
)
from .validation import (
    ValidationReport,
    Validator,
    clopper_pearson_lower,
    clopper_pearson_upper,
    hoeffding_upper,
    validate,
)

__version__ = "0.1.0"
