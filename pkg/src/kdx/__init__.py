"""Kernel density forests and networks.

Replaces the affine activation over each training-populated polytope of
a random forest or ReLU network with a weighted-MLE Gaussian kernel,
yielding posteriors that stay calibrated in distribution and collapse
to the class priors far away from the training data.
"""

__version__ = "0.1.0"

from .data import Dataset, load_csv, save_csv
from .density import (
    EUCLIDEAN,
    GEODESIC,
    KdxModel,
    PolytopeModel,
    PosteriorResult,
    class_conditional_density,
    default_bias,
    fit_kdf,
    fit_kdn,
    fit_kdx,
    polytope_distance,
    posterior,
    predict_posteriors,
    select_polytope,
    weighted_mle_gaussian,
)
from .errors import (
    ConfigError,
    IngestionError,
    InvalidInputError,
    TrainingDivergedError,
    UndefinedImprovementError,
)
from .forest import ForestConfig, ForestModel, forest_signature, forest_signatures, train_forest
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    load_report,
    run_simulation_experiment,
    run_tabular_experiment,
    run_trunk_sweep,
)
from .kernels import (
    PolytopeGrouping,
    WeightMatrix,
    exponentiate_weights,
    forest_kernel,
    geodesic_distance,
    grid_search_k,
    group_polytopes,
    kernel_value,
    net_kernel,
    select_grid_k,
    signature_kernel_matrix,
)
from .metrics import (
    classification_error,
    hellinger_distance,
    improvement,
    mce,
    mean_hellinger,
    mean_max_confidence,
    oce,
)
from .model_io import load_model, save_model
from .network import NetConfig, ReluNetModel, net_signature, net_signatures, train_relu_net
from .signatures import MembershipSignature
from .simulations import (
    SimulationSpec,
    gen_circle,
    gen_polynomial,
    gen_sinewave,
    gen_spiral,
    gen_trunk,
    gen_xor,
    generate,
    normalize_max_l2,
    sample_hypersphere,
    true_posterior,
)
