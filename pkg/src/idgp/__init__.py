"""Instance-dependent partial-label learning via a decompositional generation process."""

from .data import (
    LogicalVectors,
    PLLDataset,
    load_dataset,
    logical_vectors,
    occurrence_vector,
    read_sidecar,
    write_dataset,
    write_sidecar,
)
from .distributions import (
    bernoulli_vec_log_density,
    beta_log_density,
    beta_posterior_mean,
    categorical_log_density,
    dirichlet_log_density,
    dirichlet_posterior_mean,
    sample_bernoulli_vec,
    sample_categorical,
)
from .errors import DataFormatError, DataInvariantError, IdgpError, NumericError
from .evaluation import SplitSpec, accuracy, aggregate, multi_seed_report, split
from .generation import (
    CleanScorerConfig,
    CorruptionReport,
    candidate_set_density,
    corrupt_instance_dependent,
    corrupt_uniform,
    make_clean_dataset,
    train_clean_scorer,
)
from .network import (
    DenseNet,
    SGDState,
    TransformConfig,
    lambda_transform,
    lambda_transform_pair,
    sgd_step,
)
from .objective import (
    BoundConfig,
    PerInstanceLossInput,
    degenerate_uniform_loss,
    map_loss,
    map_upper_bound,
    ml_loss,
    reg_loss,
)
from .trainer import (
    PriorCache,
    TrainConfig,
    fit,
    predict,
    refine_alpha_beta_hat,
    refine_lambda_hat,
    train_epoch,
)

__version__ = "0.1.0"

__all__ = [
    "BoundConfig",
    "CleanScorerConfig",
    "CorruptionReport",
    "DataFormatError",
    "DataInvariantError",
    "DenseNet",
    "IdgpError",
    "LogicalVectors",
    "NumericError",
    "PLLDataset",
    "PerInstanceLossInput",
    "PriorCache",
    "SGDState",
    "SplitSpec",
    "TrainConfig",
    "TransformConfig",
    "accuracy",
    "aggregate",
    "bernoulli_vec_log_density",
    "beta_log_density",
    "beta_posterior_mean",
    "candidate_set_density",
    "categorical_log_density",
    "corrupt_instance_dependent",
    "corrupt_uniform",
    "degenerate_uniform_loss",
    "dirichlet_log_density",
    "dirichlet_posterior_mean",
    "fit",
    "lambda_transform",
    "lambda_transform_pair",
    "load_dataset",
    "logical_vectors",
    "make_clean_dataset",
    "map_loss",
    "map_upper_bound",
    "ml_loss",
    "multi_seed_report",
    "occurrence_vector",
    "predict",
    "read_sidecar",
    "refine_alpha_beta_hat",
    "refine_lambda_hat",
    "reg_loss",
    "sample_bernoulli_vec",
    "sample_categorical",
    "sgd_step",
    "split",
    "train_clean_scorer",
    "train_epoch",
    "write_dataset",
    "write_sidecar",
]
