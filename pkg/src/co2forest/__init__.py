"""Oblique decision forests by continuous optimization of split functions.

Split weights are trained by minimizing a ramp-style upper bound on the
stump's routed loss under a norm constraint, via the convex-concave
procedure with projected mini-batch subgradient descent. Axis-aligned
random forests and OC1-style coordinate-descent trees are included as
baselines, along with a LIBSVM data pipeline, evaluation metrics, and a
CLI (``co2forest train|evaluate|grid-search|predict``).
"""

from .dataset import (
    Dataset,
    LibsvmFormatError,
    PreprocessStats,
    SparseDataset,
    apply_preprocess,
    bootstrap_sample,
    densify_augment,
    fit_preprocess,
    parse_libsvm,
    rebalance_classes,
    serialize_libsvm,
)
from .forest import (
    Forest,
    GridSearchResult,
    GridSpec,
    forest_predict,
    forest_predict_batch,
    forest_predict_proba,
    forest_predict_proba_batch,
    grid_search,
    train_forest,
)
from .loss import (
    LOG_LOSS,
    SQUARED_LOSS,
    StumpParams,
    information_gain,
    log_loss,
    log_loss_grad,
    optimal_leaf_logloss,
    softmax_prob,
    squared_loss,
    squared_loss_grad,
    stump_empirical_loss,
)
from .metrics import confusion_matrix, error_rate, jaccard_class_average
from .model_io import load_model, save_model
from .stump_baselines import (
    AxisSplit,
    NoValidSplit,
    Oc1Config,
    axis_split_to_stump,
    best_axis_aligned_split,
    oc1_optimize,
)
from .stump_co2 import (
    CccpTrace,
    Co2Hyper,
    DivergedError,
    cccp_optimize,
    cccp_subgradient,
    pointwise_bound,
    project_ball,
    surrogate_loss,
)
from .tree import (
    GrowConfig,
    Tree,
    grow_tree,
    tree_predict_proba,
    tree_predict_proba_batch,
    tree_training_error,
)

__version__ = "0.1.0"
