"""relulens: exact local linear interpretation of ReLU networks.

Unwrap a trained ReLU MLP into its per-region affine logit maps, summarize
and diagnose the regions, merge them into a few refitted local models, and
flatten the result back into a single-hidden-layer network.
"""

__version__ = "0.1.0"

from .data import gen_balanced_default, gen_cocircles, group_split, load_dataset
from .diagnose import (
    ImportanceReport,
    ProfileSegment,
    Standardizer,
    coefficient_matrix,
    feature_importance,
    profile,
    weighted_mean_coefficients,
)
from .errors import (
    DivergenceError,
    InfeasibleError,
    InputError,
    NumericError,
    RelulensError,
    StaleIndexError,
    UndefinedMetricError,
)
from .metrics import accuracy, auc
from .network import (
    AffineMap,
    Layer,
    NetworkSpec,
    affine_for_pattern,
    fingerprint,
    forward,
    forward_batch,
    load_network,
    save_network,
)
from .simplify import (
    MergedCluster,
    MergedModel,
    flatten,
    merge_regions,
    merged_from_document,
    merged_table,
    merged_to_document,
    predict_merged,
    predict_merged_batch,
    refit_local,
    silhouette_scan,
)
from .train import SweepRow, TrainConfig, l1_sweep, train
from .unwrap import (
    LocalLinearModel,
    RegionSet,
    RegionSummaryRow,
    Unseen,
    assign_region,
    assign_regions,
    nontrivial_mask,
    region_table,
    regionset_from_document,
    regionset_to_document,
    unwrap,
)

__all__ = [name for name in dir() if not name.startswith("_")]
