"""Game-theoretic feature attribution over coalition hierarchies.

Exact Shapley and single/multi-level Owen attribution, an edge-driven
hierarchical image segmenter, consistency checking for segment label
propagation, and explanation-quality metrics, behind one coalition-mask
value-function interface.
"""

__version__ = "0.1.0"

from .errors import CapacityError, HierattrError, InvalidInputError
from .games import (
    EvalCache,
    MaskedImageGame,
    ValueFunction,
    cached_evaluate,
    full_mask,
    indices_from_mask,
    make_masked_image_game,
    mask_from_indices,
    mask_to_bool,
    masks_to_bool,
    popcount,
    to_grayscale,
)
from .hierarchy import (
    HierarchyNode,
    PartitionHierarchy,
    ValidationReport,
    validate_hierarchy,
)
from .metrics import (
    MetricsReport,
    aopc,
    bbox_score,
    ebpg,
    evaluate_all,
    f1_and_auc,
    miou,
)
from .models import (
    closed_form_shapley,
    load_fixture,
    load_fixture_file,
    make_group_and_scorer,
    make_synthetic_game,
    pixel_sum_scorer,
    random_game,
    template_mean_scorer,
)
from .owen import (
    consistent_permutation_count,
    nested_permutation_oracle,
    owen_multilevel,
    owen_single_level,
    per_feature_eval_counts,
    predicted_eval_count,
)
from .segmentation import (
    BuildResult,
    EdgeMap,
    SegmentationConfig,
    build_hierarchy,
    canny_edges,
    connected_components,
    double_threshold_hysteresis,
    dilate_edges,
    gaussian_smooth,
    merge_level,
    non_max_suppression,
    score_segments,
    sobel_gradients,
)
from .shapley import (
    Attribution,
    exact_shapley,
    permutation_oracle_shapley,
    permutation_shapley,
    subset_weights,
)
from .tproperty import (
    CounterexampleBundle,
    TPropertyReport,
    axis_aligned_hierarchy,
    check_t_property,
    prop4_counterexample,
    semantic_hierarchy_for,
)

__all__ = [
    "Attribution",
    "BuildResult",
    "CapacityError",
    "CounterexampleBundle",
    "EdgeMap",
    "EvalCache",
    "HierarchyNode",
    "HierattrError",
    "InvalidInputError",
    "MaskedImageGame",
    "MetricsReport",
    "PartitionHierarchy",
    "SegmentationConfig",
    "TPropertyReport",
    "ValidationReport",
    "ValueFunction",
    "aopc",
    "axis_aligned_hierarchy",
    "bbox_score",
    "build_hierarchy",
    "cached_evaluate",
    "canny_edges",
    "check_t_property",
    "closed_form_shapley",
    "connected_components",
    "consistent_permutation_count",
    "dilate_edges",
    "double_threshold_hysteresis",
    "ebpg",
    "evaluate_all",
    "exact_shapley",
    "f1_and_auc",
    "full_mask",
    "gaussian_smooth",
    "indices_from_mask",
    "load_fixture",
    "load_fixture_file",
    "make_group_and_scorer",
    "make_masked_image_game",
    "make_synthetic_game",
    "mask_from_indices",
    "mask_to_bool",
    "masks_to_bool",
    "merge_level",
    "miou",
    "nested_permutation_oracle",
    "non_max_suppression",
    "owen_multilevel",
    "owen_single_level",
    "per_feature_eval_counts",
    "permutation_oracle_shapley",
    "permutation_shapley",
    "pixel_sum_scorer",
    "popcount",
    "predicted_eval_count",
    "prop4_counterexample",
    "random_game",
    "score_segments",
    "semantic_hierarchy_for",
    "sobel_gradients",
    "subset_weights",
    "template_mean_scorer",
    "to_grayscale",
    "validate_hierarchy",
]
