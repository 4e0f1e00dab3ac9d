"""Stage-two ensemble: feature matrices, boosted trees and model selection."""

from .gbdt import (GbdtHyperparams, GbdtModel, Tree, feature_importance, logloss_from_margin, predict,
                   predict_margin, train_all, train_gbdt)
from .matrix import GROUPS, FeatureMatrix, assemble, normalize_group, record_labels
from .selection import (PRESETS, AblationResult, GridResult, ablate, grid_points, grid_search,
                        group_subsets, preset_groups)

__all__ = [
    "GROUPS", "PRESETS", "AblationResult", "FeatureMatrix", "GbdtHyperparams", "GbdtModel", "GridResult",
    "Tree", "ablate", "assemble", "feature_importance", "grid_points", "grid_search", "group_subsets",
    "logloss_from_margin", "normalize_group", "predict", "predict_margin", "preset_groups",
    "record_labels", "train_all", "train_gbdt",
]
