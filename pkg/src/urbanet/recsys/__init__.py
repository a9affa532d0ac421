"""Personalized high-interest region prediction: labeling, features,
class-weighted boosting, attribution, mobility profiling, recommendation."""

from .boosting import (
    DEFAULT_HYPERPARAMS,
    HYPERPARAM_RANGES,
    Tree,
    TreeEnsembleModel,
    confusion_metrics,
    evaluate,
    train,
)
from .features import (
    DEFAULT_SPECS,
    FeatureTable,
    FeatureVector,
    assemble_features,
    build_feature_table,
    feature_names,
)
from .labeling import (
    MobilitySummary,
    UserInterestProfile,
    classify_mobility,
    label_user,
    radius_of_gyration,
)
from .recommend import (
    NEUTRAL_EXPLANATION,
    ExplanationFactor,
    Recommendation,
    SubRecommendation,
    explain,
    recommend,
    score_candidates,
)
from .search import SearchResult, TrialResult, grouped_split, random_search, sample_hyperparams
from .shapley import Attribution, mean_abs_shapley, permutation_importance, shapley_attribution

__all__ = [
    "DEFAULT_HYPERPARAMS",
    "HYPERPARAM_RANGES",
    "DEFAULT_SPECS",
    "Attribution",
    "ExplanationFactor",
    "FeatureTable",
    "FeatureVector",
    "MobilitySummary",
    "NEUTRAL_EXPLANATION",
    "Recommendation",
    "SearchResult",
    "SubRecommendation",
    "TrialResult",
    "Tree",
    "TreeEnsembleModel",
    "UserInterestProfile",
    "assemble_features",
    "build_feature_table",
    "classify_mobility",
    "confusion_metrics",
    "evaluate",
    "explain",
    "feature_names",
    "grouped_split",
    "label_user",
    "mean_abs_shapley",
    "permutation_importance",
    "radius_of_gyration",
    "random_search",
    "recommend",
    "sample_hyperparams",
    "score_candidates",
    "shapley_attribution",
    "train",
]
