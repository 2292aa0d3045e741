"""Capacity-aware classification metrics and perturbation-based model selection."""

from .metrics import (
    ConfusionCounts,
    IEInputs,
    MetricSpec,
    NoPositivesError,
    confusion,
    evaluate,
    ie_counting,
    ie_ratio,
)
from .models import (
    GiniTreeClassifier,
    PairLogisticRegression,
    SMOTEBalancer,
    logistic_pair_pool,
    tree_subsample_pool,
)
from .perturbation import FeatureSchema, Nominal, Numeric, Ordinal, PerturbationConfig
from .selection import Aggregator, PVFSelector, TraditionalSelector, pvf_select, traditional_select

__version__ = "0.1.0"

__all__ = [
    "Aggregator",
    "ConfusionCounts",
    "FeatureSchema",
    "GiniTreeClassifier",
    "IEInputs",
    "MetricSpec",
    "NoPositivesError",
    "Nominal",
    "Numeric",
    "Ordinal",
    "PVFSelector",
    "PairLogisticRegression",
    "PerturbationConfig",
    "SMOTEBalancer",
    "TraditionalSelector",
    "confusion",
    "evaluate",
    "ie_counting",
    "ie_ratio",
    "logistic_pair_pool",
    "pvf_select",
    "traditional_select",
    "tree_subsample_pool",
]
