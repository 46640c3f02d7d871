"""Linguistic feature registry: per-document vectors and standardized matrices."""

from stylefuse.features.syllables import count_syllables
from stylefuse.features.readability import readability
from stylefuse.features.lexical import lexical_diversity
from stylefuse.features.annotation import annotation_rates
from stylefuse.features.trajectory import (
    shortest_hamiltonian_path,
    trajectory_features,
)
from stylefuse.features.registry import (
    DEFAULT_REGISTRY,
    NATIVE_FEATURES,
    FeatureMatrix,
    FeatureVector,
    build_matrix,
    extract_features,
    features_from_tokens,
    matrix_from_csv,
    stats_to_csv,
)

__all__ = [
    "count_syllables",
    "readability",
    "lexical_diversity",
    "annotation_rates",
    "trajectory_features",
    "shortest_hamiltonian_path",
    "FeatureVector",
    "FeatureMatrix",
    "extract_features",
    "features_from_tokens",
    "build_matrix",
    "matrix_from_csv",
    "stats_to_csv",
    "DEFAULT_REGISTRY",
    "NATIVE_FEATURES",
]
