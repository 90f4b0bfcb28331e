from .exemplar import Exemplar, ExemplarBank, significance, train_exemplar, train_exemplar_features
from .forest import (
    BACKGROUND,
    ConfidenceMap,
    ForestParams,
    RandomForest,
    forest_confidence_map,
    sample_features,
    train_forest,
)
from .kmeans import kmeans_medoid_indices, kmeans_medoids
from .serialize import load_model, save_model
from .svm import LinearSvm, train_svm

__all__ = [
    "Exemplar", "ExemplarBank", "significance", "train_exemplar", "train_exemplar_features",
    "BACKGROUND", "ConfidenceMap", "ForestParams", "RandomForest", "forest_confidence_map",
    "sample_features", "train_forest", "kmeans_medoid_indices", "kmeans_medoids",
    "load_model", "save_model", "LinearSvm", "train_svm",
]
