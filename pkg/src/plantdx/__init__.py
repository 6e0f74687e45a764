"""Leaf disease detection from hand-crafted image features and a random forest."""
from .features import FEATURE_NAMES, FeatureVector, extract_feature_vector
from .forest import ForestModel, ForestParams, fit_forest, load_model, predict, save_model

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES",
    "FeatureVector",
    "ForestModel",
    "ForestParams",
    "extract_feature_vector",
    "fit_forest",
    "load_model",
    "predict",
    "save_model",
]
