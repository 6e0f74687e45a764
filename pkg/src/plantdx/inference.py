"""Single-image prediction shared by the CLI and the HTTP service."""
from __future__ import annotations

import numpy as np

from .dataset import decode_image_bytes, load_image
from .features import extract_feature_vector
from .forest import ForestModel, predict


def predict_array(model: ForestModel, img: np.ndarray) -> dict:
    fv = extract_feature_vector(img)
    p = predict(model, fv)
    return {
        "plant": model.plant,
        "label": p.label,
        "confidence": p.confidence,
        "votes": p.votes,
        "feature_vector": fv.as_dict(),
    }


def predict_file(model: ForestModel, path) -> dict:
    return predict_array(model, load_image(path))


def predict_bytes(model: ForestModel, data: bytes) -> dict:
    return predict_array(model, decode_image_bytes(data))
