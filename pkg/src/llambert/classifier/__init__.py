"""Hashed bag-of-n-grams logistic regression with multi-stage curricula.

The hot kernels (token hashing, SGD epochs, scoring) have a compiled Cython
implementation and a numpy fallback; the compiled one is used when the
extension built, unless LLAMBERT_PURE_PYTHON=1 forces the fallback.
"""

from ._backend import KERNEL_BACKEND, kernels
from .model import (
    BIAS_VALUE,
    ClassifierError,
    FeatureVector,
    Hyper,
    LinearModel,
    Prediction,
    build_csr,
    featurize,
    load_model,
    loss_and_grad,
    predict,
    save_model,
    train,
    train_files,
    train_plan,
)

__all__ = [
    "BIAS_VALUE", "ClassifierError", "FeatureVector", "Hyper", "LinearModel",
    "Prediction", "build_csr", "featurize", "load_model", "loss_and_grad",
    "predict", "save_model", "train", "train_files", "train_plan",
    "kernels", "KERNEL_BACKEND",
]
