"""Python bindings for the affectlab C++ core."""

from ._affectlab import (
    DataError,
    __version__,
    compute_rdm,
    emotion_centroids,
    kendall_tau,
    run_cli,
    softmax,
    svm_predict,
    svm_train,
    tokenize,
)

__all__ = [
    "DataError",
    "__version__",
    "compute_rdm",
    "emotion_centroids",
    "kendall_tau",
    "run_cli",
    "softmax",
    "svm_predict",
    "svm_train",
    "tokenize",
]
