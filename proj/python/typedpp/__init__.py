"""Typed marked spatial Poisson process for paired ages, fitted by Gibbs sampling."""

from ._core import (
    classification_entropy,
    cli,
    expit,
    fit,
    load_dataset,
    logit,
    quantile,
    simulate,
    __version__,
)

__all__ = [
    "classification_entropy",
    "cli",
    "expit",
    "fit",
    "load_dataset",
    "logit",
    "quantile",
    "simulate",
    "__version__",
]
