"""Python bindings for the fearec C++ core."""

from ._core import (
    Band,
    ModelConfig,
    Model,
    brute_cross_correlation,
    contrastive_loss,
    cross_correlation_fft,
    freq_reg_loss,
    grad_check,
    irfft,
    metrics_from_ranks,
    rank_of_target,
    ramp_bands,
    rec_loss,
    rfft,
    synthetic_periodic,
)

__all__ = [
    "Band",
    "ModelConfig",
    "Model",
    "brute_cross_correlation",
    "contrastive_loss",
    "cross_correlation_fft",
    "freq_reg_loss",
    "grad_check",
    "irfft",
    "metrics_from_ranks",
    "rank_of_target",
    "ramp_bands",
    "rec_loss",
    "rfft",
    "synthetic_periodic",
]
