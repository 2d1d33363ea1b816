"""Interleaved block-sparse transforms and cross-domain memory AMP."""

from ._ibsmamp import (
    ConfigError,
    DegenerateError,
    Transform,
    config_hash,
    damping_weights,
    default_config,
    denoise_bernoulli_gaussian,
    denoise_qpsk,
    fft,
    full_transform,
    fwht,
    ibs_transform,
    ifft,
    permutation,
    relative_complexity,
    run_experiment,
    selftest,
    sensing_diagonal,
)

__all__ = [
    "ConfigError",
    "DegenerateError",
    "Transform",
    "config_hash",
    "damping_weights",
    "default_config",
    "denoise_bernoulli_gaussian",
    "denoise_qpsk",
    "fft",
    "full_transform",
    "fwht",
    "ibs_transform",
    "ifft",
    "permutation",
    "relative_complexity",
    "run_experiment",
    "selftest",
    "sensing_diagonal",
]
