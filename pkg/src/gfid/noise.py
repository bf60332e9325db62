"""Relative-SNR observation noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, ZeroSignalWithNoise

__all__ = ["NoiseSpec", "noise_scale", "corrupt"]


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int | None = None

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidParams(f"sigma must be >= 0, got {self.sigma}")


def noise_scale(y_clean, sigma):
    """``gamma = sigma * sqrt(||y||^2 / N)``."""
    y = np.asarray(y_clean, dtype=float)
    return sigma * np.sqrt(np.sum(y ** 2) / y.size)


def corrupt(y_clean, spec, rng=None):
    """Add white Gaussian noise scaled to ``sigma`` times the RMS of the signal.

    ``spec`` is a :class:`NoiseSpec` or a bare sigma.  Without ``rng`` the
    generator is seeded from ``spec.seed``.  ``sigma == 0`` returns the input
    unchanged (no draws are consumed).
    """
    if not isinstance(spec, NoiseSpec):
        spec = NoiseSpec(float(spec))
    y = np.asarray(y_clean, dtype=float)
    if spec.sigma == 0:
        return y.copy()
    if not np.any(y):
        raise ZeroSignalWithNoise("cannot scale noise to an all-zero signal")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    gamma = noise_scale(y, spec.sigma)
    return y + gamma * rng.standard_normal(y.shape)
