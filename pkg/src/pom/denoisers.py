"""Closed-form Gaussian denoiser used as a sampler verification oracle.

For a Gaussian prior N(mu, s^2) per pixel, the Bayes posterior mean of
x0 given x0 + sigma * eps = x is mu + s^2 / (s^2 + sigma^2) * (x - mu),
which is exact and therefore pins down what a correct sampler must do.
"""
from __future__ import annotations

import numpy as np


class AnalyticGaussianDenoiser:
    """D(x, sigma) = mu + s^2 / (s^2 + sigma^2) * (x - mu)."""

    def __init__(self, mean: float | np.ndarray = 0.0,
                 variance: float | np.ndarray = 1.0):
        if np.any(np.asarray(variance) <= 0):
            raise ValueError("variance must be > 0")
        self.mean = mean
        self.variance = variance

    def __call__(self, x: np.ndarray, sigma: float) -> np.ndarray:
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        shrink = self.variance / (self.variance + sigma * sigma)
        return self.mean + shrink * (x - self.mean)


def gaussian_denoise(x: np.ndarray, sigma: float,
                     mean: float | np.ndarray = 0.0,
                     variance: float | np.ndarray = 1.0) -> np.ndarray:
    """Functional form of AnalyticGaussianDenoiser."""
    return AnalyticGaussianDenoiser(mean, variance)(x, sigma)
