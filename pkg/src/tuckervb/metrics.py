"""Reconstruction quality metrics."""

import math

import numpy as np


def rel_error(x_hat, x_true):
    """Relative Frobenius error ``||x_hat - x_true|| / ||x_true||``."""
    x_hat = np.asarray(x_hat, dtype=np.float64).reshape(-1)
    x_true = np.asarray(x_true, dtype=np.float64).reshape(-1)
    norm = np.linalg.norm(x_true)
    if norm == 0:
        raise ValueError("relative error undefined for a zero reference")
    return float(np.linalg.norm(x_hat - x_true) / norm)


def mse(x_hat, x_true):
    d = np.asarray(x_hat, dtype=np.float64) - np.asarray(x_true, dtype=np.float64)
    return float(np.mean(d * d))


def psnr(x_hat, x_true, max_val=1.0):
    """Peak signal-to-noise ratio in dB; ``inf`` for a perfect match."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_true = np.asarray(x_true, dtype=np.float64)
    if x_hat.shape != x_true.shape:
        raise ValueError(f"shape mismatch {x_hat.shape} vs {x_true.shape}")
    err = mse(x_hat, x_true)
    if err == 0:
        return math.inf
    return float(10.0 * np.log10(max_val**2 / err))


def ssim_global(x_hat, x_true, k1=0.01, k2=0.03, max_val=1.0):
    """Single-window SSIM over the whole image.

    Means, variances and the covariance are image-wide population
    statistics (divide by N).
    """
    a = np.asarray(x_true, dtype=np.float64).reshape(-1)
    b = np.asarray(x_hat, dtype=np.float64).reshape(-1)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("SSIM needs two images of equal size with at least 2 pixels")
    c1 = (k1 * max_val) ** 2
    c2 = (k2 * max_val) ** 2
    mu_a, mu_b = a.mean(), b.mean()
    da, db = a - mu_a, b - mu_b
    var_a, var_b = np.mean(da * da), np.mean(db * db)
    cov = np.mean(da * db)
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(num / den)

