"""Variational Bayesian regularization in Tucker subspaces.

Modules
-------
tensor      mode-k unfoldings, products and Kronecker utilities
operators   forward operators, Tucker subspaces and reduced systems
vb          mean-field VB solvers (single, per-mode and per-slice priors)
baselines   SVD Tikhonov with L-curve, GCV, UPRE and discrepancy principle
problems    seeded Fredholm, deblurring and backward-heat generators
metrics     relative error, PSNR and global SSIM
cli         experiment harness
"""

from .errors import (
    CapacityError,
    DimensionError,
    ModeError,
    NumericalError,
    RankError,
    SelectionError,
)
from .vb import HyperPrior, Variant, VBConfig, solve, solve_direct

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "DimensionError", "ModeError", "NumericalError", "RankError",
    "SelectionError", "HyperPrior", "Variant", "VBConfig", "solve", "solve_direct",
]
