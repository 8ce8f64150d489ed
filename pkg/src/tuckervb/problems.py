"""Seeded benchmark problems: 2D Fredholm, anisotropic deblurring, 3D backward heat."""

from dataclasses import dataclass, field

import numpy as np

from .operators import (
    SeparableOperator,
    SpectralOperator,
    build_subspace_from_separable,
    build_subspace_from_spectral,
    real_trig_basis,
)


def rng_for(seed):
    """PCG64 generator; trial ``t`` of a sweep uses ``base_seed + t``."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def add_noise(y_clean, sigma, seed):
    """``y_clean + sigma * z`` with ``z`` standard normal drawn from ``seed``."""
    y_clean = np.asarray(y_clean, dtype=np.float64)
    if sigma < 0:
        raise ValueError("noise level must be non-negative")
    z = rng_for(seed).standard_normal(y_clean.shape)
    if sigma == 0:
        return y_clean.copy()
    return y_clean + sigma * z


@dataclass
class ProblemInstance:
    operator: object
    x_true: np.ndarray
    y_clean: np.ndarray
    y: np.ndarray
    sigma_true: float
    seed: int
    shape: tuple


def _instance(op, x_true, sigma, seed, shape):
    x = np.asarray(x_true, dtype=np.float64).reshape(-1)
    y_clean = op.apply(x)
    return ProblemInstance(op, x, y_clean, add_noise(y_clean, sigma, seed), float(sigma),
                           int(seed), tuple(shape))


# -- Fredholm ---------------------------------------------------------------

DEFAULT_PEAKS = (
    # amplitude, (cx, cy), width
    (1.0, (0.35, 0.40), 0.12),
    (0.8, (0.65, 0.60), 0.10),
    (0.6, (0.50, 0.30), 0.15),
    (0.7, (0.30, 0.70), 0.10),
    (0.5, (0.70, 0.35), 0.12),
)


FREDHOLM_TRUTHS = ("peaks", "sinusoid")


@dataclass
class FredholmSpec:
    """Fredholm problem settings.

    ``truth`` is ``"peaks"`` (sum of Gaussian bumps) or ``"sinusoid"``
    (outer products of low-frequency sines and cosines).
    """

    n: int = 32
    alpha: float = 0.15
    peaks: tuple = DEFAULT_PEAKS
    ranks: tuple = (12, 12)
    truth: str = "peaks"

    def __post_init__(self):
        if self.truth not in FREDHOLM_TRUTHS:
            raise ValueError(f"unknown Fredholm truth {self.truth!r}")
        if self.n < 4:
            raise ValueError("Fredholm grid needs n >= 4")
        if not self.alpha > 0:
            raise ValueError("kernel decay rate must be positive")
        if any(w <= 0 for _, _, w in self.peaks):
            raise ValueError("peak widths must be positive")


def fredholm_grid(n):
    """Interior nodes ``i / (n + 1)``; the sine basis vanishes at both ends."""
    return np.arange(1, n + 1) / (n + 1)


def fredholm_kernel(n, alpha):
    """Discrete 1D operator ``K[i, j] = sum_k s_k phi_k(s_i) phi_k(x_j) w_j``.

    ``s_k = exp(-alpha k)``, ``phi_k(x) = sqrt(2) sin(k pi x)``; the
    trapezoid weights on ``[0, 1]`` reduce to ``h = 1/(n+1)`` at interior
    nodes because the integrand vanishes at the end points.
    """
    x = fredholm_grid(n)
    h = 1.0 / (n + 1)
    k = np.arange(1, n + 1)
    phi = np.sqrt(2.0) * np.sin(np.pi * np.outer(x, k))
    sig = np.exp(-alpha * k)
    return (phi * sig) @ phi.T * h


def fredholm_truth(n, peaks=DEFAULT_PEAKS):
    x = fredholm_grid(n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    f = np.zeros((n, n))
    for a, (cx, cy), w in peaks:
        f += a * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * w**2))
    return f


def fredholm_sinusoid_truth(n):
    """``sin(pi x) cos(pi y) + 0.5 cos(2 pi x) sin(2 pi y)`` on the interior grid."""
    x = fredholm_grid(n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    return (np.sin(np.pi * xx) * np.cos(np.pi * yy)
            + 0.5 * np.cos(2 * np.pi * xx) * np.sin(2 * np.pi * yy))


def gen_fredholm(spec, noise, seed):
    """2D Fredholm problem ``A = K kron K`` and its Tucker subspace."""
    k = fredholm_kernel(spec.n, spec.alpha)
    op = SeparableOperator([k, k])
    sub = build_subspace_from_separable(op, spec.ranks)
    if spec.truth == "sinusoid":
        truth = fredholm_sinusoid_truth(spec.n)
    else:
        truth = fredholm_truth(spec.n, spec.peaks)
    inst = _instance(op, truth, noise, seed, (spec.n, spec.n))
    return inst, sub


# -- deblurring -------------------------------------------------------------

def gaussian_blur_matrix(n, sigma, truncate=4.0):
    """Row-normalized Gaussian convolution matrix without wrap-around."""
    a = np.zeros((n, n))
    radius = int(np.ceil(truncate * sigma)) if sigma > 0 else 0
    offsets = np.arange(-radius, radius + 1)
    taps = np.exp(-0.5 * (offsets / sigma) ** 2) if sigma > 0 else np.ones(1)
    for i in range(n):
        cols = i + offsets
        ok = (cols >= 0) & (cols < n)
        a[i, cols[ok]] = taps[ok]
    return a / a.sum(axis=1, keepdims=True)


def synthetic_cameraman(n=64):
    """Procedural stand-in for the cameraman photograph, values in [0, 1].

    A bright sky gradient over textured ground, a dark figure with a head,
    a thin tripod and a distant building.
    """
    rng = rng_for(20240611)
    yy, xx = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n), indexing="ij")
    img = 0.85 - 0.25 * yy
    ground = yy > 0.72
    texture = 0.08 * np.sin(37 * xx + 11 * yy) * np.sin(23 * yy) + 0.05 * rng.standard_normal((n, n))
    img = np.where(ground, 0.45 + texture, img)
    building = (xx > 0.72) & (xx < 0.86) & (yy > 0.45) & (yy < 0.72)
    img[building] = 0.62
    img[building & ((np.floor(yy * n) % 4) == 0)] = 0.5
    body = ((xx - 0.38) / 0.13) ** 2 + ((yy - 0.62) / 0.26) ** 2 < 1.0
    head = ((xx - 0.4) / 0.07) ** 2 + ((yy - 0.27) / 0.08) ** 2 < 1.0
    img[body | head] = 0.08
    arm = (xx > 0.38) & (xx < 0.6) & (yy > 0.38) & (yy < 0.44)
    img[arm] = 0.12
    camera = (xx > 0.55) & (xx < 0.66) & (yy > 0.33) & (yy < 0.43)
    img[camera] = 0.2
    for x0 in (0.5, 0.62, 0.7):
        leg = np.abs(xx - (0.6 + (x0 - 0.6) * (yy - 0.43) / 0.5)) < 0.012
        img[leg & (yy > 0.43) & (yy < 0.93)] = 0.1
    return np.clip(img, 0.0, 1.0)


@dataclass
class DeblurSpec:
    image: np.ndarray = field(default_factory=synthetic_cameraman)
    sigma_row: float = 1.3
    sigma_col: float = 0.7
    ranks: tuple = (48, 48)

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        if self.image.ndim != 2:
            raise ValueError("deblur image must be 2-way")
        if self.image.min() < 0 or self.image.max() > 1:
            raise ValueError("pixel values must lie in [0, 1]")
        if self.sigma_row < 0 or self.sigma_col < 0:
            raise ValueError("blur widths must be non-negative")


def gen_deblur(spec, noise, seed):
    """Separable blur: mode 0 (image rows index) uses ``sigma_row``, mode 1 ``sigma_col``."""
    r, c = spec.image.shape
    op = SeparableOperator([gaussian_blur_matrix(r, spec.sigma_row),
                            gaussian_blur_matrix(c, spec.sigma_col)])
    sub = build_subspace_from_separable(op, spec.ranks)
    return _instance(op, spec.image, noise, seed, spec.image.shape), sub


# -- backward heat ----------------------------------------------------------

DEFAULT_SOURCES = (
    # amplitude, (cx, cy, cz), width
    (1.0, (0.35, 0.40, 0.50), 0.10),
    (0.8, (0.65, 0.60, 0.40), 0.08),
    (0.6, (0.50, 0.30, 0.65), 0.12),
)


@dataclass
class HeatSpec:
    grid: tuple = (16, 16, 16)
    kappa: tuple = (0.01, 0.005, 0.02)
    T: float = 0.1
    sources: tuple = DEFAULT_SOURCES
    ranks: tuple = (8, 8, 8)

    def __post_init__(self):
        if any(k <= 0 for k in self.kappa) or not self.T > 0:
            raise ValueError("diffusivities and final time must be positive")
        if len(self.grid) != len(self.kappa):
            raise ValueError("grid and kappa must have the same number of axes")


def heat_multipliers(grid, kappa, T):
    """``exp(-mu T)`` with ``mu = sum_k kappa_k (2 pi f_k)^2`` in trig-basis order."""
    mu = np.zeros(tuple(grid))
    d = len(grid)
    for k, (n, kap) in enumerate(zip(grid, kappa)):
        _, f = real_trig_basis(n)
        shape = [1] * d
        shape[k] = n
        mu = mu + (kap * (2 * np.pi * f) ** 2).reshape(shape)
    return np.exp(-mu * T)


def heat_truth(grid, sources=DEFAULT_SOURCES):
    axes = [np.arange(n) / n for n in grid]
    mesh = np.meshgrid(*axes, indexing="ij")
    f = np.zeros(tuple(grid))
    for a, center, w in sources:
        r2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
        f += a * np.exp(-r2 / (2 * w**2))
    return f


def gen_heat(spec, noise, seed):
    """Periodic anisotropic heat equation observed at time ``T``."""
    op = SpectralOperator(heat_multipliers(spec.grid, spec.kappa, spec.T))
    sub = build_subspace_from_spectral(op, spec.ranks)
    return _instance(op, heat_truth(spec.grid, spec.sources), noise, seed, spec.grid), sub


# -- PGM --------------------------------------------------------------------

def read_pgm(path):
    """Read a binary (P5) PGM with maxval 255 into floats ``p / 255``."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    pix = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    if pix.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return pix.reshape(h, w).astype(np.float64) / 255.0


def write_pgm(path, image):
    """Write a 2D array as P5 PGM after clamping to [0, 1] and rounding."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM images must be 2D")
    pix = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())
