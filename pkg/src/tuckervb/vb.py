"""Conjugate mean-field variational Bayes in a Tucker core space.

Model::

    y | g, beta ~ N(A_tilde g, beta^-1 I)
    g | alpha   ~ N(0, D(alpha)^-1)
    alpha, beta ~ Gamma(a0, b0)

Three prior structures are supported:

``single``
    one precision for the whole core, ``D = E[alpha] I``.
``per_mode``
    one precision per mode; every mode prior covers the whole core, so
    ``D = (sum_k E[alpha_k]) I``.
``per_slice``
    one precision per mode-k slice of the core; coefficient ``j`` with
    multi-index ``(i_0, ..., i_{d-1})`` gets ``D_jj = sum_k E[alpha_{k, i_k}]``.

The Gaussian normalizer of a summed precision, ``log sum_k alpha_k``, is
not conjugate.  The default ``"bound"`` normalizer replaces it by the
AM-GM bound ``log d + (1/d) sum_k log alpha_k``, which keeps the Gamma
updates conjugate and the ELBO a true lower bound; each slice Gamma then
has shape ``a0 + n_G / (2 d R_k)``.  ``"full"`` credits every slice with
its whole ``n_G / R_k`` coefficients instead, which counts the normalizer
``d`` times and drives weakly determined slices to very large precision.

Each sweep updates q(g), then every q(alpha), then q(beta); each step is
an exact coordinate maximizer of the ELBO below, so the ELBO trace is
non-decreasing.
"""

import enum
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.special import digamma, gammaln

from .errors import CapacityError, NumericalError
from .operators import identity_subspace, reduce

log = logging.getLogger(__name__)

RATE_FLOOR = 1e-300
LOG_2PI = np.log(2 * np.pi)
DEFAULT_MAX_DIRECT_UNKNOWNS = 4096
SLICE_NORMALIZERS = ("bound", "full")


class Variant(str, enum.Enum):
    SINGLE = "single"
    PER_MODE = "per_mode"
    PER_SLICE = "per_slice"


@dataclass(frozen=True)
class HyperPrior:
    a0: float = 1e-6
    b0: float = 1e-6

    def __post_init__(self):
        if not (self.a0 > 0 and self.b0 > 0):
            raise ValueError(f"hyperprior needs a0 > 0 and b0 > 0, got ({self.a0}, {self.b0})")


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution in shape/rate form."""

    shape: float
    rate: float

    def __post_init__(self):
        if not self.shape > 0:
            raise ValueError(f"Gamma shape must be positive, got {self.shape}")
        object.__setattr__(self, "rate", max(float(self.rate), RATE_FLOOR))

    def mean(self):
        return self.shape / self.rate

    def mean_log(self):
        return float(digamma(self.shape) - np.log(self.rate))

    def entropy(self):
        a = self.shape
        return float(a - np.log(self.rate) + gammaln(a) + (1.0 - a) * digamma(a))


@dataclass
class VBConfig:
    """Solver settings.

    ``fixed_alpha`` / ``fixed_beta`` freeze the corresponding expected
    precision (every alpha component for the former); the remaining
    factors are still updated.  ``strategy`` selects the linear algebra
    used for q(g): ``"auto"``, ``"cholesky"``, ``"eigen"`` (isotropic
    prior only) or ``"diagonal"`` (diagonal Gram only).
    ``slice_normalizer`` (``"bound"`` or ``"full"``) only affects the
    per-slice variant; see the module docstring.
    """

    prior: HyperPrior = field(default_factory=HyperPrior)
    max_iters: int = 200
    tol: float = 1e-8
    variant: Variant = Variant.SINGLE
    fixed_alpha: float = None
    fixed_beta: float = None
    strategy: str = "auto"
    slice_normalizer: str = "bound"

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.strategy not in ("auto", "cholesky", "eigen", "diagonal"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.slice_normalizer not in SLICE_NORMALIZERS:
            raise ValueError(f"unknown slice normalizer {self.slice_normalizer!r}")


class GaussianPosterior:
    """q(g) = N(mean, covariance).

    The covariance is materialized lazily; ``cov_diag``, ``logdet`` and
    ``trace_gram_cov`` (``tr(gram @ covariance)``) are always available.
    """

    def __init__(self, mean, cov_diag, logdet, trace_gram_cov, covariance=None, cov_factory=None):
        self.mean = mean
        self.cov_diag = cov_diag
        self.logdet = logdet
        self.trace_gram_cov = trace_gram_cov
        if covariance is not None:
            self.__dict__["covariance"] = covariance
        self._cov_factory = cov_factory

    @cached_property
    def covariance(self):
        return self._cov_factory()

    @property
    def second_moment(self):
        """``E ||g||^2 = ||mean||^2 + tr(covariance)``."""
        return float(self.mean @ self.mean + self.cov_diag.sum())


class _Eigen:
    """Cached eigendecomposition of the Gram matrix for isotropic priors."""

    def __init__(self, sys):
        w, v = np.linalg.eigh(sys.gram)
        self.w = np.clip(w, 0.0, None)
        self.v = v
        self.c = v.T @ sys.aty
        self.v2 = v * v


def _cond_estimate(mat):
    try:
        w = np.linalg.eigvalsh(mat)
        return float(np.abs(w).max() / max(np.abs(w).min(), RATE_FLOOR))
    except np.linalg.LinAlgError:
        return float("inf")


def _posterior(sys, e_beta, prec_diag, strategy, eig=None):
    prec_diag = np.broadcast_to(np.asarray(prec_diag, dtype=np.float64), (sys.n_g,))
    if strategy == "diagonal":
        g = np.diag(sys.gram)
        d = e_beta * g + prec_diag
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise NumericalError("non-positive posterior precision", float("inf"))
        inv = 1.0 / d
        return GaussianPosterior(
            e_beta * sys.aty * inv, inv, float(-np.log(d).sum()), float(g @ inv),
            cov_factory=lambda: np.diag(inv),
        )
    if strategy == "eigen":
        a = float(prec_diag[0])
        d = e_beta * eig.w + a
        inv = 1.0 / d
        mean = eig.v @ (e_beta * eig.c * inv)
        v = eig.v
        return GaussianPosterior(
            mean, eig.v2 @ inv, float(-np.log(d).sum()), float(eig.w @ inv),
            cov_factory=lambda: (v * inv) @ v.T,
        )
    prec = e_beta * sys.gram
    prec[np.diag_indices_from(prec)] += prec_diag
    try:
        chol = linalg.cholesky(prec, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("Cholesky factorization of the posterior precision failed",
                             _cond_estimate(prec)) from exc
    mean = linalg.cho_solve((chol, True), e_beta * sys.aty)
    cov = linalg.cho_solve((chol, True), np.eye(sys.n_g))
    cov = 0.5 * (cov + cov.T)
    if not np.all(np.isfinite(mean)):
        raise NumericalError("non-finite posterior mean", _cond_estimate(prec))
    logdet = float(-2.0 * np.log(np.diag(chol)).sum())
    # elementwise product sum; never forms gram @ cov
    tr = float(np.sum(sys.gram * cov))
    return GaussianPosterior(mean, np.diag(cov).copy(), logdet, tr, covariance=cov)


def _pick_strategy(sys, variant, requested):
    if requested != "auto":
        if requested == "diagonal" and not sys.diagonal:
            raise ValueError("diagonal strategy requires a diagonal Gram matrix")
        if requested == "eigen" and variant == Variant.PER_SLICE:
            raise ValueError("eigen strategy requires an isotropic prior")
        return requested
    if sys.diagonal:
        return "diagonal"
    if variant != Variant.PER_SLICE:
        return "eigen"
    return "cholesky"


def posterior_update(sys, e_beta, prior_precision_diag, strategy="auto"):
    """Optimal Gaussian factor q(g) given the expected precisions.

    ``covariance = (E[beta] gram + diag(D))^-1`` and
    ``mean = E[beta] covariance @ aty``, solved through a Cholesky (or,
    for diagonal Gram, elementwise) factorization.

    Raises
    ------
    NumericalError
        If the posterior precision is not positive definite.
    """
    if not e_beta > 0:
        raise ValueError("e_beta must be positive")
    diag = np.broadcast_to(np.asarray(prior_precision_diag, dtype=np.float64), (sys.n_g,))
    if np.any(diag <= 0):
        raise ValueError("prior precisions must be positive")
    if strategy == "auto":
        strategy = "diagonal" if sys.diagonal else "cholesky"
    eig = _Eigen(sys) if strategy == "eigen" else None
    return _posterior(sys, e_beta, diag, strategy, eig)


def update_alpha_single(post, prior, n_g):
    """Gamma factor of a single core precision."""
    return GammaParams(prior.a0 + 0.5 * n_g, prior.b0 + 0.5 * post.second_moment)


def update_alpha_per_mode(post, prior, ranks):
    """One Gamma factor per mode; every mode sees the whole core.

    All returned factors are identical because each mode prior spans the
    full core: ``shape = a0 + n_G/2`` and ``rate = b0 + E||g||^2 / 2``.
    """
    n_g = int(np.prod(ranks))
    return [update_alpha_single(post, prior, n_g) for _ in ranks]


def slice_second_moments(mean, cov_diag, ranks):
    """``E ||g_i^(k)||^2`` for every slice, as a list of length-``R_k`` arrays."""
    e2 = (np.asarray(mean) ** 2 + np.asarray(cov_diag)).reshape(tuple(ranks))
    d = len(ranks)
    return [e2.sum(axis=tuple(j for j in range(d) if j != k)) for k in range(d)]


def _slice_dims(ranks, normalizer):
    n_g = int(np.prod(ranks))
    div = len(ranks) if normalizer == "bound" else 1
    return [n_g / r / div for r in ranks]


def update_alpha_per_slice(post, prior, ranks, normalizer="bound"):
    """One Gamma factor per core slice, ordered mode by mode.

    Slice ``i`` of mode ``k`` holds ``n_G / R_k`` coefficients and gets
    ``rate = b0 + E||g_i^(k)||^2 / 2``.  The shape is
    ``a0 + n_G / (2 d R_k)`` with the ``"bound"`` normalizer and
    ``a0 + n_G / (2 R_k)`` with ``"full"``.
    """
    if normalizer not in SLICE_NORMALIZERS:
        raise ValueError(f"unknown slice normalizer {normalizer!r}")
    out = []
    moments = slice_second_moments(post.mean, post.cov_diag, ranks)
    for dim, e2 in zip(_slice_dims(ranks, normalizer), moments):
        shape = prior.a0 + 0.5 * dim
        out.extend(GammaParams(shape, prior.b0 + 0.5 * float(v)) for v in e2)
    return out


def slice_precision_diagonal(e_alpha, ranks):
    """Per-coefficient precision ``D_jj = sum_k E[alpha_{k, i_k(j)}]``."""
    e_alpha = np.asarray(e_alpha, dtype=np.float64)
    d = len(ranks)
    total = np.zeros(tuple(ranks))
    start = 0
    for k, r in enumerate(ranks):
        shape = [1] * d
        shape[k] = r
        total = total + e_alpha[start:start + r].reshape(shape)
        start += r
    return total.reshape(-1)


def update_beta(sys, post, prior, m=None):
    """Gamma factor of the noise precision.

    ``E||y - A g||^2 = ||y - A mean||^2 + tr(gram @ covariance)``.
    """
    m = sys.m if m is None else m
    e_res = sys.residual_norm2(post.mean) + post.trace_gram_cov
    return GammaParams(prior.a0 + 0.5 * m, prior.b0 + 0.5 * e_res)


def _prior_blocks(variant, ranks, post, n_g, normalizer):
    """(dimension, expected squared norm) of each alpha's Gaussian block."""
    if variant == Variant.SINGLE:
        return [(n_g, post.second_moment)]
    if variant == Variant.PER_MODE:
        return [(n_g, post.second_moment)] * len(ranks)
    blocks = []
    moments = slice_second_moments(post.mean, post.cov_diag, ranks)
    for dim, e2 in zip(_slice_dims(ranks, normalizer), moments):
        blocks.extend((dim, float(v)) for v in e2)
    return blocks


def _gamma_log_prior(q, prior):
    return (prior.a0 * np.log(prior.b0) - gammaln(prior.a0)
            + (prior.a0 - 1.0) * q.mean_log() - prior.b0 * q.mean())


def elbo(sys, post, alphas, beta, prior, variant=Variant.SINGLE, ranks=None,
         slice_normalizer="bound"):
    """Evidence lower bound of the factorized posterior.

    Expected log joint (likelihood, Gaussian core prior blocks, Gamma
    hyperpriors) plus the entropies of q(g), every q(alpha) and q(beta).
    For the per-slice variant the prior normalizer follows
    ``slice_normalizer``.
    """
    variant = Variant(variant)
    ranks = tuple(sys.core_shape if ranks is None else ranks)
    m, n_g = sys.m, sys.n_g
    e_res = sys.residual_norm2(post.mean) + post.trace_gram_cov
    val = 0.5 * m * (beta.mean_log() - LOG_2PI) - 0.5 * beta.mean() * e_res
    blocks = _prior_blocks(variant, ranks, post, n_g, slice_normalizer)
    if len(blocks) != len(alphas):
        raise ValueError(f"{len(alphas)} alpha factors for {len(blocks)} prior blocks")
    for (dim, e2), q in zip(blocks, alphas):
        val += 0.5 * dim * (q.mean_log() - LOG_2PI) - 0.5 * q.mean() * e2
        val += _gamma_log_prior(q, prior) + q.entropy()
    if variant == Variant.PER_SLICE and slice_normalizer == "bound":
        val += 0.5 * n_g * np.log(len(ranks))
    val += _gamma_log_prior(beta, prior) + beta.entropy()
    val += 0.5 * n_g * (1.0 + LOG_2PI) + 0.5 * post.logdet
    if not np.isfinite(val):
        raise NumericalError("non-finite ELBO")
    return float(val)


@dataclass
class VBResult:
    """Outcome of a variational solve.

    ``lambda_`` holds ``E[alpha]/E[beta]`` for the single variant and
    ``sigma2_hat * E[alpha_k]`` (per mode or per slice) otherwise; the two
    definitions coincide because ``sigma2_hat = 1 / E[beta]``.
    """

    posterior: GaussianPosterior
    alpha: list
    beta: GammaParams
    lambda_: np.ndarray
    sigma2_hat: float
    x_hat: np.ndarray
    iterations: int
    elbo_trace: list
    variant: Variant = Variant.SINGLE
    ranks: tuple = ()
    converged: bool = False

    @property
    def e_alpha(self):
        return np.array([q.mean() for q in self.alpha])

    @property
    def sigma_hat(self):
        return float(np.sqrt(self.sigma2_hat))

    @property
    def lambda_ratio(self):
        """``E[alpha] / E[beta]`` for every alpha component."""
        return self.e_alpha / self.beta.mean()


def _prior_diag(variant, e_alpha, ranks, n_g):
    if variant == Variant.PER_SLICE:
        return slice_precision_diagonal(e_alpha, ranks)
    # python sum starts at 0, so d == 1 reproduces the single variant exactly
    return np.full(n_g, float(sum(e_alpha)))


def _n_alpha(variant, ranks):
    if variant == Variant.SINGLE:
        return 1
    if variant == Variant.PER_MODE:
        return len(ranks)
    return int(sum(ranks))


def _rel_change(new, old):
    new, old = np.asarray(new, dtype=np.float64), np.asarray(old, dtype=np.float64)
    return np.abs(new - old) / np.maximum(np.abs(new), RATE_FLOOR)


def solve(sys, cfg=None, sub=None):
    """Run coordinate-ascent VB on a reduced system.

    Parameters
    ----------
    sys : ReducedSystem
    cfg : VBConfig, optional
    sub : TuckerSubspace, optional
        Used to map the core mean back, ``x_hat = U mean``; without it
        ``x_hat`` is the core mean itself.

    Returns
    -------
    VBResult
    """
    cfg = VBConfig() if cfg is None else cfg
    variant, prior = cfg.variant, cfg.prior
    ranks = tuple(sys.core_shape)
    n_g, m = sys.n_g, sys.m
    strategy = _pick_strategy(sys, variant, cfg.strategy)
    eig = _Eigen(sys) if strategy == "eigen" else None

    n_alpha = _n_alpha(variant, ranks)
    e_alpha = np.full(n_alpha, 1.0 if cfg.fixed_alpha is None else float(cfg.fixed_alpha))
    e_beta = 1.0 if cfg.fixed_beta is None else float(cfg.fixed_beta)
    alphas = [GammaParams(1.0, 1.0 / a) for a in e_alpha]
    beta = GammaParams(1.0, 1.0 / e_beta)
    mean_old = None
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        post = _posterior(sys, e_beta, _prior_diag(variant, e_alpha, ranks, n_g), strategy, eig)
        if cfg.fixed_alpha is None:
            if variant == Variant.SINGLE:
                alphas = [update_alpha_single(post, prior, n_g)]
            elif variant == Variant.PER_MODE:
                alphas = update_alpha_per_mode(post, prior, ranks)
            else:
                alphas = update_alpha_per_slice(post, prior, ranks, cfg.slice_normalizer)
        if cfg.fixed_beta is None:
            beta = update_beta(sys, post, prior, m)
        new_alpha = np.array([q.mean() for q in alphas]) if cfg.fixed_alpha is None else e_alpha
        new_beta = beta.mean() if cfg.fixed_beta is None else e_beta
        if cfg.fixed_alpha is None and cfg.fixed_beta is None:
            trace.append(elbo(sys, post, alphas, beta, prior, variant, ranks,
                              cfg.slice_normalizer))
        change = max(
            np.max(_rel_change(new_alpha, e_alpha)),
            float(_rel_change(new_beta, e_beta)),
        )
        if mean_old is not None:
            dn = np.linalg.norm(post.mean - mean_old)
            change = max(change, dn / max(np.linalg.norm(post.mean), RATE_FLOOR))
        else:
            change = max(change, 1.0)
        e_alpha, e_beta, mean_old = new_alpha, new_beta, post.mean
        if change < cfg.tol:
            converged = True
            break
    if cfg.fixed_alpha is not None or cfg.fixed_beta is not None:
        post = _posterior(sys, e_beta, _prior_diag(variant, e_alpha, ranks, n_g), strategy, eig)
    log.debug("VB %s: %d iterations, converged=%s", variant.value, it, converged)

    sigma2 = 1.0 / e_beta if cfg.fixed_beta is not None else beta.rate / beta.shape
    if variant == Variant.SINGLE:
        lam = np.array([e_alpha[0] / e_beta])
    else:
        lam = sigma2 * np.asarray(e_alpha)
    x_hat = post.mean if sub is None else sub.expand(post.mean)
    return VBResult(
        posterior=post, alpha=alphas, beta=beta, lambda_=lam, sigma2_hat=float(sigma2),
        x_hat=x_hat, iterations=it, elbo_trace=trace, variant=variant, ranks=ranks,
        converged=converged,
    )


def solve_direct(op, y, cfg=None, max_unknowns=DEFAULT_MAX_DIRECT_UNKNOWNS):
    """VB in the original space (identity subspace, ``n_G = n``).

    Raises
    ------
    CapacityError
        If ``n`` exceeds ``max_unknowns``; the dense ``n x n`` covariance
        would not be affordable.
    """
    n = op.shape[1]
    if n > max_unknowns:
        raise CapacityError(f"direct VB with n={n} exceeds the capacity guard ({max_unknowns})")
    sub = identity_subspace(op.input_shape)
    sys = reduce(op, sub, y)
    # the full-space Gram is generally dense; keep the generic path
    return solve(sys, cfg, sub)
