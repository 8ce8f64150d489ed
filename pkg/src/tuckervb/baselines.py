"""Spectral Tikhonov solver and classical parameter-choice rules.

All criteria are evaluated from the SVD ``A = U diag(s) V^T`` using the
filter factors ``f_i = s_i^2 / (s_i^2 + lam)`` of the regularized normal
equations ``(A^T A + lam I) x = A^T y``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import SelectionError
from .tensor import kron_matvec

TRUNCATION = 1e-14
GRID_POINTS = 200
GRID_DECADES = 4.0
TIE_RTOL = 1e-12
DERIV_STEP = 1e-5


class SvdSystem:
    """Thin SVD of an operator together with the projected data.

    Attributes
    ----------
    s : ndarray
        Singular values, descending, all above ``s_max * 1e-14``.
    uty : ndarray
        ``U^T y`` in the same order as ``s``.
    y_norm2 : float
        ``||y||^2``.
    m : int
        Number of observations.
    u, v : ndarray or None
        Dense singular vectors when available.  Kronecker-structured
        systems store ``v_factors`` and ``order`` instead of ``v``.
    """

    def __init__(self, s, uty, y_norm2, m, u=None, v=None, v_factors=None, order=None,
                 core_shape=None):
        s = np.asarray(s, dtype=np.float64)
        if s.size == 0 or np.any(np.diff(s) > 0) or s[-1] <= 0:
            raise ValueError("singular values must be positive and sorted descending")
        self.s = s
        self.uty = np.asarray(uty, dtype=np.float64)
        self.y_norm2 = float(y_norm2)
        self.m = int(m)
        self.u = u
        self.v = v
        self.v_factors = v_factors
        self.order = order
        self.core_shape = core_shape

    @property
    def rank(self):
        return self.s.size

    @property
    def condition_number(self):
        return float(self.s[0] / self.s[-1])

    @property
    def residual_floor(self):
        """``||y||^2 - ||U^T y||^2``: data outside the range of ``A``."""
        return max(self.y_norm2 - float(self.uty @ self.uty), 0.0)

    def from_coefficients(self, c):
        """Map coefficients on the right singular vectors to ``x``."""
        if self.v is not None:
            return self.v @ c
        z = np.zeros(int(np.prod(self.core_shape)))
        z[self.order] = c
        return kron_matvec(self.v_factors, z, self.core_shape)

    def filters(self, lam):
        s2 = self.s**2
        return s2 / (s2 + lam)

    def residual_norm2(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        s2 = self.s**2
        b2 = self.uty**2
        w = lam[..., None] / (s2 + lam[..., None])
        return (w**2 * b2).sum(axis=-1) + self.residual_floor

    def solution_norm2(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        s2 = self.s**2
        b2 = self.uty**2
        return (s2 * b2 / (s2 + lam[..., None]) ** 2).sum(axis=-1)

    def dof_complement(self, lam):
        """``m - sum_i f_i`` without cancellation at small ``lam``."""
        lam = np.asarray(lam, dtype=np.float64)
        s2 = self.s**2
        return (self.m - self.rank) + (lam[..., None] / (s2 + lam[..., None])).sum(axis=-1)

    def dof(self, lam):
        """Trace of the influence matrix, ``sum_i f_i``."""
        lam = np.asarray(lam, dtype=np.float64)
        s2 = self.s**2
        return (s2 / (s2 + lam[..., None])).sum(axis=-1)


def _truncate(s):
    return s > s.max() * TRUNCATION


def svd_dense(a, y):
    """SVD system of an explicit matrix."""
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = _truncate(s)
    u, s, v = u[:, keep], s[keep], vt[keep].T
    return SvdSystem(s, u.T @ y, y @ y, y.size, u=u, v=v)


def svd_kronecker(factors, y, out_shape=None):
    """SVD system of ``F_0 kron ... kron F_{d-1}`` from per-factor SVDs."""
    factors = [np.asarray(f, dtype=np.float64) for f in factors]
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    us, ss, vs = [], [], []
    for f in factors:
        u, s, vt = np.linalg.svd(f, full_matrices=False)
        us.append(u)
        ss.append(s)
        vs.append(vt.T)
    out_shape = tuple(f.shape[0] for f in factors) if out_shape is None else out_shape
    core_shape = tuple(s.size for s in ss)
    s_all = ss[0]
    for s in ss[1:]:
        s_all = np.multiply.outer(s_all, s).reshape(-1)
    uty_all = kron_matvec([u.T for u in us], y, out_shape)
    order = np.argsort(-s_all, kind="stable")
    order = order[_truncate(s_all[order])]
    return SvdSystem(s_all[order], uty_all[order], y @ y, y.size,
                     v_factors=vs, order=order, core_shape=core_shape)


def svd_reduced(sys):
    """SVD system of a :class:`~tuckervb.operators.ReducedSystem`."""
    if sys.mode_factors is not None:
        return svd_kronecker(sys.mode_factors, sys.y,
                             tuple(c.shape[0] for c in sys.mode_factors))
    return svd_dense(sys.a_tilde, sys.y)


def tikhonov_solve(svd, lam):
    """``x = sum_i s_i / (s_i^2 + lam) (u_i^T y) v_i``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    c = svd.s / (svd.s**2 + lam) * svd.uty
    return svd.from_coefficients(c)


def default_grid(svd, points=GRID_POINTS, decades=GRID_DECADES):
    """Log-spaced grid over ``[s_min^2 10^-decades, s_max^2 10^decades]``."""
    lo = np.log10(svd.s[-1] ** 2) - decades
    hi = np.log10(svd.s[0] ** 2) + decades
    return np.logspace(lo, hi, points)


@dataclass
class SelectionResult:
    lam: float
    method: str
    criterion_curve: list = field(default_factory=list)
    status: str = "ok"


def _check_grid(grid):
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 5 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid needs at least 5 positive increasing values")
    return grid


def _argmin_large(values):
    # ties (equal up to rounding) go to the larger lambda
    vmin = values.min()
    tied = values <= vmin + TIE_RTOL * max(abs(vmin), 1e-300)
    return int(np.flatnonzero(tied)[-1])


def _refine(f, lo, mid, hi, h=DERIV_STEP):
    """Stationary point of ``f`` in ``[lo, hi]``.

    Root of the central-difference derivative when it changes sign, which
    locates a flat minimum to near machine precision; golden section
    otherwise.
    """
    def df(t):
        return (f(t + h) - f(t - h)) / (2 * h)

    d_lo, d_hi = df(lo), df(hi)
    if d_lo < 0 < d_hi:
        return float(optimize.brentq(df, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200))
    try:
        t = optimize.golden(f, brack=(lo, mid, hi), tol=1e-10)
    except ValueError:
        # bracket not strict (plateau within the tie tolerance)
        return float(mid)
    return float(np.clip(t, lo, hi))


def _minimize_on_grid(fun, grid, method):
    vals = fun(grid)
    if not np.all(np.isfinite(vals)):
        raise SelectionError(f"{method}: non-finite criterion values")
    vmax, vmin = vals.max(), vals.min()
    if vmax - vmin < 1e-14 * max(abs(vmax), 1e-300):
        raise SelectionError(f"{method}: criterion is flat over the grid")
    i = _argmin_large(vals)
    curve = list(zip(grid.tolist(), vals.tolist()))
    if i == 0 or i == grid.size - 1:
        return SelectionResult(float(grid[i]), method, curve, status="boundary")
    lg = np.log(grid)

    def f(t):
        return float(fun(np.array([np.exp(t)]))[0])

    t = _refine(f, lg[i - 1], lg[i], lg[i + 1])
    lam = float(np.exp(t)) if f(t) <= vals[i] else float(grid[i])
    return SelectionResult(lam, method, curve)


def gcv_function(svd, lam):
    """``G = m ||r||^2 / (m - sum f_i)^2``."""
    return svd.m * svd.residual_norm2(lam) / svd.dof_complement(lam) ** 2


def upre_function(svd, lam, sigma2):
    """``U = ||r||^2 / m + 2 sigma^2 / m sum f_i - sigma^2``."""
    m = svd.m
    return svd.residual_norm2(lam) / m + 2.0 * sigma2 / m * svd.dof(lam) - sigma2


def gcv_select(svd, grid=None):
    """Generalized cross-validation: grid search plus golden-section refinement."""
    grid = default_grid(svd) if grid is None else _check_grid(grid)
    return _minimize_on_grid(lambda lam: gcv_function(svd, lam), grid, "gcv")


def upre_select(svd, sigma2, grid=None):
    """Unbiased predictive risk estimator with known noise variance."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    grid = default_grid(svd) if grid is None else _check_grid(grid)
    return _minimize_on_grid(lambda lam: upre_function(svd, lam, sigma2), grid, "upre")


def lcurve_curvature(svd, lam):
    """Signed curvature of ``(log ||r||^2, log ||x||^2)`` parametrized by ``lam``.

    Closed-form derivatives of both norms; positive at the corner.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))[:, None]
    s2 = svd.s**2
    b2 = svd.uty**2
    den = s2 + lam
    eta = (s2 * b2 / den**2).sum(axis=1)
    deta = (-2.0 * s2 * b2 / den**3).sum(axis=1)
    d2eta = (6.0 * s2 * b2 / den**4).sum(axis=1)
    lam = lam[:, 0]
    rho = svd.residual_norm2(lam)
    drho = -lam * deta
    d2rho = -deta - lam * d2eta
    # derivatives with respect to t = log(lam)
    rho_t, rho_tt = lam * drho, lam * drho + lam**2 * d2rho
    eta_t, eta_tt = lam * deta, lam * deta + lam**2 * d2eta
    xp, xpp = rho_t / rho, (rho_tt * rho - rho_t**2) / rho**2
    yp, ypp = eta_t / eta, (eta_tt * eta - eta_t**2) / eta**2
    return (xp * ypp - xpp * yp) / (xp**2 + yp**2) ** 1.5


def lcurve_select(svd, grid=None):
    """Maximum-curvature point of the L-curve, refined by golden section."""
    grid = default_grid(svd) if grid is None else _check_grid(grid)
    rho = svd.residual_norm2(grid)
    eta = svd.solution_norm2(grid)
    if np.any(rho <= 0) or np.any(eta <= 0) or np.ptp(np.log(rho)) <= 0 or np.ptp(np.log(eta)) <= 0:
        raise SelectionError("lcurve: degenerate L-curve (no variation in norms)")
    res = _minimize_on_grid(lambda lam: -lcurve_curvature(svd, lam), grid, "lcurve")
    res.criterion_curve = [(lam, -v) for lam, v in res.criterion_curve]
    return res


def dp_select(svd, sigma2, grid=None, tau=1.0):
    """Discrepancy principle: ``||r_lam||^2 = tau m sigma^2`` by bisection in ``log lam``.

    When the target is not bracketed by the grid the nearest grid end is
    returned with ``status="boundary"``.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    grid = default_grid(svd) if grid is None else _check_grid(grid)
    target = tau * svd.m * sigma2
    vals = svd.residual_norm2(grid) - target
    curve = list(zip(grid.tolist(), vals.tolist()))
    if vals[0] >= 0:
        return SelectionResult(float(grid[0]), "dp", curve, status="boundary")
    if vals[-1] <= 0:
        return SelectionResult(float(grid[-1]), "dp", curve, status="boundary")

    def f(t):
        return float(svd.residual_norm2(np.array([np.exp(t)]))[0] - target)

    t = optimize.bisect(f, np.log(grid[0]), np.log(grid[-1]), xtol=1e-14, rtol=1e-15, maxiter=400)
    return SelectionResult(float(np.exp(t)), "dp", curve)


def select(svd, method, sigma2=None, grid=None, tau=1.0):
    """Dispatch by method name (``lcurve``, ``gcv``, ``upre``, ``dp``)."""
    if method == "lcurve":
        return lcurve_select(svd, grid)
    if method == "gcv":
        return gcv_select(svd, grid)
    if method == "upre":
        return upre_select(svd, sigma2, grid)
    if method == "dp":
        return dp_select(svd, sigma2, grid, tau)
    raise ValueError(f"unknown selection method {method!r}")
