"""Forward operators, Tucker subspaces and the reduced system ``A U``."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, RankError
from .tensor import kron_matvec, kronecker, multi_mode_product, unvectorize

ORTHONORMAL_TOL = 1e-10


def _as_matrix(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    return a


def _check_length(x, n, what="input"):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != n:
        raise DimensionError(f"{what} has length {x.size}, operator expects {n}")
    return x


class DenseOperator:
    """An explicit ``m x n`` matrix.

    ``input_shape`` records how the unknown reshapes into a tensor; it
    defaults to a single mode of length ``n``.
    """

    def __init__(self, matrix, input_shape=None):
        self.matrix = _as_matrix(matrix)
        m, n = self.matrix.shape
        self.input_shape = (n,) if input_shape is None else tuple(input_shape)
        if int(np.prod(self.input_shape)) != n:
            raise DimensionError(f"input shape {self.input_shape} does not match {n} columns")
        self.output_shape = (m,)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        return self.matrix @ _check_length(x, self.shape[1])

    def to_dense(self):
        return self.matrix


class SeparableOperator:
    """Kronecker-structured operator ``A_0 kron A_1 kron ... kron A_{d-1}``.

    Acts on the row-major vectorization of a tensor of shape
    ``(I_0, ..., I_{d-1})`` where ``A_k`` is ``m_k x I_k``; it is never
    materialized except by :meth:`to_dense`.
    """

    def __init__(self, factors):
        self.factors = [_as_matrix(a) for a in factors]
        if not self.factors:
            raise DimensionError("separable operator needs at least one factor")
        self.input_shape = tuple(a.shape[1] for a in self.factors)
        self.output_shape = tuple(a.shape[0] for a in self.factors)

    @property
    def shape(self):
        return int(np.prod(self.output_shape)), int(np.prod(self.input_shape))

    def apply(self, x):
        x = _check_length(x, self.shape[1])
        return kron_matvec(self.factors, x, self.input_shape)

    def to_dense(self):
        return kronecker(*self.factors)


def real_trig_basis(n):
    """Orthonormal real Fourier basis on ``n`` periodic grid points.

    Columns are ordered by increasing absolute frequency: the constant,
    then (cos, sin) pairs for 1, 2, ..., and for even ``n`` the
    alternating Nyquist vector last.

    Returns
    -------
    basis : ndarray, shape (n, n)
    freqs : ndarray of int, shape (n,)
        Absolute frequency carried by each column.
    """
    x = np.arange(n) / n
    cols = [np.full(n, 1.0 / np.sqrt(n))]
    freqs = [0]
    for f in range(1, (n - 1) // 2 + 1):
        cols.append(np.sqrt(2.0 / n) * np.cos(2 * np.pi * f * x))
        cols.append(np.sqrt(2.0 / n) * np.sin(2 * np.pi * f * x))
        freqs += [f, f]
    if n % 2 == 0 and n > 1:
        cols.append(np.cos(np.pi * np.arange(n)) / np.sqrt(n))
        freqs.append(n // 2)
    return np.column_stack(cols), np.array(freqs)


_BASES = {"trig": real_trig_basis}


class SpectralOperator:
    """Operator diagonal in a per-mode orthonormal basis.

    ``A x = B (m * (B^T x))`` with ``B = B_0 kron ... kron B_{d-1}`` and one
    real multiplier per multi-index.

    Parameters
    ----------
    multipliers : ndarray, shape (I_0, ..., I_{d-1})
        Eigen-multiplier for each basis multi-index (in basis column order).
    basis : str or sequence of str
        Basis identifier per mode; only ``"trig"`` is defined.
    """

    def __init__(self, multipliers, basis="trig"):
        self.multipliers = np.asarray(multipliers, dtype=np.float64)
        if not np.all(np.isfinite(self.multipliers)):
            raise ValueError("spectral multipliers must be finite")
        d = self.multipliers.ndim
        names = [basis] * d if isinstance(basis, str) else list(basis)
        if len(names) != d:
            raise DimensionError(f"{len(names)} basis names for {d} modes")
        self.basis_names = names
        self.bases, self.freqs = [], []
        for name, n in zip(names, self.multipliers.shape):
            b, f = _BASES[name](n)
            self.bases.append(b)
            self.freqs.append(f)
        self.input_shape = self.output_shape = self.multipliers.shape

    @property
    def shape(self):
        n = self.multipliers.size
        return n, n

    def apply(self, x):
        x = _check_length(x, self.shape[1])
        c = multi_mode_product(unvectorize(x, self.input_shape), self.bases, transpose=True)
        return multi_mode_product(c * self.multipliers, self.bases).reshape(-1)

    def to_dense(self):
        b = kronecker(*self.bases)
        return (b * self.multipliers.reshape(-1)) @ b.T

    def mode_multipliers(self):
        """Per-mode multiplier vectors if the multipliers factor as an outer product, else ``None``."""
        m = self.multipliers
        d = m.ndim
        if m.reshape(-1)[0] == 0.0:
            return None
        vecs = []
        for k in range(d):
            idx = [0] * d
            idx[k] = slice(None)
            vecs.append(m[tuple(idx)] / (m.reshape(-1)[0] if k else 1.0))
        outer = vecs[0]
        for v in vecs[1:]:
            outer = np.multiply.outer(outer, v)
        scale = np.max(np.abs(m))
        if np.max(np.abs(outer - m)) > 1e-12 * scale:
            return None
        return vecs

    def as_separable(self):
        """Equivalent :class:`SeparableOperator`, or ``None`` when not separable."""
        vecs = self.mode_multipliers()
        if vecs is None:
            return None
        return SeparableOperator([(b * v) @ b.T for b, v in zip(self.bases, vecs)])


def apply(op, x):
    """Forward map ``A x`` for any operator type."""
    return op.apply(x)


@dataclass(frozen=True)
class TuckerSubspace:
    """Orthonormal per-mode factors ``U_k`` (``I_k x R_k``) defining ``x = U g``."""

    factors: tuple

    def __post_init__(self):
        factors = tuple(_as_matrix(u) for u in self.factors)
        object.__setattr__(self, "factors", factors)
        for k, u in enumerate(factors):
            if u.shape[1] > u.shape[0]:
                raise RankError(f"mode {k}: rank {u.shape[1]} exceeds size {u.shape[0]}")
            err = np.max(np.abs(u.T @ u - np.eye(u.shape[1])))
            if err > ORTHONORMAL_TOL:
                raise ValueError(f"factor {k} is not orthonormal (max deviation {err:.2e})")

    @property
    def ranks(self):
        return tuple(u.shape[1] for u in self.factors)

    @property
    def shape(self):
        return tuple(u.shape[0] for u in self.factors)

    @property
    def n_g(self):
        return int(np.prod(self.ranks))

    @property
    def n(self):
        return int(np.prod(self.shape))

    def matrix(self):
        """Dense ``U_0 kron ... kron U_{d-1}`` (``n x n_G``)."""
        return kronecker(*self.factors)

    def expand(self, g):
        """``U g`` as a flat vector of length ``n``."""
        return kron_matvec(self.factors, g, self.ranks)

    def project(self, x):
        """``U^T x`` as a flat vector of length ``n_G``."""
        t = unvectorize(x, self.shape)
        return multi_mode_product(t, self.factors, transpose=True).reshape(-1)


def identity_subspace(shape):
    """Full-rank subspace with identity factors (the unreduced problem)."""
    return TuckerSubspace(tuple(np.eye(n) for n in shape))


def _check_ranks(ranks, sizes):
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(sizes):
        raise RankError(f"{len(ranks)} ranks given for {len(sizes)} modes")
    for k, (r, lim) in enumerate(zip(ranks, sizes)):
        if not 1 <= r <= lim:
            raise RankError(f"mode {k}: rank {r} must lie in [1, {lim}]")
    return ranks


def _fix_signs(v):
    # largest-magnitude entry of each column positive, for reproducible bases
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def build_subspace_from_separable(op, ranks):
    """Leading right singular vectors of each per-mode factor ``A_k``."""
    ranks = _check_ranks(ranks, [min(a.shape) for a in op.factors])
    factors = []
    for a, r in zip(op.factors, ranks):
        _, _, vt = np.linalg.svd(a, full_matrices=False)
        factors.append(_fix_signs(vt[:r].T))
    return TuckerSubspace(tuple(factors))


def build_subspace_from_spectral(op, ranks):
    """Keep the ``R_k`` lowest-frequency basis vectors of each mode."""
    ranks = _check_ranks(ranks, op.input_shape)
    return TuckerSubspace(tuple(b[:, :r] for b, r in zip(op.bases, ranks)))


class ReducedSystem:
    """The core-space regression problem ``y = A_tilde g + e``.

    Attributes
    ----------
    gram : ndarray, shape (n_G, n_G)
        ``A_tilde^T A_tilde``.
    aty : ndarray, shape (n_G,)
        ``A_tilde^T y``.
    y : ndarray, shape (m,)
    core_shape : tuple of int
        Multilinear ranks; ``n_G = prod(core_shape)``.
    mode_factors : list of ndarray or None
        Per-mode ``A_k U_k`` when ``A_tilde`` is their Kronecker product.
    diagonal : bool
        Whether ``gram`` is diagonal to working precision.
    """

    def __init__(self, gram, aty, y, core_shape, matvec, materialize, mode_factors=None):
        gram = np.asarray(gram, dtype=np.float64)
        self.gram = 0.5 * (gram + gram.T)
        self.aty = np.asarray(aty, dtype=np.float64).reshape(-1)
        self.y = np.asarray(y, dtype=np.float64).reshape(-1)
        self.core_shape = tuple(core_shape)
        self.mode_factors = mode_factors
        self._matvec = matvec
        self._materialize = materialize
        off = self.gram - np.diag(np.diag(self.gram))
        scale = np.max(np.abs(np.diag(self.gram))) if self.gram.size else 0.0
        self.diagonal = bool(np.max(np.abs(off), initial=0.0) <= 1e-12 * max(scale, 1e-300))

    @property
    def m(self):
        return self.y.size

    @property
    def n_g(self):
        return self.aty.size

    @cached_property
    def a_tilde(self):
        return self._materialize()

    def matvec(self, g):
        return self._matvec(np.asarray(g, dtype=np.float64).reshape(-1))

    def residual_norm2(self, g):
        r = self.y - self.matvec(g)
        return float(r @ r)


def _reduce_separable(op, sub, y):
    cs = [a @ u for a, u in zip(op.factors, sub.factors)]
    grams = [c.T @ c for c in cs]
    aty = kron_matvec([c.T for c in cs], y, op.output_shape)
    return ReducedSystem(
        kronecker(*grams), aty, y, sub.ranks,
        matvec=lambda g: kron_matvec(cs, g, sub.ranks),
        materialize=lambda: kronecker(*cs),
        mode_factors=cs,
    )


def reduce(op, sub, y):
    """Form the reduced system for ``op`` restricted to ``sub``.

    Separable operators (and spectral operators whose multipliers factor
    per mode) work mode by mode and never materialize ``A``.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    m, n = op.shape
    if sub.n != n:
        raise DimensionError(f"subspace dimension {sub.n} does not match operator input {n}")
    if y.size != m:
        raise DimensionError(f"observation length {y.size} does not match operator output {m}")
    if isinstance(op, SpectralOperator):
        sep = op.as_separable()
        if sep is not None:
            op = sep
    if isinstance(op, SeparableOperator):
        if tuple(sub.shape) != op.input_shape:
            raise DimensionError(f"subspace shape {sub.shape} != operator input shape {op.input_shape}")
        return _reduce_separable(op, sub, y)
    if isinstance(op, SpectralOperator):
        a_t = np.column_stack([op.apply(col) for col in sub.matrix().T])
    else:
        a_t = op.to_dense() @ sub.matrix()
    return ReducedSystem(
        a_t.T @ a_t, a_t.T @ y, y, sub.ranks,
        matvec=lambda g: a_t @ g,
        materialize=lambda: a_t,
    )
