"""Dense multi-way array helpers.

Tensors are plain ``float64`` numpy arrays. Vectorization is row-major
(C order, last index fastest) and modes are numbered from 0, so that

    vec(G x_0 U_0 x_1 U_1 ... x_{d-1} U_{d-1}) = (U_0 kron U_1 kron ... kron U_{d-1}) vec(G)

which is the Kronecker order used throughout the package.
"""

from functools import reduce

import numpy as np

from .errors import DimensionError, ModeError


def as_tensor(t):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        t = t.reshape(1)
    return t


def _check_mode(t, k):
    if not 0 <= k < t.ndim:
        raise ModeError(f"mode {k} out of range for a {t.ndim}-way tensor")


def vectorize(t):
    """Flatten a tensor in row-major order (last index fastest)."""
    return as_tensor(t).reshape(-1).copy()


def unvectorize(v, shape):
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape) or not shape:
        raise DimensionError(f"invalid tensor shape {shape}")
    if v.size != int(np.prod(shape)):
        raise DimensionError(f"vector of length {v.size} cannot fill shape {shape}")
    return v.reshape(shape).copy()


def mode_unfold(t, k):
    """Mode-k matricization.

    Row ``i`` of the result holds every entry whose k-th index equals ``i``;
    columns run over the remaining indices in row-major order.

    Parameters
    ----------
    t : ndarray
        Tensor of shape ``(I_0, ..., I_{d-1})``.
    k : int
        Mode, ``0 <= k < d``.

    Returns
    -------
    ndarray, shape (I_k, prod_{j != k} I_j)
    """
    t = as_tensor(t)
    _check_mode(t, k)
    return np.moveaxis(t, k, 0).reshape(t.shape[k], -1).copy()


def mode_fold(mat, k, shape):
    """Inverse of :func:`mode_unfold` for a tensor of the given ``shape``."""
    shape = tuple(int(s) for s in shape)
    mat = np.asarray(mat, dtype=np.float64)
    if not 0 <= k < len(shape):
        raise ModeError(f"mode {k} out of range for a {len(shape)}-way tensor")
    rest = shape[:k] + shape[k + 1:]
    if mat.shape != (shape[k], int(np.prod(rest))):
        raise DimensionError(f"matrix of shape {mat.shape} cannot fold into {shape} along mode {k}")
    return np.moveaxis(mat.reshape((shape[k],) + rest), 0, k).copy()


def mode_product(t, m, k):
    """Mode-k product ``t x_k m``.

    ``(t x_k M)[..., j, ...] = sum_i t[..., i, ...] * M[j, i]``; the k-th
    dimension of the result is ``M.shape[0]``.
    """
    t = as_tensor(t)
    m = np.asarray(m, dtype=np.float64)
    _check_mode(t, k)
    if m.ndim != 2 or m.shape[1] != t.shape[k]:
        raise DimensionError(
            f"matrix of shape {m.shape} does not conform with mode {k} of size {t.shape[k]}"
        )
    return np.moveaxis(np.tensordot(m, t, axes=([1], [k])), 0, k)


def multi_mode_product(t, mats, transpose=False):
    """Apply one matrix per mode; ``None`` entries leave that mode alone."""
    out = as_tensor(t)
    for k, m in enumerate(mats):
        if m is None:
            continue
        out = mode_product(out, m.T if transpose else m, k)
    return out


def kronecker(*mats):
    """Kronecker product of one or more matrices, left to right."""
    if not mats:
        raise DimensionError("kronecker needs at least one matrix")
    mats = [np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in mats]
    return reduce(np.kron, mats)


def tucker_reconstruct(core, factors):
    """Expand a Tucker core: ``core x_0 U_0 x_1 U_1 ... x_{d-1} U_{d-1}``."""
    core = as_tensor(core)
    if len(factors) != core.ndim:
        raise DimensionError(f"{len(factors)} factors given for a {core.ndim}-way core")
    for k, u in enumerate(factors):
        u = np.asarray(u)
        if u.ndim != 2 or u.shape[1] != core.shape[k]:
            raise DimensionError(
                f"factor {k} has shape {u.shape}, expected {core.shape[k]} columns"
            )
    return multi_mode_product(core, factors)


def kron_matvec(mats, x, shape=None):
    """``(M_0 kron ... kron M_{d-1}) @ x`` via successive mode products."""
    if shape is None:
        shape = tuple(m.shape[1] for m in mats)
    t = unvectorize(x, shape)
    return multi_mode_product(t, mats).reshape(-1)
