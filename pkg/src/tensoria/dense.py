"""Dense order-d tensors: unfoldings, canonical inner product, mode products.

A dense tensor is a plain C-ordered ``numpy.ndarray`` of ``float64``; the
flattened data runs row-major with the last index fastest.  Modes are
0-based.  A mode subset ("alpha") is any iterable of distinct mode indices;
matricization rows run over the alpha modes in increasing mode order
(row-major), columns over the complement in increasing mode order.
"""

import math

import numpy as np


def as_tensor(a):
    """Coerce to a float64 ndarray and reject non-finite entries."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("tensor entries must be finite")
    return a


def check_modes(alpha, ndim, proper=True):
    """Validate a mode subset and return it as a sorted tuple.

    With ``proper=True`` (the matricization case) alpha must be a nonempty
    proper subset of ``range(ndim)``.
    """
    modes = tuple(sorted(int(m) for m in alpha))
    if len(set(modes)) != len(modes):
        raise ValueError("mode subset contains duplicates")
    if any(m < 0 or m >= ndim for m in modes):
        raise ValueError(f"mode out of range for an order-{ndim} tensor: {modes}")
    if not modes:
        raise ValueError("mode subset must be nonempty")
    if proper and len(modes) == ndim:
        raise ValueError("mode subset must be a proper subset of all modes")
    return modes


def complement(alpha, ndim):
    return tuple(m for m in range(ndim) if m not in set(alpha))


def inner(u, v):
    """Canonical inner product: sum of elementwise products over all indices."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    return float(np.dot(u.ravel(), v.ravel()))


def norm(u):
    """Canonical norm, equal to the Frobenius norm of any matricization."""
    return float(np.linalg.norm(np.asarray(u, dtype=float).ravel()))


def matricize(u, alpha):
    """Unfold ``u`` into a matrix grouping modes ``alpha`` against the rest.

    The result has shape ``(prod(n[m] for m in alpha), prod(rest))``.  Entry
    (row, col) of the result equals the entry of ``u`` whose alpha part
    decodes ``row`` (row-major over alpha in increasing mode order) and whose
    complement part decodes ``col`` the same way.
    """
    u = np.asarray(u, dtype=float)
    alpha = check_modes(alpha, u.ndim, proper=True)
    comp = complement(alpha, u.ndim)
    nrow = math.prod(u.shape[m] for m in alpha)
    return np.transpose(u, alpha + comp).reshape(nrow, -1)


def dematricize(m, alpha, shape):
    """Exact inverse of :func:`matricize` for the given alpha and shape."""
    m = np.asarray(m, dtype=float)
    shape = tuple(int(n) for n in shape)
    alpha = check_modes(alpha, len(shape), proper=True)
    comp = complement(alpha, len(shape))
    nrow = math.prod(shape[k] for k in alpha)
    ncol = math.prod(shape[k] for k in comp)
    if m.ndim != 2 or m.shape != (nrow, ncol):
        raise ValueError(
            f"matrix of shape {m.shape} inconsistent with shape {shape} split by {alpha}"
        )
    perm = alpha + comp
    inv = np.argsort(perm)
    return np.transpose(m.reshape([shape[k] for k in perm]), inv)


def mode_apply(u, nu, mat):
    """Apply a matrix along mode ``nu``: the action of id x ... x mat x ... x id.

    ``mat`` has shape (m, n_nu); the result replaces dimension n_nu by m.
    Applications along distinct modes commute.
    """
    u = np.asarray(u, dtype=float)
    mat = np.asarray(mat, dtype=float)
    nu = int(nu)
    if nu < 0 or nu >= u.ndim:
        raise ValueError(f"mode {nu} out of range for an order-{u.ndim} tensor")
    if mat.ndim != 2 or mat.shape[1] != u.shape[nu]:
        raise ValueError(
            f"matrix of shape {mat.shape} cannot act on mode {nu} of size {u.shape[nu]}"
        )
    return np.moveaxis(np.tensordot(mat, u, axes=(1, nu)), 0, nu)


def alpha_rank(u, alpha, tol=0.0):
    """Number of singular values of the alpha-unfolding above a relative cut.

    Counts singular values strictly greater than ``tol * sigma_max``.  With
    ``tol=0`` the cut falls back to the standard numerical-rank threshold
    ``max(matrix shape) * eps * sigma_max``, so exact low-rank structure is
    detected through floating-point noise.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    u = np.asarray(u, dtype=float)
    m = matricize(u, alpha)
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    if tol > 0.0:
        cut = tol * s[0]
    else:
        cut = max(m.shape) * np.finfo(float).eps * s[0]
    return int(np.count_nonzero(s > cut))
