"""SVD-based compression: truncated SVD, higher-order SVD for the Tucker and
tree formats, the sequential TT sweep, and the tolerance-driven truncation
operator.

Every routine reports the canonical-norm error it achieved, the ranks it
actually used and the quasi-optimality constant of the construction: 1 for
order-two truncation, sqrt(d) for Tucker, sqrt(d-1) for TT and
sqrt(2d-2-s) for a dimension tree (s = 1 when the root has two children).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dense import matricize, mode_apply, norm
from .formats import (
    CPTensor,
    TreeTensor,
    TTTensor,
    TuckerTensor,
    cp_to_tt,
    orthonormalize,
    to_dense,
)
from .tree import DimensionTree

_NOISE_REL = 1e-14


@dataclass
class SVDResult:
    """Thin singular value decomposition ``left @ diag(s) @ right.T``.

    Both factor matrices have orthonormal columns and the singular values are
    nonincreasing.  The sign convention makes the largest-magnitude entry of
    every left singular vector nonnegative.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray


@dataclass
class TruncationReport:
    achieved_error: float
    ranks_used: tuple
    bound_constant: float
    notes: tuple = field(default_factory=tuple)


def _svd_fixed(m):
    u, s, vt = np.linalg.svd(np.asarray(m, dtype=float), full_matrices=False)
    if u.shape[1]:
        idx = np.argmax(np.abs(u), axis=0)
        signs = np.sign(u[idx, np.arange(u.shape[1])])
        signs[signs == 0] = 1.0
        u = u * signs
        vt = vt * signs[:, None]
    return u, s, vt


def _mode_unfold(u, nu):
    return np.moveaxis(u, nu, 0).reshape(u.shape[nu], -1)


def _rank_for_budget(s, budget):
    """Smallest kept rank whose discarded spectral tail is within ``budget``;
    singular values below the relative noise floor are always discarded."""
    if s.size == 0:
        return 0
    tails = np.sqrt(np.concatenate([np.cumsum((s**2)[::-1])[::-1], [0.0]]))
    r_budget = int(np.searchsorted(-tails, -max(budget, 0.0)))
    r_noise = int(np.count_nonzero(s > _NOISE_REL * s[0]))
    return max(1, min(r_budget, r_noise))


def truncated_svd(m, r):
    """Best rank-r approximation of a matrix in the canonical norm.

    The squared error equals the sum of the squared discarded singular
    values; asking for more terms than the matrix holds returns the exact
    decomposition.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("truncated_svd expects an order-2 tensor")
    if r < 0:
        raise ValueError("rank must be nonnegative")
    u, s, vt = _svd_fixed(m)
    k = min(int(r), s.size)
    err = float(np.sqrt(np.sum(s[k:] ** 2)))
    res = SVDResult(u[:, :k], s[:k].copy(), vt[:k].T.copy())
    return res, TruncationReport(err, (k,), 1.0)


def hosvd(u, ranks):
    """Truncated higher-order SVD in Tucker format.

    Factor nu holds the dominant left singular vectors of the mode-nu
    unfolding; the core is the projection of ``u`` onto their span.  The
    result is quasi-optimal within sqrt(d) of the best Tucker approximation
    at the same ranks.
    """
    u = np.asarray(u, dtype=float)
    d = u.ndim
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != d or any(r < 1 for r in ranks):
        raise ValueError(f"need {d} positive ranks, got {ranks}")
    notes = []
    factors = []
    used = []
    for nu in range(d):
        r = ranks[nu]
        if r > u.shape[nu]:
            notes.append(f"rank {r} clamped to mode size {u.shape[nu]} on mode {nu}")
            r = u.shape[nu]
        uu, _, _ = _svd_fixed(_mode_unfold(u, nu))
        r = min(r, uu.shape[1])
        factors.append(uu[:, :r])
        used.append(r)
    core = u
    for nu, f in enumerate(factors):
        core = mode_apply(core, nu, f.T)
    x = TuckerTensor(core, factors)
    err = norm(u - to_dense(x))
    return x, TruncationReport(err, tuple(used), math.sqrt(d), tuple(notes))


def tt_svd(u, ranks):
    """Sequential left-to-right SVD sweep producing a TT representation.

    Interface k truncates the unfolding that splits modes {0..k} against the
    rest; the result is within sqrt(d-1) of the best TT approximation.
    """
    u = np.asarray(u, dtype=float)
    d = u.ndim
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != max(d - 1, 0) or any(r < 1 for r in ranks):
        raise ValueError(f"need {d - 1} positive ranks, got {ranks}")
    cores = []
    used = []
    r_prev = 1
    mat = u.reshape(r_prev * u.shape[0], -1) if d > 1 else u.reshape(1, -1)
    if d == 1:
        return TTTensor([u.reshape(1, -1, 1)]), TruncationReport(0.0, (), 1.0)
    for nu in range(d - 1):
        uu, s, vt = _svd_fixed(mat)
        k = min(ranks[nu], s.size)
        cores.append(uu[:, :k].reshape(r_prev, u.shape[nu], k))
        used.append(k)
        mat = (s[:k, None] * vt[:k]).reshape(k * u.shape[nu + 1], -1)
        r_prev = k
    cores.append(mat.reshape(r_prev, u.shape[d - 1], 1))
    x = TTTensor(cores)
    err = norm(u - to_dense(x))
    return x, TruncationReport(err, tuple(used), math.sqrt(max(d - 1, 1)))


def _tree_rank_map(u, tree, ranks):
    shape = u.shape
    if isinstance(ranks, dict):
        rmap = {int(i): int(r) for i, r in ranks.items()}
        missing = [i for i in range(tree.n_nodes) if i != tree.root and i not in rmap]
        if missing:
            raise ValueError(f"missing ranks for nodes {missing}")
    else:
        rmap = {i: int(ranks) for i in range(tree.n_nodes)}
    rmap[tree.root] = 1
    notes = []
    for i in range(tree.n_nodes):
        if i == tree.root:
            continue
        modes = tree.nodes[i]
        cap = min(
            math.prod(shape[m] for m in modes),
            math.prod(shape[m] for m in range(len(shape)) if m not in modes),
        )
        if rmap[i] < 1:
            raise ValueError(f"inadmissible rank {rmap[i]} at node {modes}")
        if rmap[i] > cap:
            notes.append(f"rank {rmap[i]} clamped to {cap} at node {modes}")
            rmap[i] = cap
    # a binary root forces equal ranks on its two children
    root_children = tree.children[tree.root]
    if len(root_children) == 2:
        a, b = root_children
        if rmap[a] != rmap[b]:
            m = min(rmap[a], rmap[b])
            notes.append(f"root child ranks {rmap[a]}/{rmap[b]} reduced to {m}")
            rmap[a] = rmap[b] = m
    for i in tree.internal_nodes():
        prod = math.prod(rmap[j] for j in tree.children[i])
        if rmap[i] > prod:
            raise ValueError(
                f"inadmissible rank {rmap[i]} at node {tree.nodes[i]}: exceeds child product {prod}"
            )
    return rmap, notes


def _project_columns(cols, alpha, tree, children, bases, shape):
    """Coefficients of ``cols`` (flattened over the sorted modes ``alpha``) on
    the tensor product of the children bases.  Returns an array of shape
    (n_cols, r_c1, ..., r_ck)."""
    dims = [shape[m] for m in alpha]
    t = cols.reshape(dims + [cols.shape[1]])
    perm = []
    for j in children:
        perm.extend(alpha.index(m) for m in tree.nodes[j])
    perm.append(len(alpha))
    t = np.transpose(t, perm)
    sizes = [math.prod(shape[m] for m in tree.nodes[j]) for j in children]
    t = t.reshape(sizes + [cols.shape[1]])
    for j in children:
        t = np.tensordot(t, bases[j], axes=(0, 0))
    return t  # axes: (n_cols, r_c1, ..., r_ck)


def tree_hosvd(u, tree, ranks):
    """Higher-order SVD in the tree-based format.

    Every non-root node receives the dominant singular subspace of its
    unfolding of ``u``; transfer tensors express each subspace in the product
    of its children's subspaces, which realizes the level-by-level projection
    and lands within sqrt(2d-2-s) of the best tree-ranked approximation.
    """
    u = np.asarray(u, dtype=float)
    if not isinstance(tree, DimensionTree):
        raise ValueError("tree must be a DimensionTree")
    if tree.order != u.ndim:
        raise ValueError(f"tree over {tree.order} modes, tensor has order {u.ndim}")
    rmap, notes = _tree_rank_map(u, tree, ranks)
    bases = {}
    for i in range(tree.n_nodes):
        if i == tree.root:
            continue
        uu, s, _ = _svd_fixed(matricize(u, tree.nodes[i]))
        k = min(rmap[i], uu.shape[1])
        bases[i] = uu[:, :k]
        rmap[i] = k
    leaf_bases = {i: bases[i] for i in tree.leaves()}
    transfer = {}
    for i in tree.internal_nodes():
        children = tree.children[i]
        if i == tree.root:
            cols = u.reshape(-1, 1)
            alpha = list(range(u.ndim))
        else:
            cols = bases[i]
            alpha = list(tree.nodes[i])
        # the column axis of the projection is the node-rank axis of the transfer
        transfer[i] = _project_columns(cols, alpha, tree, children, bases, u.shape)
    x = TreeTensor(tree, leaf_bases, transfer)
    err = norm(u - to_dense(x))
    d = u.ndim
    s_root = 1 if len(tree.children[tree.root]) == 2 else 0
    bound = math.sqrt(2 * d - 2 - s_root)
    used = tuple(rmap[i] for i in range(tree.n_nodes))
    return x, TruncationReport(err, used, bound, tuple(notes))


# ---------------------------------------------------------------------------
# tolerance-driven truncation
# ---------------------------------------------------------------------------


def _zero_instance(fmt, shape):
    if fmt == "tucker":
        factors = [np.eye(n, 1) for n in shape]
        return TuckerTensor(np.zeros((1,) * len(shape)), factors)
    if fmt == "tt":
        return TTTensor.zeros(shape)
    raise ValueError(f"unsupported truncation target {fmt!r}")


def _truncate_dense(u, eps, fmt):
    u = np.asarray(u, dtype=float)
    d = u.ndim
    nrm = norm(u)
    if nrm == 0.0 or eps >= 1.0:
        x = _zero_instance(fmt, u.shape)
        ranks = (1,) * (d if fmt == "tucker" else max(d - 1, 0))
        bound = math.sqrt(d) if fmt == "tucker" else math.sqrt(max(d - 1, 1))
        notes = ("degenerate zero output",) if nrm > 0 else ()
        return x, TruncationReport(nrm, ranks, bound, notes)
    if fmt == "tucker":
        budget = eps * nrm / math.sqrt(d)
        ranks = []
        for nu in range(d):
            s = np.linalg.svd(_mode_unfold(u, nu), compute_uv=False)
            ranks.append(_rank_for_budget(s, budget))
        x, rep = hosvd(u, tuple(ranks))
        return x, rep
    if fmt == "tt":
        if d == 1:
            return tt_svd(u, ())
        budget = eps * nrm / math.sqrt(d - 1)
        cores = []
        used = []
        r_prev = 1
        mat = u.reshape(u.shape[0], -1)
        for nu in range(d - 1):
            uu, s, vt = _svd_fixed(mat)
            k = _rank_for_budget(s, budget)
            cores.append(uu[:, :k].reshape(r_prev, u.shape[nu], k))
            used.append(k)
            mat = (s[:k, None] * vt[:k]).reshape(k * u.shape[nu + 1], -1)
            r_prev = k
        cores.append(mat.reshape(r_prev, u.shape[d - 1], 1))
        x = TTTensor(cores)
        err = norm(u - to_dense(x))
        return x, TruncationReport(err, tuple(used), math.sqrt(d - 1))
    raise ValueError(f"unsupported truncation target {fmt!r}")


def _round_tt(x, eps):
    """TT rounding on orthogonalized cores; the input is never densified."""
    d = x.order
    if d == 1:
        return TTTensor([c.copy() for c in x.cores]), TruncationReport(0.0, (), 1.0)
    y = orthonormalize(x)  # left-orthogonal, norm carried by the last core
    cores = [c.copy() for c in y.cores]
    nrm = float(np.linalg.norm(cores[-1]))
    if nrm == 0.0 or eps >= 1.0:
        z = TTTensor.zeros(x.shape)
        notes = ("degenerate zero output",) if nrm > 0 else ()
        return z, TruncationReport(nrm, (1,) * (d - 1), math.sqrt(d - 1), notes)
    budget = eps * nrm / math.sqrt(d - 1)
    discarded = 0.0
    for nu in range(d - 1, 0, -1):
        rl, n, rr = cores[nu].shape
        uu, s, vt = _svd_fixed(cores[nu].reshape(rl, n * rr))
        k = _rank_for_budget(s, budget)
        discarded += float(np.sum(s[k:] ** 2))
        cores[nu] = vt[:k].reshape(k, n, rr)
        carry = uu[:, :k] * s[:k]
        cores[nu - 1] = np.tensordot(cores[nu - 1], carry, axes=(2, 0))
    z = TTTensor(cores)
    err = float(np.sqrt(discarded))
    return z, TruncationReport(
        err, z.ranks, math.sqrt(d - 1), ("error from the discarded spectrum (upper bound)",)
    )


def truncate(x, eps, fmt=None):
    """Low-rank approximation with relative canonical-norm error below ``eps``.

    The error budget is split evenly across the d (Tucker) or d-1 (TT)
    interfaces and each interface keeps the smallest rank whose spectral tail
    fits its share.  ``eps`` is relative to the norm of the input.  Dense
    inputs need a target format ('tucker' or 'tt'); already-low-rank inputs
    are truncated on their orthogonalized cores without densifying (a CP
    input goes through its exact TT embedding).
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if isinstance(x, np.ndarray):
        if fmt not in ("tucker", "tt"):
            raise ValueError("dense input needs a target format 'tucker' or 'tt'")
        return _truncate_dense(x, eps, fmt)
    if isinstance(x, TTTensor):
        if fmt not in (None, "tt"):
            raise ValueError("a TT input can only be truncated in the TT format")
        return _round_tt(x, eps)
    if isinstance(x, CPTensor):
        if fmt not in (None, "tt"):
            raise ValueError("a CP input is truncated through its TT embedding")
        return _round_tt(cp_to_tt(x), eps)
    if isinstance(x, TuckerTensor):
        if fmt not in (None, "tucker"):
            raise ValueError("a Tucker input can only be truncated in the Tucker format")
        y = orthonormalize(x)
        inner, rep = _truncate_dense(y.core, eps, "tucker")
        factors = [f @ g for f, g in zip(y.factors, inner.factors)]
        return TuckerTensor(inner.core, factors), rep
    raise TypeError(f"cannot truncate {type(x).__name__}")
