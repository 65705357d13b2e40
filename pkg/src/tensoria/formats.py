"""Low-rank tensor formats: canonical (CP), Tucker, tensor train, tree-based.

All format classes are value types: construction copies the input arrays and
nothing mutates them afterwards, so instances are safe to share.  Random
construction takes an explicit seed (NumPy PCG64 stream); there is no hidden
global generator state.
"""

import math

import numpy as np

from .dense import mode_apply
from .tree import DimensionTree


def _factor(a):
    a = np.array(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("factor must be a 2d array")
    return a


class CPTensor:
    """Sum of r weighted elementary tensors.

    ``factors[nu]`` has shape (n_nu, r); column i is the mode-nu vector of the
    i-th elementary term.  ``weights`` defaults to all ones; greedy
    constructions keep factor columns unit-norm and carry magnitudes here.
    """

    def __init__(self, factors, weights=None):
        self.factors = [_factor(f) for f in factors]
        if not self.factors:
            raise ValueError("need at least one factor")
        r = self.factors[0].shape[1]
        if any(f.shape[1] != r for f in self.factors):
            raise ValueError("all CP factors must share the column count")
        if weights is None:
            self.weights = np.ones(r)
        else:
            self.weights = np.array(weights, dtype=float).reshape(-1)
            if self.weights.shape != (r,):
                raise ValueError(f"expected {r} weights, got {self.weights.shape}")

    @property
    def order(self):
        return len(self.factors)

    @property
    def shape(self):
        return tuple(f.shape[0] for f in self.factors)

    @property
    def rank(self):
        return self.factors[0].shape[1]

    @classmethod
    def zeros(cls, shape):
        return cls([np.zeros((n, 0)) for n in shape], np.zeros(0))


class TuckerTensor:
    """Core tensor contracted with one factor matrix per mode."""

    def __init__(self, core, factors):
        self.core = np.array(core, dtype=float)
        self.factors = [_factor(f) for f in factors]
        if self.core.ndim != len(self.factors):
            raise ValueError("core order must match the number of factors")
        for nu, f in enumerate(self.factors):
            if f.shape[1] != self.core.shape[nu]:
                raise ValueError(
                    f"factor {nu} has {f.shape[1]} columns, core expects {self.core.shape[nu]}"
                )

    @property
    def order(self):
        return self.core.ndim

    @property
    def shape(self):
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self):
        return self.core.shape


class TTTensor:
    """Chain of order-3 cores; core nu has shape (r_{nu-1}, n_nu, r_nu) with
    boundary ranks r_0 = r_d = 1."""

    def __init__(self, cores):
        self.cores = [np.array(c, dtype=float) for c in cores]
        if not self.cores:
            raise ValueError("need at least one core")
        for c in self.cores:
            if c.ndim != 3:
                raise ValueError("TT cores must be order-3 arrays")
        if self.cores[0].shape[0] != 1 or self.cores[-1].shape[2] != 1:
            raise ValueError("boundary TT ranks must be 1")
        for a, b in zip(self.cores[:-1], self.cores[1:]):
            if a.shape[2] != b.shape[0]:
                raise ValueError("inner TT ranks of consecutive cores must match")

    @property
    def order(self):
        return len(self.cores)

    @property
    def shape(self):
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self):
        return tuple(c.shape[2] for c in self.cores[:-1])

    @classmethod
    def zeros(cls, shape):
        return cls([np.zeros((1, n, 1)) for n in shape])


class TreeTensor:
    """Tree-based (hierarchical Tucker) representation.

    ``leaf_bases[i]`` is the (n_nu, r_i) basis of leaf node i; ``transfer[i]``
    is the transfer tensor of internal node i with shape (r_i, r_c1, ..., r_ck)
    over its children in tree order.  The root rank is 1.
    """

    def __init__(self, tree, leaf_bases, transfer):
        if not isinstance(tree, DimensionTree):
            raise ValueError("tree must be a DimensionTree")
        self.tree = tree
        self.leaf_bases = {int(i): _factor(b) for i, b in leaf_bases.items()}
        self.transfer = {int(i): np.array(t, dtype=float) for i, t in transfer.items()}
        if sorted(self.leaf_bases) != sorted(tree.leaves()):
            raise ValueError("leaf_bases keys must be exactly the tree leaves")
        if sorted(self.transfer) != sorted(tree.internal_nodes()):
            raise ValueError("transfer keys must be exactly the internal nodes")
        for i in tree.internal_nodes():
            t = self.transfer[i]
            expected = (self.node_rank(i),) + tuple(
                self.node_rank(j) for j in tree.children[i]
            )
            if t.shape != expected:
                raise ValueError(
                    f"transfer at node {tree.nodes[i]} has shape {t.shape}, expected {expected}"
                )
        if self.node_rank(tree.root) != 1:
            raise ValueError("root rank must be 1")
        for i in tree.internal_nodes():
            child_prod = math.prod(self.node_rank(j) for j in tree.children[i])
            if self.node_rank(i) > child_prod:
                raise ValueError(
                    f"rank at node {tree.nodes[i]} exceeds the product of child ranks"
                )

    def node_rank(self, i):
        if self.tree.is_leaf(i):
            return self.leaf_bases[i].shape[1]
        return self.transfer[i].shape[0]

    @property
    def ranks(self):
        return {i: self.node_rank(i) for i in range(self.tree.n_nodes)}

    @property
    def order(self):
        return self.tree.order

    @property
    def shape(self):
        dims = [0] * self.order
        for i in self.tree.leaves():
            dims[self.tree.nodes[i][0]] = self.leaf_bases[i].shape[0]
        return tuple(dims)


FORMAT_NAMES = {"cp": CPTensor, "tucker": TuckerTensor, "tt": TTTensor, "tree": TreeTensor}


def format_name(x):
    for name, cls in FORMAT_NAMES.items():
        if isinstance(x, cls):
            return name
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")


# ---------------------------------------------------------------------------
# reconstruction and evaluation
# ---------------------------------------------------------------------------


def _tree_node_dense(x, i):
    """Array of shape (r_i, *dims of node i's modes in increasing order)."""
    tree = x.tree
    if tree.is_leaf(i):
        return x.leaf_bases[i].T.copy()
    t = x.transfer[i]
    mode_order = []
    for j in tree.children[i]:
        child = _tree_node_dense(x, j)
        # contract the leading child-rank axis; child mode axes append at the end
        t = np.tensordot(t, child, axes=(1, 0))
        mode_order.extend(tree.nodes[j])
    perm = (0,) + tuple(1 + k for k in np.argsort(mode_order))
    return np.transpose(t, perm)


def to_dense(x):
    """Exact dense reconstruction of a low-rank tensor."""
    if isinstance(x, CPTensor):
        out = np.zeros(x.shape)
        for i in range(x.rank):
            term = x.weights[i]
            piece = np.array(term, dtype=float)
            for f in x.factors:
                piece = np.multiply.outer(piece, f[:, i])
            out += piece
        return out
    if isinstance(x, TuckerTensor):
        out = x.core
        for nu, f in enumerate(x.factors):
            out = mode_apply(out, nu, f)
        return out
    if isinstance(x, TTTensor):
        out = x.cores[0]
        for c in x.cores[1:]:
            out = np.tensordot(out, c, axes=(out.ndim - 1, 0))
        return out.reshape(x.shape)
    if isinstance(x, TreeTensor):
        return _tree_node_dense(x, x.tree.root)[0]
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")


def eval_entry(x, idx):
    """Entry of the represented tensor at a multi-index, without densifying.

    For a TT tensor this is a chain of d small matrix-vector products.
    """
    idx = tuple(int(k) for k in idx)
    shape = x.shape
    if len(idx) != len(shape) or any(k < 0 or k >= n for k, n in zip(idx, shape)):
        raise IndexError(f"index {idx} out of range for shape {shape}")
    if isinstance(x, CPTensor):
        if x.rank == 0:
            return 0.0
        rows = np.ones(x.rank)
        for nu, f in enumerate(x.factors):
            rows = rows * f[idx[nu], :]
        return float(np.dot(x.weights, rows))
    if isinstance(x, TuckerTensor):
        out = x.core
        for nu, f in enumerate(x.factors):
            out = np.tensordot(f[idx[nu], :], out, axes=(0, 0))
        return float(out)
    if isinstance(x, TTTensor):
        v = x.cores[0][:, idx[0], :]
        for nu in range(1, len(x.cores)):
            v = v @ x.cores[nu][:, idx[nu], :]
        return float(v[0, 0])
    if isinstance(x, TreeTensor):

        def node_vec(i):
            tree = x.tree
            if tree.is_leaf(i):
                return x.leaf_bases[i][idx[tree.nodes[i][0]], :]
            t = x.transfer[i]
            for j in tree.children[i]:
                t = np.tensordot(t, node_vec(j), axes=(1, 0))
            return t

        return float(node_vec(x.tree.root)[0])
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")


def param_count(x):
    """Number of real parameters of the representation."""
    if isinstance(x, CPTensor):
        return x.rank * sum(x.shape)
    if isinstance(x, TuckerTensor):
        return math.prod(x.ranks) + sum(r * n for r, n in zip(x.ranks, x.shape))
    if isinstance(x, TTTensor):
        return sum(c.shape[0] * c.shape[2] * c.shape[1] for c in x.cores)
    if isinstance(x, TreeTensor):
        total = sum(b.size for b in x.leaf_bases.values())
        total += sum(t.size for t in x.transfer.values())
        return total
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------


def scale(x, c):
    """Multiply the represented tensor by a scalar; ranks are unchanged."""
    c = float(c)
    if isinstance(x, CPTensor):
        return CPTensor(x.factors, x.weights * c)
    if isinstance(x, TuckerTensor):
        return TuckerTensor(x.core * c, x.factors)
    if isinstance(x, TTTensor):
        cores = [x.cores[0] * c] + [core.copy() for core in x.cores[1:]]
        return TTTensor(cores)
    if isinstance(x, TreeTensor):
        transfer = {i: t.copy() for i, t in x.transfer.items()}
        transfer[x.tree.root] = transfer[x.tree.root] * c
        return TreeTensor(x.tree, x.leaf_bases, transfer)
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")


def add(x, y):
    """Rank-additive sum of two tensors in the same format.

    The reconstruction equals the sum of the reconstructions exactly; ranks
    add componentwise (block embedding, no recompression).
    """
    if type(x) is not type(y):
        raise ValueError("operands must be in the same format")
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if isinstance(x, CPTensor):
        factors = [np.hstack([a, b]) for a, b in zip(x.factors, y.factors)]
        return CPTensor(factors, np.concatenate([x.weights, y.weights]))
    if isinstance(x, TuckerTensor):
        ranks = tuple(a + b for a, b in zip(x.ranks, y.ranks))
        core = np.zeros(ranks)
        core[tuple(slice(0, r) for r in x.ranks)] = x.core
        core[tuple(slice(r, None) for r in x.ranks)] = y.core
        factors = [np.hstack([a, b]) for a, b in zip(x.factors, y.factors)]
        return TuckerTensor(core, factors)
    if isinstance(x, TTTensor):
        d = x.order
        if d == 1:
            return TTTensor([x.cores[0] + y.cores[0]])
        cores = []
        for nu in range(d):
            a, b = x.cores[nu], y.cores[nu]
            if nu == 0:
                cores.append(np.concatenate([a, b], axis=2))
            elif nu == d - 1:
                cores.append(np.concatenate([a, b], axis=0))
            else:
                c = np.zeros((a.shape[0] + b.shape[0], a.shape[1], a.shape[2] + b.shape[2]))
                c[: a.shape[0], :, : a.shape[2]] = a
                c[a.shape[0] :, :, a.shape[2] :] = b
                cores.append(c)
        return TTTensor(cores)
    if isinstance(x, TreeTensor):
        if x.tree != y.tree:
            raise ValueError("tree mismatch")
        tree = x.tree
        leaf_bases = {i: np.hstack([x.leaf_bases[i], y.leaf_bases[i]]) for i in tree.leaves()}
        transfer = {}
        for i in tree.internal_nodes():
            tx, ty = x.transfer[i], y.transfer[i]
            if i == tree.root:
                shape = (1,) + tuple(a + b for a, b in zip(tx.shape[1:], ty.shape[1:]))
                t = np.zeros(shape)
                t[(0,) + tuple(slice(0, r) for r in tx.shape[1:])] = tx[0]
                t[(0,) + tuple(slice(r, None) for r in tx.shape[1:])] += ty[0]
            else:
                shape = tuple(a + b for a, b in zip(tx.shape, ty.shape))
                t = np.zeros(shape)
                t[tuple(slice(0, r) for r in tx.shape)] = tx
                t[tuple(slice(r, None) for r in tx.shape)] = ty
            transfer[i] = t
        return TreeTensor(tree, leaf_bases, transfer)
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")


# ---------------------------------------------------------------------------
# orthonormalization
# ---------------------------------------------------------------------------

_TRIM_REL = 1e-13


def _qr_pos(a):
    """Thin QR with nonnegative diagonal of R; trims numerically dependent
    columns (falls back to an SVD basis in the rank-deficient case)."""
    a = np.asarray(a, dtype=float)
    if not a.any():
        # zero matrix: keep a single zero column so downstream shapes stay valid
        return np.zeros((a.shape[0], 1)), np.zeros((1, a.shape[1]))
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag.min() <= _TRIM_REL * diag.max():
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        keep = s > _TRIM_REL * s[0]
        u, s, vt = u[:, keep], s[keep], vt[keep]
        signs = np.sign(u[np.argmax(np.abs(u), axis=0), np.arange(u.shape[1])])
        signs[signs == 0] = 1.0
        return u * signs, (s[:, None] * vt) * signs[:, None]
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, r * signs[:, None]


def orthonormalize(x):
    """Return an equivalent representation with orthonormal factors.

    Tucker and tree leaf factors get orthonormal columns (tree internal
    transfers become orthonormal frames as well, so the whole norm sits in the
    root transfer).  TT cores are left-orthogonalized except the last, whose
    Frobenius norm then equals the tensor norm.  The reconstruction is
    unchanged; ranks can only drop, when factors were numerically dependent.
    """
    if isinstance(x, TuckerTensor):
        core = x.core
        factors = []
        for nu, f in enumerate(x.factors):
            q, r = _qr_pos(f)
            factors.append(q)
            core = mode_apply(core, nu, r)
        return TuckerTensor(core, factors)
    if isinstance(x, TTTensor):
        cores = [c.copy() for c in x.cores]
        for nu in range(len(cores) - 1):
            rl, n, rr = cores[nu].shape
            q, r = _qr_pos(cores[nu].reshape(rl * n, rr))
            cores[nu] = q.reshape(rl, n, -1)
            cores[nu + 1] = np.tensordot(r, cores[nu + 1], axes=(1, 0))
        return TTTensor(cores)
    if isinstance(x, TreeTensor):
        tree = x.tree
        leaf_bases = {i: b.copy() for i, b in x.leaf_bases.items()}
        transfer = {i: t.copy() for i, t in x.transfer.items()}

        def push_into_parent(i, r):
            p = tree.parent[i]
            axis = 1 + tree.children[p].index(i)
            t = np.tensordot(transfer[p], r, axes=(axis, 1))
            transfer[p] = np.moveaxis(t, -1, axis)

        order = sorted(range(tree.n_nodes), key=tree.level, reverse=True)
        for i in order:
            if i == tree.root:
                continue
            if tree.is_leaf(i):
                q, r = _qr_pos(leaf_bases[i])
                leaf_bases[i] = q
            else:
                t = transfer[i]
                mat = t.reshape(t.shape[0], -1).T  # (prod child ranks, r_i)
                q, r = _qr_pos(mat)
                transfer[i] = q.T.reshape((-1,) + t.shape[1:])
            push_into_parent(i, r)
        return TreeTensor(tree, leaf_bases, transfer)
    raise TypeError("orthonormalize expects a Tucker, TT or tree tensor")


# ---------------------------------------------------------------------------
# constructors and conversions
# ---------------------------------------------------------------------------


def random_lowrank(fmt, shape, rank, seed, tree=None):
    """Deterministic random instance of a format; factor entries are i.i.d.
    standard normal draws from a PCG64 stream seeded with ``seed``."""
    shape = tuple(int(n) for n in shape)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if fmt == "cp":
        r = int(rank)
        if r < 0:
            raise ValueError("CP rank must be >= 0")
        return CPTensor([rng.standard_normal((n, r)) for n in shape])
    if fmt == "tucker":
        ranks = tuple(int(r) for r in rank)
        if len(ranks) != len(shape) or any(r < 1 or r > n for r, n in zip(ranks, shape)):
            raise ValueError(f"inadmissible Tucker ranks {ranks} for shape {shape}")
        core = rng.standard_normal(ranks)
        factors = [rng.standard_normal((n, r)) for n, r in zip(shape, ranks)]
        return TuckerTensor(core, factors)
    if fmt == "tt":
        ranks = tuple(int(r) for r in rank)
        if len(ranks) != len(shape) - 1 or any(r < 1 for r in ranks):
            raise ValueError(f"inadmissible TT ranks {ranks} for shape {shape}")
        full = (1,) + ranks + (1,)
        cores = [
            rng.standard_normal((full[nu], shape[nu], full[nu + 1]))
            for nu in range(len(shape))
        ]
        return TTTensor(cores)
    if fmt == "tree":
        if tree is None:
            tree = DimensionTree.balanced(len(shape))
        if isinstance(rank, dict):
            ranks = {int(i): int(r) for i, r in rank.items()}
        else:
            ranks = {}
            for i in range(tree.n_nodes):
                if i == tree.root:
                    ranks[i] = 1
                elif tree.is_leaf(i):
                    ranks[i] = min(int(rank), shape[tree.nodes[i][0]])
                else:
                    ranks[i] = int(rank)
        if ranks.get(tree.root, 1) != 1:
            raise ValueError("root rank must be 1")
        for i in tree.internal_nodes():
            prod = math.prod(ranks[j] for j in tree.children[i])
            if ranks[i] > prod:
                raise ValueError(
                    f"inadmissible rank {ranks[i]} at node {tree.nodes[i]} (> {prod})"
                )
        leaf_bases = {
            i: rng.standard_normal((shape[tree.nodes[i][0]], ranks[i]))
            for i in tree.leaves()
        }
        transfer = {
            i: rng.standard_normal((ranks[i],) + tuple(ranks[j] for j in tree.children[i]))
            for i in tree.internal_nodes()
        }
        return TreeTensor(tree, leaf_bases, transfer)
    raise ValueError(f"unknown format {fmt!r}")


def cp_to_tt(x):
    """Exact embedding of a CP tensor in the TT format; all TT ranks <= r."""
    d, r = x.order, x.rank
    shape = x.shape
    if r == 0:
        return TTTensor.zeros(shape)
    if d == 1:
        core = (x.factors[0] * x.weights).sum(axis=1).reshape(1, -1, 1)
        return TTTensor([core])
    cores = []
    first = (x.factors[0] * x.weights).reshape(1, shape[0], r)
    cores.append(first)
    for nu in range(1, d - 1):
        c = np.zeros((r, shape[nu], r))
        for i in range(r):
            c[i, :, i] = x.factors[nu][:, i]
        cores.append(c)
    cores.append(x.factors[-1].T.reshape(r, shape[-1], 1))
    return TTTensor(cores)


def tt_to_tree(x):
    """Exact embedding of a TT tensor in the tree format on the linear tree."""
    d = x.order
    if d < 2:
        raise ValueError("tree embedding needs order >= 2")
    tree = DimensionTree.linear(d)
    full = (1,) + x.ranks + (1,)  # full[k] = rank of the interface before core k
    leaf_bases = {}
    transfer = {}
    for i in tree.leaves():
        k = tree.nodes[i][0]
        core = x.cores[k]
        if k == d - 1:
            leaf_bases[i] = core[:, :, 0].T.copy()
        elif k == 0:
            leaf_bases[i] = core[0].copy()
        else:
            leaf_bases[i] = core.transpose(1, 0, 2).reshape(core.shape[1], -1)
    for i in tree.internal_nodes():
        k = tree.nodes[i][0]  # node is the tail {k, ..., d-1}
        rk, rk1 = full[k], full[k + 1]
        if k == 0:
            t = np.eye(rk1).reshape(1, rk1, rk1)
        else:
            t = np.zeros((rk, rk * rk1, rk1))
            for a in range(rk):
                for b in range(rk1):
                    t[a, a * rk1 + b, b] = 1.0
        transfer[i] = t
    return TreeTensor(tree, leaf_bases, transfer)


def pad_rank(x, rank):
    """Zero-pad a CP or TT tensor to larger ranks without changing its value."""
    if isinstance(x, CPTensor):
        r = int(rank)
        if r < x.rank:
            raise ValueError("target rank smaller than current rank")
        extra = r - x.rank
        factors = [np.hstack([f, np.zeros((f.shape[0], extra))]) for f in x.factors]
        return CPTensor(factors, np.concatenate([x.weights, np.zeros(extra)]))
    if isinstance(x, TTTensor):
        ranks = tuple(int(r) for r in rank)
        if len(ranks) != x.order - 1 or any(a < b for a, b in zip(ranks, x.ranks)):
            raise ValueError(f"cannot pad TT ranks {x.ranks} to {ranks}")
        full = (1,) + ranks + (1,)
        cores = []
        for nu, c in enumerate(x.cores):
            new = np.zeros((full[nu], c.shape[1], full[nu + 1]))
            new[: c.shape[0], :, : c.shape[2]] = c
            cores.append(new)
        return TTTensor(cores)
    raise TypeError("pad_rank supports CP and TT tensors")


def tree_frames(x):
    """Environment frames of a tree tensor.

    Returns (below, above): ``below[i]`` is (array, modes) with array of shape
    (r_i, *dims of the node's modes in the listed order), the dense span of
    node i's subtree; ``above[i]`` is (array, modes) over the node's
    complement modes, obtained by removing the subtree and exposing its rank
    slot.  The reconstruction is the contraction of any node's below and
    above frames with its parameters, which makes block solves direct.
    """
    tree = x.tree
    below = {}
    for i in sorted(range(tree.n_nodes), key=tree.level, reverse=True):
        if tree.is_leaf(i):
            below[i] = (x.leaf_bases[i].T, list(tree.nodes[i]))
        else:
            t = x.transfer[i]
            modes = []
            for j in tree.children[i]:
                arr, m = below[j]
                t = np.tensordot(t, arr, axes=(1, 0))
                modes.extend(m)
            below[i] = (t, modes)
    above = {tree.root: (np.ones((1,)), [])}
    for i in sorted(range(tree.n_nodes), key=tree.level):
        if tree.is_leaf(i):
            continue
        for c in tree.children[i]:
            t = np.tensordot(x.transfer[i], above[i][0], axes=(0, 0))
            modes = list(above[i][1])
            pos = 0
            for j in tree.children[i]:
                if j == c:
                    pos += 1
                    continue
                arr, m = below[j]
                t = np.tensordot(t, arr, axes=(pos, 0))
                modes.extend(m)
            above[c] = (t, modes)
    return below, above


# ---------------------------------------------------------------------------
# parameter-block protocol used by the alternating solvers
# ---------------------------------------------------------------------------


def parameter_blocks(x):
    """Free parameter blocks of the multilinear parametrization, in a fixed
    deterministic order.  Returns a list of arrays (copies)."""
    if isinstance(x, CPTensor):
        return [f.copy() for f in x.factors]
    if isinstance(x, TuckerTensor):
        return [f.copy() for f in x.factors] + [x.core.copy()]
    if isinstance(x, TTTensor):
        return [c.copy() for c in x.cores]
    if isinstance(x, TreeTensor):
        blocks = [x.leaf_bases[i].copy() for i in sorted(x.leaf_bases)]
        blocks += [x.transfer[i].copy() for i in sorted(x.transfer)]
        return blocks
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")


def replace_block(x, index, values):
    """New instance with parameter block ``index`` replaced by ``values``
    (same shape as the corresponding entry of :func:`parameter_blocks`)."""
    if isinstance(x, CPTensor):
        factors = [f.copy() for f in x.factors]
        factors[index] = np.asarray(values, dtype=float).reshape(factors[index].shape)
        return CPTensor(factors, x.weights)
    if isinstance(x, TuckerTensor):
        if index < x.order:
            factors = [f.copy() for f in x.factors]
            factors[index] = np.asarray(values, dtype=float).reshape(factors[index].shape)
            return TuckerTensor(x.core, factors)
        core = np.asarray(values, dtype=float).reshape(x.core.shape)
        return TuckerTensor(core, x.factors)
    if isinstance(x, TTTensor):
        cores = [c.copy() for c in x.cores]
        cores[index] = np.asarray(values, dtype=float).reshape(cores[index].shape)
        return TTTensor(cores)
    if isinstance(x, TreeTensor):
        leaf_keys = sorted(x.leaf_bases)
        if index < len(leaf_keys):
            leaf_bases = {i: b.copy() for i, b in x.leaf_bases.items()}
            key = leaf_keys[index]
            leaf_bases[key] = np.asarray(values, dtype=float).reshape(leaf_bases[key].shape)
            return TreeTensor(x.tree, leaf_bases, x.transfer)
        transfer_keys = sorted(x.transfer)
        key = transfer_keys[index - len(leaf_keys)]
        transfer = {i: t.copy() for i, t in x.transfer.items()}
        transfer[key] = np.asarray(values, dtype=float).reshape(transfer[key].shape)
        return TreeTensor(x.tree, x.leaf_bases, transfer)
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")
