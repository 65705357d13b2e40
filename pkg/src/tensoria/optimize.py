"""Alternating and greedy optimization over multilinear parametrizations.

Every alternating step here is an exact linear least-squares solve on one
parameter block with the others frozen, so objectives are nonincreasing by
construction.  Convergence is local; ``restarts`` independent initializations
are run and the best final objective wins.
"""

import math
from dataclasses import dataclass

import numpy as np

from .decompose import hosvd, tree_hosvd, tt_svd
from .dense import inner, mode_apply, norm
from .formats import (
    CPTensor,
    TreeTensor,
    TTTensor,
    TuckerTensor,
    parameter_blocks,
    random_lowrank,
    replace_block,
    to_dense,
)
from .tree import DimensionTree


@dataclass
class OptimOptions:
    max_sweeps: int = 100
    stagnation_tol: float = 1e-8
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.stagnation_tol <= 0:
            raise ValueError("stagnation_tol must be positive")


class GreedyTrace:
    """Per-step convergence records of a greedy or alternating run."""

    def __init__(self, meta=None):
        self.rows = []
        self.meta = dict(meta or {})

    def add(self, **fields):
        self.rows.append(fields)

    def column(self, name):
        return [row.get(name) for row in self.rows]

    def __len__(self):
        return len(self.rows)


def ranks_of(x):
    if isinstance(x, CPTensor):
        return (x.rank,)
    if isinstance(x, TuckerTensor):
        return tuple(x.ranks)
    if isinstance(x, TTTensor):
        return x.ranks
    if isinstance(x, TreeTensor):
        return tuple(x.node_rank(i) for i in range(x.tree.n_nodes))
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")


# ---------------------------------------------------------------------------
# quadratic objectives
# ---------------------------------------------------------------------------


class QuadraticObjective:
    """Squared distance functional E(w)^2 = <A w, w> - 2 <b, w> + c with a
    symmetric positive-semidefinite operator A.

    This covers the canonical distance ||u - w||^2 (A identity, b = u,
    c = ||u||^2) and weighted residual distances of parametric solvers.
    Construction spot-checks linearity, symmetry and positivity of the
    supplied operator and rejects handles that fail.
    """

    def __init__(self, apply_op, rhs, constant, validate=True):
        self.apply_op = apply_op
        self.rhs = np.asarray(rhs, dtype=float)
        self.constant = float(constant)
        self.shape = self.rhs.shape
        self.is_identity = apply_op is None
        if self.is_identity:
            self.apply_op = lambda w: w
        if validate and not self.is_identity:
            self._check()

    def _check(self):
        rng = np.random.default_rng(0)
        w1 = rng.standard_normal(self.shape)
        w2 = rng.standard_normal(self.shape)
        a1, a2 = self.apply_op(w1), self.apply_op(w2)
        a12 = self.apply_op(w1 + w2)
        scale = norm(a1) + norm(a2) + 1e-300
        if norm(a12 - a1 - a2) > 1e-8 * scale:
            raise ValueError("objective operator is not linear")
        if abs(inner(a1, w2) - inner(w1, a2)) > 1e-8 * scale * (norm(w1) + norm(w2)):
            raise ValueError("objective operator is not symmetric")
        if inner(a1, w1) < -1e-10 * norm(a1) * norm(w1):
            raise ValueError("objective operator is not positive semidefinite")

    @classmethod
    def distance_to(cls, target):
        target = np.asarray(target, dtype=float)
        return cls(None, target, inner(target, target), validate=False)

    def apply(self, w):
        return self.apply_op(w)

    def value2(self, w):
        if self.is_identity:
            # direct residual avoids the cancellation floor of the expanded form
            d = self.rhs - w
            return inner(d, d)
        q = inner(self.apply_op(w), w) - 2.0 * inner(self.rhs, w) + self.constant
        return max(q, 0.0)

    def value(self, w):
        return math.sqrt(self.value2(w))


# ---------------------------------------------------------------------------
# alternating best approximation of a dense target
# ---------------------------------------------------------------------------


def _svd_init(target, fmt, rank, tree, rng):
    if fmt == "tucker":
        return hosvd(target, rank)[0]
    if fmt == "tt":
        return tt_svd(target, rank)[0]
    if fmt == "tree":
        return tree_hosvd(target, tree, rank)[0]
    if fmt == "cp":
        r = int(rank)
        factors = []
        for nu in range(target.ndim):
            mat = np.moveaxis(target, nu, 0).reshape(target.shape[nu], -1)
            u, _, _ = np.linalg.svd(mat, full_matrices=False)
            k = min(r, u.shape[1])
            f = np.empty((target.shape[nu], r))
            f[:, :k] = u[:, :k]
            if r > k:
                f[:, k:] = rng.standard_normal((target.shape[nu], r - k))
            factors.append(f)
        return CPTensor(factors)
    raise ValueError(f"unknown format {fmt!r}")


def _random_init(target, fmt, rank, tree, restart, seed):
    x = random_lowrank(fmt, target.shape, rank, seed=(seed, 17, restart), tree=tree)
    nd = norm(to_dense(x))
    nt = norm(target)
    if nd > 0 and nt > 0:
        from .formats import scale

        x = scale(x, nt / nd)
    return x


def _lstsq(a, b):
    return np.linalg.lstsq(a, b, rcond=None)[0]


def _mode_unfold(u, nu):
    return np.moveaxis(u, nu, 0).reshape(u.shape[nu], -1)


def _solve_block(x, b, target):
    """Exact least-squares solve for parameter block b with the others frozen,
    minimizing ||target - reconstruction||; returns the new block values.

    The reconstruction is linear in every block, so each case reduces to one
    (least-norm) linear solve against the block's frozen design.
    """
    d = len(x.shape)
    if isinstance(x, CPTensor):
        design = np.ones((1, x.rank))
        for mu in range(d - 1, -1, -1):
            if mu == b:
                continue
            f = x.factors[mu]
            design = (design[None, :, :] * f[:, None, :]).reshape(-1, x.rank)
        design = design * x.weights  # Khatri-Rao product over the other modes
        return _lstsq(design, _mode_unfold(target, b).T).T
    if isinstance(x, TuckerTensor):
        if b < d:
            frame = x.core
            for mu in range(d):
                if mu != b:
                    frame = mode_apply(frame, mu, x.factors[mu])
            return _lstsq(_mode_unfold(frame, b).T, _mode_unfold(target, b).T).T
        design = np.ones((1, 1))
        for f in x.factors:
            design = np.kron(design, f)
        return _lstsq(design, target.ravel())
    if isinstance(x, TTTensor):
        left = np.ones((1, 1))
        for c in x.cores[:b]:
            left = (left @ c.reshape(c.shape[0], -1)).reshape(-1, c.shape[2])
        right = np.ones((1, 1))
        for c in reversed(x.cores[b + 1 :]):
            right = (c.reshape(-1, c.shape[2]) @ right).reshape(c.shape[0], -1)
        n = x.cores[b].shape[1]
        design = np.kron(left, np.kron(np.eye(n), right.T))
        return _lstsq(design, target.ravel())
    if isinstance(x, TreeTensor):
        from .formats import tree_frames

        below, above = tree_frames(x)
        leaf_keys = sorted(x.leaf_bases)
        if b < len(leaf_keys):
            key = leaf_keys[b]
            nu = x.tree.nodes[key][0]
            arr, modes = above[key]
            perm = (0,) + tuple(1 + k for k in np.argsort(modes))
            design = np.transpose(arr, perm).reshape(arr.shape[0], -1)
            return _lstsq(design.T, _mode_unfold(target, nu).T).T
        key = sorted(x.transfer)[b - len(leaf_keys)]
        big, modes = above[key]
        n_rank_axes = 1
        for c in x.tree.children[key]:
            child_arr, child_modes = below[c]
            big = np.multiply.outer(big, child_arr)
            # pull the new rank axis forward, behind the other rank axes
            big = np.moveaxis(big, n_rank_axes + len(modes), n_rank_axes)
            modes = modes + child_modes
            n_rank_axes += 1
        order = np.argsort(modes)
        perm = tuple(range(n_rank_axes)) + tuple(n_rank_axes + k for k in order)
        design = np.transpose(big, perm).reshape(-1, target.size)
        return _lstsq(design.T, target.ravel())
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")


def _block_sweeps(x, target, opts, trace=None):
    """Alternate exact least-squares solves over the parameter blocks of x,
    minimizing ||target - reconstruction||.  Returns (x, final objective)."""
    nrm = np.linalg.norm(target)
    n_blocks = len(parameter_blocks(x))
    prev_obj = np.inf
    prev_dense = None
    obj = float(np.linalg.norm(target - to_dense(x)))
    for sweep in range(1, opts.max_sweeps + 1):
        for b in range(n_blocks):
            x = replace_block(x, b, _solve_block(x, b, target))
        dense = to_dense(x)
        obj = float(np.linalg.norm((target - dense).ravel()))
        if trace is not None:
            delta = (
                float(np.linalg.norm(dense - prev_dense)) if prev_dense is not None else obj
            )
            trace.add(step=sweep, objective=obj, correction_norm=delta, ranks=ranks_of(x))
        prev_dense = dense
        if obj <= 1e-15 * max(nrm, 1e-300):
            break
        if np.isfinite(prev_obj) and prev_obj - obj <= opts.stagnation_tol * max(prev_obj, 1e-300):
            break
        prev_obj = obj
    return x, obj


def als_best_approx(target, fmt, rank, opts=None, init=None, tree=None):
    """Best approximation of a dense target in a low-rank format by block
    coordinate descent.

    Restart 0 starts from the SVD-based truncation of the target (or from
    ``init`` when given); the remaining restarts are random.  The objective
    ||target - x|| is nonincreasing across block solves; the best restart by
    final objective is returned together with its per-sweep trace.
    """
    target = np.asarray(target, dtype=float)
    opts = opts or OptimOptions()
    if fmt == "tree" and tree is None:
        tree = DimensionTree.balanced(target.ndim)
    rng = np.random.default_rng(np.random.SeedSequence((opts.seed, 11)))
    best = None
    for restart in range(max(opts.restarts, 1)):
        if restart == 0:
            x0 = init if init is not None else _svd_init(target, fmt, rank, tree, rng)
        else:
            x0 = _random_init(target, fmt, rank, tree, restart, opts.seed)
        trace = GreedyTrace(meta={"restart": restart})
        x, obj = _block_sweeps(x0, target, opts, trace=trace)
        if best is None or obj < best[1]:
            best = (x, obj, trace)
    return best[0], best[2]


# ---------------------------------------------------------------------------
# greedy rank-one constructions
# ---------------------------------------------------------------------------


def _rank_one_dense(factors):
    out = np.array(1.0)
    for a in factors:
        out = np.multiply.outer(out, a)
    return out


def _dominant_rank_one(g):
    """Per-mode dominant singular vectors of g, a deterministic rank-one
    starting guess."""
    factors = []
    for nu in range(g.ndim):
        mat = np.moveaxis(g, nu, 0).reshape(g.shape[nu], -1)
        u, _, _ = np.linalg.svd(mat, full_matrices=False)
        factors.append(u[:, 0])
    return factors


def _rank_one_minimize(objective, current, opts, step):
    """Minimize E(current + a1 x ... x ad)^2 over rank-one corrections by
    alternating on the factor vectors.  Returns (factors, dense correction,
    value of E after the correction)."""
    shape = objective.shape
    d = len(shape)
    grad = objective.rhs - objective.apply(current)
    best = None
    for restart in range(max(opts.restarts, 1)):
        if restart == 0 and norm(grad) > 0:
            factors = _dominant_rank_one(grad)
        else:
            rng = np.random.default_rng(np.random.SeedSequence((opts.seed, step, restart)))
            factors = [rng.standard_normal(n) for n in shape]
            factors = [a / (np.linalg.norm(a) + 1e-300) for a in factors]
        prev = np.inf
        for _ in range(opts.max_sweeps):
            for nu in range(d):
                others = [factors[mu] for mu in range(d) if mu != nu]
                if objective.is_identity:
                    # closed form: contract the residual with the other factors
                    t = grad
                    ax = 0
                    for mu in range(d):
                        if mu == nu:
                            ax += 1
                            continue
                        t = np.moveaxis(t, ax, -1) @ factors[mu]
                    denom = math.prod(float(np.dot(a, a)) for a in others)
                    if denom <= 0:
                        break
                    factors[nu] = t / denom
                else:
                    n = shape[nu]
                    cols = []
                    for j in range(n):
                        e = np.zeros(n)
                        e[j] = 1.0
                        cols.append(
                            _rank_one_dense(factors[:nu] + [e] + factors[nu + 1 :])
                        )
                    acols = [objective.apply(c) for c in cols]
                    gmat = np.array([[inner(ac, c) for c in cols] for ac in acols])
                    gvec = np.array([inner(c, grad) for c in cols])
                    sol, _, _, _ = np.linalg.lstsq(gmat, gvec, rcond=None)
                    factors[nu] = sol
            w = _rank_one_dense(factors)
            val = objective.value2(current + w)
            if np.isfinite(prev) and prev - val <= opts.stagnation_tol * max(prev, 1e-300):
                break
            prev = val
        w = _rank_one_dense(factors)
        val = objective.value2(current + w)
        if best is None or val < best[2]:
            best = (list(factors), w, val)
    factors, w, val = best
    return factors, w, math.sqrt(max(val, 0.0))


def _normalize_factors(factors):
    """Unit-norm factor columns; returns (normalized factors, magnitude)."""
    mag = 1.0
    out = []
    for a in factors:
        na = float(np.linalg.norm(a))
        if na == 0.0:
            return [np.zeros_like(a) for a in factors], 0.0
        out.append(a / na)
        mag *= na
    return out, mag


def greedy_rank_one(objective, shape, r_max, opts=None):
    """Pure greedy construction: successive optimal rank-one corrections.

    ``objective`` must be a :class:`QuadraticObjective` over tensors of the
    given shape.  Stops after ``r_max`` corrections, or earlier when a
    correction becomes negligible relative to the current iterate.
    """
    opts = opts or OptimOptions()
    if not isinstance(objective, QuadraticObjective):
        raise TypeError("objective must be a QuadraticObjective")
    shape = tuple(int(n) for n in shape)
    if shape != tuple(objective.shape):
        raise ValueError(f"objective is over shape {objective.shape}, not {shape}")
    current = np.zeros(shape)
    e_start = objective.value(current)
    cols = [[] for _ in shape]
    weights = []
    trace = GreedyTrace(meta={"algorithm": "pure-greedy"})
    for step in range(1, r_max + 1):
        factors, w, val = _rank_one_minimize(objective, current, opts, step)
        wnorm = norm(w)
        if wnorm <= 1e-14 * max(norm(current), 1e-300):
            break
        current = current + w
        unit, mag = _normalize_factors(factors)
        for nu, a in enumerate(unit):
            cols[nu].append(a)
        weights.append(mag)
        trace.add(step=step, objective=val, correction_norm=wnorm, ranks=(step,))
        if val <= 1e-14 * max(e_start, 1e-300):
            break
        if wnorm < opts.stagnation_tol * max(norm(current), 1e-300):
            break
    if weights:
        factors = [np.column_stack(c) for c in cols]
        result = CPTensor(factors, np.array(weights))
    else:
        result = CPTensor.zeros(shape)
    return result, trace


def orthogonal_greedy(objective, shape, r_max, opts=None):
    """Greedy rank-one corrections with a full refresh of the expansion
    coefficients after every step (solving the small Gram system; a singular
    system falls back to the least-norm solution)."""
    opts = opts or OptimOptions()
    if not isinstance(objective, QuadraticObjective):
        raise TypeError("objective must be a QuadraticObjective")
    shape = tuple(int(n) for n in shape)
    if shape != tuple(objective.shape):
        raise ValueError(f"objective is over shape {objective.shape}, not {shape}")
    current = np.zeros(shape)
    e_start = objective.value(current)
    cols = [[] for _ in shape]
    dict_dense = []   # normalized rank-one corrections
    dict_applied = []
    sigma = np.zeros(0)
    trace = GreedyTrace(meta={"algorithm": "orthogonal-greedy"})
    for step in range(1, r_max + 1):
        factors, w, _ = _rank_one_minimize(objective, current, opts, step)
        wnorm = norm(w)
        if wnorm <= 1e-14 * max(norm(current), 1e-300):
            break
        unit, _ = _normalize_factors(factors)
        what = _rank_one_dense(unit)
        dict_dense.append(what)
        dict_applied.append(objective.apply(what))
        for nu, a in enumerate(unit):
            cols[nu].append(a)
        r = len(dict_dense)
        gram = np.array([[inner(da, d2) for d2 in dict_dense] for da in dict_applied])
        rhs = np.array([inner(d2, objective.rhs) for d2 in dict_dense])
        sigma, _, _, _ = np.linalg.lstsq(gram, rhs, rcond=None)
        current = sum(s * d2 for s, d2 in zip(sigma, dict_dense))
        val = objective.value(current)
        trace.add(step=step, objective=val, correction_norm=wnorm, ranks=(r,))
        if val <= 1e-14 * max(e_start, 1e-300):
            break
        if wnorm < opts.stagnation_tol * max(norm(current), 1e-300):
            break
    if len(sigma):
        factors = [np.column_stack(c) for c in cols]
        result = CPTensor(factors, np.asarray(sigma, dtype=float))
    else:
        result = CPTensor.zeros(shape)
    return result, trace


def greedy_tucker(target, steps, opts=None):
    """Greedy Tucker subspace construction from rank-one corrections.

    Each step computes a rank-one correction of the current approximation in
    the canonical norm, appends its factors to the per-mode bases
    (orthonormalized, dropped when numerically dependent), and projects the
    target orthogonally onto the spanned tensor product space.
    """
    from .dense import mode_apply

    opts = opts or OptimOptions()
    target = np.asarray(target, dtype=float)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    d = target.ndim
    objective = QuadraticObjective.distance_to(target)
    bases = [np.zeros((n, 0)) for n in target.shape]
    core = np.zeros((0,) * d)
    current = np.zeros(target.shape)
    trace = GreedyTrace(meta={"algorithm": "greedy-tucker"})
    for step in range(1, steps + 1):
        factors, w, _ = _rank_one_minimize(objective, current, opts, step)
        if norm(w) <= 1e-14 * max(norm(current), 1e-300):
            break
        for nu in range(d):
            a = factors[nu]
            resid = a - bases[nu] @ (bases[nu].T @ a)
            if np.linalg.norm(resid) > 1e-10 * np.linalg.norm(a):
                bases[nu] = np.column_stack([bases[nu], resid / np.linalg.norm(resid)])
        core = target
        current = target
        for nu in range(d):
            core = mode_apply(core, nu, bases[nu].T)
            current = mode_apply(current, nu, bases[nu] @ bases[nu].T)
        err = norm(target - current)
        trace.add(
            step=step,
            objective=err,
            correction_norm=norm(w),
            ranks=tuple(b.shape[1] for b in bases),
        )
    return TuckerTensor(core, bases), trace


# ---------------------------------------------------------------------------
# sample-based least-squares fitting
# ---------------------------------------------------------------------------


def legendre_basis(size):
    """Legendre polynomial dictionary of the given size on [-1, 1]."""

    def evaluate(x):
        return np.polynomial.legendre.legvander(np.asarray(x, dtype=float), size - 1)

    return evaluate


def _design_matrices(points, bases):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[1] != len(bases):
        raise ValueError(
            f"{points.shape[1]}-dimensional points with {len(bases)} bases"
        )
    mats = []
    for nu, basis in enumerate(bases):
        phi = basis(points[:, nu]) if callable(basis) else np.asarray(basis, dtype=float)
        if phi.ndim != 2 or phi.shape[0] != points.shape[0]:
            raise ValueError(f"basis {nu} does not evaluate to (n_points, size)")
        mats.append(phi)
    return mats


def predict(x, bases, points):
    """Evaluate sum_k a_k prod_nu psi_{k_nu}(y_nu) at the given points for a
    coefficient tensor ``a`` in any supported format."""
    mats = _design_matrices(points, bases)
    if isinstance(x, CPTensor):
        prod = np.ones((mats[0].shape[0], x.rank))
        for phi, f in zip(mats, x.factors):
            prod *= phi @ f
        return prod @ x.weights
    if isinstance(x, TuckerTensor):
        # contract one mode at a time, keeping the sample axis first
        rows = [phi @ f for phi, f in zip(mats, x.factors)]
        out = x.core[None, ...]
        for r in rows:
            out = np.einsum("ki...,ki->k...", out, r)
        return out.reshape(-1)
    if isinstance(x, TTTensor):
        k = mats[0].shape[0]
        cur = np.ones((k, 1))
        for phi, core in zip(mats, x.cores):
            cur = np.einsum("ka,anb,kn->kb", cur, core, phi)
        return cur[:, 0]
    if isinstance(x, TreeTensor):
        dense = to_dense(x)
        out = dense[None, ...]
        for phi in mats:
            out = np.einsum("ki...,ki->k...", out, phi)
        return out.reshape(-1)
    raise TypeError(f"not a low-rank tensor: {type(x).__name__}")


def least_squares_fit(points, values, bases, fmt="cp", rank=1, ridge=0.0, opts=None, tree=None):
    """Fit a low-rank coefficient tensor to scalar samples by block descent.

    Minimizes the mean squared misfit over the sample set plus
    ``ridge * (sum of squared block parameters)``.  Each block update is an
    exact (possibly ridge-regularized) linear least-squares solve; with
    ``ridge=0`` an underdetermined block takes the least-norm solution and is
    flagged in the trace metadata.
    """
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    opts = opts or OptimOptions()
    values = np.asarray(values, dtype=float).reshape(-1)
    mats = _design_matrices(points, bases)
    if mats[0].shape[0] != values.size or values.size < 1:
        raise ValueError("need equally many points and values, at least one")
    shape = tuple(m.shape[1] for m in mats)
    k_samples = values.size
    if fmt == "tree" and tree is None:
        tree = DimensionTree.balanced(len(shape))
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]

    def penalized(x):
        res = values - predict(x, mats, pts)
        pen = sum(float(np.sum(b**2)) for b in parameter_blocks(x))
        return float(np.sum(res**2) / k_samples + ridge * pen)

    best = None
    for restart in range(max(opts.restarts, 1)):
        x = _fit_init(fmt, shape, rank, tree, restart, opts.seed)
        trace = GreedyTrace(meta={"ridge": ridge, "restart": restart, "underdetermined": False})
        n_blocks = len(parameter_blocks(x))
        prev = np.inf
        for sweep in range(1, opts.max_sweeps + 1):
            for b in range(n_blocks):
                blocks = parameter_blocks(x)
                size = blocks[b].size
                jac = np.empty((k_samples, size))
                unit = np.zeros(size)
                for j in range(size):
                    unit[j] = 1.0
                    jac[:, j] = predict(replace_block(x, b, unit), mats, pts)
                    unit[j] = 0.0
                if ridge > 0:
                    gram = jac.T @ jac / k_samples + ridge * np.eye(size)
                    coeffs = np.linalg.solve(gram, jac.T @ values / k_samples)
                else:
                    coeffs, _, rk, _ = np.linalg.lstsq(jac, values, rcond=None)
                    if rk < size:
                        trace.meta["underdetermined"] = True
                x = replace_block(x, b, coeffs)
            obj = penalized(x)
            rmse = float(np.sqrt(np.mean((values - predict(x, mats, pts)) ** 2)))
            trace.add(step=sweep, objective=obj, correction_norm=rmse, ranks=ranks_of(x))
            if obj <= 1e-28:
                break
            if np.isfinite(prev) and prev - obj <= opts.stagnation_tol * max(prev, 1e-300):
                break
            prev = obj
        if best is None or obj < best[1]:
            best = (x, obj, trace)
    return best[0], best[2]


def _fit_init(fmt, shape, rank, tree, restart, seed):
    x = random_lowrank(fmt, shape, rank, seed=(seed, 23, restart), tree=tree)
    # modest scale so the first block solves are well conditioned
    from .formats import scale

    nd = norm(to_dense(x))
    return scale(x, 1.0 / nd) if nd > 0 else x
