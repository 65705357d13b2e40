"""Low-rank solvers for the tensor-structured parametric system: truncated
Richardson iteration, residual minimization by alternating least squares,
rank-one Galerkin corrections, the nested-subspace construction with reduced
models, and sample-based reduced bases (POD and the sup-norm greedy).

The order-two view merges all parameter modes: a rank-r separated solution is
a spatial basis V (N x r) with parametric coefficient tables S (K x r), one
row per collocation point.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .decompose import truncate
from .formats import TTTensor, add, parameter_blocks, random_lowrank, replace_block, scale, to_dense
from .optimize import GreedyTrace, OptimOptions, ranks_of
from .parametric import operator_apply, residual_error


class DivergenceError(RuntimeError):
    """Raised when an iteration demonstrably diverges; carries the trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class PGDSolution:
    """Separated representation sum_i s_i (x) v_i over the collocation grid."""

    spatial_basis: np.ndarray  # (N, r)
    coefficients: np.ndarray  # (K, r), rows follow the flattened grid
    grid_shape: tuple
    trace: GreedyTrace

    @property
    def rank(self):
        return self.spatial_basis.shape[1]

    def dense(self):
        out = self.coefficients @ self.spatial_basis.T
        return out.reshape(self.grid_shape + (self.spatial_basis.shape[0],))


@dataclass
class ReducedModel:
    """Projection of the affine system onto a spatial reduced basis."""

    rank: int
    operators: list  # r x r projected matrices, one per affine term
    rhs: list  # length-r projected loads, one per rhs term

    def solve_on_grid(self, sys):
        """Reduced collocation solve at every grid point; returns (K, r)."""
        lam = [sys.lambda_on_grid(l) for l in range(sys.R)]
        gam = [sys.gamma_on_grid(l) for l in range(sys.L)]
        out = np.zeros((sys.n_grid, self.rank))
        for k in range(sys.n_grid):
            b = np.zeros((self.rank, self.rank))
            for l in range(sys.R):
                b += lam[l][k] * self.operators[l]
            f = np.zeros(self.rank)
            for l in range(sys.L):
                f += gam[l][k] * self.rhs[l]
            out[k] = np.linalg.solve(b, f)
        return out


def _pgd_energy(sys, basis, coeffs):
    """J evaluated through the reduced matrices (cheap exact expression)."""
    red_ops = [basis.T @ b @ basis for b in sys.operators]
    red_rhs = [basis.T @ f for f in sys.rhs_vectors]
    om = sys.weights_flat()
    lam = [sys.lambda_on_grid(l) for l in range(sys.R)]
    gam = [sys.gamma_on_grid(l) for l in range(sys.L)]
    total = 0.0
    for l in range(sys.R):
        bs = coeffs @ red_ops[l].T
        total += float(np.sum(om * lam[l] * np.sum(bs * coeffs, axis=1)))
    for l in range(sys.L):
        total -= 2.0 * float(np.sum(om * gam[l] * (coeffs @ red_rhs[l])))
    return total


# ---------------------------------------------------------------------------
# truncated Richardson iteration
# ---------------------------------------------------------------------------


def richardson_lr(sys, step=None, eps=1e-6, max_iter=200, fmt="tt"):
    """Richardson iteration with low-rank truncation of every iterate.

    Iterates u <- truncate(u - step * (A u - F)) in the TT format.  The step
    defaults to 1 / beta_max with beta_max the largest per-point operator
    eigenvalue.  Stops when the residual stagnates near its eps floor, raises
    :class:`DivergenceError` when the residual grows tenfold.
    """
    if fmt != "tt":
        raise ValueError("richardson_lr iterates in the TT format")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if step is None:
        step = 1.0 / sys.beta_max()
    if step <= 0:
        raise ValueError("step must be positive")
    shape = sys.grid_shape + (sys.N,)
    f_tt = sys.rhs_tt()
    u = TTTensor.zeros(shape)
    trace = GreedyTrace(meta={"eps": eps, "step": step})
    res0 = residual_error(sys, u)
    prev = res0
    for it in range(1, max_iter + 1):
        grad = add(operator_apply(sys, u), scale(f_tt, -1.0))
        u, _ = truncate(add(u, scale(grad, -step)), eps)
        res = residual_error(sys, u)
        trace.add(step=it, objective=res, correction_norm=step * prev, ranks=u.ranks)
        if res > 10.0 * max(res0, 1e-300):
            raise DivergenceError(
                f"residual grew to {res:.3e} from {res0:.3e} at iteration {it}", trace
            )
        if res <= eps * res0:
            break
        if it > 3 and prev - res <= 1e-4 * res:
            break  # progress per iteration is negligible: the eps floor
        prev = res
    return u, trace


# ---------------------------------------------------------------------------
# residual minimization over a low-rank set
# ---------------------------------------------------------------------------


def minres_lr(sys, fmt="tt", rank=(1,), opts=None, init=None):
    """Minimize the weighted residual over a fixed-rank set by alternating
    exact least-squares solves on the parameter blocks.

    Works on TT (and CP) representations of the full tensor over
    (grid..., N).  Pass ``init`` to warm-start, e.g. with a lower-rank
    solution padded to the target ranks.
    """
    opts = opts or OptimOptions()
    shape = sys.grid_shape + (sys.N,)
    om_rows = np.repeat(np.sqrt(sys.weights_flat()), sys.N)
    target = om_rows * sys.rhs_dense().ravel()

    def weighted_apply_vec(x):
        return om_rows * operator_apply(sys, to_dense(x)).ravel()

    best = None
    for restart in range(max(opts.restarts, 1)):
        if restart == 0 and init is not None:
            x = init
        else:
            x = random_lowrank(fmt, shape, rank, seed=(opts.seed, 29, restart))
            nd = np.linalg.norm(to_dense(x))
            if nd > 0:
                x = scale(x, np.linalg.norm(target) / nd)
        trace = GreedyTrace(meta={"restart": restart})
        n_blocks = len(parameter_blocks(x))
        prev = np.inf
        obj = residual_error(sys, x)
        for sweep in range(1, opts.max_sweeps + 1):
            for b in range(n_blocks):
                size = parameter_blocks(x)[b].size
                jac = np.empty((target.size, size))
                unit = np.zeros(size)
                for j in range(size):
                    unit[j] = 1.0
                    jac[:, j] = weighted_apply_vec(replace_block(x, b, unit))
                    unit[j] = 0.0
                coeffs, _, _, _ = np.linalg.lstsq(jac, target, rcond=None)
                x = replace_block(x, b, coeffs)
            obj = residual_error(sys, x)
            trace.add(step=sweep, objective=obj, correction_norm=0.0, ranks=ranks_of(x))
            if np.isfinite(prev) and prev - obj <= opts.stagnation_tol * max(prev, 1e-300):
                break
            prev = obj
        if best is None or obj < best[1]:
            best = (x, obj, trace)
    return best[0], best[2]


# ---------------------------------------------------------------------------
# rank-one Galerkin corrections
# ---------------------------------------------------------------------------


def _hat_quantities(sys, s_new, s_all, spatial):
    """Assembled deterministic operator and load for a spatial solve.

    B_hat = sum_k w_k s_new(y_k)^2 B(y_k) and the right-hand side
    f_hat - sum_{i} B_hat_i v_i over the previously fixed pairs.
    """
    om = sys.weights_flat()
    lam = [sys.lambda_on_grid(l) for l in range(sys.R)]
    gam = [sys.gamma_on_grid(l) for l in range(sys.L)]
    b_hat = np.zeros((sys.N, sys.N))
    for l in range(sys.R):
        b_hat += float(np.sum(om * lam[l] * s_new * s_new)) * sys.operators[l]
    rhs = np.zeros(sys.N)
    for l in range(sys.L):
        rhs += float(np.sum(om * gam[l] * s_new)) * sys.rhs_vectors[l]
    n_prev = spatial.shape[1]
    for i in range(n_prev):
        for l in range(sys.R):
            w_li = float(np.sum(om * lam[l] * s_new * s_all[:, i]))
            rhs -= w_li * (sys.operators[l] @ spatial[:, i])
    return b_hat, rhs


def pgd_galerkin(sys, r_max, opts=None):
    """Successive rank-one corrections with Galerkin orthogonality.

    Each correction s_r (x) v_r alternates between the parametric update (a
    scalar equation per collocation point) and the spatial update (one
    assembled N x N solve); for the symmetric coercive systems here each
    half-step is an exact minimization of the energy, which therefore
    decreases monotonically.
    """
    opts = opts or OptimOptions()
    om = sys.weights_flat()
    lam = [sys.lambda_on_grid(l) for l in range(sys.R)]
    gam = [sys.gamma_on_grid(l) for l in range(sys.L)]
    f_all = np.zeros((sys.n_grid, sys.N))
    for l in range(sys.L):
        f_all += np.outer(gam[l], sys.rhs_vectors[l])
    spatial = np.zeros((sys.N, 0))
    coeffs = np.zeros((sys.n_grid, 0))
    trace = GreedyTrace(meta={"algorithm": "pgd-galerkin"})
    for r in range(1, r_max + 1):
        s_r = np.ones(sys.n_grid)
        v_r = np.zeros(sys.N)
        prev_j = np.inf
        for _ in range(opts.max_sweeps):
            b_hat, rhs = _hat_quantities(sys, s_r, coeffs, spatial)
            try:
                v_r = scipy.linalg.solve(b_hat, rhs, assume_a="pos")
            except scipy.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError("assembled spatial operator is singular") from exc
            nv = np.linalg.norm(v_r)
            if nv == 0.0:
                break
            v_r = v_r / nv
            # scalar parametric equations, one per grid point
            prev_state = coeffs @ spatial.T
            for_k_num = np.zeros(sys.n_grid)
            for_k_den = np.zeros(sys.n_grid)
            bv = [sys.operators[l] @ v_r for l in range(sys.R)]
            for l in range(sys.R):
                for_k_den += lam[l] * float(v_r @ bv[l])
                for_k_num -= lam[l] * (prev_state @ bv[l])
            for_k_num += f_all @ v_r
            if np.any(for_k_den <= 0):
                raise np.linalg.LinAlgError("spatial direction has nonpositive energy")
            s_r = for_k_num / for_k_den
            basis = np.column_stack([spatial, v_r])
            table = np.column_stack([coeffs, s_r])
            j_val = _pgd_energy(sys, basis, table)
            if np.isfinite(prev_j) and prev_j - j_val <= opts.stagnation_tol * max(
                abs(prev_j), 1e-300
            ):
                break
            prev_j = j_val
        corr = float(np.sqrt(np.sum(om * s_r**2)))  # ||s_r (x) v_r|| with unit v_r
        scale_sofar = float(np.sqrt(np.sum(om[:, None] * coeffs**2))) if coeffs.size else corr
        if corr <= 1e-14 * max(scale_sofar, 1e-300):
            break
        spatial = np.column_stack([spatial, v_r])
        coeffs = np.column_stack([coeffs, s_r])
        sol = PGDSolution(spatial, coeffs, sys.grid_shape, trace)
        res = residual_error(sys, sol.dense())
        trace.add(
            step=r,
            objective=res,
            correction_norm=corr,
            ranks=(spatial.shape[1],),
            energy=_pgd_energy(sys, spatial, coeffs),
        )
    return PGDSolution(spatial, coeffs, sys.grid_shape, trace), trace


# ---------------------------------------------------------------------------
# nested-subspace construction with reduced models
# ---------------------------------------------------------------------------


def pgd_subspace(sys, r_max, opts=None):
    """Greedy construction of nested spatial reduced spaces.

    At rank r the algorithm alternates (a) one assembled spatial solve for
    the newest direction given all parametric coefficients and (b) the exact
    reduced collocation solve for all coefficients given the basis (an r x r
    system per grid point).  The basis is kept orthonormal and nested: the
    first r columns at rank r+1 equal the rank-r basis exactly.
    """
    opts = opts or OptimOptions()
    om = sys.weights_flat()
    basis = np.zeros((sys.N, 0))
    coeffs = np.zeros((sys.n_grid, 0))
    trace = GreedyTrace(meta={"algorithm": "pgd-subspace"})
    reduced_models = []
    for r in range(1, r_max + 1):
        s_work = np.column_stack([coeffs, np.ones(sys.n_grid)])
        basis_work = None
        model = None
        prev_j = np.inf
        for _ in range(opts.max_sweeps):
            # (a) spatial solve for the newest direction
            b_hat, rhs = _hat_quantities(sys, s_work[:, -1], s_work[:, :-1], basis)
            v_new = scipy.linalg.solve(b_hat, rhs, assume_a="pos")
            # orthonormalize against the previous basis, fold the overlap back
            overlap = basis.T @ v_new
            v_orth = v_new - basis @ overlap
            beta = np.linalg.norm(v_orth)
            if beta <= 1e-13 * max(np.linalg.norm(v_new), 1e-300):
                break  # span saturated in this direction
            v_hat = v_orth / beta
            s_work[:, :-1] += np.outer(s_work[:, -1], overlap)
            s_work[:, -1] *= beta
            basis_work = np.column_stack([basis, v_hat])
            # (b) exact reduced solve at every grid point
            model = ReducedModel(
                r,
                [basis_work.T @ b @ basis_work for b in sys.operators],
                [basis_work.T @ f for f in sys.rhs_vectors],
            )
            s_work = model.solve_on_grid(sys)
            j_val = _pgd_energy(sys, basis_work, s_work)
            if np.isfinite(prev_j) and prev_j - j_val <= opts.stagnation_tol * max(
                abs(prev_j), 1e-300
            ):
                prev_j = j_val
                break
            prev_j = j_val
        if basis_work is None:
            break  # the very first spatial solve added nothing: span saturated
        basis = basis_work
        coeffs = s_work
        reduced_models.append(model)
        sol = PGDSolution(basis, coeffs, sys.grid_shape, trace)
        res = residual_error(sys, sol.dense())
        corr = float(np.sqrt(np.sum(om * coeffs[:, -1] ** 2)))
        trace.add(
            step=r,
            objective=res,
            correction_norm=corr,
            ranks=(basis.shape[1],),
            energy=prev_j,
        )
    return PGDSolution(basis, coeffs, sys.grid_shape, trace), reduced_models, trace


# ---------------------------------------------------------------------------
# sample-based reduced bases
# ---------------------------------------------------------------------------


def _snapshots_matrix(snapshots, weights=None):
    snaps = np.asarray(snapshots, dtype=float)
    if snaps.ndim > 2:
        snaps = snaps.reshape(-1, snaps.shape[-1])
    if snaps.ndim != 2:
        raise ValueError("snapshots must be a (K, N) matrix or a (grid..., N) tensor")
    k = snaps.shape[0]
    if weights is None:
        weights = np.full(k, 1.0 / k)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if weights.shape != (k,) or np.any(weights <= 0):
        raise ValueError("need one positive weight per snapshot")
    return snaps, weights


def pod(snapshots, r, weights=None):
    """Weighted principal component analysis of the snapshot set.

    Returns the r dominant eigenvectors of the empirical correlation operator
    C v = sum_k w_k u_k <u_k, v>, the projected coefficients, and the exact
    projection error sqrt(sum of the discarded eigenvalues).  The operator is
    diagonalized through the SVD of the sqrt-weighted snapshot matrix, which
    keeps the small eigenvalues (squared singular values) accurate.
    """
    snaps, om = _snapshots_matrix(snapshots, weights)
    k, n = snaps.shape
    if not (0 <= r <= min(n, k)):
        raise ValueError(f"rank must lie in [0, {min(n, k)}]")
    _, sv, vt = np.linalg.svd(np.sqrt(om)[:, None] * snaps, full_matrices=False)
    vecs = vt.T
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    basis = vecs[:, :r]
    coeffs = snaps @ basis
    error = float(np.sqrt(np.sum(sv[r:] ** 2)))
    return basis, coeffs, error


def eim_greedy(snapshots, r, weights=None):
    """Sup-norm greedy basis: repeatedly absorb the worst-approximated
    snapshot (ties broken by the smallest index).

    Returns the nested orthonormal basis, the selected snapshot indices, and
    the trace of sup errors; entry m of the trace is the sup error with m
    basis vectors, so the trace is nonincreasing.
    """
    snaps, _ = _snapshots_matrix(snapshots, weights)
    k, n = snaps.shape
    if r > k:
        raise ValueError("cannot select more snapshots than available")
    residual = snaps.copy()
    basis = np.zeros((n, 0))
    indices = []
    errs = np.linalg.norm(residual, axis=1)
    sup_trace = [float(errs.max())]
    floor = 1e-14 * max(sup_trace[0], 1e-300)
    for _ in range(r):
        pick = int(np.argmax(errs))
        if errs[pick] <= floor:
            break
        q = residual[pick] / errs[pick]
        basis = np.column_stack([basis, q])
        indices.append(pick)
        residual = residual - np.outer(residual @ q, q)
        errs = np.linalg.norm(residual, axis=1)
        sup_trace.append(float(errs.max()))
    return basis, indices, np.array(sup_trace)
