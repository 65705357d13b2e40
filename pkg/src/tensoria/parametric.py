"""Parameter-dependent linear systems in affine form on a tensorized
collocation grid, and the random-coefficient diffusion benchmark.

The parametric operator is B(y) = sum_l lambda_l(y) B_l with separable
parameter functions lambda_l(y) = prod_nu lambda_l^(nu)(y_nu), sampled on a
tensor grid of collocation points with positive weights summing to one.  On
the grid the system is a Kronecker-structured equation over
R^{K_1} x ... x R^{K_d} x R^N: diagonal factors on the parameter modes, the
operators B_l on the state mode.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dense import mode_apply
from .formats import TTTensor, add, to_dense


class AffineParametricSystem:
    """Affine parametric operator, separable right-hand side and collocation
    grid bundled together.

    operators: list of R symmetric (N, N) matrices B_l.
    rhs_vectors: list of L vectors f_l of length N.
    lam_tables[l][nu]: values of lambda_l^(nu) at the grid points of
        dimension nu (so lambda_l(y^k) is the product over nu).
    gamma_tables[l][nu]: same layout for the right-hand side functions.
    points[nu], weights[nu]: per-dimension collocation nodes and positive
        weights; each dimension's weights sum to one.
    """

    def __init__(
        self,
        operators,
        rhs_vectors,
        lam_tables,
        gamma_tables,
        points,
        weights,
        spd_check_limit=4096,
    ):
        self.operators = [np.array(b, dtype=float) for b in operators]
        self.rhs_vectors = [np.array(f, dtype=float).reshape(-1) for f in rhs_vectors]
        self.N = self.operators[0].shape[0]
        for b in self.operators:
            if b.shape != (self.N, self.N):
                raise ValueError("all operators must be square with equal size")
        for f in self.rhs_vectors:
            if f.shape != (self.N,):
                raise ValueError("right-hand side length must match the operators")
        self.points = [np.array(p, dtype=float).reshape(-1) for p in points]
        self.weights = [np.array(w, dtype=float).reshape(-1) for w in weights]
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights must cover the same dimensions")
        for p, w in zip(self.points, self.weights):
            if p.shape != w.shape or np.any(w <= 0):
                raise ValueError("weights must be positive and match the points")
            if abs(w.sum() - 1.0) > 1e-10:
                raise ValueError("per-dimension weights must sum to one")
        self.lam_tables = [
            [np.array(t, dtype=float).reshape(-1) for t in tables] for tables in lam_tables
        ]
        self.gamma_tables = [
            [np.array(t, dtype=float).reshape(-1) for t in tables] for tables in gamma_tables
        ]
        d = len(self.points)
        for tables in self.lam_tables + self.gamma_tables:
            if len(tables) != d:
                raise ValueError("tables must hold one entry per parameter dimension")
            for nu, t in enumerate(tables):
                if t.shape != self.points[nu].shape:
                    raise ValueError(f"table length mismatch on dimension {nu}")
        self._check_spd(spd_check_limit)

    # -- structure ---------------------------------------------------------

    @property
    def R(self):
        return len(self.operators)

    @property
    def L(self):
        return len(self.rhs_vectors)

    @property
    def n_params(self):
        return len(self.points)

    @property
    def grid_shape(self):
        return tuple(len(p) for p in self.points)

    @property
    def n_grid(self):
        return math.prod(self.grid_shape)

    def weights_flat(self):
        w = np.array(1.0)
        for wn in self.weights:
            w = np.multiply.outer(w, wn)
        return w.reshape(-1)

    def lambda_on_grid(self, l):
        v = np.array(1.0)
        for t in self.lam_tables[l]:
            v = np.multiply.outer(v, t)
        return v.reshape(-1)

    def gamma_on_grid(self, l):
        v = np.array(1.0)
        for t in self.gamma_tables[l]:
            v = np.multiply.outer(v, t)
        return v.reshape(-1)

    def operator_at(self, k_flat, lam_grid=None):
        """Assembled B(y^k) for a flattened grid index."""
        if lam_grid is None:
            lam_grid = [self.lambda_on_grid(l) for l in range(self.R)]
        b = np.zeros((self.N, self.N))
        for l in range(self.R):
            b += lam_grid[l][k_flat] * self.operators[l]
        return b

    def rhs_at(self, k_flat, gam_grid=None):
        if gam_grid is None:
            gam_grid = [self.gamma_on_grid(l) for l in range(self.L)]
        f = np.zeros(self.N)
        for l in range(self.L):
            f += gam_grid[l][k_flat] * self.rhs_vectors[l]
        return f

    def rhs_dense(self):
        """The right-hand side tensor over (grid..., N)."""
        out = np.zeros(self.grid_shape + (self.N,))
        for l in range(self.L):
            piece = np.array(1.0)
            for t in self.gamma_tables[l]:
                piece = np.multiply.outer(piece, t)
            out += np.multiply.outer(piece, self.rhs_vectors[l])
        return out

    def rhs_tt(self):
        """The right-hand side as a TT tensor (rank L at every interface)."""
        out = None
        for l in range(self.L):
            cores = [t.reshape(1, -1, 1) for t in self.gamma_tables[l]]
            cores.append(self.rhs_vectors[l].reshape(1, -1, 1))
            term = TTTensor(cores)
            out = term if out is None else add(out, term)
        return out

    def _check_spd(self, limit):
        lam_grid = [self.lambda_on_grid(l) for l in range(self.R)]
        k_total = self.n_grid
        if k_total <= limit:
            checked = range(k_total)
        else:
            checked = range(0, k_total, max(1, k_total // limit))
        for k in checked:
            b = self.operator_at(k, lam_grid)
            try:
                np.linalg.cholesky(b)
            except np.linalg.LinAlgError as exc:
                raise ValueError(
                    f"operator is not symmetric positive definite at grid point {k}"
                ) from exc

    def beta_max(self):
        """Largest operator eigenvalue over the grid (Richardson step bound)."""
        lam_grid = [self.lambda_on_grid(l) for l in range(self.R)]
        top = 0.0
        for k in range(self.n_grid):
            b = self.operator_at(k, lam_grid)
            top = max(top, float(np.linalg.eigvalsh(b)[-1]))
        return top

    def rayleigh_extremes(self, reference):
        """Extreme generalized eigenvalues of B(y) against a reference matrix,
        over all grid points."""
        lam_grid = [self.lambda_on_grid(l) for l in range(self.R)]
        lo, hi = np.inf, -np.inf
        for k in range(self.n_grid):
            vals = scipy.linalg.eigh(
                self.operator_at(k, lam_grid), np.asarray(reference, dtype=float),
                eigvals_only=True,
            )
            lo = min(lo, float(vals[0]))
            hi = max(hi, float(vals[-1]))
        return lo, hi


@dataclass
class DiffusionBenchmark:
    """Metadata of the one-dimensional random-coefficient diffusion model."""

    n_el: int
    d: int
    kappa0: float
    K_per_dim: tuple
    halfwidth: float = 0.45

    @property
    def h(self):
        return 1.0 / self.n_el

    @property
    def n_interior(self):
        return self.n_el - 1

    def interior_nodes(self):
        return np.linspace(self.h, 1.0 - self.h, self.n_interior)

    def subdomain_bounds(self):
        return [(nu / self.d, (nu + 1) / self.d) for nu in range(self.d)]

    def kappa_bounds(self):
        return (self.kappa0 - self.halfwidth, self.kappa0 + self.halfwidth)


def _p1_stiffness(n_el, coeff):
    """Stiffness matrix of P1 elements on a uniform mesh of (0,1) with a
    piecewise-constant coefficient (one value per element), homogeneous
    Dirichlet conditions, interior nodes only."""
    n_int = n_el - 1
    h = 1.0 / n_el
    a = np.zeros((n_int, n_int))
    for e in range(n_el):
        k = coeff[e] / h
        # mesh nodes e and e+1; interior node index = mesh node - 1
        left, right = e - 1, e
        if left >= 0:
            a[left, left] += k
        if right < n_int:
            a[right, right] += k
        if left >= 0 and right < n_int:
            a[left, right] -= k
            a[right, left] -= k
    return a


def gauss_legendre_grid(k, halfwidth=0.45):
    """k Gauss-Legendre nodes on [-halfwidth, halfwidth] with weights
    normalized to sum to one."""
    x, w = np.polynomial.legendre.leggauss(int(k))
    return x * halfwidth, w / w.sum()


def build_diffusion(n_el, d, kappa0=1.0, K_per_dim=5):
    """Collocated affine system for the diffusion equation with a piecewise
    random coefficient.

    The diffusion field on (0,1) is kappa0 plus an independent uniform
    fluctuation xi_nu in [-0.45, 0.45] on each of d equal subdomains, so the
    operator splits into a kappa0-weighted global stiffness matrix plus one
    indicator-restricted stiffness matrix per subdomain (R = d + 1 terms).
    The load is g = 1 (L = 1); the grid is Gauss-Legendre per dimension.
    """
    n_el, d = int(n_el), int(d)
    if n_el < 2:
        raise ValueError("need at least two elements")
    if d < 1:
        raise ValueError("need at least one parameter dimension")
    if kappa0 <= 0.45:
        raise ValueError("kappa0 must exceed 0.45 to keep the operator coercive")
    if np.isscalar(K_per_dim):
        K_per_dim = (int(K_per_dim),) * d
    else:
        K_per_dim = tuple(int(k) for k in K_per_dim)
        if len(K_per_dim) != d:
            raise ValueError("K_per_dim must give one grid size per dimension")
    h = 1.0 / n_el
    centers = (np.arange(n_el) + 0.5) * h
    subdomain = np.minimum((centers * d).astype(int), d - 1)
    b0 = _p1_stiffness(n_el, np.full(n_el, kappa0))
    operators = [b0]
    for nu in range(d):
        operators.append(_p1_stiffness(n_el, (subdomain == nu).astype(float)))
    load = np.full(n_el - 1, h)
    points, weights = [], []
    for k in K_per_dim:
        x, w = gauss_legendre_grid(k)
        points.append(x)
        weights.append(w)
    lam_tables = [[np.ones(k) for k in K_per_dim]]  # constant factor for B_0
    for nu in range(d):
        tables = [np.ones(k) for k in K_per_dim]
        tables[nu] = points[nu].copy()
        lam_tables.append(tables)
    gamma_tables = [[np.ones(k) for k in K_per_dim]]
    system = AffineParametricSystem(
        operators, [load], lam_tables, gamma_tables, points, weights
    )
    bench = DiffusionBenchmark(n_el, d, float(kappa0), K_per_dim)
    return system, bench


def merge_parameter_modes(sys):
    """Order-two view of the system: all parameter modes merged into one.

    The merged system has a single pseudo-dimension holding every grid point,
    with the diagonal factors evaluated on the full grid; solving it is
    equivalent to solving the original, with tensors flattened to
    (K_total, N).
    """
    if sys.n_params == 1:
        return sys
    k_total = sys.n_grid
    lam_tables = [[sys.lambda_on_grid(l)] for l in range(sys.R)]
    gamma_tables = [[sys.gamma_on_grid(l)] for l in range(sys.L)]
    return AffineParametricSystem(
        sys.operators,
        sys.rhs_vectors,
        lam_tables,
        gamma_tables,
        [np.arange(k_total, dtype=float)],
        [sys.weights_flat()],
    )


def full_solve(sys):
    """Direct solve at every collocation point; the brute-force reference.

    Returns the solution tensor of shape (K_1, ..., K_d, N).  Raises on a
    singular system or a residual above 1e-10 relative at any point.
    """
    lam_grid = [sys.lambda_on_grid(l) for l in range(sys.R)]
    gam_grid = [sys.gamma_on_grid(l) for l in range(sys.L)]
    out = np.zeros((sys.n_grid, sys.N))
    for k in range(sys.n_grid):
        b = sys.operator_at(k, lam_grid)
        f = sys.rhs_at(k, gam_grid)
        chol = scipy.linalg.cho_factor(b)
        u = scipy.linalg.cho_solve(chol, f)
        res = np.linalg.norm(b @ u - f)
        if res > 1e-10 * max(np.linalg.norm(f), 1e-300):
            raise np.linalg.LinAlgError(
                f"collocation solve at point {k} left relative residual {res:.3e}"
            )
        out[k] = u
    return out.reshape(sys.grid_shape + (sys.N,))


def operator_apply(sys, w):
    """Apply the Kronecker-structured operator to a tensor over (grid..., N).

    The parameter-mode factors are diagonal (pointwise tables), the state
    mode carries the matrices B_l.  Accepts either a dense array or a TT
    tensor; the TT output ranks are at most R times the input ranks.
    """
    d = sys.n_params
    if isinstance(w, TTTensor):
        if w.shape != sys.grid_shape + (sys.N,):
            raise ValueError(f"shape mismatch: {w.shape} vs {sys.grid_shape + (sys.N,)}")
        out = None
        for l in range(sys.R):
            cores = []
            for nu in range(d):
                cores.append(w.cores[nu] * sys.lam_tables[l][nu][None, :, None])
            last = np.einsum("mn,rns->rms", sys.operators[l], w.cores[d])
            cores.append(last)
            term = TTTensor(cores)
            out = term if out is None else add(out, term)
        return out
    w = np.asarray(w, dtype=float)
    if w.shape != sys.grid_shape + (sys.N,):
        raise ValueError(f"shape mismatch: {w.shape} vs {sys.grid_shape + (sys.N,)}")
    out = np.zeros_like(w)
    for l in range(sys.R):
        piece = w
        for nu in range(d):
            shape = (1,) * nu + (-1,) + (1,) * (d - nu - 1) + (1,)
            piece = piece * sys.lam_tables[l][nu].reshape(shape)
        out += mode_apply(piece, d, sys.operators[l])
    return out


def _as_dense_state(sys, w):
    if isinstance(w, TTTensor):
        return to_dense(w)
    return np.asarray(w, dtype=float)


def residual_error(sys, w):
    """Weighted residual distance sqrt(sum_k w^k ||B(y^k) w_k - f_k||^2).

    The coefficient-space norm is Euclidean (the identity weighting); this is
    the residual-minimization distance used by the low-rank solvers.
    """
    w = _as_dense_state(sys, w)
    res = operator_apply(sys, w) - sys.rhs_dense()
    res_flat = res.reshape(sys.n_grid, sys.N)
    om = sys.weights_flat()
    return float(np.sqrt(np.sum(om * np.sum(res_flat**2, axis=1))))


def energy(sys, w):
    """Quadratic energy J(w) = sum_k w^k (<B_k w_k, w_k> - 2 <f_k, w_k>).

    For the symmetric coercive systems built here, J(w) - J(u) equals the
    squared operator-norm error to the solution u, so J decreases exactly
    when the approximation improves in the energy norm.
    """
    w = _as_dense_state(sys, w)
    wf = w.reshape(sys.n_grid, sys.N)
    om = sys.weights_flat()
    lam_grid = [sys.lambda_on_grid(l) for l in range(sys.R)]
    gam_grid = [sys.gamma_on_grid(l) for l in range(sys.L)]
    total = 0.0
    for l in range(sys.R):
        bw = wf @ sys.operators[l].T
        total += float(np.sum(om * lam_grid[l] * np.sum(bw * wf, axis=1)))
    for l in range(sys.L):
        total -= 2.0 * float(np.sum(om * gam_grid[l] * (wf @ sys.rhs_vectors[l])))
    return total
