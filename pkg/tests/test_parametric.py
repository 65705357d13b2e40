import numpy as np
import pytest

from tensoria.dense import alpha_rank, matricize, mode_apply, norm
from tensoria.formats import random_lowrank, to_dense
from tensoria.parametric import (
    AffineParametricSystem,
    _p1_stiffness,
    build_diffusion,
    energy,
    full_solve,
    gauss_legendre_grid,
    merge_parameter_modes,
    operator_apply,
    residual_error,
)


@pytest.fixture(scope="module")
def small_system():
    sys_, bench = build_diffusion(8, 2, 1.0, K_per_dim=4)
    return sys_, bench, full_solve(sys_)


def identity_system(n=5, k=3, d=2, f_tables=None):
    """B(y) = I at every point; solution equals the right-hand side tensor."""
    pts = np.linspace(-0.4, 0.4, k)
    w = np.full(k, 1.0 / k)
    lam = [[np.ones(k) for _ in range(d)]]
    if f_tables is None:
        f_tables = [[np.linspace(1.0, 2.0, k) for _ in range(d)]]
    return AffineParametricSystem(
        [np.eye(n)], [np.ones(n)], lam, f_tables, [pts] * d, [w] * d
    )


class TestBuildDiffusion:
    def test_single_point_grid_is_deterministic_poisson(self):
        sys_, bench = build_diffusion(8, 1, 1.0, K_per_dim=1)
        assert np.allclose(sys_.points[0], [0.0])
        ref = full_solve(sys_)
        n, h = 7, 1.0 / 8
        tri = (1 / h) * (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1))
        exact = np.linalg.solve(tri, np.full(n, h))
        assert np.allclose(ref[0], exact, atol=1e-12)

    def test_subdomains_partition_unity(self):
        sys_, _ = build_diffusion(8, 2, 1.0, K_per_dim=3)
        total = sum(sys_.operators[1:])
        assert np.allclose(total, _p1_stiffness(8, np.ones(8)))

    def test_spd_at_all_grid_points(self):
        sys_, _ = build_diffusion(8, 2, 1.0, K_per_dim=4)
        for k in range(sys_.n_grid):
            np.linalg.cholesky(sys_.operator_at(k))  # raises if not SPD

    def test_coercivity_guard(self):
        with pytest.raises(ValueError):
            build_diffusion(8, 2, 0.45)

    def test_structure_counts(self):
        sys_, bench = build_diffusion(10, 3, 1.0, K_per_dim=(3, 4, 5))
        assert sys_.R == 4 and sys_.L == 1
        assert sys_.grid_shape == (3, 4, 5)
        assert sys_.N == 9
        assert bench.kappa_bounds() == (0.55, 1.45)

    def test_gauss_legendre_weights(self):
        x, w = gauss_legendre_grid(5)
        assert np.all(np.abs(x) <= 0.45)
        assert w.sum() == pytest.approx(1.0, rel=1e-14)
        # integrates cubics exactly on the scaled interval
        exact = (0.45**4) / 4 * 0 + 0.0  # odd function integrates to zero
        assert np.dot(w, x**3) == pytest.approx(exact, abs=1e-15)


class TestFullSolve:
    def test_single_point(self):
        sys_, _ = build_diffusion(6, 1, 1.0, K_per_dim=1)
        ref = full_solve(sys_)
        assert ref.shape == (1, 5)

    def test_per_point_residuals(self, small_system):
        sys_, _, ref = small_system
        flat = ref.reshape(sys_.n_grid, sys_.N)
        for k in range(sys_.n_grid):
            b = sys_.operator_at(k)
            f = sys_.rhs_at(k)
            assert np.linalg.norm(b @ flat[k] - f) <= 1e-10 * np.linalg.norm(f)

    def test_solution_alpha_rank_grows_slowly(self):
        # the (params | space) unfolding is nearly low-rank; record it
        sys_, _ = build_diffusion(16, 2, 1.0, K_per_dim=5)
        ref = full_solve(sys_)
        merged = matricize(ref, (0, 1))
        s = np.linalg.svd(merged, compute_uv=False)
        r10 = alpha_rank(ref, (0, 1), 1e-10)
        assert r10 <= 8
        assert s[3] <= 1e-6 * s[0]


class TestOperatorApply:
    def test_solution_maps_to_rhs(self, small_system):
        sys_, _, ref = small_system
        assert np.allclose(operator_apply(sys_, ref), sys_.rhs_dense(), atol=1e-10)

    def test_identity_structured_system_is_mode_apply(self):
        sys_ = identity_system()
        w = np.random.default_rng(0).standard_normal(sys_.grid_shape + (sys_.N,))
        got = operator_apply(sys_, w)
        assert np.allclose(got, mode_apply(w, sys_.n_params, np.eye(sys_.N)))
        assert np.allclose(got, w)

    def test_tt_and_dense_agree(self, small_system):
        sys_, _, _ = small_system
        w = random_lowrank("tt", sys_.grid_shape + (sys_.N,), (2, 2), seed=1)
        a_tt = operator_apply(sys_, w)
        a_dn = operator_apply(sys_, to_dense(w))
        assert norm(to_dense(a_tt) - a_dn) <= 1e-10 * norm(a_dn)
        assert all(r <= sys_.R * q for r, q in zip(a_tt.ranks, w.ranks))

    def test_linearity(self, small_system):
        sys_, _, _ = small_system
        rng = np.random.default_rng(2)
        w1 = rng.standard_normal(sys_.grid_shape + (sys_.N,))
        w2 = rng.standard_normal(sys_.grid_shape + (sys_.N,))
        lam = 0.73
        assert np.allclose(
            operator_apply(sys_, w1 + lam * w2),
            operator_apply(sys_, w1) + lam * operator_apply(sys_, w2),
            atol=1e-11,
        )

    def test_shape_mismatch(self, small_system):
        sys_, _, _ = small_system
        with pytest.raises(ValueError):
            operator_apply(sys_, np.zeros((2, 2, 2)))


class TestResidualAndEnergy:
    def test_residual_of_solution_vanishes(self, small_system):
        sys_, _, ref = small_system
        assert residual_error(sys_, ref) <= 1e-9

    def test_residual_of_zero(self, small_system):
        sys_, _, ref = small_system
        om = sys_.weights_flat()
        f = sys_.rhs_dense().reshape(sys_.n_grid, sys_.N)
        expected = np.sqrt(np.sum(om * np.sum(f**2, axis=1)))
        assert residual_error(sys_, np.zeros_like(ref)) == pytest.approx(expected, rel=1e-12)

    def test_energy_of_zero(self, small_system):
        sys_, _, ref = small_system
        assert energy(sys_, np.zeros_like(ref)) == 0.0

    def test_energy_minimized_by_solution(self, small_system):
        sys_, _, ref = small_system
        j_ref = energy(sys_, ref)
        rng = np.random.default_rng(3)
        for _ in range(100):
            w = ref + 0.1 * rng.standard_normal(ref.shape)
            assert energy(sys_, w) >= j_ref - 1e-12

    def test_energy_gap_is_squared_operator_distance(self, small_system):
        sys_, _, ref = small_system
        rng = np.random.default_rng(4)
        w = ref + 0.05 * rng.standard_normal(ref.shape)
        gap = energy(sys_, w) - energy(sys_, ref)
        om = sys_.weights_flat()
        diff = (w - ref).reshape(sys_.n_grid, sys_.N)
        direct = sum(
            om[k] * diff[k] @ sys_.operator_at(k) @ diff[k] for k in range(sys_.n_grid)
        )
        assert gap == pytest.approx(direct, rel=1e-9)


class TestCoercivityBookkeeping:
    def test_rayleigh_extremes_within_kappa_bounds(self, small_system):
        sys_, bench, _ = small_system
        lo, hi = sys_.rayleigh_extremes(sys_.operators[0])
        assert 0.55 - 1e-10 <= lo <= hi <= 1.45 + 1e-10


class TestMergedOrderTwoView:
    def test_merge_preserves_solution_and_residual(self, small_system):
        sys_, _, ref = small_system
        merged = merge_parameter_modes(sys_)
        assert merged.grid_shape == (sys_.n_grid,)
        ref_m = full_solve(merged)
        assert np.allclose(ref_m.reshape(ref.shape), ref, atol=1e-12)
        w = np.random.default_rng(5).standard_normal(ref.shape)
        w_m = w.reshape(sys_.n_grid, sys_.N)
        assert residual_error(merged, w_m) == pytest.approx(
            residual_error(sys_, w), rel=1e-12
        )
        assert energy(merged, w_m) == pytest.approx(energy(sys_, w), rel=1e-12)
        # the merged operator action is the flattened tensor action
        assert np.allclose(
            operator_apply(merged, w_m).reshape(ref.shape), operator_apply(sys_, w)
        )


class TestRhsRepresentations:
    def test_rhs_tt_matches_dense(self, small_system):
        sys_, _, _ = small_system
        assert np.allclose(to_dense(sys_.rhs_tt()), sys_.rhs_dense())

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            AffineParametricSystem(
                [np.eye(2)], [np.ones(2)], [[np.ones(2)]], [[np.ones(2)]],
                [np.array([0.0, 1.0])], [np.array([0.5, 0.6])],
            )

    def test_spd_validation(self):
        with pytest.raises(ValueError):
            AffineParametricSystem(
                [-np.eye(3)], [np.ones(3)], [[np.ones(2)]], [[np.ones(2)]],
                [np.array([0.0, 1.0])], [np.array([0.5, 0.5])],
            )
