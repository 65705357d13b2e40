import itertools

import numpy as np
import pytest

from tensoria.dense import alpha_rank, norm
from tensoria.formats import (
    CPTensor,
    TuckerTensor,
    add,
    cp_to_tt,
    eval_entry,
    orthonormalize,
    pad_rank,
    param_count,
    parameter_blocks,
    random_lowrank,
    replace_block,
    scale,
    to_dense,
    tt_to_tree,
)
from tensoria.tree import DimensionTree


def outer(*vecs):
    out = np.array(1.0)
    for v in vecs:
        out = np.multiply.outer(out, v)
    return out


ALL_FORMATS = [
    ("cp", (3, 4, 2), 2),
    ("tucker", (3, 4, 2), (2, 2, 2)),
    ("tt", (3, 4, 2), (2, 2)),
    ("tree", (3, 4, 2, 2), 2),
]


class TestToDense:
    def test_cp_rank_one_is_outer_product(self):
        rng = np.random.default_rng(0)
        a, b, c = rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(2)
        x = CPTensor([a[:, None], b[:, None], c[:, None]])
        assert np.allclose(to_dense(x), outer(a, b, c))

    def test_tucker_identity_factors(self):
        core = np.random.default_rng(1).standard_normal((2, 3, 2))
        x = TuckerTensor(core, [np.eye(2), np.eye(3), np.eye(2)])
        assert np.array_equal(to_dense(x), core)

    def test_tt_from_cp_reconstructs(self):
        x = random_lowrank("cp", (3, 4, 2, 3), 3, seed=2)
        dx = to_dense(x)
        tt = cp_to_tt(x)
        assert norm(to_dense(tt) - dx) <= 1e-12 * norm(dx)


class TestEval:
    def test_rank_one_cp_pointwise(self):
        rng = np.random.default_rng(3)
        a, b = rng.standard_normal(3), rng.standard_normal(4)
        x = CPTensor([a[:, None], b[:, None]])
        assert eval_entry(x, (1, 2)) == pytest.approx(a[1] * b[2], rel=1e-14)

    def test_tt_exhaustive_agreement(self):
        x = random_lowrank("tt", (2, 3, 2), (2, 2), seed=4)
        dx = to_dense(x)
        for idx in itertools.product(range(2), range(3), range(2)):
            assert eval_entry(x, idx) == pytest.approx(dx[idx], abs=1e-12)

    def test_zero_rank_cp(self):
        x = CPTensor.zeros((2, 3))
        for idx in itertools.product(range(2), range(3)):
            assert eval_entry(x, idx) == 0.0

    @pytest.mark.parametrize("fmt,shape,rank", ALL_FORMATS)
    def test_all_formats_agree_with_dense(self, fmt, shape, rank):
        x = random_lowrank(fmt, shape, rank, seed=5)
        dx = to_dense(x)
        for idx in itertools.product(*(range(n) for n in shape)):
            assert eval_entry(x, idx) == pytest.approx(dx[idx], abs=1e-11 * (1 + abs(dx[idx])))

    def test_out_of_range(self):
        x = random_lowrank("cp", (2, 2), 1, seed=6)
        with pytest.raises(IndexError):
            eval_entry(x, (0, 2))


class TestParamCount:
    def test_cp_formula(self):
        # r * sum(n_nu): 2 * (4 + 5 + 6)
        assert param_count(random_lowrank("cp", (4, 5, 6), 2, 0)) == 30

    def test_tucker_formula(self):
        # prod(r) + sum(r * n): 8 + 2 * 15
        assert param_count(random_lowrank("tucker", (4, 5, 6), (2, 2, 2), 0)) == 38

    def test_tt_formula(self):
        # sum r_{nu-1} r_nu n_nu with boundary ranks 1
        x = random_lowrank("tt", (4, 5, 6), (2, 3), 0)
        assert param_count(x) == 1 * 2 * 4 + 2 * 3 * 5 + 3 * 1 * 6

    def test_tree_formula(self):
        x = random_lowrank("tree", (3, 3, 3, 3), 2, 0)
        # leaves: 4 * (3*2); internal non-root: 2 * (2*2*2); root: 1 * (2*2)
        assert param_count(x) == 4 * 6 + 2 * 8 + 4


class TestAdd:
    def test_add_zero_rank(self):
        x = random_lowrank("cp", (3, 4), 2, seed=7)
        z = CPTensor.zeros((3, 4))
        assert np.allclose(to_dense(add(x, z)), to_dense(x))

    def test_dense_oracle_random_cp_pairs(self):
        for seed in range(3):
            x = random_lowrank("cp", (3, 4, 2), 2, seed=seed)
            y = random_lowrank("cp", (3, 4, 2), 3, seed=seed + 100)
            assert np.allclose(to_dense(add(x, y)), to_dense(x) + to_dense(y))

    @pytest.mark.parametrize("fmt,shape,rank", ALL_FORMATS)
    def test_add_self_doubles(self, fmt, shape, rank):
        x = random_lowrank(fmt, shape, rank, seed=8)
        assert np.allclose(to_dense(add(x, x)), 2 * to_dense(x), atol=1e-12)

    @pytest.mark.parametrize("fmt,shape,rank", ALL_FORMATS)
    def test_ranks_add(self, fmt, shape, rank):
        x = random_lowrank(fmt, shape, rank, seed=9)
        s = add(x, x)
        if fmt == "cp":
            assert s.rank == 2 * x.rank
        elif fmt == "tucker":
            assert s.ranks == tuple(2 * r for r in x.ranks)
        elif fmt == "tt":
            assert s.ranks == tuple(2 * r for r in x.ranks)
        else:
            assert s.node_rank(s.tree.root) == 1
            for i in range(s.tree.n_nodes):
                if i != s.tree.root:
                    assert s.node_rank(i) == 2 * x.node_rank(i)

    def test_associative_commutative_at_dense_level(self):
        x = random_lowrank("tt", (3, 3, 3), (2, 2), seed=10)
        y = random_lowrank("tt", (3, 3, 3), (1, 2), seed=11)
        z = random_lowrank("tt", (3, 3, 3), (2, 1), seed=12)
        assert np.allclose(to_dense(add(x, y)), to_dense(add(y, x)))
        assert np.allclose(
            to_dense(add(add(x, y), z)), to_dense(add(x, add(y, z))), atol=1e-12
        )

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            add(random_lowrank("cp", (3, 4), 1, 0), random_lowrank("cp", (3, 5), 1, 0))

    def test_tree_mismatch(self):
        x = random_lowrank("tree", (2, 2, 2, 2), 1, 0, tree=DimensionTree.balanced(4))
        y = random_lowrank("tree", (2, 2, 2, 2), 1, 0, tree=DimensionTree.linear(4))
        with pytest.raises(ValueError):
            add(x, y)


class TestOrthonormalize:
    def test_reconstruction_unchanged(self):
        for fmt, shape, rank in ALL_FORMATS[1:]:
            x = random_lowrank(fmt, shape, rank, seed=13)
            dx = to_dense(x)
            y = orthonormalize(x)
            assert norm(to_dense(y) - dx) <= 1e-12 * norm(dx), fmt

    def test_already_orthonormal_unchanged_up_to_sign(self):
        q1 = np.linalg.qr(np.random.default_rng(14).standard_normal((5, 2)))[0]
        q2 = np.linalg.qr(np.random.default_rng(15).standard_normal((4, 2)))[0]
        core = np.random.default_rng(16).standard_normal((2, 2))
        x = TuckerTensor(core, [q1, q2])
        y = orthonormalize(x)
        for old, new in zip(x.factors, y.factors):
            signs = np.sign(np.sum(old * new, axis=0))
            assert np.allclose(new * signs, old, atol=1e-12)

    def test_tt_left_orthogonal_gram(self):
        x = random_lowrank("tt", (3, 4, 3, 2), (2, 3, 2), seed=17)
        y = orthonormalize(x)
        for core in y.cores[:-1]:
            q = core.reshape(-1, core.shape[2])
            assert np.allclose(q.T @ q, np.eye(core.shape[2]), atol=1e-12)

    def test_tt_norm_from_last_core(self):
        x = random_lowrank("tt", (3, 4, 3), (2, 2), seed=18)
        y = orthonormalize(x)
        assert np.linalg.norm(y.cores[-1]) == pytest.approx(norm(to_dense(x)), rel=1e-12)

    def test_tree_norm_in_root_and_orthonormal_leaves(self):
        x = random_lowrank("tree", (3, 3, 3, 3), 2, seed=19)
        y = orthonormalize(x)
        assert np.linalg.norm(y.transfer[y.tree.root]) == pytest.approx(
            norm(to_dense(x)), rel=1e-12
        )
        for i, b in y.leaf_bases.items():
            assert np.allclose(b.T @ b, np.eye(b.shape[1]), atol=1e-12)

    def test_rank_deficient_factor_is_trimmed(self):
        f0 = np.random.default_rng(20).standard_normal((4, 1))
        x = TuckerTensor(
            np.random.default_rng(21).standard_normal((2, 2)),
            [np.hstack([f0, 2.0 * f0]), np.random.default_rng(22).standard_normal((3, 2))],
        )
        y = orthonormalize(x)
        assert y.ranks[0] == 1
        assert norm(to_dense(y) - to_dense(x)) <= 1e-12 * norm(to_dense(x))


class TestRandomLowrank:
    @pytest.mark.parametrize("fmt,shape,rank", ALL_FORMATS)
    def test_same_seed_identical(self, fmt, shape, rank):
        x = random_lowrank(fmt, shape, rank, seed=23)
        y = random_lowrank(fmt, shape, rank, seed=23)
        assert np.array_equal(to_dense(x), to_dense(y))

    @pytest.mark.parametrize("fmt,shape,rank", ALL_FORMATS)
    def test_different_seeds_differ(self, fmt, shape, rank):
        x = random_lowrank(fmt, shape, rank, seed=24)
        y = random_lowrank(fmt, shape, rank, seed=25)
        assert np.any(to_dense(x) != to_dense(y))

    def test_cp_rank_bounds_unfoldings(self):
        x = random_lowrank("cp", (4, 4, 4), 2, seed=26)
        for alpha in [(0,), (1,), (2,), (0, 1)]:
            assert alpha_rank(to_dense(x), alpha) <= 2

    def test_inadmissible_ranks_rejected(self):
        with pytest.raises(ValueError):
            random_lowrank("tucker", (3, 3), (4, 2), seed=0)
        with pytest.raises(ValueError):
            random_lowrank("tree", (2, 2, 2, 2), {0: 1, 1: 9, 2: 1, 3: 1, 4: 1, 5: 1, 6: 1}, 0)


class TestCpToTt:
    def test_rank_one_gives_unit_ranks(self):
        x = random_lowrank("cp", (3, 4, 2), 1, seed=27)
        tt = cp_to_tt(x)
        assert tt.ranks == (1, 1)

    def test_dense_equivalence_r3_d4(self):
        x = random_lowrank("cp", (3, 2, 3, 2), 3, seed=28)
        tt = cp_to_tt(x)
        assert norm(to_dense(tt) - to_dense(x)) <= 1e-12 * norm(to_dense(x))
        assert all(r <= 3 for r in tt.ranks)

    def test_param_count_bound(self):
        x = random_lowrank("cp", (3, 4, 5), 3, seed=29)
        tt = cp_to_tt(x)
        r = x.rank
        assert param_count(tt) <= sum(r * r * n for n in x.shape) + 2 * r * max(x.shape)


class TestTreeRankBounds:
    def test_alpha_ranks_bounded_by_node_ranks(self):
        x = random_lowrank("tree", (3, 3, 3, 3), 2, seed=30)
        dx = to_dense(x)
        tree = x.tree
        for i in range(tree.n_nodes):
            if i == tree.root:
                continue
            assert alpha_rank(dx, tree.nodes[i], 1e-10) <= x.node_rank(i)


class TestTTAsTreeFormat:
    def test_linear_tree_embedding_reconstructs(self):
        for seed in range(3):
            x = random_lowrank("tt", (3, 2, 4, 2), (2, 3, 2), seed=seed)
            y = tt_to_tree(x)
            assert y.tree == DimensionTree.linear(4)
            assert norm(to_dense(y) - to_dense(x)) <= 1e-12 * norm(to_dense(x))
            # tail-node ranks match the TT interface ranks
            full = (1,) + x.ranks + (1,)
            for i in y.tree.internal_nodes():
                k = y.tree.nodes[i][0]
                assert y.node_rank(i) == full[k]


class TestScaleAndPad:
    @pytest.mark.parametrize("fmt,shape,rank", ALL_FORMATS)
    def test_scale(self, fmt, shape, rank):
        x = random_lowrank(fmt, shape, rank, seed=31)
        assert np.allclose(to_dense(scale(x, -2.5)), -2.5 * to_dense(x))

    def test_pad_preserves_value(self):
        x = random_lowrank("tt", (3, 4, 2), (1, 2), seed=32)
        y = pad_rank(x, (3, 3))
        assert y.ranks == (3, 3)
        assert np.allclose(to_dense(y), to_dense(x))
        c = random_lowrank("cp", (3, 4), 2, seed=33)
        c2 = pad_rank(c, 4)
        assert c2.rank == 4
        assert np.allclose(to_dense(c2), to_dense(c))


class TestParameterBlocks:
    @pytest.mark.parametrize("fmt,shape,rank", ALL_FORMATS)
    def test_replace_round_trip(self, fmt, shape, rank):
        x = random_lowrank(fmt, shape, rank, seed=34)
        blocks = parameter_blocks(x)
        y = x
        for i, b in enumerate(blocks):
            y = replace_block(y, i, b)
        assert np.allclose(to_dense(y), to_dense(x))

    def test_reconstruction_linear_in_each_block(self):
        x = random_lowrank("tt", (3, 3, 3), (2, 2), seed=35)
        blocks = parameter_blocks(x)
        for i, b in enumerate(blocks):
            y2 = replace_block(x, i, 2.0 * b)
            assert np.allclose(to_dense(y2), 2.0 * to_dense(x), atol=1e-12)
