import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thoughtsim.consistency import (
    DimensionMismatch,
    LayerStack,
    LinearConsistentLayer,
    NotDecomposable,
    RankDeficient,
    check_variance_preservation,
    extract_residue,
    identity_layer,
    layer_forward,
    layer_generative,
    left_inverse,
    load_matrix,
    random_certified_layer,
    residue_reconstruct,
    save_matrix,
    stack_forward,
    stack_generative,
)


class TestLeftInverse:
    def test_identity(self):
        np.testing.assert_allclose(left_inverse(np.eye(2)), np.eye(2))

    def test_column_of_ones(self):
        # (W.T W)^-1 W.T solved by hand: W = [1;1] -> [0.5, 0.5]
        got = left_inverse([[1.0], [1.0]])
        np.testing.assert_allclose(got, [[0.5, 0.5]])

    def test_permutation(self):
        w = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]])
        got = left_inverse(w)
        np.testing.assert_allclose(got, [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
        np.testing.assert_allclose(got @ w, np.eye(2))

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            left_inverse([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(RankDeficient):
            left_inverse([[1.0, 0.0]])  # wide: fewer rows than columns

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 6), st.integers(0, 2**32 - 1))
    def test_true_left_inverse_all_shapes(self, cols, extra, seed):
        # brute multiplication on random rank-sufficient matrices, rows >= cols <= 12
        rng = np.random.default_rng(seed)
        w = rng.standard_normal((cols + extra, cols))
        svals = np.linalg.svd(w, compute_uv=False)
        if svals[-1] <= 1e-3 * svals[0]:
            return
        wi = left_inverse(w)
        assert np.linalg.norm(wi @ w - np.eye(cols)) <= 1e-8


class TestLayerMaps:
    def test_forward_identity(self):
        np.testing.assert_allclose(layer_forward(identity_layer(2), [3.0, -2.0]), [3.0, -2.0])

    def test_forward_1x1(self):
        layer = LinearConsistentLayer([[2.0]], [[0.5]])
        np.testing.assert_allclose(layer_forward(layer, [1.0]), [2.0])

    def test_forward_permutation_pad(self):
        w = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]])
        layer = LinearConsistentLayer.from_forward(w)
        np.testing.assert_allclose(layer_forward(layer, [5.0, 7.0]), [7.0, 5.0, 0.0])

    def test_generative_identity(self):
        np.testing.assert_allclose(layer_generative(identity_layer(2), [3.0, -2.0]), [3.0, -2.0])

    def test_generative_ones_column(self):
        layer = LinearConsistentLayer.from_forward([[1.0], [1.0]])
        np.testing.assert_allclose(layer_generative(layer, [1.0, 1.0]), [1.0])

    def test_unseen_hidden_reaches_equilibrium_in_one_step(self):
        layer = LinearConsistentLayer.from_forward([[1.0], [1.0]])
        v = layer_generative(layer, [1.0, 0.0])
        np.testing.assert_allclose(v, [0.5])
        h = layer_forward(layer, v)
        np.testing.assert_allclose(h, [0.5, 0.5])
        # one more generative pass lands on the same visible state
        np.testing.assert_allclose(layer_generative(layer, h), v, atol=1e-12)

    def test_dimension_mismatch(self):
        layer = identity_layer(3)
        with pytest.raises(DimensionMismatch):
            layer_forward(layer, [1.0, 2.0])
        with pytest.raises(DimensionMismatch):
            layer_generative(layer, [1.0, 2.0])


class TestVariancePreservation:
    def test_identity_passes(self):
        report = check_variance_preservation(identity_layer(4))
        assert report.passed and report.max_error == 0.0

    def test_random_certified_layer_passes(self):
        rng = np.random.default_rng(7)
        layer = random_certified_layer(4, 6, rng)
        assert check_variance_preservation(layer, samples=100, seed=1).passed

    def test_zero_generative_fails(self):
        layer = LinearConsistentLayer(np.eye(3), np.zeros((3, 3)))
        report = check_variance_preservation(layer, samples=50, seed=2)
        assert not report.passed
        assert report.max_error >= 0.1  # unit vectors lose everything


class TestResidue:
    def test_row_selector(self):
        res = extract_residue([[1.0, 0.0]])
        np.testing.assert_allclose(res.residue_forward, [[0.0, 1.0]], atol=1e-12)

    def test_orthonormal_square_has_empty_residue(self):
        q = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))[0]
        res = extract_residue(q)
        assert res.residue_forward.shape == (0, 3)

    def test_diagonal_mix(self):
        s = np.sqrt(0.5)
        res = extract_residue([[s, s]])
        np.testing.assert_allclose(res.residue_forward, [[s, -s]], atol=1e-12)

    def test_not_decomposable(self):
        with pytest.raises(NotDecomposable):
            extract_residue([[2.0, 0.0], [0.0, 1.0]])

    def test_completeness_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            w = rng.standard_normal((2, 5))
            w /= np.linalg.svd(w, compute_uv=False)[0]  # spectral norm 1
            res = extract_residue(w)
            gap = w.T @ w + res.residue_forward.T @ res.residue_forward - np.eye(5)
            assert np.linalg.norm(gap) <= 1e-8

    def test_reconstruct_hand_case(self):
        w = np.array([[1.0, 0.0]])
        res = extract_residue(w)
        v = np.array([3.0, 4.0])
        h = w @ v
        r = res.residue_forward @ v
        np.testing.assert_allclose(residue_reconstruct(w.T, res.residue_generative, h, r), [3.0, 4.0])

    def test_reconstruct_zero_residue(self):
        q = np.linalg.qr(np.random.default_rng(1).standard_normal((4, 4)))[0]
        layer = LinearConsistentLayer.from_forward(q)
        v = np.array([1.0, -2.0, 0.5, 3.0])
        h = layer_forward(layer, v)
        got = residue_reconstruct(layer.generative, np.zeros((4, 0)), h, np.zeros(0))
        np.testing.assert_allclose(got, v, atol=1e-9)

    def test_reconstruct_diagonal_mix(self):
        s = np.sqrt(0.5)
        w = np.array([[s, s]])
        res = extract_residue(w)
        v = np.array([1.0, 0.0])
        h = w @ v
        r = res.residue_forward @ v
        got = residue_reconstruct(w.T, res.residue_generative, h, r)
        np.testing.assert_allclose(got, v, atol=1e-8)

    def test_reconstruct_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            residue_reconstruct(np.eye(2), np.eye(2), [1.0], [1.0, 2.0])


class TestStack:
    def test_two_identities(self):
        stack = LayerStack((identity_layer(3), identity_layer(3)))
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(stack_forward(stack, v), v)
        np.testing.assert_allclose(stack_generative(stack, v), v)

    def test_random_stack_round_trip(self):
        rng = np.random.default_rng(11)
        stack = LayerStack((
            random_certified_layer(4, 6, rng),
            random_certified_layer(6, 8, rng),
            random_certified_layer(8, 8, rng),
        ))
        for _ in range(100):
            v = rng.standard_normal(4)
            back = stack_generative(stack, stack_forward(stack, v))
            assert np.max(np.abs(back - v)) <= 1e-7

    def test_unseen_top_state_equilibrium(self):
        rng = np.random.default_rng(12)
        stack = LayerStack((random_certified_layer(3, 5, rng), random_certified_layer(5, 7, rng)))
        h = rng.standard_normal(7)
        v = stack_generative(stack, h)
        h2 = stack_forward(stack, v)
        v2 = stack_generative(stack, h2)
        assert np.max(np.abs(v2 - v)) <= 1e-8

    def test_incompatible_dims_rejected(self):
        rng = np.random.default_rng(13)
        with pytest.raises(DimensionMismatch):
            LayerStack((random_certified_layer(3, 5, rng), random_certified_layer(4, 4, rng)))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_depth_bounded_round_trip(self, depth, seed):
        rng = np.random.default_rng(seed)
        dims = [int(rng.integers(2, 9))]
        for _ in range(depth):
            dims.append(int(rng.integers(dims[-1], 17)))
        stack = LayerStack(tuple(
            random_certified_layer(a, b, rng) for a, b in zip(dims, dims[1:])))
        for _ in range(20):
            v = rng.standard_normal(dims[0])
            back = stack_generative(stack, stack_forward(stack, v))
            assert np.max(np.abs(back - v)) <= 1e-7


def test_matrix_text_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    m = rng.standard_normal((3, 4))
    path = tmp_path / "w.txt"
    save_matrix(path, m)
    np.testing.assert_array_equal(load_matrix(path), m)
    header = path.read_text().splitlines()[0]
    assert header == "3 4"
