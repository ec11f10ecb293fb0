import numpy as np
import pytest

from thoughtsim.consistency import DimensionMismatch
from thoughtsim.training import (
    DataSet,
    TrainConfig,
    init_weights,
    load_dataset,
    orthonormality_cost,
    rica_gradient,
    rica_objective,
    save_dataset,
    train,
    write_epoch_csv,
)


def finite_difference_gradient(w, data, lam, eps=1e-6):
    w = np.asarray(w, dtype=np.float64)
    g = np.zeros_like(w)
    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            plus = w.copy()
            plus[i, j] += eps
            minus = w.copy()
            minus[i, j] -= eps
            g[i, j] = (rica_objective(plus, data, lam) - rica_objective(minus, data, lam)) / (2 * eps)
    return g


def near_kink(w, data, lam, tol=1e-4):
    if lam == 0:
        return False
    return bool(np.any(np.abs(np.asarray(w) @ data.columns()) < tol))


class TestObjective:
    def test_orthonormal_square_is_zero(self):
        q = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))[0]
        data = DataSet(np.random.default_rng(1).standard_normal((20, 3)))
        assert rica_objective(q, data, 0.0) == pytest.approx(0.0, abs=1e-24)

    def test_scalar_hand_value(self):
        data = DataSet([[1.0]])
        assert rica_objective([[2.0]], data, 0.0) == pytest.approx(9.0)

    def test_scalar_with_sparsity(self):
        data = DataSet([[1.0]])
        assert rica_objective([[2.0]], data, 1.0) == pytest.approx(11.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            rica_objective(np.eye(3), DataSet([[1.0, 2.0]]), 0.0)


class TestGradient:
    def test_zero_at_global_minimum(self):
        q = np.linalg.qr(np.random.default_rng(2).standard_normal((4, 4)))[0]
        data = DataSet(np.random.default_rng(3).standard_normal((50, 4)))
        assert np.linalg.norm(rica_gradient(q, data, 0.0)) <= 1e-8

    def test_scalar_against_finite_differences(self):
        data = DataSet([[1.0]])
        w = np.array([[2.0]])
        got = rica_gradient(w, data, 0.0)
        np.testing.assert_allclose(got, [[24.0]])
        fd = finite_difference_gradient(w, data, 0.0)
        np.testing.assert_allclose(got, fd, rtol=1e-5)

    def test_random_against_finite_differences(self):
        rng = np.random.default_rng(4)
        data = DataSet(rng.standard_normal((10, 3)))
        for _ in range(10):
            w = rng.standard_normal((3, 3))
            if near_kink(w, data, 0.1):
                continue
            got = rica_gradient(w, data, 0.1)
            fd = finite_difference_gradient(w, data, 0.1)
            assert np.max(np.abs(got - fd)) / max(np.max(np.abs(fd)), 1.0) <= 1e-5


class TestOrthonormalityCost:
    def test_orthonormal_is_zero(self):
        q = np.linalg.qr(np.random.default_rng(5).standard_normal((3, 3)))[0]
        data = DataSet(np.random.default_rng(6).standard_normal((30, 3)))
        assert orthonormality_cost(q, data) == pytest.approx(0.0, abs=1e-20)

    def test_scalar_hand_value(self):
        assert orthonormality_cost([[2.0]], DataSet([[1.0]])) == pytest.approx(9.0)

    def test_matches_reconstruction_sum(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            data = DataSet(rng.standard_normal((50, 4)))
            w = rng.standard_normal((3, 4))
            direct = rica_objective(w, data, 0.0)
            via_eig = orthonormality_cost(w, data)
            assert via_eig == pytest.approx(direct, rel=1e-6)


class TestTrain:
    def test_spanning_data_converges(self):
        rng = np.random.default_rng(0)
        data = DataSet(rng.standard_normal((500, 4)))
        cfg = TrainConfig(sparsity=0.0, learning_rate=1.0, epochs=5000, seed=0)
        result = train(cfg, data, init_weights(4, 4, 0))
        assert result.reconstruction <= 1e-4

    def test_subspace_data_preserves_subspace_variance(self):
        rng = np.random.default_rng(1)
        basis = np.linalg.qr(rng.standard_normal((4, 2)))[0]
        data = DataSet((basis @ rng.standard_normal((2, 300))).T)
        cfg = TrainConfig(epochs=3000, seed=1)
        result = train(cfg, data, init_weights(2, 4, 1))
        w = result.forward
        errs = np.linalg.norm(w.T @ (w @ data.columns()) - data.columns(), axis=0)
        assert np.max(errs) <= 1e-4

    def test_orthonormal_init_is_fixed_point(self):
        q = np.linalg.qr(np.random.default_rng(8).standard_normal((4, 4)))[0]
        data = DataSet(np.random.default_rng(9).standard_normal((100, 4)))
        result = train(TrainConfig(epochs=5), data, q)
        np.testing.assert_allclose(result.forward, q, atol=1e-10)
        assert result.objective <= 1e-20

    def test_objective_non_increasing(self):
        rng = np.random.default_rng(10)
        data = DataSet(rng.standard_normal((100, 3)))
        result = train(TrainConfig(sparsity=0.05, epochs=200, seed=2), data,
                       init_weights(3, 3, 2))
        objectives = [rec.objective for rec in result.history]
        assert all(b <= a for a, b in zip(objectives, objectives[1:]))

    def test_non_transpose_mode_trains_both_weights(self):
        rng = np.random.default_rng(11)
        data = DataSet(rng.standard_normal((300, 4)))
        cfg = TrainConfig(epochs=3000, seed=3, mode="non_transpose")
        result = train(cfg, data, init_weights(4, 4, 3))
        assert result.reconstruction <= 1e-4
        gap = result.generative @ result.forward - np.eye(4)
        assert np.linalg.norm(gap) <= 1e-2

    def test_with_residue_mode_completes_variance(self):
        rng = np.random.default_rng(12)
        data = DataSet(rng.standard_normal((300, 4)))
        cfg = TrainConfig(epochs=4000, seed=4, mode="with_residue")
        result = train(cfg, data, init_weights(2, 4, 4))
        v = data.columns()
        back = (result.generative @ (result.forward @ v)
                + result.residue_generative @ (result.residue_forward @ v))
        assert np.max(np.linalg.norm(back - v, axis=0)) <= 1e-4

    def test_rank_deficient_init_rejected(self):
        data = DataSet(np.random.default_rng(13).standard_normal((10, 3)))
        with pytest.raises(ValueError):
            train(TrainConfig(epochs=1), data, np.zeros((3, 3)))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=2.0)
        with pytest.raises(ValueError):
            TrainConfig(mode="fancy")


def test_dataset_file_round_trip(tmp_path):
    data = DataSet(np.random.default_rng(14).standard_normal((7, 3)))
    path = tmp_path / "data.txt"
    save_dataset(path, data)
    loaded = load_dataset(path)
    np.testing.assert_array_equal(loaded.samples, data.samples)
    assert path.read_text().splitlines()[0] == "7 3"


def test_epoch_csv_format(tmp_path):
    data = DataSet(np.random.default_rng(15).standard_normal((20, 3)))
    result = train(TrainConfig(epochs=3, seed=5), data, init_weights(3, 3, 5))
    path = tmp_path / "epochs.csv"
    write_epoch_csv(path, result.history)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,objective,reconstruction_term,sparsity_term"
    assert len(lines) == 4
    assert lines[1].startswith("1,")
