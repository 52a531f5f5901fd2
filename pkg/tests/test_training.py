import numpy as np
import pytest

from medqnn import models, training
from medqnn.errors import DataError
from medqnn.rng import Rng


def separable_toy(m=48, seed=0):
    """Two linearly separable classes along the first two features.

    The class priors are unbalanced on purpose: with 50/50 priors any
    separable feature standardizes its two clusters to z = +/-1, where
    the DV encoding cos(pi z) is blind to the sign and only deeper
    circuit layers can separate the classes.
    """
    rng = np.random.default_rng(seed)
    labels = (rng.uniform(size=m) < 0.7).astype(int)
    features = rng.normal(scale=0.15, size=(m, 4))
    features[:, 0] += np.where(labels == 1, 1.2, -0.4)
    features[:, 1] += np.where(labels == 1, 0.3, -0.6)
    return features, labels


class TestStratifiedKfold:
    def test_exact_divisibility(self):
        splits = training.stratified_kfold([0, 0, 0, 1, 1, 1], 3, seed=1)
        for _, val in splits:
            assert len(val) == 2

    def test_partition_property(self):
        labels = np.random.default_rng(2).integers(0, 3, 60)
        splits = training.stratified_kfold(labels, 3, seed=3)
        all_val = np.concatenate([val for _, val in splits])
        assert sorted(all_val) == list(range(60))
        for i, (_, val_i) in enumerate(splits):
            for j, (_, val_j) in enumerate(splits):
                if i != j:
                    assert not set(val_i) & set(val_j)
        for train, val in splits:
            assert sorted(np.concatenate([train, val])) == list(range(60))

    def test_pigeonhole_sizes(self):
        labels = [0] * 7
        # 7 samples of one class over 3 folds -> per-fold sizes {3, 2, 2}
        with pytest.raises(DataError):
            training.stratified_kfold([0, 0], 3, seed=0)
        splits = training.stratified_kfold(labels, 3, seed=4)
        sizes = sorted(len(val) for _, val in splits)
        assert sizes == [2, 2, 3]

    def test_per_class_balance(self):
        rng = np.random.default_rng(5)
        labels = np.concatenate([np.zeros(11, int), np.ones(25, int)])
        rng.shuffle(labels)
        splits = training.stratified_kfold(labels, 3, seed=6)
        for _, val in splits:
            count0 = int(np.sum(labels[val] == 0))
            assert count0 in (3, 4)

    def test_deterministic(self):
        labels = np.random.default_rng(7).integers(0, 2, 40)
        a = training.stratified_kfold(labels, 4, seed=8)
        b = training.stratified_kfold(labels, 4, seed=8)
        for (ta, va), (tb, vb) in zip(a, b):
            assert np.array_equal(ta, tb) and np.array_equal(va, vb)


class TestAdam:
    def config(self, lr=1e-3):
        return training.TrainConfig(learning_rate=lr, seed=0)

    def test_zero_gradient_keeps_params(self):
        params = np.array([1.0, -2.0])
        state = training.AdamState.zeros(2)
        out = training.adam_step(params, np.zeros(2), state, 1, self.config())
        np.testing.assert_array_equal(out, params)
        assert np.all(state.m == 0) and np.all(state.v == 0)

    def test_first_step_hand_value(self):
        # t=1, g=1: m_hat = v_hat = 1, step = -lr / (1 + eps)
        params = np.zeros(1)
        state = training.AdamState.zeros(1)
        out = training.adam_step(params, np.ones(1), state, 1, self.config())
        expected = -1e-3 / (1.0 + 1e-8)
        assert out[0] == pytest.approx(expected, abs=1e-15)

    def test_two_runs_identical(self):
        rng = np.random.default_rng(9)
        grads = rng.normal(size=(20, 5))
        trajectories = []
        for _ in range(2):
            params = np.zeros(5)
            state = training.AdamState.zeros(5)
            for t, g in enumerate(grads, start=1):
                params = training.adam_step(params, g, state, t, self.config())
            trajectories.append(params)
        assert np.array_equal(trajectories[0], trajectories[1])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            training.adam_step(np.zeros(2), np.zeros(3), training.AdamState.zeros(2), 1, self.config())


class TestTrainModel:
    def run(self, kind, lr, epochs=3, seed=0):
        features, labels = separable_toy()
        config = training.TrainConfig(
            batch_size=16, learning_rate=lr, epochs=epochs, seed=seed
        )
        rng = Rng(seed)
        return training.train_model(
            kind, features, labels, features[:10], labels[:10], 2, config, rng
        )

    def test_zero_learning_rate_freezes_params(self):
        model, _ = self.run("classical", lr=0.0)
        fresh = models.init_model("classical", 2, Rng(0),
                                  model.feature_mean, model.feature_std)
        np.testing.assert_array_equal(models.flat_params(model), models.flat_params(fresh))

    @pytest.mark.parametrize("kind", models.KINDS)
    def test_toy_problem_loss_drops(self, kind):
        # 150 optimizer steps total, so the toy run uses a rate matched to
        # its budget rather than the dataset-scale default
        features, labels = separable_toy()
        config = training.TrainConfig(batch_size=16, learning_rate=0.05, epochs=50, seed=1)
        model, curves = training.train_model(
            kind, features, labels, features, labels, 2, config, Rng(1)
        )
        final_train = [c for c in curves if c.split == "train"][-1]
        assert final_train.loss < 0.1

    def test_curve_bookkeeping(self):
        _, curves = self.run("classical", lr=1e-3, epochs=4)
        assert len([c for c in curves if c.split == "train"]) == 4
        assert len([c for c in curves if c.split == "val"]) == 4
        for record in curves:
            for value in (record.acc, record.precision, record.recall, record.f1):
                assert 0.0 <= value <= 1.0

    def test_single_epoch_single_batch_is_one_adam_step(self):
        features, labels = separable_toy(m=12)
        config = training.TrainConfig(batch_size=64, epochs=1, seed=2)
        rng = Rng(2)
        model, _ = training.train_model(
            "classical", features, labels, features, labels, 2, config, rng
        )
        # replay by hand: same init, one gradient, one Adam step
        replay_rng = Rng(2)
        fmean = features.mean(axis=0)
        fstd = features.std(axis=0)
        init = models.init_model("classical", 2, replay_rng, fmean, fstd)
        order = list(range(12))
        replay_rng.shuffle(order)
        _, grad, _ = models.loss_and_grad(init, features[order], labels[order])
        state = training.AdamState.zeros(42)
        expected = training.adam_step(models.flat_params(init), grad, state, 1, config)
        np.testing.assert_array_equal(models.flat_params(model), expected)


class TestCrossValidate:
    def test_perfectly_separable_gives_zero_std(self):
        rng = np.random.default_rng(11)
        labels = rng.integers(0, 2, 60)
        images = np.full((60, 64), 0.5)
        images[labels == 1, :8] = 0.9
        images[labels == 0, :8] = 0.1
        config = training.TrainConfig(
            batch_size=8, learning_rate=0.05, epochs=15, seed=5, pca_components=4
        )
        result = training.cross_validate("classical", images, labels, 2, config)
        assert all(f.val_metrics["f1"] == 1.0 for f in result.folds)
        assert result.summary["val_f1"]["std"] == 0.0

    def test_best_fold_selection(self):
        assert training.select_best_fold([0.7, 0.9, 0.8]) == 1
        assert training.select_best_fold([0.9, 0.9, 0.8]) == 0

    def test_full_run_determinism(self):
        rng = np.random.default_rng(12)
        labels = rng.integers(0, 2, 36)
        images = rng.uniform(0, 1, size=(36, 49))
        config = training.TrainConfig(batch_size=8, epochs=2, seed=9)
        a = training.cross_validate("dv", images, labels, 2, config)
        b = training.cross_validate("dv", images, labels, 2, config)
        for fold_a, fold_b in zip(a.folds, b.folds):
            assert np.array_equal(
                models.flat_params(fold_a.model), models.flat_params(fold_b.model)
            )
            assert fold_a.val_metrics == fold_b.val_metrics

    def test_threaded_matches_sequential(self):
        rng = np.random.default_rng(13)
        labels = rng.integers(0, 2, 36)
        images = rng.uniform(0, 1, size=(36, 49))
        config = training.TrainConfig(batch_size=8, epochs=2, seed=10)
        seq = training.cross_validate("classical", images, labels, 2, config, max_workers=1)
        par = training.cross_validate("classical", images, labels, 2, config, max_workers=3)
        for fold_s, fold_p in zip(seq.folds, par.folds):
            assert np.array_equal(
                models.flat_params(fold_s.model), models.flat_params(fold_p.model)
            )

    def test_summary_shape(self):
        rng = np.random.default_rng(14)
        labels = rng.integers(0, 2, 30)
        images = rng.uniform(0, 1, size=(30, 36))
        config = training.TrainConfig(batch_size=8, epochs=2, seed=11)
        result = training.cross_validate("classical", images, labels, 2, config)
        for split in ("train", "val"):
            for metric in ("acc", "precision", "recall", "f1"):
                entry = result.summary[f"{split}_{metric}"]
                assert set(entry) == {"mean", "std"}
