import warnings

import numpy as np
import pytest
from scipy.stats import spearmanr

from pseudosurv import (
    CoxSimSpec,
    DataError,
    Dataset,
    MlpConfig,
    NumericError,
    PseudoTable,
    TimeGrid,
    gen_cox,
    grid_search,
    load_model,
    make_grid,
    predict_conditional,
    predict_conditional_matrix,
    predict_marginal,
    predict_marginal_matrix,
    pseudo_conditional,
    save_model,
    train,
)
from pseudosurv.net import MlpModel, _loss_and_grads, default_grid, make_cv_folds


def toy_table(rng, n=80, J=3, p=2, pseudo=None):
    ids = np.repeat(np.arange(n), J)
    covs = np.repeat(rng.standard_normal((n, p)), J, axis=0)
    tidx = np.tile(np.arange(J), n)
    ps = rng.random(n * J) if pseudo is None else np.full(n * J, pseudo, dtype=float)
    grid = TimeGrid(np.arange(1.0, J + 1.0))
    return PseudoTable(ids, covs, tidx, ps, grid, tuple(f"z_{k+1}" for k in range(p)))


def small_config(**kw):
    base = dict(
        hidden_layers=(8,),
        activation="relu",
        regularization=("ridge", 1e-3),
        learning_rate=0.01,
        optimizer="adam",
        epochs=50,
        batch_size=64,
        seed=0,
    )
    base.update(kw)
    return MlpConfig(**base)


class TestMlpConfig:
    def test_grid_values_enforced(self):
        with pytest.raises(DataError):
            MlpConfig(hidden_layers=(5,))
        with pytest.raises(DataError):
            MlpConfig(hidden_layers=(8, 8, 8))
        with pytest.raises(DataError):
            small_config(activation="selu")
        with pytest.raises(DataError):
            small_config(regularization=("dropout", 0.5))
        with pytest.raises(DataError):
            small_config(learning_rate=0.1)
        with pytest.raises(DataError):
            small_config(optimizer="rmsprop")
        with pytest.raises(DataError):
            small_config(epochs=0)

    def test_default_grid_size(self):
        grid = default_grid()
        # 42 layouts x 2 activations x 5 regularizations x 3 rates x 2 optimizers
        assert len(grid) == 42 * 2 * 5 * 3 * 2
        assert len({c.content_key() for c in grid}) == len(grid)


class TestTraining:
    def test_constant_target_reaches_level(self, rng):
        table = toy_table(rng, n=60, pseudo=1.0)
        model = train(table, small_config(epochs=200))
        preds = predict_conditional_matrix(model, rng.standard_normal((30, 2)))
        assert np.all(preds >= 0.95)

    def test_bitwise_determinism(self, rng):
        table = toy_table(rng)
        a = train(table, small_config(seed=123))
        b = train(table, small_config(seed=123))
        for wa, wb in zip(a.weights + a.biases, b.weights + b.biases):
            assert np.array_equal(wa, wb)
        assert a.training_log == b.training_log

    def test_gradient_check_two_hidden_layers(self):
        rng = np.random.default_rng(3)
        config = MlpConfig(
            hidden_layers=(8, 4),
            activation="tanh",
            regularization=("ridge", 1e-3),
            learning_rate=0.001,
            optimizer="adam",
            epochs=1,
            batch_size=16,
            seed=0,
        )
        sizes = [5, 8, 4, 1]
        weights = [rng.standard_normal((a, b)) * 0.4 for a, b in zip(sizes[:-1], sizes[1:])]
        biases = [rng.standard_normal(b) * 0.1 for b in sizes[1:]]
        X = rng.standard_normal((12, 5))
        y = rng.random(12)

        _, g_w, g_b = _loss_and_grads(weights, biases, config, X, y)

        def objective():
            return _loss_and_grads(weights, biases, config, X, y)[0]

        checked = 0
        h = 1e-6
        for li in range(len(weights)):
            flat = weights[li].ravel()
            for pos in range(0, flat.size, max(1, flat.size // 6)):
                orig = flat[pos]
                flat[pos] = orig + h
                up = objective()
                flat[pos] = orig - h
                down = objective()
                flat[pos] = orig
                fd = (up - down) / (2 * h)
                an = g_w[li].ravel()[pos]
                assert abs(an - fd) / max(abs(fd), 1e-10) <= 1e-5
                checked += 1
            bias_flat = biases[li]
            orig = bias_flat[0]
            bias_flat[0] = orig + h
            up = objective()
            bias_flat[0] = orig - h
            down = objective()
            bias_flat[0] = orig
            fd = (up - down) / (2 * h)
            assert abs(g_b[li][0] - fd) / max(abs(fd), 1e-10) <= 1e-5
            checked += 1
        assert checked >= 20

    def test_ridge_shrinks_weights_on_zero_targets(self, rng):
        table = toy_table(rng, n=60, pseudo=0.0)
        config = small_config(
            regularization=("ridge", 1e-2), optimizer="sgd_momentum", epochs=40
        )
        model = train(table, config)
        norms = np.asarray(model.weight_norm_log)
        assert np.all(np.diff(norms[5:]) <= 1e-12)

    def test_divergence_reported_with_epoch(self, rng):
        table = toy_table(rng, n=20)
        huge = PseudoTable(
            table.subject_ids,
            table.covariates,
            table.time_index,
            np.full(len(table), 1e200),
            table.grid,
            table.covariate_names,
        )
        with pytest.raises(NumericError, match="diverged at epoch"), warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # overflow is the point
            train(huge, small_config())

    def test_empty_table_rejected(self, rng):
        table = toy_table(rng, n=4)
        empty = table.subset_subjects(np.array([], dtype=int))
        with pytest.raises(DataError):
            train(empty, small_config())

    def test_dropout_variant_trains(self, rng):
        table = toy_table(rng, n=60)
        model = train(table, small_config(regularization=("dropout", 0.2), epochs=20))
        preds = predict_conditional_matrix(model, rng.standard_normal((5, 2)))
        assert np.all((preds > 0) & (preds < 1))


class TestPrediction:
    def _handmade_model(self, conditionals):
        """Hidden layer passes the one-hot through; output encodes given values."""
        J = len(conditionals)
        weights1 = np.zeros((J, 4))
        for j in range(J):
            weights1[j, j] = 1.0
        weights2 = np.zeros((4, 1))
        for j, c in enumerate(conditionals):
            weights2[j, 0] = np.log(c / (1 - c))
        return MlpModel(
            config=small_config(hidden_layers=(4,)),
            cutpoints=np.arange(1.0, J + 1.0),
            covariate_mean=np.empty(0),
            covariate_std=np.empty(0),
            weights=[weights1, weights2],
            biases=[np.zeros(4), np.zeros(1)],
        )

    def test_zero_weights_give_half(self, rng):
        model = self._handmade_model([0.5, 0.5, 0.5])
        for w in model.weights:
            w[:] = 0.0
        assert predict_conditional(model, np.empty(0), 1) == 0.5

    def test_output_bias_ten(self):
        model = self._handmade_model([0.5, 0.5, 0.5])
        for w in model.weights:
            w[:] = 0.0
        model.biases[-1][0] = 10.0
        assert predict_conditional(model, np.empty(0), 0) == pytest.approx(
            1 / (1 + np.exp(-10.0)), abs=1e-12
        )

    def test_marginal_is_product(self):
        model = self._handmade_model([0.9, 0.8, 0.7])
        assert predict_marginal(model, np.empty(0), 0) == pytest.approx(
            predict_conditional(model, np.empty(0), 0), abs=1e-12
        )
        assert predict_marginal(model, np.empty(0), 2) == pytest.approx(0.504, abs=1e-9)

    def test_marginal_nonincreasing(self, rng):
        table = toy_table(rng)
        model = train(table, small_config(epochs=20))
        marg = predict_marginal_matrix(model, rng.standard_normal((10, 2)))
        assert np.all(np.diff(marg, axis=1) <= 1e-15)

    def test_time_index_validated(self, rng):
        model = self._handmade_model([0.9, 0.8, 0.7])
        with pytest.raises(DataError):
            predict_conditional(model, np.empty(0), 3)
        with pytest.raises(DataError):
            predict_marginal(model, np.empty(0), -1)

    def test_monotone_in_covariate_on_ph_design(self):
        data = gen_cox(CoxSimSpec(n=800, dependent_censoring=True, seed=42))
        grid = make_grid(data, percentiles=[0.1, 0.2, 0.3, 0.4, 0.5])
        table = pseudo_conditional(data, grid)
        model = train(table, small_config(hidden_layers=(32,), epochs=100, batch_size=256))
        zs = np.linspace(-2, 2, 25)[:, None]
        for j in range(grid.n_intervals):
            cond = predict_conditional_matrix(model, zs)[:, j]
            rho = spearmanr(zs[:, 0], cond).statistic
            assert rho <= -0.9


class TestGridSearch:
    def test_budget_one_returns_that_config(self, rng):
        data = gen_cox(CoxSimSpec(n=120, censoring_rate=0.3, seed=6))
        grid_times = make_grid(data, percentiles=[0.3, 0.6])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            table = pseudo_conditional(data, grid_times)
        cfg = small_config(epochs=10)
        best, model = grid_search(table, data, [cfg], k=3, eval_times=grid_times, budget=1, seed=0)
        assert best.content_key() == cfg.content_key()
        assert model.config.content_key() == cfg.content_key()

    def test_duplicate_configs_share_scores(self, rng):
        data = gen_cox(CoxSimSpec(n=120, censoring_rate=0.3, seed=6))
        grid_times = make_grid(data, percentiles=[0.3, 0.6])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            table = pseudo_conditional(data, grid_times)
        cfg = small_config(epochs=10)
        other = small_config(epochs=10, activation="tanh")
        _, _, scores = grid_search(
            table, data, [cfg, other, cfg], k=3, eval_times=grid_times,
            budget=3, seed=0, return_scores=True,
        )
        assert scores[0] == scores[2]

    def test_fold_partition(self):
        subjects = np.arange(103)
        folds = make_cv_folds(subjects, 5, seed=9)
        stacked = np.concatenate(folds)
        assert np.array_equal(np.sort(stacked), subjects)
        assert len(folds) == 5

    def test_k_validation(self, rng):
        table = toy_table(rng, n=4)
        data = Dataset(np.arange(1.0, 5.0), np.ones(4, dtype=bool),
                       rng.standard_normal((4, 2)), ("z_1", "z_2"))
        cfg = small_config(epochs=5)
        with pytest.raises(DataError):
            grid_search(table, data, [cfg], k=9, eval_times=table.grid, budget=1, seed=0)
        with pytest.raises(DataError):
            grid_search(table, data, [cfg], k=1, eval_times=table.grid, budget=1, seed=0)

    def test_budget_validation(self, rng):
        table = toy_table(rng, n=10)
        data = Dataset(np.arange(1.0, 11.0), np.ones(10, dtype=bool),
                       rng.standard_normal((10, 2)), ("z_1", "z_2"))
        with pytest.raises(DataError):
            grid_search(table, data, [small_config()], k=2, eval_times=table.grid,
                        budget=2, seed=0)


class TestPersistence:
    def test_round_trip_identical_predictions(self, tmp_path, rng):
        table = toy_table(rng)
        model = train(table, small_config(epochs=15))
        z = rng.standard_normal((20, 2))
        before = predict_marginal_matrix(model, z)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        after = predict_marginal_matrix(loaded, z)
        assert np.array_equal(before, after)
        assert loaded.config == model.config

    def test_version_checked(self, tmp_path, rng):
        table = toy_table(rng)
        model = train(table, small_config(epochs=2))
        path = tmp_path / "model.json"
        save_model(model, path)
        payload = path.read_text().replace('"format_version": 1', '"format_version": 99')
        path.write_text(payload)
        with pytest.raises(DataError, match="format version"):
            load_model(path)
