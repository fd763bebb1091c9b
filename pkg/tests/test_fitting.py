import numpy as np
import pytest
from sklearn.base import clone

from swipeqoe.design import DelayPattern, build_session
from swipeqoe.exceptions import UnidentifiableFitError
from swipeqoe.fitting import (
    FitConfig,
    SwipeDelayQoEModel,
    evaluate_protocol,
    fit_proposed,
)
from swipeqoe.models import (
    DEFAULT_COEFFICIENTS,
    ModelCoefficients,
    delay_feature_arrays,
    load_registry,
    predict_proposed_batch,
)

PLANTED = ModelCoefficients(alpha=4.5, beta=-0.1, lam=0.5, gamma=-0.2)


@pytest.fixture(scope="module")
def design_dataset(request):
    stimuli = request.getfixturevalue("design_stimuli")
    sessions = [s.session for s in stimuli]
    y = predict_proposed_batch(sessions, PLANTED)
    return sessions, y


class TestFitConfig:
    def test_grid_points(self):
        grid = FitConfig(lambda_grid=(-1.0, 5.0, 0.01)).grid_points()
        assert len(grid) == 601
        assert grid[0] == -1.0
        assert grid[-1] == pytest.approx(5.0, abs=1e-9)

    @pytest.mark.parametrize("kwargs", [
        dict(lambda_grid=(2.0, 1.0, 0.01)),
        dict(lambda_grid=(0.0, 1.0, 0.0)),
        dict(refine_tolerance=0.0),
        dict(train_fraction=1.0),
        dict(repeats=0),
        dict(align_on="sideways"),
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            FitConfig(**kwargs)


class TestFitProposed:
    def test_noiseless_recovery(self, design_dataset):
        sessions, y = design_dataset
        coeffs = fit_proposed(list(zip(sessions, y)))
        assert abs(coeffs.lam - PLANTED.lam) < 1e-3
        assert abs(coeffs.alpha - PLANTED.alpha) < 1e-6
        assert abs(coeffs.beta - PLANTED.beta) < 1e-6
        assert abs(coeffs.gamma - PLANTED.gamma) < 1e-6

    def test_noisy_recovery_over_ten_seeds(self, design_dataset):
        # Tolerances are the observed 95th-percentile recovery errors for
        # sigma=0.1 noise on 132 stimuli, measured over 200 seeds (lambda
        # 0.052, alpha 0.045, beta 0.005, gamma 0.016) and padded ~15% for
        # the tail of a small fixed seed set.  The fit itself is the exact
        # MSE minimizer, so these are statistical floors, not looseness.
        sessions, y = design_dataset
        for seed in range(10):
            rng = np.random.default_rng(seed)
            noisy = y + rng.normal(0, 0.1, len(y))
            coeffs = fit_proposed(list(zip(sessions, noisy)))
            assert abs(coeffs.lam - PLANTED.lam) <= 0.06
            assert abs(coeffs.alpha - PLANTED.alpha) <= 0.05
            assert abs(coeffs.beta - PLANTED.beta) <= 0.01
            assert abs(coeffs.gamma - PLANTED.gamma) <= 0.02

    def test_all_zero_delay_unidentifiable(self):
        sessions = [build_session(tau, 0, DelayPattern.P0).session
                    for tau in (2, 4, 8, 16)]
        with pytest.raises(UnidentifiableFitError):
            fit_proposed([(s, 4.5) for s in sessions])

    def test_too_few_stimuli(self):
        s = build_session(2, 4, DelayPattern.P1).session
        with pytest.raises(UnidentifiableFitError):
            fit_proposed([(s, 3.0)] * 3)

    def test_normal_equations_residual(self, design_dataset):
        sessions, y = design_dataset
        rng = np.random.default_rng(3)
        noisy = y + rng.normal(0, 0.1, len(y))
        coeffs = fit_proposed(list(zip(sessions, noisy)))
        delays, ratios, counts = delay_feature_arrays(sessions)
        s = (delays * np.exp(coeffs.lam * ratios)).sum(axis=1)
        X = np.column_stack([np.ones_like(s), s, counts])
        theta = np.array([coeffs.alpha, coeffs.beta, coeffs.gamma])
        resid = X.T @ (noisy - X @ theta)
        scale = np.linalg.norm(X.T @ noisy)
        assert np.linalg.norm(resid) / scale < 1e-9

    def test_order_invariance(self, design_dataset):
        sessions, y = design_dataset
        rng = np.random.default_rng(8)
        noisy = y + rng.normal(0, 0.1, len(y))
        data = list(zip(sessions, noisy))
        a = fit_proposed(data)
        perm = rng.permutation(len(data))
        b = fit_proposed([data[i] for i in perm])
        assert a.alpha == pytest.approx(b.alpha, abs=1e-9)
        assert a.beta == pytest.approx(b.beta, abs=1e-9)
        assert a.lam == pytest.approx(b.lam, abs=1e-9)
        assert a.gamma == pytest.approx(b.gamma, abs=1e-9)

    def test_refined_mse_beats_grid(self, design_dataset):
        sessions, y = design_dataset
        rng = np.random.default_rng(17)
        noisy = y + rng.normal(0, 0.15, len(y))
        config = FitConfig(lambda_grid=(-1.0, 5.0, 0.05))
        coeffs = fit_proposed(list(zip(sessions, noisy)), config)
        delays, ratios, counts = delay_feature_arrays(sessions)

        def mse_at(lam):
            s = (delays * np.exp(lam * ratios)).sum(axis=1)
            X = np.column_stack([np.ones_like(s), s, counts])
            theta, *_ = np.linalg.lstsq(X, noisy, rcond=None)
            r = noisy - X @ theta
            return float(r @ r) / len(noisy)

        refined = mse_at(coeffs.lam)
        for lam in config.grid_points():
            assert refined <= mse_at(float(lam)) + 1e-15


class TestEstimator:
    def test_fit_predict(self, design_dataset):
        sessions, y = design_dataset
        model = SwipeDelayQoEModel().fit(sessions, y)
        np.testing.assert_allclose(model.predict(sessions), y, atol=1e-6)
        assert model.mse_ < 1e-12

    def test_get_set_params_and_clone(self):
        model = SwipeDelayQoEModel(lambda_grid=(-2.0, 2.0, 0.1), clamp=True)
        params = model.get_params()
        assert params["lambda_grid"] == (-2.0, 2.0, 0.1)
        assert params["clamp"] is True
        twin = clone(model)
        assert twin.get_params() == params
        twin.set_params(clamp=False)
        assert twin.clamp is False

    def test_fixed_coefficients_predict_without_fit(self, design_dataset):
        sessions, _ = design_dataset
        model = SwipeDelayQoEModel(coefficients=DEFAULT_COEFFICIENTS)
        scores = model.predict(sessions[:5])
        expected = predict_proposed_batch(sessions[:5], DEFAULT_COEFFICIENTS)
        np.testing.assert_allclose(scores, expected)

    def test_unfitted_without_coefficients(self, design_dataset):
        sessions, _ = design_dataset
        with pytest.raises(RuntimeError):
            SwipeDelayQoEModel().predict(sessions[:2])

    def test_rejects_non_sessions(self):
        with pytest.raises(TypeError):
            SwipeDelayQoEModel().fit([1, 2, 3, 4], [1, 2, 3, 4])

    def test_rejects_length_mismatch(self, design_dataset):
        sessions, y = design_dataset
        with pytest.raises(ValueError):
            SwipeDelayQoEModel().fit(sessions, y[:-1])


class TestEvaluateProtocol:
    def test_self_consistent_dataset(self, design_dataset):
        sessions, _ = design_dataset
        y = predict_proposed_batch(sessions, DEFAULT_COEFFICIENTS)
        registry = load_registry()
        report = evaluate_protocol(list(zip(sessions, y)), registry,
                                   FitConfig(seed=1, repeats=3))
        rows = [r for r in report.records
                if r.model_id == "proposed" and r.partition == "test"]
        assert len(rows) == 3
        for row in rows:
            assert row.rmse < 1e-9
            assert row.pcc == pytest.approx(1.0, abs=1e-12)

    def test_determinism(self, design_dataset, true_mos, design_sessions):
        dataset = [(design_sessions[sid], m) for sid, m in true_mos.items()]
        registry = load_registry()
        config = FitConfig(seed=7, repeats=4)
        a = evaluate_protocol(dataset, registry, config)
        b = evaluate_protocol(dataset, registry, config)
        assert a.to_json() == b.to_json()

    def test_different_seeds_differ(self, true_mos, design_sessions):
        dataset = [(design_sessions[sid], m) for sid, m in true_mos.items()]
        registry = load_registry()
        a = evaluate_protocol(dataset, registry, FitConfig(seed=1, repeats=2))
        b = evaluate_protocol(dataset, registry, FitConfig(seed=2, repeats=2))
        assert a.to_json() != b.to_json()

    def test_unavailable_models_reported_not_dropped(self, true_mos, design_sessions):
        dataset = [(design_sessions[sid], m) for sid, m in true_mos.items()]
        registry = load_registry()
        report = evaluate_protocol(dataset, registry, FitConfig(seed=0, repeats=2))
        unavailable = [r for r in report.records if r.status == "unavailable"]
        assert {r.model_id for r in unavailable} == {"p1203_3", "ols_cat"}
        assert len(unavailable) == 4  # two models x two repeats

    def test_baseline_rows_have_alignment(self, true_mos, design_sessions):
        dataset = [(design_sessions[sid], m) for sid, m in true_mos.items()]
        report = evaluate_protocol(dataset, load_registry(),
                                   FitConfig(seed=0, repeats=2))
        kooij_rows = [r for r in report.records if r.model_id == "kooij"]
        assert all(r.slope is not None and r.intercept is not None
                   for r in kooij_rows)
        proposed_rows = [r for r in report.records if r.model_id == "proposed"]
        assert all(r.slope is None for r in proposed_rows)

    def test_align_on_train_mode(self, true_mos, design_sessions):
        dataset = [(design_sessions[sid], m) for sid, m in true_mos.items()]
        registry = load_registry()
        a = evaluate_protocol(dataset, registry,
                              FitConfig(seed=3, repeats=2, align_on="train"))
        b = evaluate_protocol(dataset, registry,
                              FitConfig(seed=3, repeats=2, align_on="test"))
        row_a = next(r for r in a.records if r.model_id == "kooij")
        row_b = next(r for r in b.records if r.model_id == "kooij")
        assert row_a.slope != row_b.slope

    def test_aggregates_are_means(self, true_mos, design_sessions):
        dataset = [(design_sessions[sid], m) for sid, m in true_mos.items()]
        report = evaluate_protocol(dataset, load_registry(),
                                   FitConfig(seed=5, repeats=4))
        rows = [r for r in report.records
                if r.model_id == "proposed" and r.partition == "test"]
        agg = report.aggregate_for("proposed", "test")
        assert agg.rmse == pytest.approx(np.mean([r.rmse for r in rows]))
        assert agg.pcc == pytest.approx(np.mean([r.pcc for r in rows]))
        assert agg.n_splits == 4

    def test_best_split_has_max_pcc(self, true_mos, design_sessions):
        dataset = [(design_sessions[sid], m) for sid, m in true_mos.items()]
        report = evaluate_protocol(dataset, load_registry(),
                                   FitConfig(seed=5, repeats=5))
        rows = [r for r in report.records
                if r.model_id == "proposed" and r.partition == "test"]
        best_row = next(r for r in rows if r.split_id == report.best_split_id)
        assert best_row.pcc == max(r.pcc for r in rows)
        assert report.best_coefficients is not None

    def test_report_round_trip_file(self, tmp_path, true_mos, design_sessions):
        dataset = [(design_sessions[sid], m) for sid, m in true_mos.items()]
        report = evaluate_protocol(dataset, load_registry(),
                                   FitConfig(seed=2, repeats=2))
        path = tmp_path / "report.json"
        report.write(path)
        import json
        doc = json.loads(path.read_text())
        assert doc["format"] == "swipeqoe-evaluation-report"
        assert doc["coefficients"] is not None
        assert {"model", "split", "partition", "slope", "intercept",
                "rmse", "pcc", "srocc"} <= set(doc["records"][0])

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            evaluate_protocol([], load_registry(), FitConfig())
