import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swipeqoe.design import DEFAULT_VIDEOS, DelayPattern, Session, build_session
from swipeqoe.exceptions import (
    BaselineUnavailableError,
    NonAlignableError,
    UnknownModelError,
)
from swipeqoe.models import (
    DEFAULT_COEFFICIENTS,
    AlignmentFit,
    BaselineInput,
    ModelCoefficients,
    Prediction,
    align,
    load_registry,
    predict_baseline,
    predict_proposed,
    predict_proposed_batch,
    read_predictions,
    write_predictions,
)

C = DEFAULT_COEFFICIENTS

# Hand-evaluated scores under the default coefficients (term-by-term arithmetic
# with exp(0.55 * t/T), frozen):
#   tau=2,  D=16, P1: 4.52 - 0.10*16*e^{0.1}      - 0.23   = 2.521726531078963
#   tau=4,  D=8,  P1: 4.52 - 0.10*8*e^{11/52.5}... = 3.4016430504570345
#   tau=4,  D=8,  P2: 4.52 - 0.10*8*e^{11/21}     - 0.23   = 2.9392419241748704
HAND_T2_D16_P1 = 2.521726531078963
HAND_T4_D8_P1 = 3.4016430504570345
HAND_T4_D8_P2 = 2.9392419241748704


def _session(tau, total, pattern):
    return build_session(tau, total, pattern).session


class TestPredictProposed:
    def test_zero_delay_is_exactly_alpha(self):
        assert predict_proposed(_session(2, 0, DelayPattern.P0), C) == 4.52

    def test_hand_values(self):
        assert predict_proposed(_session(2, 16, DelayPattern.P1), C) == \
            pytest.approx(HAND_T2_D16_P1, abs=1e-12)
        assert predict_proposed(_session(4, 8, DelayPattern.P1), C) == \
            pytest.approx(HAND_T4_D8_P1, abs=1e-12)
        assert predict_proposed(_session(4, 8, DelayPattern.P2), C) == \
            pytest.approx(HAND_T4_D8_P2, abs=1e-12)

    def test_early_beats_late(self):
        assert predict_proposed(_session(4, 8, DelayPattern.P1), C) > \
            predict_proposed(_session(4, 8, DelayPattern.P2), C)

    def test_batch_matches_scalar(self, design_stimuli):
        sessions = [s.session for s in design_stimuli]
        batch = predict_proposed_batch(sessions, C)
        scalar = [predict_proposed(s, C) for s in sessions]
        np.testing.assert_allclose(batch, scalar, atol=1e-12)

    def test_clamp_flag(self):
        s = _session(2, 16, DelayPattern.P8)
        raw = predict_proposed(s, C)
        low = ModelCoefficients(alpha=1.5, beta=-0.4, lam=0.55, gamma=-0.4)
        assert predict_proposed(s, low) < 1.0
        assert predict_proposed(s, low, clamp=True) == 1.0
        assert predict_proposed(s, C, clamp=True) == raw  # inside [1, 5]

    @given(st.integers(0, 4), st.floats(0.5, 20))
    @settings(max_examples=30, deadline=None)
    def test_increasing_any_delay_decreases_score(self, pos, extra):
        base = _session(4, 8, DelayPattern.P7)
        delays = list(base.delays)
        delays[pos] = Fraction(delays[pos]) + Fraction(extra).limit_denominator(10**6)
        bumped = Session(base.videos, base.viewing_durations, tuple(delays))
        assert predict_proposed(bumped, C) < predict_proposed(base, C)

    def test_splitting_a_delay_costs_one_event_penalty(self):
        # Zero-length viewing of video 2 keeps the delay onset time identical,
        # so splitting changes only the event count.
        vids = DEFAULT_VIDEOS[:4]
        whole = Session(vids, (2, 0, 2, 1), (4, 0, 0, 0))
        split = Session(vids, (2, 0, 2, 1), (2, 2, 0, 0))
        assert predict_proposed(split, C) == \
            pytest.approx(predict_proposed(whole, C) + C.gamma, abs=1e-12)
        assert predict_proposed(split, C) < predict_proposed(whole, C)

    @given(st.sampled_from([1, 2, 3]), st.sampled_from([2, 3, 4]))
    @settings(max_examples=20, deadline=None)
    def test_recency_moving_delay_later_decreases(self, i, j):
        if j <= i:
            j = i + 1
        vids = DEFAULT_VIDEOS
        early = [Fraction(0)] * 6
        late = [Fraction(0)] * 6
        early[i - 1] = Fraction(5)
        late[j - 1] = Fraction(5)
        durations = (3, 3, 3, 3, 3, 1)
        s_early = Session(vids, durations, tuple(early))
        s_late = Session(vids, durations, tuple(late))
        assert predict_proposed(s_late, C) < predict_proposed(s_early, C)

    @given(st.fractions(min_value=Fraction(1, 7), max_value=Fraction(50)))
    @settings(max_examples=40, deadline=None)
    def test_viewing_scale_invariance_is_exact(self, c):
        s = _session(4, 8, DelayPattern.P6)
        assert predict_proposed(s.scaled_viewing(c), C) == predict_proposed(s, C)

    def test_lambda_must_be_finite(self):
        with pytest.raises(ValueError):
            ModelCoefficients(4.5, -0.1, math.inf, -0.2)

    def test_coefficients_file_round_trip(self, tmp_path):
        path = tmp_path / "coeffs.json"
        C.write(path)
        again = ModelCoefficients.read(path)
        assert again == C


class TestAlign:
    def test_identity_fit(self):
        fit, aligned = align([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert fit.slope == pytest.approx(1.0, abs=1e-12)
        assert fit.intercept == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(aligned, [1, 2, 3], atol=1e-12)

    def test_double_scale(self):
        fit, _ = align([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
        assert fit.slope == pytest.approx(0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(0.0, abs=1e-12)

    def test_flat_target(self):
        fit, aligned = align([1.0, 2.0, 3.0], [2.0, 2.0, 2.0])
        assert fit.slope == pytest.approx(0.0, abs=1e-12)
        assert fit.intercept == pytest.approx(2.0, abs=1e-12)
        np.testing.assert_allclose(aligned, [2, 2, 2], atol=1e-12)

    def test_degenerate_predictions_rejected(self):
        with pytest.raises(NonAlignableError):
            align([3.0, 3.0, 3.0], [1.0, 2.0, 3.0])

    def test_idempotent_within_tolerance(self):
        rng = np.random.default_rng(11)
        raw = rng.normal(0, 2, 60)
        mos = 0.6 * raw + 2.5 + rng.normal(0, 0.2, 60)
        _, aligned = align(raw, mos)
        fit2, _ = align(aligned, mos)
        assert abs(fit2.slope - 1) < 1e-9
        assert abs(fit2.intercept) < 1e-9

    def test_apply(self):
        fit = AlignmentFit(slope=2.0, intercept=1.0)
        np.testing.assert_allclose(fit.apply([0.0, 1.0]), [1.0, 3.0])


class TestBaselineInput:
    def test_from_session(self):
        s = _session(4, 8, DelayPattern.P3)
        inp = BaselineInput.from_session(s)
        assert inp.total_delay_s == 8
        assert inp.delay_count == 2
        assert inp.per_event_delays == (4.0, 4.0)
        assert inp.total_media_duration_s == 21

    def test_inconsistent_total_rejected(self):
        with pytest.raises(ValueError):
            BaselineInput(5.0, 1, (4.0,), 21.0)

    def test_inconsistent_count_rejected(self):
        with pytest.raises(ValueError):
            BaselineInput(4.0, 2, (4.0,), 21.0)


@pytest.fixture(scope="module")
def registry():
    return load_registry()


class TestBaselines:
    def test_registry_contents(self, registry):
        assert set(registry.ids()) == {"kooij", "hossfeld", "tran_linear", "cqm",
                                       "p1203_3", "ols_cat"}
        assert set(registry.available_ids()) == {"kooij", "hossfeld",
                                                 "tran_linear", "cqm"}

    def test_hossfeld_zero_stalls_is_formula_maximum(self, registry):
        model = registry.get("hossfeld")
        score = model.score(BaselineInput(0.0, 0, (), 31.0))
        assert score == pytest.approx(model.amplitude + model.offset, abs=1e-12)
        assert score == pytest.approx(5.0, abs=1e-12)

    def test_kooij_acceptability_threshold(self, registry):
        # 0.43 s zapping time sits at the 3.5 acceptability level of the
        # published log fit.
        score = registry.get("kooij").score(BaselineInput(0.43, 1, (0.43,), 31.0))
        assert score == pytest.approx(3.5, abs=0.01)

    def test_kooij_zero_delay_saturates_at_scale_max(self, registry):
        assert registry.get("kooij").score(BaselineInput(0.0, 0, (), 31.0)) == 5.0

    @pytest.mark.parametrize("model_id", ["kooij", "hossfeld", "tran_linear", "cqm"])
    def test_monotone_nonincreasing_in_total_delay(self, registry, model_id):
        model = registry.get(model_id)
        rng = np.random.default_rng(5)
        for _ in range(50):
            t = float(rng.uniform(5, 90))
            n = int(rng.integers(1, 5))
            lo = float(rng.uniform(0.1, 10))
            hi = lo + float(rng.uniform(0.1, 20))
            make = lambda total: BaselineInput(total, n, (total / n,) * n, t)
            assert model.score(make(hi)) <= model.score(make(lo)) + 1e-12

    def test_cqm_uses_media_duration(self, registry):
        model = registry.get("cqm")
        short = model.score(BaselineInput(8.0, 1, (8.0,), 11.0))
        long = model.score(BaselineInput(8.0, 1, (8.0,), 81.0))
        assert long > short  # same stall hurts a longer session less

    def test_unknown_model(self, registry):
        with pytest.raises(UnknownModelError):
            registry.get("nope")
        with pytest.raises(UnknownModelError):
            predict_baseline("nope", BaselineInput(0.0, 0, (), 10.0), registry)

    def test_adapter_slots_signal_unavailable(self, registry):
        for mid in ("p1203_3", "ols_cat"):
            model = registry.get(mid)
            assert not model.available
            with pytest.raises(BaselineUnavailableError):
                model.score(BaselineInput(1.0, 1, (1.0,), 10.0))

    def test_adapter_configuration_enables_scoring(self):
        registry = load_registry()
        registry.configure_external("p1203_3", lambda inp: 4.0 - 0.1 * inp.total_delay_s)
        assert registry.get("p1203_3").available
        assert registry.get("p1203_3").score(BaselineInput(10.0, 1, (10.0,), 30.0)) == \
            pytest.approx(3.0)

    def test_missing_parameter_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_registry(tmp_path / "absent.json")

    def test_source_citations_present(self, registry):
        for mid in registry.ids():
            assert registry.get(mid).source_citation


class TestPredictionFile:
    def test_round_trip(self, tmp_path):
        rows = [Prediction("s1", "proposed", 4.52, None),
                Prediction("s2", "kooij", 1.234567890123, 2.5)]
        path = tmp_path / "pred.csv"
        write_predictions(path, rows)
        back = read_predictions(path)
        assert back == rows
