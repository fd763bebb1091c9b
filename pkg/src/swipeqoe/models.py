"""QoE predictors: the recency-weighted swipe-delay model and baselines.

The predictor scores a session as

    score = alpha + beta * sum_i d_i * exp(lambda * t_i / T) + gamma * N_d

where the sum runs over videos 1..N-1, d_i is the swipe delay after video i,
t_i is the cumulative viewing time through video i, T is the total viewing
time, and N_d counts the positive delay events.  Delays near the end of a
session carry more weight when lambda > 0, capturing the recency effect.

Baselines designed for single-video streaming (stall/zapping models) consume
the total delay as the event magnitude; their constants live in an external
parameter file so provenance stays auditable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .design import Session
from .exceptions import (
    BaselineUnavailableError,
    NonAlignableError,
    ParseError,
    UnknownModelError,
)

PARAMS_FORMAT = "swipeqoe-model-params"
MODEL_PROPOSED = "proposed"


@dataclass(frozen=True)
class ModelCoefficients:
    """Coefficients of the proposed model: baseline MOS, delay weight, recency
    exponent, and per-event penalty."""

    alpha: float
    beta: float
    lam: float
    gamma: float

    def __post_init__(self):
        if not math.isfinite(self.lam):
            raise ValueError("lambda must be finite")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta,
                "lambda": self.lam, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelCoefficients":
        return cls(alpha=float(d["alpha"]), beta=float(d["beta"]),
                   lam=float(d["lambda"]), gamma=float(d["gamma"]))

    @classmethod
    def read(cls, path) -> "ModelCoefficients":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ParseError(e.msg, path=str(path), line=e.lineno, column=e.colno) from e
        try:
            return cls.from_dict(doc)
        except KeyError as e:
            raise ParseError(f"missing coefficient {e}", path=str(path)) from e

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


#: Fitted coefficients shipped as the package default (alpha, beta, lambda, gamma).
DEFAULT_COEFFICIENTS = ModelCoefficients(alpha=4.52, beta=-0.10, lam=0.55, gamma=-0.23)


def recency_ratios(session: Session) -> tuple[float, ...]:
    """t_i / T for i = 1..N-1, computed by exact rational division.

    Rational division makes the ratios invariant under any common scaling of
    the viewing durations, which keeps predictions bit-identical for
    time-scaled sessions.
    """
    T = session.total_media_duration
    prefixes = session.prefix_viewing_times
    return tuple(float(t / T) for t in prefixes[:-1])


def predict_proposed(session: Session, coeffs: ModelCoefficients,
                     clamp: bool = False) -> float:
    """Score one session with the recency-weighted delay model.

    Predictions are on the MOS scale but unbounded by default; pass
    ``clamp=True`` to saturate at [1, 5] for reporting.
    """
    T = session.total_media_duration
    if T <= 0:
        raise ValueError("total media duration must be > 0")
    ratios = recency_ratios(session)
    acc = 0.0
    for d, r in zip(session.delays[:-1], ratios):
        if d > 0:
            acc += float(d) * math.exp(coeffs.lam * r)
    nd = session.delay_count
    score = coeffs.alpha + coeffs.beta * acc + coeffs.gamma * nd
    if clamp:
        score = min(5.0, max(1.0, score))
    return score


def delay_feature_arrays(sessions: Sequence[Session]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pack per-session delay structure into padded arrays for vectorized use.

    Returns (delays, ratios, event_counts): delays and ratios have one row per
    session padded with zeros up to the longest session, so the weighted delay
    feature for any lambda is ``(delays * exp(lam * ratios)).sum(axis=1)``.
    """
    n = len(sessions)
    width = max(len(s) - 1 for s in sessions) if n else 0
    delays = np.zeros((n, width))
    ratios = np.zeros((n, width))
    counts = np.zeros(n)
    for j, s in enumerate(sessions):
        k = len(s) - 1
        delays[j, :k] = [float(d) for d in s.delays[:-1]]
        ratios[j, :k] = recency_ratios(s)
        counts[j] = s.delay_count
    return delays, ratios, counts


def predict_proposed_batch(sessions: Sequence[Session], coeffs: ModelCoefficients,
                           clamp: bool = False) -> np.ndarray:
    delays, ratios, counts = delay_feature_arrays(sessions)
    scores = coeffs.alpha + coeffs.beta * (delays * np.exp(coeffs.lam * ratios)).sum(axis=1) \
        + coeffs.gamma * counts
    if clamp:
        scores = np.clip(scores, 1.0, 5.0)
    return scores


@dataclass(frozen=True)
class BaselineInput:
    """Delay summary consumed by single-video baselines.

    ``total_delay_s`` doubles as the single stall/zapping magnitude for models
    that only understand one event; ``delay_count`` feeds their event-count
    term where one exists.
    """

    total_delay_s: float
    delay_count: int
    per_event_delays: tuple[float, ...]
    total_media_duration_s: float

    def __post_init__(self):
        object.__setattr__(self, "per_event_delays", tuple(float(d) for d in self.per_event_delays))
        if any(d < 0 for d in self.per_event_delays):
            raise ValueError("per-event delays must be >= 0")
        if not math.isclose(self.total_delay_s, sum(self.per_event_delays),
                            rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError("total_delay_s must equal the sum of per-event delays")
        if self.delay_count != sum(1 for d in self.per_event_delays if d > 0):
            raise ValueError("delay_count must equal the number of positive delays")
        if self.total_media_duration_s <= 0:
            raise ValueError("total media duration must be > 0")

    @classmethod
    def from_session(cls, session: Session) -> "BaselineInput":
        per_event = tuple(float(d) for d in session.delays if d > 0)
        return cls(
            total_delay_s=float(session.total_delay),
            delay_count=session.delay_count,
            per_event_delays=per_event,
            total_media_duration_s=float(session.total_media_duration),
        )


class BaselineModel:
    """A registered baseline predictor."""

    model_id: str
    source_citation: str
    available: bool = True

    def score(self, inp: BaselineInput) -> float:
        raise NotImplementedError


class KooijZapping(BaselineModel):
    """Logarithmic zapping-quality model: score = intercept + slope * ln(delay).

    The published fit saturates at the ends of the 5-point scale, so a zero
    delay scores the scale maximum.
    """

    def __init__(self, model_id: str, source_citation: str, parameters: Mapping[str, float]):
        self.model_id = model_id
        self.source_citation = source_citation
        self.slope = float(parameters["slope"])
        self.intercept = float(parameters["intercept"])
        self.score_min = float(parameters.get("score_min", 1.0))
        self.score_max = float(parameters.get("score_max", 5.0))

    def score(self, inp: BaselineInput) -> float:
        if inp.total_delay_s <= 0:
            return self.score_max
        raw = self.intercept + self.slope * math.log(inp.total_delay_s)
        return min(self.score_max, max(self.score_min, raw))


class HossfeldExponential(BaselineModel):
    """Exponential stalling model: amplitude * exp(-(a*L + b) * N) + offset."""

    def __init__(self, model_id: str, source_citation: str, parameters: Mapping[str, float]):
        self.model_id = model_id
        self.source_citation = source_citation
        self.amplitude = float(parameters["amplitude"])
        self.duration_coef = float(parameters["duration_coef"])
        self.event_coef = float(parameters["event_coef"])
        self.offset = float(parameters["offset"])

    def score(self, inp: BaselineInput) -> float:
        exponent = -(self.duration_coef * inp.total_delay_s + self.event_coef) * inp.delay_count
        return self.amplitude * math.exp(exponent) + self.offset


class LinearStalling(BaselineModel):
    """Linear degradation in total stall time and event count."""

    def __init__(self, model_id: str, source_citation: str, parameters: Mapping[str, float]):
        self.model_id = model_id
        self.source_citation = source_citation
        self.base = float(parameters["base"])
        self.per_second = float(parameters["per_second"])
        self.per_event = float(parameters["per_event"])

    def score(self, inp: BaselineInput) -> float:
        return self.base - self.per_second * inp.total_delay_s - self.per_event * inp.delay_count


class CumulativeAverageQuality(BaselineModel):
    """Cumulative (time-weighted) session quality with stalls at floor quality.

    Playback time contributes the playback quality, stall time contributes the
    floor quality; the score is the time-weighted average over the session.
    """

    def __init__(self, model_id: str, source_citation: str, parameters: Mapping[str, float]):
        self.model_id = model_id
        self.source_citation = source_citation
        self.playback_quality = float(parameters["playback_quality"])
        self.stall_quality = float(parameters["stall_quality"])

    def score(self, inp: BaselineInput) -> float:
        t, d = inp.total_media_duration_s, inp.total_delay_s
        return (self.playback_quality * t + self.stall_quality * d) / (t + d)


class ExternalAdapter(BaselineModel):
    """Adapter slot for standardized models that need an external scorer.

    Stays registered (so comparison tables can render the row as unavailable)
    but refuses to score until a scorer callable is configured.
    """

    def __init__(self, model_id: str, source_citation: str,
                 parameters: Mapping[str, float] | None = None):
        self.model_id = model_id
        self.source_citation = source_citation
        self.scorer: Callable[[BaselineInput], float] | None = None

    @property
    def available(self) -> bool:  # type: ignore[override]
        return self.scorer is not None

    def configure(self, scorer: Callable[[BaselineInput], float]) -> None:
        self.scorer = scorer

    def score(self, inp: BaselineInput) -> float:
        if self.scorer is None:
            raise BaselineUnavailableError(
                f"baseline '{self.model_id}' has no external scorer configured")
        return self.scorer(inp)


_FAMILIES: dict[str, type[BaselineModel]] = {
    "log_zapping": KooijZapping,
    "exponential_stalling": HossfeldExponential,
    "linear_stalling": LinearStalling,
    "cumulative_average": CumulativeAverageQuality,
    "external_adapter": ExternalAdapter,
}


class BaselineRegistry:
    """Read-only (after construction) mapping of model id to baseline predictor."""

    def __init__(self, models: Iterable[BaselineModel] = ()):
        self._models: dict[str, BaselineModel] = {}
        for m in models:
            self.register(m)

    def register(self, model: BaselineModel) -> None:
        if model.model_id in self._models:
            raise ValueError(f"duplicate baseline id '{model.model_id}'")
        self._models[model.model_id] = model

    def get(self, model_id: str) -> BaselineModel:
        try:
            return self._models[model_id]
        except KeyError:
            raise UnknownModelError(model_id) from None

    def ids(self) -> tuple[str, ...]:
        return tuple(self._models)

    def available_ids(self) -> tuple[str, ...]:
        return tuple(mid for mid, m in self._models.items() if m.available)

    def configure_external(self, model_id: str,
                           scorer: Callable[[BaselineInput], float]) -> None:
        model = self.get(model_id)
        if not isinstance(model, ExternalAdapter):
            raise UnknownModelError(f"'{model_id}' is not an external adapter")
        model.configure(scorer)

    def __contains__(self, model_id: str) -> bool:
        return model_id in self._models


def default_params_path() -> Path:
    return Path(str(resources.files("swipeqoe").joinpath("data/baseline_params.json")))


def load_registry(path=None) -> BaselineRegistry:
    """Build the baseline registry from a parameter file (packaged default)."""
    path = Path(path) if path is not None else default_params_path()
    if not path.exists():
        raise FileNotFoundError(f"model parameter file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, path=str(path), line=e.lineno, column=e.colno) from e
    if doc.get("format") != PARAMS_FORMAT:
        raise ParseError(f"not a {PARAMS_FORMAT} document", path=str(path), line=1)
    registry = BaselineRegistry()
    for rec in doc["models"]:
        family = rec.get("family")
        if family not in _FAMILIES:
            raise ParseError(f"unknown model family '{family}'", path=str(path),
                             column=rec.get("model_id"))
        cls = _FAMILIES[family]
        registry.register(cls(rec["model_id"], rec.get("source_citation", ""),
                              rec.get("parameters", {})))
    return registry


def predict_baseline(model_id: str, inp: BaselineInput,
                     registry: BaselineRegistry | None = None) -> float:
    """Score one input with a registered baseline (native scale)."""
    registry = registry if registry is not None else load_registry()
    return registry.get(model_id).score(inp)


@dataclass(frozen=True)
class AlignmentFit:
    """First-order mapping from a model's native scale to the MOS scale."""

    slope: float
    intercept: float

    def apply(self, raw) -> np.ndarray:
        return self.slope * np.asarray(raw, dtype=float) + self.intercept


def align(predictions: Sequence[float], mos: Sequence[float]) -> tuple[AlignmentFit, np.ndarray]:
    """Least-squares fit mos ~ slope * raw + intercept; returns fit and aligned scores."""
    x = np.asarray(predictions, dtype=float)
    y = np.asarray(mos, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("predictions and mos must be equal-length 1-D with >= 2 entries")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise NonAlignableError("predictions have zero variance; alignment undefined")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    fit = AlignmentFit(slope=slope, intercept=intercept)
    return fit, fit.apply(x)


@dataclass(frozen=True)
class Prediction:
    """One scored stimulus; aligned_score is set only after alignment."""

    stimulus_id: str
    model_id: str
    raw_score: float
    aligned_score: float | None = None


def write_predictions(path, predictions: Sequence[Prediction]) -> None:
    lines = ["# swipeqoe-predictions v1", "stimulus_id,model_id,raw_score,aligned_score"]
    for p in predictions:
        aligned = "" if p.aligned_score is None else repr(p.aligned_score)
        lines.append(f"{p.stimulus_id},{p.model_id},{p.raw_score!r},{aligned}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_predictions(path) -> list[Prediction]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# swipeqoe-predictions"):
        raise ParseError("missing predictions header", path=str(path), line=1)
    out = []
    for i, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError("expected 4 fields", path=str(path), line=i)
        sid, mid, raw, aligned = parts
        out.append(Prediction(sid, mid, float(raw), float(aligned) if aligned else None))
    return out
