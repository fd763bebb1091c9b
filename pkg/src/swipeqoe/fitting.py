"""Coefficient estimation and the split-repeat evaluation protocol.

The model is nonlinear only in the recency exponent: for a fixed exponent the
score is linear in (alpha, beta, gamma) with features
[1, sum_i d_i * exp(lam * t_i / T), N_d].  Fitting therefore sweeps a grid of
exponents, solves a 3x3 ordinary least squares problem in closed form at each,
and refines the best grid point with a golden-section search.

The evaluation protocol repeats a seeded 80/20 shuffle split, fits on train,
scores every registered model on test, aligns baseline outputs to the MOS
scale with a first-order regression, and reports RMSE/PCC/SROCC per repeat
plus their means.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .analysis import pcc, rmse, srocc
from .design import Session
from .exceptions import NonAlignableError, UnidentifiableFitError
from .models import (
    MODEL_PROPOSED,
    AlignmentFit,
    BaselineInput,
    BaselineRegistry,
    ModelCoefficients,
    align,
    delay_feature_arrays,
    predict_proposed_batch,
)

REPORT_FORMAT = "swipeqoe-evaluation-report"

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class FitConfig:
    """Knobs for fitting and for the split-repeat protocol."""

    lambda_grid: tuple[float, float, float] = (-1.0, 5.0, 0.01)
    refine_tolerance: float = 1e-6
    seed: int = 0
    train_fraction: float = 0.8
    repeats: int = 10
    align_on: str = "test"

    def __post_init__(self):
        lo, hi, step = self.lambda_grid
        if not lo < hi:
            raise ValueError("lambda grid needs min < max")
        if step <= 0:
            raise ValueError("lambda grid step must be > 0")
        if self.refine_tolerance <= 0:
            raise ValueError("refine_tolerance must be > 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.align_on not in ("test", "train"):
            raise ValueError("align_on must be 'test' or 'train'")

    def grid_points(self) -> np.ndarray:
        lo, hi, step = self.lambda_grid
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(n)


def _solve_linear(delays: np.ndarray, ratios: np.ndarray, counts: np.ndarray,
                  y: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """OLS for (alpha, beta, gamma) at a fixed exponent; returns (theta, mse).

    Solved via the 3x3 normal equations; a condition number above 1e12 marks
    the design as unidentifiable (e.g. no delay variation in the data).
    """
    s = (delays * np.exp(lam * ratios)).sum(axis=1)
    X = np.column_stack([np.ones_like(s), s, counts])
    G = X.T @ X
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise UnidentifiableFitError(
            f"degenerate delay features (normal-matrix condition {cond:.3g})")
    theta = np.linalg.solve(G, X.T @ y)
    resid = y - X @ theta
    return theta, float(resid @ resid) / len(y)


def _unpack(stimuli) -> tuple[list[Session], np.ndarray]:
    sessions = [s for s, _ in stimuli]
    y = np.array([float(m) for _, m in stimuli], dtype=float)
    return sessions, y


@dataclass(frozen=True)
class FitResult:
    coefficients: ModelCoefficients
    mse: float


def fit_arrays(delays: np.ndarray, ratios: np.ndarray, counts: np.ndarray,
               y: np.ndarray, config: FitConfig) -> FitResult:
    """Grid sweep over the recency exponent plus golden-section refinement."""
    if len(y) < 4:
        raise UnidentifiableFitError("need at least 4 stimuli for 4 free parameters")

    best_lam = None
    best_theta = None
    best_mse = math.inf

    def consider(lam: float):
        nonlocal best_lam, best_theta, best_mse
        theta, mse = _solve_linear(delays, ratios, counts, y, lam)
        if mse < best_mse:
            best_lam, best_theta, best_mse = lam, theta, mse
        return mse

    grid = config.grid_points()
    for lam in grid:
        consider(float(lam))

    step = config.lambda_grid[2]
    a, b = best_lam - step, best_lam + step
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = consider(c), consider(d)
    while b - a > config.refine_tolerance:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = consider(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = consider(d)

    alpha, beta, gamma = best_theta
    return FitResult(
        coefficients=ModelCoefficients(alpha=float(alpha), beta=float(beta),
                                       lam=float(best_lam), gamma=float(gamma)),
        mse=best_mse,
    )


def fit_proposed(stimuli: Sequence[tuple[Session, float]],
                 config: FitConfig | None = None) -> ModelCoefficients:
    """Fit (alpha, beta, lambda, gamma) by MSE minimization over rated sessions.

    Deterministic for fixed inputs; stimulus order does not matter.
    """
    config = config or FitConfig()
    sessions, y = _unpack(stimuli)
    delays, ratios, counts = delay_feature_arrays(sessions)
    return fit_arrays(delays, ratios, counts, y, config).coefficients


class SwipeDelayQoEModel(RegressorMixin, BaseEstimator):
    """Estimator-style wrapper around the recency-weighted delay model.

    ``fit`` takes a sequence of Session objects and their MOS targets;
    ``predict`` scores sessions on the MOS scale.  Composes with scikit-learn
    tooling (``get_params`` / ``set_params`` / ``clone``).

    Parameters
    ----------
    lambda_grid : (min, max, step) sweep range for the recency exponent.
    refine_tolerance : final bracket width of the golden-section refinement.
    clamp : saturate predictions at [1, 5] for reporting.
    coefficients : optional fixed coefficients; lets the estimator predict
        without fitting (fitting overrides them).
    """

    def __init__(self, lambda_grid=(-1.0, 5.0, 0.01), refine_tolerance=1e-6,
                 clamp=False, coefficients: ModelCoefficients | None = None):
        self.lambda_grid = lambda_grid
        self.refine_tolerance = refine_tolerance
        self.clamp = clamp
        self.coefficients = coefficients

    def _check_sessions(self, X) -> list[Session]:
        sessions = list(X)
        if not sessions:
            raise ValueError("X must contain at least one session")
        for i, s in enumerate(sessions):
            if not isinstance(s, Session):
                raise TypeError(f"X[{i}] is not a Session (got {type(s).__name__})")
        return sessions

    def fit(self, X, y):
        sessions = self._check_sessions(X)
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != len(sessions):
            raise ValueError(f"X and y lengths differ: {len(sessions)} vs {len(y)}")
        config = FitConfig(lambda_grid=tuple(self.lambda_grid),
                           refine_tolerance=self.refine_tolerance)
        delays, ratios, counts = delay_feature_arrays(sessions)
        result = fit_arrays(delays, ratios, counts, y, config)
        self.coefficients_ = result.coefficients
        self.mse_ = result.mse
        return self

    def _coeffs(self) -> ModelCoefficients:
        fitted = getattr(self, "coefficients_", None)
        if fitted is not None:
            return fitted
        if self.coefficients is not None:
            return self.coefficients
        raise RuntimeError("model is not fitted and no fixed coefficients were given")

    def predict(self, X) -> np.ndarray:
        sessions = self._check_sessions(X)
        return predict_proposed_batch(sessions, self._coeffs(), clamp=self.clamp)


@dataclass(frozen=True)
class SplitRecord:
    """One (model, repeat, partition) evaluation row."""

    model_id: str
    split_id: int
    partition: str
    status: str = "ok"
    slope: float | None = None
    intercept: float | None = None
    rmse: float | None = None
    pcc: float | None = None
    srocc: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model_id, "split": self.split_id, "partition": self.partition,
            "status": self.status, "slope": self.slope, "intercept": self.intercept,
            "rmse": self.rmse, "pcc": self.pcc, "srocc": self.srocc, "error": self.error,
        }


@dataclass(frozen=True)
class AggregateRecord:
    model_id: str
    partition: str
    n_splits: int
    slope: float | None
    intercept: float | None
    rmse: float | None
    pcc: float | None
    srocc: float | None

    def to_dict(self) -> dict:
        return {
            "model": self.model_id, "partition": self.partition, "n_splits": self.n_splits,
            "slope": self.slope, "intercept": self.intercept,
            "rmse": self.rmse, "pcc": self.pcc, "srocc": self.srocc,
        }


@dataclass(frozen=True)
class EvaluationReport:
    """Per-repeat rows, their means, and the best split's fitted coefficients."""

    records: tuple[SplitRecord, ...]
    aggregates: tuple[AggregateRecord, ...]
    best_split_id: int | None
    best_coefficients: ModelCoefficients | None
    config: dict

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": 1,
            "config": self.config,
            "records": [r.to_dict() for r in self.records],
            "aggregates": [a.to_dict() for a in self.aggregates],
            "best_split": self.best_split_id,
            "coefficients": None if self.best_coefficients is None
            else self.best_coefficients.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())

    def aggregate_for(self, model_id: str, partition: str = "test") -> AggregateRecord:
        for a in self.aggregates:
            if a.model_id == model_id and a.partition == partition:
                return a
        raise KeyError((model_id, partition))


def _mean_or_none(values: list[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _split_indices(n: int, seed: int, split_id: int,
                   train_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([seed, split_id])
    perm = rng.permutation(n)
    n_train = int(train_fraction * n)
    n_train = max(1, min(n - 2, n_train))
    return perm[:n_train], perm[n_train:]


def evaluate_protocol(dataset: Sequence[tuple[Session, float]],
                      registry: BaselineRegistry,
                      config: FitConfig | None = None) -> EvaluationReport:
    """Run the repeated random-split evaluation over all registered models.

    Each repeat: seeded shuffle split, fit the recency model on train, score
    every model on test, align baseline outputs to the MOS scale, and compute
    RMSE/PCC/SROCC.  A repeat that fails (degenerate fit or alignment) is
    recorded with its error, never silently dropped.  The best repeat (highest
    test PCC, ties by lower RMSE then lower split id) contributes the reported
    coefficients.
    """
    config = config or FitConfig()
    if not dataset:
        raise ValueError("dataset must be nonempty")
    sessions, y = _unpack(dataset)
    n = len(sessions)
    baseline_inputs = [BaselineInput.from_session(s) for s in sessions]

    records: list[SplitRecord] = []
    best: tuple[float, float, int] | None = None  # (-pcc, rmse, split_id)
    best_coeffs: ModelCoefficients | None = None
    best_split: int | None = None

    for split_id in range(config.repeats):
        train_idx, test_idx = _split_indices(n, config.seed, split_id,
                                             config.train_fraction)
        train = [(sessions[i], y[i]) for i in train_idx]
        y_test = y[test_idx]
        y_train = y[train_idx]

        try:
            coeffs = fit_proposed(train, config)
        except UnidentifiableFitError as e:
            records.append(SplitRecord(MODEL_PROPOSED, split_id, "test",
                                       status="failed", error=str(e)))
            coeffs = None

        if coeffs is not None:
            for partition, idx, target in (("train", train_idx, y_train),
                                           ("test", test_idx, y_test)):
                pred = predict_proposed_batch([sessions[i] for i in idx], coeffs)
                records.append(SplitRecord(
                    MODEL_PROPOSED, split_id, partition,
                    rmse=rmse(pred, target), pcc=pcc(pred, target),
                    srocc=srocc(pred, target)))
            key = (-records[-1].pcc, records[-1].rmse, split_id)
            if best is None or key < best:
                best, best_coeffs, best_split = key, coeffs, split_id

        for model_id in registry.ids():
            model = registry.get(model_id)
            if not model.available:
                records.append(SplitRecord(model_id, split_id, "test",
                                           status="unavailable"))
                continue
            raw_test = np.array([model.score(baseline_inputs[i]) for i in test_idx])
            try:
                if config.align_on == "train":
                    raw_train = np.array([model.score(baseline_inputs[i])
                                          for i in train_idx])
                    fit, _ = align(raw_train, y_train)
                    aligned = fit.apply(raw_test)
                else:
                    fit, aligned = align(raw_test, y_test)
            except NonAlignableError as e:
                records.append(SplitRecord(model_id, split_id, "test",
                                           status="failed", error=str(e)))
                continue
            records.append(SplitRecord(
                model_id, split_id, "test",
                slope=fit.slope, intercept=fit.intercept,
                rmse=rmse(aligned, y_test), pcc=pcc(aligned, y_test),
                srocc=srocc(aligned, y_test)))

    aggregates = []
    seen = []
    for r in records:
        k = (r.model_id, r.partition)
        if k not in seen:
            seen.append(k)
    for model_id, partition in seen:
        rows = [r for r in records
                if r.model_id == model_id and r.partition == partition
                and r.status == "ok"]
        aggregates.append(AggregateRecord(
            model_id=model_id, partition=partition, n_splits=len(rows),
            slope=_mean_or_none([r.slope for r in rows]),
            intercept=_mean_or_none([r.intercept for r in rows]),
            rmse=_mean_or_none([r.rmse for r in rows]),
            pcc=_mean_or_none([r.pcc for r in rows]),
            srocc=_mean_or_none([r.srocc for r in rows]),
        ))

    return EvaluationReport(
        records=tuple(records),
        aggregates=tuple(aggregates),
        best_split_id=best_split,
        best_coefficients=best_coeffs,
        config={
            "seed": config.seed,
            "train_fraction": config.train_fraction,
            "repeats": config.repeats,
            "lambda_grid": list(config.lambda_grid),
            "refine_tolerance": config.refine_tolerance,
            "align_on": config.align_on,
            "n_stimuli": n,
        },
    )
