"""Subjective-data pipeline: rater screening, MOS statistics, SOS analysis,
and the RMSE/PCC/SROCC metric kernels.

Screening follows the post-experiment Pearson procedure: each rater's scores
are correlated against the panel MOS and raters below the discard threshold
are dropped, iterating to a fixpoint.  The reference MOS includes the rater
under test (the leave-one-out variant is not used; this choice is documented
here because either reading is defensible).

Confidence intervals use Student-t quantiles rather than the 1.96 normal
approximation since panels are small (around twenty raters).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as _stats

from .exceptions import (
    ParseError,
    UndefinedCorrelationError,
    UnfittableSosError,
)

RATINGS_HEADER = "# swipeqoe-ratings v1"
RATINGS_COLUMNS = "rater_id,stimulus_id,score,timestamp"
MOS_HEADER = "# swipeqoe-mos v1"
MOS_COLUMNS = "stimulus_id,mos,n,ci_halfwidth,sos"

#: Discard threshold for the Pearson screening step.
DEFAULT_SCREEN_THRESHOLD = 0.75

REASON_BELOW_THRESHOLD = "below_threshold"
REASON_ZERO_VARIANCE = "zero_score_variance"
REASON_DEGENERATE_REFERENCE = "degenerate_reference"


@dataclass(frozen=True)
class RatingEntry:
    rater_id: str
    stimulus_id: str
    score: int
    timestamp: str = ""

    def __post_init__(self):
        if not isinstance(self.score, int) or isinstance(self.score, bool):
            raise ValueError(f"score must be an integer, got {self.score!r}")
        if not 1 <= self.score <= 5:
            raise ValueError(f"score must be in 1..5, got {self.score}")


class RatingTable:
    """Immutable collection of per-rater, per-stimulus ACR scores."""

    def __init__(self, entries: Iterable[RatingEntry]):
        entries = tuple(entries)
        seen = set()
        for e in entries:
            key = (e.rater_id, e.stimulus_id)
            if key in seen:
                raise ValueError(f"duplicate rating for {key}")
            seen.add(key)
        self._entries = entries
        self._by_rater: dict[str, dict[str, int]] = {}
        self._by_stimulus: dict[str, dict[str, int]] = {}
        for e in entries:
            self._by_rater.setdefault(e.rater_id, {})[e.stimulus_id] = e.score
            self._by_stimulus.setdefault(e.stimulus_id, {})[e.rater_id] = e.score

    @property
    def entries(self) -> tuple[RatingEntry, ...]:
        return self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def rater_ids(self) -> tuple[str, ...]:
        return tuple(self._by_rater)

    def stimulus_ids(self) -> tuple[str, ...]:
        return tuple(self._by_stimulus)

    def scores_of(self, rater_id: str) -> dict[str, int]:
        return dict(self._by_rater[rater_id])

    def scores_for(self, stimulus_id: str) -> dict[str, int]:
        return dict(self._by_stimulus[stimulus_id])

    def restrict_to(self, rater_ids: Iterable[str]) -> "RatingTable":
        keep = set(rater_ids)
        return RatingTable(e for e in self._entries if e.rater_id in keep)

    def write(self, path) -> None:
        lines = [RATINGS_HEADER, RATINGS_COLUMNS]
        lines += [f"{e.rater_id},{e.stimulus_id},{e.score},{e.timestamp}"
                  for e in self._entries]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path) -> "RatingTable":
        path = Path(path)
        lines = path.read_text().splitlines()
        if not lines or not lines[0].startswith("# swipeqoe-ratings"):
            raise ParseError("missing ratings header", path=str(path), line=1)
        entries = []
        for i, line in enumerate(lines[2:], start=3):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}",
                                 path=str(path), line=i)
            rater, stim, score, ts = parts
            try:
                score_i = int(score)
            except ValueError:
                raise ParseError(f"score is not an integer: {score!r}",
                                 path=str(path), line=i, column="score") from None
            try:
                entries.append(RatingEntry(rater, stim, score_i, ts))
            except ValueError as e:
                raise ParseError(str(e), path=str(path), line=i, column="score") from None
        return cls(entries)


class RatingsAppender:
    """Append-only writer for the ratings file; fsyncs every row before ack.

    Used by the rating-collection service so an acknowledged rating survives a
    process restart.  Re-opening an existing file picks up already stored
    (rater, stimulus) pairs for duplicate detection.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.seen: set[tuple[str, str]] = set()
        new = not self.path.exists() or self.path.stat().st_size == 0
        if not new:
            for e in RatingTable.read(self.path).entries:
                self.seen.add((e.rater_id, e.stimulus_id))
        self._fh = open(self.path, "a", encoding="utf-8")
        if new:
            self._fh.write(RATINGS_HEADER + "\n" + RATINGS_COLUMNS + "\n")
            self._flush()

    def _flush(self):
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def append(self, entry: RatingEntry) -> None:
        key = (entry.rater_id, entry.stimulus_id)
        if key in self.seen:
            raise ValueError(f"duplicate rating for {key}")
        self._fh.write(f"{entry.rater_id},{entry.stimulus_id},{entry.score},{entry.timestamp}\n")
        self._flush()
        self.seen.add(key)

    def close(self):
        self._fh.close()


@dataclass(frozen=True)
class MosRecord:
    """Per-stimulus panel statistics.

    ``ci_halfwidth`` and ``sos`` are None when fewer than two raters scored
    the stimulus (the record is flagged rather than dropped).
    """

    stimulus_id: str
    mos: float
    n: int
    ci_halfwidth: float | None
    sos: float | None


@dataclass(frozen=True)
class SosFit:
    """SOS-hypothesis diversity parameter: SOS^2 = a * (MOS-1) * (5-MOS)."""

    a: float


@dataclass(frozen=True)
class ScreeningResult:
    kept: frozenset[str]
    removed: dict[str, str]
    rounds: int
    correlations: dict[str, float]

    def __iter__(self):
        # unpacks as (kept, removed-rater set)
        yield set(self.kept)
        yield set(self.removed)


def _panel_mos(table: RatingTable, raters: set[str]) -> dict[str, float]:
    mos = {}
    for stim in table.stimulus_ids():
        scores = [s for r, s in table.scores_for(stim).items() if r in raters]
        if scores:
            mos[stim] = float(np.mean(scores))
    return mos


def screen_raters(table: RatingTable,
                  threshold: float = DEFAULT_SCREEN_THRESHOLD,
                  max_rounds: int = 10) -> ScreeningResult:
    """Iteratively remove raters whose Pearson correlation with the panel MOS
    falls below ``threshold``.

    Each round recomputes the panel MOS over the currently kept raters and
    evaluates every kept rater on the stimuli they rated (at least two needed).
    Raters with constant scores correlate with nothing and are removed with a
    distinct reason code.  Stops at a fixpoint or after ``max_rounds``.
    """
    kept = set(table.rater_ids())
    removed: dict[str, str] = {}
    correlations: dict[str, float] = {}
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        mos = _panel_mos(table, kept)
        to_remove: dict[str, str] = {}
        for rater in sorted(kept):
            scores = table.scores_of(rater)
            common = [s for s in scores if s in mos]
            if len(common) < 2:
                to_remove[rater] = REASON_DEGENERATE_REFERENCE
                continue
            x = np.array([scores[s] for s in common], dtype=float)
            y = np.array([mos[s] for s in common], dtype=float)
            if np.ptp(x) == 0:
                to_remove[rater] = REASON_ZERO_VARIANCE
                continue
            if np.ptp(y) == 0:
                to_remove[rater] = REASON_DEGENERATE_REFERENCE
                continue
            r = pcc(x, y)
            correlations[rater] = r
            if r < threshold:
                to_remove[rater] = REASON_BELOW_THRESHOLD
        if not to_remove:
            break
        removed.update(to_remove)
        kept -= set(to_remove)
        if not kept:
            break
    return ScreeningResult(kept=frozenset(kept), removed=removed,
                           rounds=rounds, correlations=correlations)


def compute_mos(table: RatingTable) -> list[MosRecord]:
    """Panel MOS, sample SOS, and 95% t-based CI half-width per stimulus.

    Expects an already screened table.  Records are ordered by stimulus id for
    stable output.
    """
    records = []
    for stim in sorted(table.stimulus_ids()):
        scores = np.array(sorted(table.scores_for(stim).values()), dtype=float)
        n = len(scores)
        mos = float(scores.mean())
        if n < 2:
            records.append(MosRecord(stim, mos, n, None, None))
            continue
        sos = float(scores.std(ddof=1))
        t975 = float(_stats.t.ppf(0.975, n - 1))
        ci = t975 * sos / math.sqrt(n)
        records.append(MosRecord(stim, mos, n, ci, sos))
    return records


def fit_sos(records: Sequence[MosRecord]) -> SosFit:
    """Through-origin least squares of SOS^2 against (MOS-1)(5-MOS).

    Records at the scale extremes carry no information (the regressor is
    zero there) and are skipped, as are records without a defined SOS.
    """
    num = 0.0
    den = 0.0
    usable = 0
    for rec in records:
        if rec.sos is None:
            continue
        x = (rec.mos - 1.0) * (5.0 - rec.mos)
        if x <= 0:
            continue
        num += rec.sos ** 2 * x
        den += x * x
        usable += 1
    if usable == 0 or den == 0.0:
        raise UnfittableSosError("no usable records: all MOS values at scale extremes")
    return SosFit(a=num / den)


def rmse(x: Sequence[float], y: Sequence[float]) -> float:
    """Root mean squared error between two equal-length vectors."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 1:
        raise ValueError("inputs must be equal-length 1-D vectors")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def pcc(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("inputs must be equal-length 1-D vectors with >= 2 entries")
    ac = a - a.mean()
    bc = b - b.mean()
    denom = math.sqrt(float(ac @ ac) * float(bc @ bc))
    if denom == 0.0:
        raise UndefinedCorrelationError("zero variance input; correlation undefined")
    return float(ac @ bc) / denom


def fractional_ranks(x: Sequence[float]) -> np.ndarray:
    """Average ranks (1-based); tied values share the mean of their positions."""
    a = np.asarray(x, dtype=float)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(len(a), dtype=float)
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and a[order[j + 1]] == a[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def srocc(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank-order correlation: Pearson over fractional ranks."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("inputs must be equal-length 1-D vectors with >= 2 entries")
    return pcc(fractional_ranks(a), fractional_ranks(b))


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    pcc: float
    srocc: float

    def __post_init__(self):
        if self.rmse < 0:
            raise ValueError("rmse must be >= 0")


def metrics_report(predicted: Sequence[float], observed: Sequence[float]) -> MetricsReport:
    return MetricsReport(rmse=rmse(predicted, observed),
                         pcc=pcc(predicted, observed),
                         srocc=srocc(predicted, observed))


def _fmt(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def write_mos(path, records: Sequence[MosRecord]) -> None:
    lines = [MOS_HEADER, MOS_COLUMNS]
    lines += [f"{r.stimulus_id},{r.mos!r},{r.n},{_fmt(r.ci_halfwidth)},{_fmt(r.sos)}"
              for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mos(path) -> list[MosRecord]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# swipeqoe-mos"):
        raise ParseError("missing MOS header", path=str(path), line=1)
    records = []
    for i, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", path=str(path), line=i)
        sid, mos, n, ci, sos = parts
        try:
            records.append(MosRecord(sid, float(mos), int(n),
                                     float(ci) if ci else None,
                                     float(sos) if sos else None))
        except ValueError as e:
            raise ParseError(str(e), path=str(path), line=i) from None
    return records
