"""Synthetic raters for end-to-end pipeline verification.

Conformant raters draw integer ACR scores from a maximum-entropy distribution
on {1..5} matched to a target mean (the stimulus's true MOS) and a target
variance from the SOS hypothesis, variance = a * (MOS-1) * (5-MOS).  Random
raters answer uniformly, constant raters always give the same score; both are
adversarial fodder for the screening step.

Each (rater, stimulus) pair derives its own random stream from the rater seed
and both ids, so parallel and serial generation agree byte for byte.

Feasibility note: on an integer lattice a given mean constrains the variance
to [f*(1-f), (mean-1)*(5-mean)] where f is the fractional part of the mean.
Near the top of the scale the SOS-hypothesis target can fall below the lattice
minimum (e.g. true MOS 4.52 at a = 0.132); the target is then clamped to the
nearest feasible value and a warning is logged.  The mean is always exact.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np
from scipy import optimize as _optimize

from .analysis import RatingEntry, RatingTable
from .exceptions import InfeasibleMomentsError

logger = logging.getLogger(__name__)
_warned_clamps: set[tuple[float, float]] = set()

_SCORES = np.arange(1.0, 6.0)
#: Margin kept away from the feasibility boundary when clamping.
_BOUNDARY_MARGIN = 1e-9
#: Required moment accuracy for the distribution solver.
_MOMENT_TOL = 1e-9


@dataclass(frozen=True)
class RaterProfile:
    rater_id: str
    reliability: Literal["conformant", "random", "constant"]
    seed: int
    constant_score: int = 3

    def __post_init__(self):
        if self.reliability not in ("conformant", "random", "constant"):
            raise ValueError(f"unknown reliability {self.reliability!r}")
        if not 1 <= self.constant_score <= 5:
            raise ValueError("constant_score must be in 1..5")


def variance_bounds(mean: float) -> tuple[float, float]:
    """Feasible variance range for a distribution on {1..5} with the given mean."""
    if not 1.0 <= mean <= 5.0:
        raise ValueError("mean must lie in [1, 5]")
    frac = mean - math.floor(mean)
    vmin = frac * (1.0 - frac)
    vmax = (mean - 1.0) * (5.0 - mean)
    return vmin, vmax


def score_distribution(mean: float, variance: float) -> np.ndarray:
    """Maximum-entropy pmf on {1..5} with the exact requested moments.

    Solves the two-parameter exponential family p_k proportional to
    exp(t1*k + t2*k^2) for dual variables matching the mean and variance to
    within 1e-9.  Raises InfeasibleMomentsError when no distribution on the
    lattice has the requested pair.
    """
    if not 1.0 <= mean <= 5.0:
        raise InfeasibleMomentsError(f"mean {mean} outside [1, 5]")
    if variance < 0:
        raise InfeasibleMomentsError("variance must be >= 0")
    if mean in (1.0, 5.0):
        if variance > _MOMENT_TOL:
            raise InfeasibleMomentsError(
                f"variance {variance} exceeds the maximum 0 for mean {mean}")
        p = np.zeros(5)
        p[int(mean) - 1] = 1.0
        return p
    vmin, vmax = variance_bounds(mean)
    if variance > vmax + _MOMENT_TOL:
        raise InfeasibleMomentsError(
            f"variance {variance} exceeds the maximum {vmax} for mean {mean}")
    if variance < vmin - _MOMENT_TOL:
        raise InfeasibleMomentsError(
            f"variance {variance} is below the lattice minimum {vmin} for mean {mean}")
    variance = min(max(variance, vmin), vmax)

    lo = math.floor(mean)
    if vmax - vmin < 1e-7:
        # Essentially pinned to the two adjacent scores.
        frac = mean - lo
        p = np.zeros(5)
        p[lo - 1] = 1.0 - frac
        p[lo] = frac
        return p

    m2_target = variance + mean * mean

    def pmf(theta):
        logits = theta[0] * _SCORES + theta[1] * _SCORES ** 2
        logits -= logits.max()
        w = np.exp(logits)
        return w / w.sum()

    def residual(theta):
        p = pmf(theta)
        m1 = float(p @ _SCORES)
        m2 = float(p @ _SCORES ** 2)
        return [m1 - mean, m2 - m2_target]

    sol = _optimize.root(residual, x0=[0.0, 0.0], method="hybr", tol=1e-13)
    res = residual(sol.x)
    if max(abs(res[0]), abs(res[1])) > _MOMENT_TOL:
        # hybr occasionally stalls near the boundary; retry from a spread of
        # curvature-biased starts before giving up.
        for t2 in (-4.0, -1.0, 1.0, 4.0, 8.0):
            sol = _optimize.root(residual, x0=[-t2 * mean, t2], method="hybr", tol=1e-13)
            res = residual(sol.x)
            if max(abs(res[0]), abs(res[1])) <= _MOMENT_TOL:
                break
        else:
            raise InfeasibleMomentsError(
                f"moment solve failed for mean {mean}, variance {variance} "
                f"(residual {res})")
    return pmf(sol.x)


def conformant_distribution(true_mos: float, a: float) -> np.ndarray:
    """Score pmf for a conformant rater under the SOS hypothesis.

    Targets variance a*(MOS-1)*(5-MOS); infeasible targets are clamped to the
    nearest feasible variance (with a warning) so near-extreme stimuli stay
    generable.
    """
    if not 0.0 <= a <= 1.0:
        raise ValueError("SOS parameter a must be in [0, 1]")
    if not 1.0 <= true_mos <= 5.0:
        raise ValueError("true MOS must be in [1, 5]")
    if true_mos in (1.0, 5.0):
        return score_distribution(true_mos, 0.0)
    target = a * (true_mos - 1.0) * (5.0 - true_mos)
    vmin, vmax = variance_bounds(true_mos)
    clamped = min(max(target, vmin + _BOUNDARY_MARGIN), vmax - _BOUNDARY_MARGIN)
    if clamped != target:
        key = (round(true_mos, 6), round(target, 6))
        if key not in _warned_clamps:
            _warned_clamps.add(key)
            logger.warning("infeasible variance %.6f for MOS %.4f; clamped to %.6f",
                           target, true_mos, clamped)
    return score_distribution(true_mos, clamped)


def _pair_rng(seed: int, rater_id: str, stimulus_id: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}|{rater_id}|{stimulus_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "big"))


def simulate_ratings(true_mos: Mapping[str, float], a: float,
                     profiles: Sequence[RaterProfile]) -> RatingTable:
    """Generate a full rating table: every profile rates every stimulus.

    Timestamps are synthetic row indices so fixed seeds reproduce the table
    byte for byte.
    """
    pmfs = {sid: conformant_distribution(m, a) for sid, m in true_mos.items()}
    entries = []
    idx = 0
    for profile in profiles:
        for sid in true_mos:
            rng = _pair_rng(profile.seed, profile.rater_id, sid)
            if profile.reliability == "conformant":
                score = int(rng.choice(5, p=pmfs[sid])) + 1
            elif profile.reliability == "random":
                score = int(rng.integers(1, 6))
            else:
                score = profile.constant_score
            entries.append(RatingEntry(profile.rater_id, sid, score, str(idx)))
            idx += 1
    return RatingTable(entries)


def make_panel(n_conformant: int, n_random: int = 0, n_constant: int = 0,
               base_seed: int = 0) -> list[RaterProfile]:
    """Standard panel layout used by the pipeline tests and the CLI."""
    profiles = []
    for i in range(n_conformant):
        profiles.append(RaterProfile(f"c{i:02d}", "conformant", base_seed * 100003 + i))
    for i in range(n_random):
        profiles.append(RaterProfile(f"r{i:02d}", "random", base_seed * 100003 + 1000 + i))
    for i in range(n_constant):
        profiles.append(RaterProfile(f"k{i:02d}", "constant", base_seed * 100003 + 2000 + i))
    return profiles
