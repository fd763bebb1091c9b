"""Stimulus design: session types and the deterministic 132-stimulus generator.

Sessions are six short videos played back to back.  The first five share one
viewing duration tau, the sixth is watched for one second, and a swipe delay
may be injected after any of the first five videos.  Eight delay patterns
place a total delay budget D at the start or the end of the session with one
to four delay events; the no-delay case collapses to a single pattern P0.

Delays are stored as exact rationals so that the "delays sum to D" invariant
holds bit for bit even for thirds (D/3 is not representable in binary float).
Millisecond rounding happens only when a session is serialized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .exceptions import DesignError, InvalidSessionError, ParseError

DESIGN_FORMAT = "swipeqoe-design"
DESIGN_VERSION = 1

#: Viewing durations (seconds) of the first five videos, one per design cell.
VIEWING_DURATIONS_S = (2, 4, 8, 16)
#: Total swipe-delay budgets (seconds).
TOTAL_DELAYS_S = (0, 1, 4, 8, 16)
#: Videos per session; the last one is always watched for one second.
SESSION_LENGTH = 6
FINAL_VIEWING_S = 1


class DelayPattern(Enum):
    """Placement of delay events after videos 1..5.

    Odd patterns put the events at the start of the session, even patterns at
    the end; P0 is the no-delay case.  The budget is split equally across the
    pattern's positions.
    """

    P0 = ()
    P1 = (1,)
    P2 = (5,)
    P3 = (1, 2)
    P4 = (4, 5)
    P5 = (1, 2, 3)
    P6 = (3, 4, 5)
    P7 = (1, 2, 3, 4)
    P8 = (2, 3, 4, 5)

    @property
    def positions(self) -> tuple[int, ...]:
        """1-based indices of the videos followed by a delay event."""
        return self.value

    @property
    def delay_count(self) -> int:
        return len(self.value)


def _as_fraction(value, name: str = "value") -> Fraction:
    """Convert a numeric input to an exact Fraction (floats convert exactly)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise DesignError(f"{name} must be numeric, got bool")
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    raise DesignError(f"{name} must be numeric, got {type(value).__name__}")


@dataclass(frozen=True)
class Video:
    """Metadata of one short video; the toolkit never touches actual media."""

    video_id: str
    duration_s: float
    width: int
    height: int
    bitrate_kbps: float
    frame_rate_fps: float
    content_type: str

    def __post_init__(self):
        if self.duration_s <= 0:
            raise InvalidSessionError(f"video {self.video_id}: duration must be > 0")
        if self.bitrate_kbps <= 0:
            raise InvalidSessionError(f"video {self.video_id}: bitrate must be > 0")
        if self.frame_rate_fps <= 0:
            raise InvalidSessionError(f"video {self.video_id}: frame rate must be > 0")

    @property
    def size_kbits(self) -> float:
        return self.bitrate_kbps * self.duration_s

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "duration_s": self.duration_s,
            "width": self.width,
            "height": self.height,
            "bitrate_kbps": self.bitrate_kbps,
            "frame_rate_fps": self.frame_rate_fps,
            "content_type": self.content_type,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Video":
        return cls(
            video_id=str(d["video_id"]),
            duration_s=float(d["duration_s"]),
            width=int(d["width"]),
            height=int(d["height"]),
            bitrate_kbps=float(d["bitrate_kbps"]),
            frame_rate_fps=float(d["frame_rate_fps"]),
            content_type=str(d["content_type"]),
        )


#: Default six-video catalog used by the generated design.
DEFAULT_VIDEOS: tuple[Video, ...] = (
    Video("v1", 60, 720, 1080, 1154, 30, "food"),
    Video("v2", 35, 720, 1080, 1912, 30, "music"),
    Video("v3", 29, 720, 1080, 1086, 30, "baby"),
    Video("v4", 59, 720, 1080, 934, 30, "makeup"),
    Video("v5", 26, 720, 1080, 1802, 30, "school"),
    Video("v6", 23, 720, 1080, 773, 30, "driving"),
)


@dataclass(frozen=True)
class Session:
    """An ordered playback session with per-video viewing durations and delays.

    ``viewing_durations[i]`` is how long video ``i`` is watched before the
    swipe; ``delays[i]`` is the swipe delay experienced after it.  The delay
    after the last video is structurally zero.  All times are exact rationals
    in seconds.
    """

    videos: tuple[Video, ...]
    viewing_durations: tuple[Fraction, ...]
    delays: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "videos", tuple(self.videos))
        object.__setattr__(
            self, "viewing_durations",
            tuple(_as_fraction(t, "viewing duration") for t in self.viewing_durations))
        object.__setattr__(
            self, "delays",
            tuple(_as_fraction(d, "delay") for d in self.delays))
        n = len(self.videos)
        if n < 1:
            raise InvalidSessionError("session needs at least one video")
        if len(self.viewing_durations) != n or len(self.delays) != n:
            raise InvalidSessionError(
                f"videos/viewing_durations/delays lengths differ: "
                f"{n}/{len(self.viewing_durations)}/{len(self.delays)}")
        if any(t < 0 for t in self.viewing_durations):
            raise InvalidSessionError("viewing durations must be >= 0")
        if any(d < 0 for d in self.delays):
            raise InvalidSessionError("delays must be >= 0")
        if self.delays[-1] != 0:
            raise InvalidSessionError("the delay after the last video must be zero")
        if sum(self.viewing_durations) <= 0:
            raise InvalidSessionError("total media duration must be > 0")

    def __len__(self) -> int:
        return len(self.videos)

    @property
    def total_media_duration(self) -> Fraction:
        """Total viewing time across all videos (delay time excluded)."""
        return sum(self.viewing_durations, Fraction(0))

    @property
    def prefix_viewing_times(self) -> tuple[Fraction, ...]:
        """Cumulative viewing time through video i, for i = 1..N."""
        out = []
        acc = Fraction(0)
        for t in self.viewing_durations:
            acc += t
            out.append(acc)
        return tuple(out)

    @property
    def total_delay(self) -> Fraction:
        return sum(self.delays, Fraction(0))

    @property
    def delay_count(self) -> int:
        """Number of strictly positive delay events."""
        return sum(1 for d in self.delays if d > 0)

    @property
    def wall_duration(self) -> Fraction:
        """Viewing time plus delay time."""
        return self.total_media_duration + self.total_delay

    def scaled_viewing(self, factor) -> "Session":
        """Return a copy with every viewing duration multiplied by ``factor``."""
        c = _as_fraction(factor, "factor")
        if c <= 0:
            raise InvalidSessionError("scale factor must be > 0")
        return Session(self.videos, tuple(c * t for t in self.viewing_durations), self.delays)


def _ms_round_half_up(seconds: Fraction) -> int:
    """Round a nonnegative rational number of seconds to whole milliseconds."""
    n, d = seconds.numerator * 1000, seconds.denominator
    return (2 * n + d) // (2 * d)


def session_to_dict(session: Session) -> dict:
    return {
        "video_ids": [v.video_id for v in session.videos],
        "durations_ms": [_ms_round_half_up(t) for t in session.viewing_durations],
        "delays_ms": [_ms_round_half_up(d) for d in session.delays],
    }


def session_from_dict(d: Mapping, videos_by_id: Mapping[str, Video]) -> Session:
    vids = tuple(videos_by_id[v] for v in d["video_ids"])
    durations = tuple(Fraction(int(ms), 1000) for ms in d["durations_ms"])
    delays = tuple(Fraction(int(ms), 1000) for ms in d["delays_ms"])
    return Session(vids, durations, delays)


@dataclass(frozen=True)
class StimulusSpec:
    """One test stimulus: a design cell (tau, D, pattern) plus its session."""

    stimulus_id: str
    tau: Fraction
    total_delay: Fraction
    pattern: DelayPattern
    session: Session

    def __post_init__(self):
        s = self.session
        if len(s) != SESSION_LENGTH:
            raise DesignError(f"{self.stimulus_id}: stimulus sessions have exactly "
                              f"{SESSION_LENGTH} videos")
        if any(t != self.tau for t in s.viewing_durations[:-1]):
            raise DesignError(f"{self.stimulus_id}: first five viewing durations must equal tau")
        if s.viewing_durations[-1] != FINAL_VIEWING_S:
            raise DesignError(f"{self.stimulus_id}: last video is watched for "
                              f"{FINAL_VIEWING_S} s")
        if s.total_delay != self.total_delay:
            raise DesignError(f"{self.stimulus_id}: delays do not sum to the total budget")
        positions = {i + 1 for i, d in enumerate(s.delays) if d > 0}
        if positions != set(self.pattern.positions):
            raise DesignError(f"{self.stimulus_id}: delay positions do not match "
                              f"{self.pattern.name}")

    @property
    def wall_duration(self) -> Fraction:
        return self.session.wall_duration


def build_session(tau, total_delay, pattern: DelayPattern,
                  videos: Sequence[Video] = DEFAULT_VIDEOS) -> StimulusSpec:
    """Construct a single stimulus from a design cell.

    The delay budget is split equally across the pattern's positions (exact
    rational shares).  The no-delay budget requires pattern P0 and vice versa.
    """
    tau = _as_fraction(tau, "tau")
    total_delay = _as_fraction(total_delay, "total_delay")
    if tau <= 0:
        raise DesignError("tau must be > 0")
    if total_delay < 0:
        raise DesignError("total_delay must be >= 0")
    if total_delay == 0 and pattern is not DelayPattern.P0:
        raise DesignError(f"zero total delay requires pattern P0, got {pattern.name}")
    if total_delay > 0 and pattern is DelayPattern.P0:
        raise DesignError("pattern P0 requires a zero total delay")
    if len(videos) != SESSION_LENGTH:
        raise DesignError(f"stimulus sessions need exactly {SESSION_LENGTH} videos")

    delays = [Fraction(0)] * SESSION_LENGTH
    if pattern.delay_count:
        share = total_delay / pattern.delay_count
        for pos in pattern.positions:
            delays[pos - 1] = share
    durations = [tau] * (SESSION_LENGTH - 1) + [Fraction(FINAL_VIEWING_S)]
    session = Session(tuple(videos), tuple(durations), tuple(delays))
    stimulus_id = f"tau{tau}_D{total_delay}_{pattern.name}"
    return StimulusSpec(stimulus_id, tau, total_delay, pattern, session)


def generate_design(videos: Sequence[Video] = DEFAULT_VIDEOS) -> tuple[StimulusSpec, ...]:
    """Generate the full stimulus set: 128 delay stimuli plus 4 no-delay ones.

    Ordering is deterministic by (tau, total delay, pattern), so repeated runs
    serialize byte-identically.
    """
    out = []
    delay_patterns = [p for p in DelayPattern if p is not DelayPattern.P0]
    for tau in VIEWING_DURATIONS_S:
        for total in TOTAL_DELAYS_S:
            patterns = (DelayPattern.P0,) if total == 0 else delay_patterns
            for pattern in patterns:
                out.append(build_session(tau, total, pattern, videos))
    return tuple(out)


def design_to_document(stimuli: Iterable[StimulusSpec],
                       videos: Sequence[Video] = DEFAULT_VIDEOS) -> dict:
    """Build the serializable design document (the cross-module interchange)."""
    return {
        "format": DESIGN_FORMAT,
        "version": DESIGN_VERSION,
        "constants": {
            "viewing_durations_s": list(VIEWING_DURATIONS_S),
            "total_delays_s": list(TOTAL_DELAYS_S),
            "session_length": SESSION_LENGTH,
            "final_viewing_s": FINAL_VIEWING_S,
            "patterns": {p.name: list(p.positions) for p in DelayPattern},
        },
        "videos": [v.to_dict() for v in videos],
        "stimuli": [
            {
                "id": s.stimulus_id,
                "tau_s": _num(s.tau),
                "total_delay_s": _num(s.total_delay),
                "pattern": s.pattern.name,
                "durations_ms": session_to_dict(s.session)["durations_ms"],
                "delays_ms": session_to_dict(s.session)["delays_ms"],
            }
            for s in stimuli
        ],
    }


def _num(fr: Fraction):
    """Serialize a Fraction as int when exact, else float."""
    if fr.denominator == 1:
        return int(fr)
    return float(fr)


def dumps_design(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_design(path, stimuli: Iterable[StimulusSpec] | None = None,
                 videos: Sequence[Video] = DEFAULT_VIDEOS) -> None:
    if stimuli is None:
        stimuli = generate_design(videos)
    Path(path).write_text(dumps_design(design_to_document(stimuli, videos)))


@dataclass(frozen=True)
class DesignStimulus:
    """A stimulus row read back from a design document (millisecond precision)."""

    stimulus_id: str
    tau_s: float
    total_delay_s: float
    pattern: DelayPattern
    session: Session


@dataclass(frozen=True)
class Design:
    videos: tuple[Video, ...]
    stimuli: tuple[DesignStimulus, ...]

    def session_by_id(self) -> dict[str, Session]:
        return {s.stimulus_id: s.session for s in self.stimuli}


def read_design(path) -> Design:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, path=str(path), line=e.lineno, column=e.colno) from e
    if doc.get("format") != DESIGN_FORMAT:
        raise ParseError(f"not a {DESIGN_FORMAT} document", path=str(path), line=1)
    videos = tuple(Video.from_dict(v) for v in doc["videos"])
    stimuli = []
    for row in doc["stimuli"]:
        session = Session(
            videos,
            tuple(Fraction(int(ms), 1000) for ms in row["durations_ms"]),
            tuple(Fraction(int(ms), 1000) for ms in row["delays_ms"]),
        )
        stimuli.append(DesignStimulus(
            stimulus_id=str(row["id"]),
            tau_s=float(row["tau_s"]),
            total_delay_s=float(row["total_delay_s"]),
            pattern=DelayPattern[row["pattern"]],
            session=session,
        ))
    return Design(videos=videos, stimuli=tuple(stimuli))
