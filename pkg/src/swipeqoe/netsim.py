"""Event-driven playback/preload simulator producing realized swipe delays.

Model: videos are fully downloaded before playback, downloads proceed
strictly in queue order at the trace's instantaneous bandwidth, and a preload
window of ``queue_depth`` videos ahead of the one being watched gates when a
download may begin.  The user swipes after the scripted viewing duration; if
the next video is not ready, the remaining download time is the realized
swipe delay.  The wait for the very first video is reported separately as the
initial delay (sessions carry inter-video delays only).

Time is simulated in integer microseconds so event logs are bit-stable.
Partial downloads are never discarded: an early swipe resumes the pending
transfer rather than restarting it.

Note on monotonicity: a pointwise-higher bandwidth trace or a deeper preload
queue makes every simulated event happen weakly earlier, but an individual
realized delay can grow in pathological traces (finishing earlier moves the
swipe earlier, which can strand the next download in front of a bandwidth
cliff).  Under constant-rate traces the per-delay monotonicity does hold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .design import Session, Video
from .exceptions import NonTerminatingSessionError, ParseError
from .models import ModelCoefficients, predict_proposed

US = 10 ** 6
TRACE_HEADER = "# swipeqoe-trace v1"
TRACE_COLUMNS = "time_s,bandwidth_kbps"


@dataclass(frozen=True)
class BandwidthTrace:
    """Piecewise-constant bandwidth samples; the last level holds forever."""

    samples: tuple[tuple[float, float], ...]

    def __post_init__(self):
        samples = tuple((float(t), float(bw)) for t, bw in self.samples)
        object.__setattr__(self, "samples", samples)
        if not samples:
            raise ValueError("trace needs at least one sample")
        if samples[0][0] != 0:
            raise ValueError("trace must start at time 0")
        times = [t for t, _ in samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trace times must be strictly increasing")
        if any(bw < 0 for _, bw in samples):
            raise ValueError("bandwidth must be >= 0")

    @classmethod
    def constant(cls, kbps: float) -> "BandwidthTrace":
        return cls(((0.0, kbps),))

    def segments_us(self) -> list[tuple[int, float]]:
        return [(int(round(t * US)), bw) for t, bw in self.samples]

    def end_us(self) -> int:
        return int(round(self.samples[-1][0] * US))

    def write(self, path) -> None:
        lines = [TRACE_HEADER, TRACE_COLUMNS]
        lines += [f"{t!r},{bw!r}" for t, bw in self.samples]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path) -> "BandwidthTrace":
        path = Path(path)
        lines = path.read_text().splitlines()
        if not lines or not lines[0].startswith("# swipeqoe-trace"):
            raise ParseError("missing trace header", path=str(path), line=1)
        samples = []
        for i, line in enumerate(lines[2:], start=3):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"expected 2 fields, got {len(parts)}",
                                 path=str(path), line=i)
            try:
                samples.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise ParseError("non-numeric sample", path=str(path), line=i) from None
        return cls(tuple(samples))


@dataclass(frozen=True)
class PreloadPolicy:
    """Fixed preload window: how many videos ahead of the current one may download."""

    queue_depth: int = 1

    def __post_init__(self):
        if self.queue_depth < 0:
            raise ValueError("queue_depth must be >= 0")


@dataclass(frozen=True)
class SwipeScript:
    """Intended viewing duration per video, in seconds."""

    durations_s: tuple[float, ...]

    def __post_init__(self):
        durations = tuple(float(d) for d in self.durations_s)
        object.__setattr__(self, "durations_s", durations)
        if not durations or any(d <= 0 for d in durations):
            raise ValueError("viewing durations must be > 0")


@dataclass(frozen=True)
class SimEvent:
    t_us: int
    event: str
    video_id: str | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"t_us": self.t_us, "event": self.event,
                "video_id": self.video_id, "detail": self.detail}


@dataclass(frozen=True)
class SimulationResult:
    session: Session
    initial_delay_s: Fraction
    events: tuple[SimEvent, ...]
    trace_extended: bool


def write_event_log(path, events: Sequence[SimEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")


def read_event_log(path) -> list[SimEvent]:
    events = []
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(e.msg, path=str(path), line=i, column=e.colno) from e
        events.append(SimEvent(int(d["t_us"]), str(d["event"]),
                               d.get("video_id"), d.get("detail") or {}))
    return events


class _Downloader:
    """Walks the trace integrating bandwidth over time for sequential downloads."""

    def __init__(self, trace: BandwidthTrace, cap_us: int):
        self.segments = trace.segments_us()
        # A single-sample trace is constant forever by definition; only
        # multi-sample traces can run short and get extended.
        self.trace_end_us = trace.end_us() if len(self.segments) > 1 else None
        self.cap_us = cap_us
        self.extended = False

    def finish_time(self, start_us: int, kbits: float) -> int:
        """Earliest integer microsecond by which ``kbits`` arrive from ``start_us``."""
        if kbits <= 0:
            return start_us
        remaining = float(kbits)
        t = start_us
        idx = 0
        for idx in range(len(self.segments) - 1, -1, -1):
            if self.segments[idx][0] <= t:
                break
        while True:
            seg_start, bw = self.segments[idx]
            seg_end = self.segments[idx + 1][0] if idx + 1 < len(self.segments) else None
            if bw > 0:
                if seg_end is not None:
                    capacity = bw * (seg_end - t) / US
                    if capacity < remaining:
                        remaining -= capacity
                        t = seg_end
                        idx += 1
                        continue
                finish = t + math.ceil(remaining / bw * US)
                if self.trace_end_us is not None and finish > self.trace_end_us:
                    self.extended = True
                if finish > self.cap_us:
                    raise NonTerminatingSessionError(
                        f"download not finished by the wall-clock cap "
                        f"({self.cap_us / US:.0f} s)")
                return finish
            if seg_end is None:
                raise NonTerminatingSessionError(
                    "bandwidth is zero for the rest of the trace with bytes pending")
            t = max(t, seg_end)
            idx += 1


def simulate_session(videos: Sequence[Video], trace: BandwidthTrace,
                     policy: PreloadPolicy, script: SwipeScript,
                     max_time_s: float = 7 * 86400) -> SimulationResult:
    """Simulate one viewing session and return it with realized swipe delays.

    ``script`` must provide one viewing duration per video.  Video sizes are
    bitrate times duration.  The event log records downloads, swipes, stalls,
    and playback with microsecond timestamps.
    """
    videos = tuple(videos)
    if not videos:
        raise ValueError("need at least one video")
    if len(script.durations_s) != len(videos):
        raise ValueError(f"script has {len(script.durations_s)} durations for "
                         f"{len(videos)} videos")
    n = len(videos)
    k = policy.queue_depth
    cap_us = int(round(max_time_s * US))
    dl = _Downloader(trace, cap_us)
    sizes = [v.size_kbits for v in videos]
    tau_us = [int(round(d * US)) for d in script.durations_s]

    events: list[SimEvent] = [SimEvent(0, "session_start")]
    arrive = [0] * n
    complete = [0] * n
    delays_us = [0] * n
    next_download = 0
    prev_finish = 0

    def ensure_downloaded(i: int) -> None:
        nonlocal next_download, prev_finish
        while next_download <= i:
            m = next_download
            gate = arrive[max(0, m - k)]
            start = max(prev_finish, gate)
            finish = dl.finish_time(start, sizes[m])
            events.append(SimEvent(start, "download_start", videos[m].video_id,
                                   {"size_kbits": sizes[m]}))
            events.append(SimEvent(finish, "download_finish", videos[m].video_id))
            complete[m] = finish
            prev_finish = finish
            next_download += 1

    initial_delay_us = 0
    t_end = 0
    for i in range(n):
        events.append(SimEvent(arrive[i], "swipe", videos[i].video_id,
                               {"position": i}))
        ensure_downloaded(i)
        play_start = max(arrive[i], complete[i])
        wait = play_start - arrive[i]
        if i == 0:
            initial_delay_us = wait
        else:
            delays_us[i - 1] = wait
        if wait > 0:
            events.append(SimEvent(arrive[i], "stall_start", videos[i].video_id))
            events.append(SimEvent(play_start, "stall_end", videos[i].video_id,
                                   {"stall_us": wait}))
        events.append(SimEvent(play_start, "playback_start", videos[i].video_id,
                               {"delay_us": wait}))
        t_end = play_start + tau_us[i]
        if t_end > cap_us:
            raise NonTerminatingSessionError(
                f"session not finished by the wall-clock cap ({max_time_s:.0f} s)")
        events.append(SimEvent(t_end, "playback_end", videos[i].video_id))
        if i + 1 < n:
            arrive[i + 1] = t_end
    events.append(SimEvent(t_end, "session_end"))
    if dl.extended:
        events.append(SimEvent(trace.end_us(), "trace_extended", None,
                               {"held_kbps": trace.samples[-1][1]}))

    events_sorted = tuple(sorted(events, key=lambda e: e.t_us))
    session = Session(
        videos,
        tuple(Fraction(t, US) for t in tau_us),
        tuple(Fraction(d, US) for d in delays_us),
    )
    return SimulationResult(
        session=session,
        initial_delay_s=Fraction(initial_delay_us, US),
        events=events_sorted,
        trace_extended=dl.extended,
    )


def score_session(session: Session, coeffs: ModelCoefficients) -> float:
    """Score a simulated session with the recency-weighted delay model."""
    return predict_proposed(session, coeffs)
