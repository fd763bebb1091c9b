"""Rating-collection service hosting the study endpoints.

Endpoints (JSON bodies, all responses carry a ``version`` field):

* ``GET /playlist``            mint a participant token and return their
                               playlist (training stimuli first, then the
                               test stimuli shuffled per participant)
* ``GET /playlist?participant=`` same order again for a known token
* ``GET /stimulus/{id}``       timing payload for one stimulus
* ``POST /rating``             submit one ACR score; appended durably to the
                               ratings file before the acknowledgement
* ``GET /progress?participant=`` rated/total counts

Persistence is the append-only delimited ratings file shared with the
analysis pipeline; duplicate (participant, stimulus) submissions are rejected
with a conflict status.  All writes funnel through one lock.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .analysis import RatingEntry, RatingsAppender
from .design import (
    DelayPattern,
    Design,
    build_session,
    read_design,
    session_to_dict,
)

SERVICE_VERSION = "swipeqoe-study/1"

#: Design cells used for the warm-up phase (spread of delay severities).
_TRAINING_CELLS = (
    (4, 0, DelayPattern.P0),
    (4, 4, DelayPattern.P7),
    (4, 8, DelayPattern.P2),
    (4, 16, DelayPattern.P1),
)


@dataclass(frozen=True)
class StudyConfig:
    """Configuration of one hosted study."""

    design_path: str
    ratings_path: str
    host: str = "127.0.0.1"
    port: int = 8321
    randomize_order: bool = True
    training_count: int = 4
    subset_index: int | None = None
    subset_count: int = 5
    seed: int = 0
    media_dir: str | None = None

    def __post_init__(self):
        if self.training_count < 0:
            raise ValueError("training_count must be >= 0")
        if self.subset_index is not None and not 0 <= self.subset_index < self.subset_count:
            raise ValueError("subset_index out of range")


class StudyService:
    """State and behaviour behind the HTTP handlers (testable directly)."""

    def __init__(self, config: StudyConfig, design: Design | None = None):
        self.config = config
        self.design = design if design is not None else read_design(config.design_path)
        self.sessions = self.design.session_by_id()
        self.training = {}
        for i in range(config.training_count):
            tau, total, pattern = _TRAINING_CELLS[i % len(_TRAINING_CELLS)]
            spec = build_session(tau, total, pattern)
            tid = f"train{i + 1}_{spec.stimulus_id}"
            self.training[tid] = spec.session
        self.test_ids = self._subset_ids()
        self.appender = RatingsAppender(config.ratings_path)
        self.write_lock = threading.Lock()
        self.participants: dict[str, list[str]] = {}

    def _subset_ids(self) -> list[str]:
        """Test stimulus ids, optionally one of ``subset_count`` seeded groups
        (a per-day subset; the partition is a seeded random equal split)."""
        ids = [s.stimulus_id for s in self.design.stimuli]
        if self.config.subset_index is None:
            return ids
        rng = np.random.default_rng([self.config.seed, 7])
        perm = [ids[i] for i in rng.permutation(len(ids))]
        groups = [perm[i::self.config.subset_count] for i in range(self.config.subset_count)]
        return sorted(groups[self.config.subset_index])

    def _order_for(self, participant_id: str) -> list[str]:
        if not self.config.randomize_order:
            return list(self.test_ids)
        digest = hashlib.sha256(f"{self.config.seed}|{participant_id}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:16], "big"))
        ids = list(self.test_ids)
        return [ids[i] for i in rng.permutation(len(ids))]

    def playlist(self, participant_id: str | None) -> dict:
        if participant_id is None:
            participant_id = secrets.token_hex(8)
        order = self.participants.get(participant_id)
        if order is None:
            order = self._order_for(participant_id)
            self.participants[participant_id] = order
        return {
            "version": SERVICE_VERSION,
            "participant_id": participant_id,
            "training": list(self.training),
            "stimuli": order,
            "total": len(order),
        }

    def stimulus_payload(self, stimulus_id: str) -> dict | None:
        session = self.sessions.get(stimulus_id) or self.training.get(stimulus_id)
        if session is None:
            return None
        doc = session_to_dict(session)
        return {
            "version": SERVICE_VERSION,
            "stimulus_id": stimulus_id,
            "videos": [
                {
                    "media": f"/media/{vid}.mp4",
                    "video_id": vid,
                    "viewing_duration_ms": dur,
                    "post_delay_ms": delay,
                }
                for vid, dur, delay in zip(doc["video_ids"], doc["durations_ms"],
                                           doc["delays_ms"])
            ],
        }

    def submit_rating(self, body: dict) -> tuple[int, dict]:
        """Validate and durably append one rating; returns (http_status, body)."""
        try:
            participant = str(body["participant_id"])
            stimulus_id = str(body["stimulus_id"])
            score = body["score"]
        except (KeyError, TypeError):
            return 400, {"version": SERVICE_VERSION, "error": "missing field",
                         "required": ["participant_id", "stimulus_id", "score"]}
        if stimulus_id not in self.sessions and stimulus_id not in self.training:
            return 400, {"version": SERVICE_VERSION, "error": "unknown stimulus",
                         "stimulus_id": stimulus_id}
        if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 5:
            return 400, {"version": SERVICE_VERSION, "error": "score must be an integer in 1..5",
                         "score": score}
        entry = RatingEntry(participant, stimulus_id, score,
                            time.strftime("%Y-%m-%dT%H:%M:%S"))
        with self.write_lock:
            if (participant, stimulus_id) in self.appender.seen:
                return 409, {"version": SERVICE_VERSION, "error": "duplicate rating",
                             "participant_id": participant, "stimulus_id": stimulus_id}
            self.appender.append(entry)
        return 200, {"version": SERVICE_VERSION, "status": "ok",
                     "participant_id": participant, "stimulus_id": stimulus_id}

    def progress(self, participant_id: str) -> dict:
        order = self.participants.get(participant_id, [])
        rated = sum(1 for sid in order if (participant_id, sid) in self.appender.seen)
        return {
            "version": SERVICE_VERSION,
            "participant_id": participant_id,
            "rated": rated,
            "total": len(order),
        }

    def close(self):
        self.appender.close()


class _Handler(BaseHTTPRequestHandler):
    service: StudyService  # set by make_server

    def _send(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def do_GET(self):
        url = urlparse(self.path)
        query = {k: v[0] for k, v in parse_qs(url.query).items()}
        if url.path == "/playlist":
            self._send(200, self.service.playlist(query.get("participant")))
        elif url.path.startswith("/stimulus/"):
            payload = self.service.stimulus_payload(url.path[len("/stimulus/"):])
            if payload is None:
                self._send(404, {"version": SERVICE_VERSION, "error": "unknown stimulus"})
            else:
                self._send(200, payload)
        elif url.path == "/progress":
            participant = query.get("participant")
            if not participant:
                self._send(400, {"version": SERVICE_VERSION,
                                 "error": "participant query parameter required"})
            else:
                self._send(200, self.service.progress(participant))
        elif url.path.startswith("/media/") and self.service.config.media_dir:
            self._send_media(url.path[len("/media/"):])
        else:
            self._send(404, {"version": SERVICE_VERSION, "error": "unknown endpoint"})

    def _send_media(self, name: str):
        base = Path(self.service.config.media_dir).resolve()
        target = (base / name).resolve()
        if not str(target).startswith(str(base)) or not target.is_file():
            self._send(404, {"version": SERVICE_VERSION, "error": "media not found"})
            return
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", "video/mp4")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/rating":
            self._send(404, {"version": SERVICE_VERSION, "error": "unknown endpoint"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self._send(400, {"version": SERVICE_VERSION, "error": "invalid JSON body"})
            return
        status, payload = self.service.submit_rating(body)
        self._send(status, payload)


def make_server(config: StudyConfig, design: Design | None = None) -> ThreadingHTTPServer:
    """Build the HTTP server (port 0 picks an ephemeral port, handy in tests)."""
    service = StudyService(config, design)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((config.host, config.port), handler)
    server.service = service  # type: ignore[attr-defined]
    return server


def serve(config: StudyConfig) -> None:
    server = make_server(config)
    host, port = server.server_address[:2]
    print(f"study service listening on http://{host}:{port} "
          f"(ratings -> {config.ratings_path})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.service.close()  # type: ignore[attr-defined]
        server.server_close()
