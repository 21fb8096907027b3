"""Crash-safe session persistence: one append-only JSONL event log per session.

Every state change is one appended line; reloading a store replays the logs,
so a restart reconstructs exactly the state that was acknowledged before it.
"""

from __future__ import annotations

import csv
import io
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..annotation import CUE_NAMES, Participant
from ..stimuli import CONDITIONS, Schedule, build_schedule, schedule_from_json, schedule_to_json

STATE_CREATED = "created"
STATE_RUNNING = "running"
STATE_COMPLETE = "complete"


class SessionError(ValueError):
    """Invalid session operation; `.kind` distinguishes protocol violations."""

    def __init__(self, message: str, kind: str = "invalid"):
        super().__init__(message)
        self.kind = kind  # "unknown" | "order" | "complete" | "invalid"


@dataclass
class TrialResponse:
    trial_id: str
    chosen_side: str
    correct: bool
    latency_ms: float
    timestamp: float


@dataclass
class Session:
    session_id: str
    participant: Participant
    schedule: Schedule
    responses: list[TrialResponse] = field(default_factory=list)
    state: str = STATE_CREATED

    @property
    def next_trial_id(self) -> str | None:
        if len(self.responses) >= len(self.schedule.trials):
            return None
        return self.schedule.trials[len(self.responses)].trial_id


class SessionStore:
    """Serves schedules and persists responses under one directory."""

    def __init__(self, root: str | Path, seed: int = 0):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.seed = seed
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._store_lock = threading.Lock()
        self._counter = 0
        self._replay()

    # -- persistence ------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.jsonl"

    def _append(self, session_id: str, event: dict) -> None:
        with self._log_path(session_id).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    def _replay(self) -> None:
        for path in sorted(self.root.glob("*.jsonl")):
            session = None
            with path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    event = json.loads(line)
                    if event["event"] == "created":
                        p = event["participant"]
                        session = Session(
                            session_id=event["session_id"],
                            participant=Participant(
                                p["participant_id"], p["age_days"], p["gender"], p["condition"]
                            ),
                            schedule=schedule_from_json(event["schedule"]),
                        )
                    elif event["event"] == "response" and session is not None:
                        session.responses.append(
                            TrialResponse(
                                trial_id=event["trial_id"],
                                chosen_side=event["chosen_side"],
                                correct=event["correct"],
                                latency_ms=event["latency_ms"],
                                timestamp=event["timestamp"],
                            )
                        )
                        session.state = STATE_RUNNING
                    elif event["event"] == "completed" and session is not None:
                        session.state = STATE_COMPLETE
            if session is not None:
                self._sessions[session.session_id] = session
                self._locks[session.session_id] = threading.Lock()
                counter = _counter_of(session.session_id)
                if counter is not None:
                    self._counter = max(self._counter, counter + 1)

    # -- operations ---------------------------------------------------------

    def create_session(
        self,
        participant_id: str,
        age_days: int,
        gender: str,
        condition: str | None = None,
        schedule_seed: int | None = None,
    ) -> Session:
        with self._store_lock:
            counter = self._counter
            self._counter += 1
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, counter]))
        )
        if condition is None:
            condition = CONDITIONS[int(rng.integers(0, 2))]
        elif condition not in CONDITIONS:
            raise SessionError(f"unknown condition {condition!r}")
        if schedule_seed is None:
            schedule_seed = int(rng.integers(0, 2**31 - 1))
        session_id = f"s{counter:06d}-{rng.integers(0, 16**8):08x}"
        participant = Participant(participant_id, age_days, gender, condition)
        schedule = build_schedule(condition, seed=schedule_seed)
        session = Session(session_id=session_id, participant=participant, schedule=schedule)
        with self._store_lock:
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()
        self._append(
            session_id,
            {
                "event": "created",
                "session_id": session_id,
                "participant": {
                    "participant_id": participant_id,
                    "age_days": age_days,
                    "gender": gender,
                    "condition": condition,
                },
                "schedule": schedule_to_json(schedule),
                "created_at": time.time(),
            },
        )
        return session

    def get_session(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise SessionError(f"unknown session {session_id!r}", kind="unknown")
        return session

    def get_schedule(self, session_id: str) -> Schedule:
        return self.get_session(session_id).schedule

    def post_response(
        self,
        session_id: str,
        trial_id: str,
        chosen_side: str,
        latency_ms: float,
        timestamp: float | None = None,
    ) -> TrialResponse:
        """Validate and persist one response; returns it with the verdict set.

        Responses must arrive in schedule order, one per trial; the verdict
        (correct / not) is computed here and never trusted from the client.
        """
        session = self.get_session(session_id)
        with self._locks[session_id]:
            if session.state == STATE_COMPLETE:
                raise SessionError(
                    f"session {session_id} is complete", kind="complete"
                )
            if chosen_side not in ("left", "right"):
                raise SessionError(f"chosen_side must be left or right, got {chosen_side!r}")
            if latency_ms < 0:
                raise SessionError(f"latency_ms must be >= 0, got {latency_ms}")
            expected = session.next_trial_id
            if trial_id != expected:
                raise SessionError(
                    f"expected response to trial {expected!r}, got {trial_id!r}",
                    kind="order",
                )
            trial = session.schedule.trials[len(session.responses)]
            response = TrialResponse(
                trial_id=trial_id,
                chosen_side=chosen_side,
                correct=(chosen_side == trial.greater_side),
                latency_ms=latency_ms,
                timestamp=time.time() if timestamp is None else timestamp,
            )
            self._append(
                session_id,
                {
                    "event": "response",
                    "trial_id": response.trial_id,
                    "chosen_side": response.chosen_side,
                    "correct": response.correct,
                    "latency_ms": response.latency_ms,
                    "timestamp": response.timestamp,
                },
            )
            session.responses.append(response)
            if len(session.responses) == len(session.schedule.trials):
                session.state = STATE_COMPLETE
                self._append(session_id, {"event": "completed"})
            else:
                session.state = STATE_RUNNING
        return response

    def export_session(self, session_id: str) -> str:
        """Annotation-compatible CSV: labels and cue cells left empty."""
        session = self.get_session(session_id)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["trial_id", "participant_id", "annotator_id", "label", "correct", "transcript"]
            + list(CUE_NAMES)
            + ["latency_ms"]
        )
        for response in session.responses:
            writer.writerow(
                [
                    response.trial_id,
                    session.participant.participant_id,
                    "",
                    "",
                    "1" if response.correct else "0",
                    "",
                ]
                + [""] * len(CUE_NAMES)
                + [format(response.latency_ms, "g")]
            )
        return buf.getvalue()

    def session_ids(self) -> list[str]:
        return sorted(self._sessions)


def _counter_of(session_id: str) -> int | None:
    head = session_id.split("-", 1)[0]
    if head.startswith("s") and head[1:].isdigit():
        return int(head[1:])
    return None
