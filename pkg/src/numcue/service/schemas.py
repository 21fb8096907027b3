"""Request/response bodies for the session API.

The UI-facing schedule deliberately omits `greater_side` and
`area_congruent`: the browser must never hold answer information, and the
correctness verdict always comes back from the server.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..stimuli import Schedule, TrialSpec


class ParticipantIn(BaseModel):
    participant_id: str = Field(min_length=1)
    age_days: int = Field(gt=0)
    gender: str


class CreateSessionRequest(BaseModel):
    participant: ParticipantIn
    condition: str | None = None  # omitted -> randomly assigned server-side
    schedule_seed: int | None = None


class SessionOut(BaseModel):
    session_id: str
    participant_id: str
    condition: str
    state: str
    n_trials: int
    n_responses: int


class DotOut(BaseModel):
    x: float
    y: float
    radius: float


class DotArrayOut(BaseModel):
    dots: list[DotOut]
    canvas_width: float
    canvas_height: float


class PairOut(BaseModel):
    left_count: int
    right_count: int
    nominal_ratio: float
    computed_ratio: float


class UiTrialOut(BaseModel):
    trial_id: str
    pair: PairOut
    left_array: DotArrayOut
    right_array: DotArrayOut
    display_ms: int
    difficulty_rank: int


class UiScheduleOut(BaseModel):
    session_id: str
    condition: str
    n_trials: int
    trials: list[UiTrialOut]


class ResponseIn(BaseModel):
    trial_id: str
    chosen_side: str
    latency_ms: float = Field(ge=0)
    timestamp: float | None = None


class ResponseAck(BaseModel):
    accepted: bool
    correct: bool
    completed: bool
    n_responses: int


def ui_trial(trial: TrialSpec) -> UiTrialOut:
    def array(arr):
        return DotArrayOut(
            dots=[DotOut(x=d.x, y=d.y, radius=d.radius) for d in arr.dots],
            canvas_width=arr.canvas_width,
            canvas_height=arr.canvas_height,
        )

    return UiTrialOut(
        trial_id=trial.trial_id,
        pair=PairOut(
            left_count=trial.pair.left_count,
            right_count=trial.pair.right_count,
            nominal_ratio=trial.pair.nominal_ratio,
            computed_ratio=trial.pair.computed_ratio,
        ),
        left_array=array(trial.left_array),
        right_array=array(trial.right_array),
        display_ms=trial.display_ms,
        difficulty_rank=trial.difficulty_rank,
    )


def ui_schedule(session_id: str, schedule: Schedule) -> UiScheduleOut:
    return UiScheduleOut(
        session_id=session_id,
        condition=schedule.condition,
        n_trials=len(schedule.trials),
        trials=[ui_trial(t) for t in schedule.trials],
    )
