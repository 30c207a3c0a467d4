"""Core domain types: recording identity, gaze data, windows, pair labels."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple

import numpy as np

from .errors import (
    EmptyRecording,
    IrregularSampling,
    NonMonotonicTime,
    UnknownTask,
    ValidationError,
)

WINDOW_SECONDS = 5.0
SPACING_TOLERANCE = 0.10


class Task(str, Enum):
    RAN = "RAN"
    TEX = "TEX"

    @classmethod
    def parse(cls, text: str) -> "Task":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise UnknownTask(f"unknown task {text!r}; expected RAN or TEX") from None


@dataclass(frozen=True, order=True)
class RecordingKey:
    """Identity of one recording: (subject, round, session, task)."""

    subject: str
    round: int
    session: int
    task: Task

    def __post_init__(self):
        if self.round < 1:
            raise ValidationError(f"round must be >= 1, got {self.round}")
        if self.session not in (1, 2):
            raise ValidationError(f"session must be 1 or 2, got {self.session}")
        if not isinstance(self.task, Task):
            object.__setattr__(self, "task", Task.parse(self.task))

    def with_task(self, task: Task) -> "RecordingKey":
        return RecordingKey(self.subject, self.round, self.session, task)


@dataclass(frozen=True, order=True)
class WindowKey:
    """One fixed-length window of a recording."""

    recording: RecordingKey
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValidationError(f"window index must be >= 0, got {self.index}")


class PairLabel(str, Enum):
    GENUINE = "genuine"
    IMPOSTOR = "impostor"

    @classmethod
    def of(cls, enroll: RecordingKey, auth: RecordingKey) -> "PairLabel":
        return cls.GENUINE if enroll.subject == auth.subject else cls.IMPOSTOR


class GazeSample(NamedTuple):
    """One row of a recording; NaN marks missing gaze or target."""

    t: float  # ms from recording start
    gx: float  # dva
    gy: float  # dva
    tx: float  # dva, NaN for tasks without targets
    ty: float  # dva


@dataclass
class GazeRecording:
    """Timestamped gaze and target positions for one (subject, round, session, task).

    All channels are float64 arrays of equal length; missing values are NaN,
    never 0. Construction validates monotonic timestamps and uniform spacing.
    """

    key: RecordingKey
    rate_hz: float
    t: np.ndarray  # ms
    gx: np.ndarray  # dva
    gy: np.ndarray
    tx: np.ndarray
    ty: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.gx = np.asarray(self.gx, dtype=np.float64)
        self.gy = np.asarray(self.gy, dtype=np.float64)
        self.tx = np.asarray(self.tx, dtype=np.float64)
        self.ty = np.asarray(self.ty, dtype=np.float64)
        n = self.t.size
        if n == 0:
            raise EmptyRecording(f"{self.key}: no samples")
        for name in ("gx", "gy", "tx", "ty"):
            if getattr(self, name).size != n:
                raise ValidationError(f"{self.key}: column {name} length mismatch")
        if self.rate_hz <= 0:
            raise ValidationError(f"{self.key}: rate_hz must be positive")
        if self.t[0] < 0:
            raise NonMonotonicTime(f"{self.key}: negative start time")
        if n > 1:
            dt = np.diff(self.t)
            if np.any(dt <= 0):
                bad = int(np.argmax(dt <= 0)) + 1
                raise NonMonotonicTime(f"{self.key}: time does not increase at row {bad}")
            nominal = 1000.0 / self.rate_hz
            if np.any(np.abs(dt - nominal) > SPACING_TOLERANCE * nominal):
                raise IrregularSampling(
                    f"{self.key}: spacing departs from {nominal:g} ms by more than "
                    f"{SPACING_TOLERANCE:.0%}"
                )
        if not np.any(np.isfinite(self.gx) & np.isfinite(self.gy)):
            raise EmptyRecording(f"{self.key}: every gaze sample is missing")

    @property
    def n_samples(self) -> int:
        return int(self.t.size)

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.rate_hz

    @property
    def samples_per_window(self) -> int:
        return int(round(WINDOW_SECONDS * self.rate_hz))

    def window_count(self) -> int:
        return self.n_samples // self.samples_per_window

    def window_slice(self, index: int) -> slice:
        if not 0 <= index < self.window_count():
            raise ValidationError(f"{self.key}: window {index} out of range")
        w = self.samples_per_window
        return slice(index * w, (index + 1) * w)

    def window_key(self, index: int) -> WindowKey:
        return WindowKey(self.key, index)

    def samples(self) -> Iterator[GazeSample]:
        for i in range(self.n_samples):
            yield GazeSample(
                float(self.t[i]), float(self.gx[i]), float(self.gy[i]),
                float(self.tx[i]), float(self.ty[i]),
            )

    def equals(self, other: "GazeRecording") -> bool:
        """Exact equality, treating NaN == NaN (for round-trip checks)."""
        return (
            self.key == other.key
            and self.rate_hz == other.rate_hz
            and all(
                np.array_equal(getattr(self, c), getattr(other, c), equal_nan=True)
                for c in ("t", "gx", "gy", "tx", "ty")
            )
        )


def window_count(recording: GazeRecording) -> int:
    """Number of whole non-overlapping 5 s windows; trailing data is dropped."""
    return recording.window_count()
