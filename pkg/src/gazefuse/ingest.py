"""Parsers and writers for recording CSVs, embedding CSVs, and run manifests.

Recording CSV: header ``n,x,y,xT,yT``; ``n`` in ms, positions in dva, an empty
cell or the literal ``NaN`` marks a missing value. Unknown extra columns are
ignored by name. Embedding CSV: header
``subject,round,session,task,window,fold,e0..e127``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateKey,
    EmptyRecording,
    InputError,
    MalformedRow,
    ValidationError,
)
from .records import GazeRecording, RecordingKey, Task, WindowKey

EMBEDDING_DIM = 128
N_FOLDS = 4
RECORDING_COLUMNS = ("n", "x", "y", "xT", "yT")
_FLOAT_FORMAT = ".9g"  # 9 significant digits


@dataclass(eq=False)
class EmbeddingRecord:
    """One externally produced embedding: a 128-vector per (window, fold)."""

    window: WindowKey
    fold: int
    vector: np.ndarray

    def __post_init__(self):
        if not 0 <= self.fold < N_FOLDS:
            raise ValidationError(f"fold must be in [0,{N_FOLDS - 1}], got {self.fold}")
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if self.vector.shape != (EMBEDDING_DIM,):
            raise DimensionMismatch(
                f"embedding must have {EMBEDDING_DIM} values, got {self.vector.size}"
            )
        if not np.all(np.isfinite(self.vector)):
            raise ValidationError("embedding vector contains non-finite values")

    def equals(self, other: "EmbeddingRecord") -> bool:
        return (
            self.window == other.window
            and self.fold == other.fold
            and np.array_equal(self.vector, other.vector)
        )


def _parse_cell(text: str, path, line_no: int) -> float:
    cell = text.strip()
    if cell == "" or cell.lower() == "nan":
        return math.nan
    try:
        return float(cell)
    except ValueError:
        raise MalformedRow(f"{path}:{line_no}: cannot parse {cell!r} as a number") from None


def format_value(x: float) -> str:
    """Serialize a value; missing becomes an empty cell."""
    if math.isnan(x):
        return ""
    return format(x, _FLOAT_FORMAT)


def parse_recording(path, key: RecordingKey, rate_hz: float) -> GazeRecording:
    """Read one recording CSV into a validated GazeRecording.

    Raises MalformedRow on column-count mismatch, NonMonotonicTime when the
    time column is not strictly increasing, EmptyRecording when no data rows
    survive.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"recording file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyRecording(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        try:
            cols = {name: header.index(name) for name in RECORDING_COLUMNS}
        except ValueError as exc:
            raise MalformedRow(f"{path}: header must contain {RECORDING_COLUMNS}: {exc}")
        width = len(header)
        data = {name: [] for name in RECORDING_COLUMNS}
        for line_no, row in enumerate(reader, start=2):
            if len(row) != width:
                raise MalformedRow(
                    f"{path}:{line_no}: expected {width} columns, got {len(row)}"
                )
            for name in RECORDING_COLUMNS:
                data[name].append(_parse_cell(row[cols[name]], path, line_no))
    if not data["n"]:
        raise EmptyRecording(f"{path}: no data rows")
    return GazeRecording(
        key=key,
        rate_hz=rate_hz,
        t=np.array(data["n"]),
        gx=np.array(data["x"]),
        gy=np.array(data["y"]),
        tx=np.array(data["xT"]),
        ty=np.array(data["yT"]),
    )


def write_recording(path, recording: GazeRecording) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORDING_COLUMNS)
        for s in recording.samples():
            writer.writerow([format_value(v) for v in s])


def embedding_header(dim: int = EMBEDDING_DIM) -> list[str]:
    return ["subject", "round", "session", "task", "window", "fold"] + [
        f"e{i}" for i in range(dim)
    ]


def parse_embeddings(path) -> list[EmbeddingRecord]:
    """Read an embedding CSV; rejects wrong dimensions and duplicate keys."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"embedding file not found: {path}")
    expected = embedding_header()
    records: list[EmbeddingRecord] = []
    seen: set[tuple[WindowKey, int]] = set()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyRecording(f"{path}: empty file") from None
        if header[:6] != expected[:6]:
            raise MalformedRow(f"{path}: header must start with {expected[:6]}")
        if len(header) - 6 != EMBEDDING_DIM:
            raise DimensionMismatch(
                f"{path}: header declares {len(header) - 6} embedding columns, "
                f"expected {EMBEDDING_DIM}"
            )
        for line_no, row in enumerate(reader, start=2):
            if len(row) - 6 != EMBEDDING_DIM:
                raise DimensionMismatch(
                    f"{path}:{line_no}: {len(row) - 6} embedding values, "
                    f"expected {EMBEDDING_DIM}"
                )
            try:
                key = RecordingKey(
                    subject=row[0].strip(),
                    round=int(row[1]),
                    session=int(row[2]),
                    task=Task.parse(row[3]),
                )
                window = WindowKey(key, int(row[4]))
                fold = int(row[5])
            except ValueError as exc:
                raise MalformedRow(f"{path}:{line_no}: {exc}") from None
            if (window, fold) in seen:
                raise DuplicateKey(f"{path}:{line_no}: duplicate (window, fold) key")
            seen.add((window, fold))
            vector = np.array(
                [_parse_cell(cell, path, line_no) for cell in row[6:]], dtype=np.float64
            )
            if np.any(np.isnan(vector)):
                raise ValidationError(f"{path}:{line_no}: embedding contains missing values")
            records.append(EmbeddingRecord(window=window, fold=fold, vector=vector))
    return records


def write_embeddings(path, records: Iterable[EmbeddingRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(embedding_header())
        for rec in records:
            key = rec.window.recording
            writer.writerow(
                [key.subject, key.round, key.session, key.task.value,
                 rec.window.index, rec.fold]
                + [format_value(v) for v in rec.vector]
            )


# --- manifest ---

@dataclass(frozen=True)
class ManifestEntry:
    key: RecordingKey
    rate_hz: float
    path: Path


def load_manifest(path) -> list[ManifestEntry]:
    """Read a manifest JSON; recording paths resolve relative to the manifest."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "recordings" not in doc:
        raise ValidationError(f"{path}: manifest must be an object with 'recordings'")
    entries = []
    for i, item in enumerate(doc["recordings"]):
        try:
            key = RecordingKey(
                subject=str(item["subject"]),
                round=int(item["round"]),
                session=int(item["session"]),
                task=Task.parse(item["task"]),
            )
            entry = ManifestEntry(
                key=key,
                rate_hz=float(item["rate_hz"]),
                path=(path.parent / item["path"]).resolve(),
            )
        except KeyError as exc:
            raise ValidationError(f"{path}: recordings[{i}] missing field {exc}") from None
        entries.append(entry)
    return entries


def write_manifest(path, entries: Sequence[ManifestEntry]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "version": 1,
        "recordings": [
            {
                "subject": e.key.subject,
                "round": e.key.round,
                "session": e.key.session,
                "task": e.key.task.value,
                "rate_hz": e.rate_hz,
                "path": str(Path(e.path).relative_to(path.parent))
                if Path(e.path).is_absolute() and str(e.path).startswith(str(path.parent))
                else str(e.path),
            }
            for e in entries
        ],
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
