"""Synthetic corpus generation with planted subject signatures.

Recordings follow a RAN-style protocol: the target jumps every second, gaze
tracks it through a short saccadic transition and then holds with a persistent
per-subject offset bias plus per-sample noise. Embeddings are noisy copies of
per-subject anchor vectors whose between-subject separation is configurable,
so the pipeline and the fusion hypothesis are testable at desk scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ingest import (
    EMBEDDING_DIM,
    N_FOLDS,
    EmbeddingRecord,
    ManifestEntry,
    write_embeddings,
    write_manifest,
    write_recording,
)
from .records import GazeRecording, RecordingKey, Task, WindowKey, WINDOW_SECONDS

# stream tags keep every rng purpose on its own deterministic substream
_STREAM_BIAS = 101
_STREAM_RECORDING = 202
_STREAM_ANCHOR = 303
_STREAM_BASE = 404
_STREAM_WINDOW = 505

_TASK_ID = {Task.RAN: 0, Task.TEX: 1}


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 40
    rate_hz: float = 250.0
    duration_s: float = 45.0
    target_extent_dva: float = 15.0
    target_interval_s: float = 1.0
    saccade_ms: float = 30.0
    offset_signature_spread: float = 1.0  # between-subject bias spread, dva
    offset_noise: float = 0.05  # within-subject per-sample noise, dva
    embedding_class_separation: float = 1.0  # 0 = anchors shared by everyone
    embedding_noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 2:
            raise ValidationError("n_subjects must be >= 2")
        for name in (
            "offset_signature_spread",
            "offset_noise",
            "embedding_noise",
        ):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if not 0.0 <= self.embedding_class_separation <= 1.0:
            raise ValidationError("embedding_class_separation must be in [0, 1]")
        if self.duration_s < WINDOW_SECONDS:
            raise ValidationError(f"duration_s must be >= {WINDOW_SECONDS}")

    @property
    def n_windows(self) -> int:
        return int(self.duration_s // WINDOW_SECONDS)


def subject_ids(config: SynthConfig) -> list[str]:
    return [f"S{i:04d}" for i in range(config.n_subjects)]


def subject_bias(config: SynthConfig, subject_index: int) -> tuple[float, float]:
    """Persistent gaze-offset signature of one subject, identical across sessions."""
    rng = np.random.default_rng([config.seed, _STREAM_BIAS, subject_index])
    bx, by = rng.normal(0.0, config.offset_signature_spread, size=2)
    return float(bx), float(by)


def _ran_trajectory(config: SynthConfig, rng: np.random.Generator, n: int):
    spt = int(round(config.target_interval_s * config.rate_hz))
    n_targets = math.ceil(n / spt)
    pos = rng.uniform(-config.target_extent_dva, config.target_extent_dva, (n_targets, 2))
    seg = np.minimum(np.arange(n) // spt, n_targets - 1)
    tx = pos[seg, 0]
    ty = pos[seg, 1]
    base_x = tx.copy()
    base_y = ty.copy()
    m = int(round(config.saccade_ms / 1000.0 * config.rate_hz))
    for k in range(1, n_targets):
        s0 = k * spt
        for j in range(m):
            i = s0 + j
            if i >= n:
                break
            frac = (j + 1) / (m + 1)
            base_x[i] = pos[k - 1, 0] + frac * (pos[k, 0] - pos[k - 1, 0])
            base_y[i] = pos[k - 1, 1] + frac * (pos[k, 1] - pos[k - 1, 1])
    return base_x, base_y, tx, ty


def _tex_trajectory(config: SynthConfig, n: int):
    # reading-like scan: one line per second, ten lines per page
    spt = int(round(config.rate_hz))
    line = np.arange(n) // spt
    frac = (np.arange(n) % spt) / spt
    extent = config.target_extent_dva
    base_x = -extent + 2.0 * extent * frac
    base_y = 5.0 - (line % 10).astype(np.float64)
    return base_x, base_y


def gen_recording(
    config: SynthConfig,
    subject_index: int,
    session: int,
    task: Task = Task.RAN,
    round_no: int = 1,
) -> GazeRecording:
    """Deterministic synthetic recording for (seed, subject, session, task)."""
    n = int(np.rint(config.duration_s * config.rate_hz))
    rng = np.random.default_rng(
        [config.seed, _STREAM_RECORDING, subject_index, session, round_no, _TASK_ID[task]]
    )
    t = np.arange(n) * (1000.0 / config.rate_hz)
    if task == Task.RAN:
        base_x, base_y, tx, ty = _ran_trajectory(config, rng, n)
    else:
        base_x, base_y = _tex_trajectory(config, n)
        tx = np.full(n, np.nan)
        ty = np.full(n, np.nan)
    bx, by = subject_bias(config, subject_index)
    noise = rng.normal(0.0, config.offset_noise, size=(n, 2))
    key = RecordingKey(subject_ids(config)[subject_index], round_no, session, task)
    return GazeRecording(
        key=key,
        rate_hz=config.rate_hz,
        t=t,
        gx=base_x + bx + noise[:, 0],
        gy=base_y + by + noise[:, 1],
        tx=tx,
        ty=ty,
    )


def _unit(vector: np.ndarray) -> np.ndarray:
    return vector / np.linalg.norm(vector)


def _anchor(config: SynthConfig, subject_index: int, fold: int) -> np.ndarray:
    base = _unit(
        np.random.default_rng([config.seed, _STREAM_BASE, fold]).normal(
            size=EMBEDDING_DIM
        )
    )
    unique = _unit(
        np.random.default_rng(
            [config.seed, _STREAM_ANCHOR, subject_index, fold]
        ).normal(size=EMBEDDING_DIM)
    )
    sep = config.embedding_class_separation
    return _unit((1.0 - sep) * base + sep * unique)


def gen_embeddings(
    config: SynthConfig,
    task: Task = Task.RAN,
    sessions: tuple[int, ...] = (1, 2),
    round_no: int = 1,
) -> list[EmbeddingRecord]:
    """Per-window noisy copies of each subject's per-fold anchor vector."""
    records = []
    for subject_index, subject in enumerate(subject_ids(config)):
        for fold in range(N_FOLDS):
            anchor = _anchor(config, subject_index, fold)
            for session in sessions:
                rng = np.random.default_rng(
                    [
                        config.seed,
                        _STREAM_WINDOW,
                        subject_index,
                        session,
                        round_no,
                        _TASK_ID[task],
                        fold,
                    ]
                )
                noise = rng.normal(0.0, config.embedding_noise,
                                   size=(config.n_windows, EMBEDDING_DIM))
                key = RecordingKey(subject, round_no, session, task)
                for w in range(config.n_windows):
                    records.append(
                        EmbeddingRecord(
                            window=WindowKey(key, w),
                            fold=fold,
                            vector=_unit(anchor + noise[w]),
                        )
                    )
    return records


def write_corpus(config: SynthConfig, out_dir, tasks: tuple[Task, ...] = (Task.RAN, Task.TEX)):
    """Write recordings, embeddings, and a manifest in the ingest formats.

    Returns the manifest path.
    """
    out_dir = Path(out_dir)
    rec_dir = out_dir / "recordings"
    rec_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for subject_index in range(config.n_subjects):
        for task in tasks:
            for session in (1, 2):
                recording = gen_recording(config, subject_index, session, task)
                name = (
                    f"{recording.key.subject}_R{recording.key.round}"
                    f"_S{session}_{task.value}.csv"
                )
                path = rec_dir / name
                write_recording(path, recording)
                entries.append(
                    ManifestEntry(key=recording.key, rate_hz=config.rate_hz, path=path)
                )
    embeddings: list[EmbeddingRecord] = []
    for task in tasks:
        embeddings.extend(gen_embeddings(config, task))
    write_embeddings(out_dir / "embeddings.csv", embeddings)
    manifest_path = out_dir / "manifest.json"
    write_manifest(manifest_path, entries)
    return manifest_path
