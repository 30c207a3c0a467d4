"""Continuous gaze-offset scoring.

Per-sample angular distance between gaze and target rays, dispersion-based
fixation filtering, per-recording statistics, and the distance-to-similarity
map s = 1/(1+d).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoFixationData, NoTargetData, OutOfRange, ValidationError
from .records import GazeRecording

DEFAULT_DISPERSION_DVA = 1.0
DEFAULT_MIN_DURATION_MS = 100.0

# statistic set used for the per-recording feature vector, in report order
OFFSET_FEATURE_NAMES = ("mean", "median", "std", "min", "max", "iqr")


def gaze_to_direction(x: float, y: float) -> np.ndarray:
    """Unit viewing ray for screen angles (x, y) in dva."""
    if not (abs(x) < 90.0 and abs(y) < 90.0):
        raise OutOfRange(f"gaze angles must satisfy |x|,|y| < 90 dva, got ({x}, {y})")
    v = np.array([math.tan(math.radians(x)), math.tan(math.radians(y)), 1.0])
    return v / np.linalg.norm(v)


def _ray_angles_deg(ax, ay, bx, by) -> np.ndarray:
    """Angle in degrees between the rays of two dva coordinate arrays."""
    ax, ay, bx, by = (np.asarray(v, dtype=np.float64) for v in (ax, ay, bx, by))
    ua = np.tan(np.radians(ax))
    va = np.tan(np.radians(ay))
    ub = np.tan(np.radians(bx))
    vb = np.tan(np.radians(by))
    na = np.sqrt(ua * ua + va * va + 1.0)
    nb = np.sqrt(ub * ub + vb * vb + 1.0)
    dot = np.clip((ua * ub + va * vb + 1.0) / (na * nb), -1.0, 1.0)
    theta = np.degrees(np.arccos(dot))
    # identical coordinates are exactly zero offset regardless of rounding
    equal = (ax == bx) & (ay == by)
    return np.where(equal, 0.0, theta)


def angular_offset(gaze: tuple[float, float], target: tuple[float, float]) -> float:
    """Angular distance in dva between a gaze sample and its target."""
    gx, gy = gaze
    tx, ty = target
    for v in (gx, gy, tx, ty):
        if not math.isfinite(v):
            raise ValidationError("angular_offset requires finite coordinates")
    return float(_ray_angles_deg(gx, gy, tx, ty))


def offset_series(recording: GazeRecording) -> np.ndarray:
    """Per-sample angular offset; NaN where gaze or target is missing."""
    ok = (
        np.isfinite(recording.gx)
        & np.isfinite(recording.gy)
        & np.isfinite(recording.tx)
        & np.isfinite(recording.ty)
    )
    theta = np.full(recording.n_samples, np.nan)
    if ok.any():
        theta[ok] = _ray_angles_deg(
            recording.gx[ok], recording.gy[ok], recording.tx[ok], recording.ty[ok]
        )
    return theta


@dataclass(frozen=True)
class Fixation:
    """Inclusive sample-index span of one detected fixation."""

    start: int
    end: int
    centroid_x: float
    centroid_y: float

    @property
    def n_samples(self) -> int:
        return self.end - self.start + 1


def idt_fixations(
    t,
    x,
    y,
    dispersion_threshold: float = DEFAULT_DISPERSION_DVA,
    min_duration_ms: float = DEFAULT_MIN_DURATION_MS,
) -> list[Fixation]:
    """Dispersion-threshold fixation detection.

    Grows a candidate window while its dispersion ((max_x - min_x) +
    (max_y - min_y)) stays at or below the threshold; the maximal window is a
    fixation when it spans at least ``min_duration_ms``. Missing samples break
    candidate windows. Emitted fixations are disjoint and time-ordered.
    """
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = t.size
    missing = np.isnan(x) | np.isnan(y)
    fixations: list[Fixation] = []
    i = 0
    while i < n:
        if missing[i]:
            i += 1
            continue
        min_x = max_x = x[i]
        min_y = max_y = y[i]
        j = i
        while j + 1 < n and not missing[j + 1]:
            nx, ny = x[j + 1], y[j + 1]
            lo_x, hi_x = min(min_x, nx), max(max_x, nx)
            lo_y, hi_y = min(min_y, ny), max(max_y, ny)
            if (hi_x - lo_x) + (hi_y - lo_y) > dispersion_threshold:
                break
            min_x, max_x, min_y, max_y = lo_x, hi_x, lo_y, hi_y
            j += 1
        if t[j] - t[i] >= min_duration_ms:
            span = slice(i, j + 1)
            fixations.append(
                Fixation(
                    start=i,
                    end=j,
                    centroid_x=float(np.mean(x[span])),
                    centroid_y=float(np.mean(y[span])),
                )
            )
            i = j + 1
        else:
            i += 1
    return fixations


def fixation_mask(n_samples: int, fixations) -> np.ndarray:
    mask = np.zeros(n_samples, dtype=bool)
    for f in fixations:
        mask[f.start : f.end + 1] = True
    return mask


@dataclass(frozen=True)
class OffsetFeatureVector:
    """Aggregated statistics of fixation-filtered angular offset, in dva."""

    mean: float
    median: float
    std: float
    min: float
    max: float
    iqr: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mean, self.median, self.std, self.min, self.max, self.iqr])


def offset_features(theta, covered) -> OffsetFeatureVector:
    """Six-statistic summary of theta values inside fixations.

    Missing theta values are excluded; raises NoFixationData when nothing is
    covered.
    """
    theta = np.asarray(theta, dtype=np.float64)
    covered = np.asarray(covered, dtype=bool)
    values = theta[covered]
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise NoFixationData("no fixation-covered offset samples")
    q25, q75 = np.percentile(values, [25.0, 75.0])
    return OffsetFeatureVector(
        mean=float(np.mean(values)),
        median=float(np.median(values)),
        std=float(np.std(values)),
        min=float(np.min(values)),
        max=float(np.max(values)),
        iqr=float(q75 - q25),
    )


def recording_offset_features(
    recording: GazeRecording,
    dispersion_threshold: float = DEFAULT_DISPERSION_DVA,
    min_duration_ms: float = DEFAULT_MIN_DURATION_MS,
    window_index: int | None = None,
) -> OffsetFeatureVector:
    """Offset feature vector for one recording (or one window of it).

    The recording must carry target positions (a RAN-task recording). With
    ``window_index`` set, statistics cover only that 5 s window, for
    window-aligned scoring.
    """
    if not np.any(np.isfinite(recording.tx) & np.isfinite(recording.ty)):
        raise NoTargetData(f"{recording.key}: no target positions; offset needs RAN data")
    theta = offset_series(recording)
    fixations = idt_fixations(
        recording.t, recording.gx, recording.gy, dispersion_threshold, min_duration_ms
    )
    covered = fixation_mask(recording.n_samples, fixations)
    if window_index is not None:
        scope = np.zeros(recording.n_samples, dtype=bool)
        scope[recording.window_slice(window_index)] = True
        covered = covered & scope
    return offset_features(theta, covered)


def offset_similarity(a: OffsetFeatureVector, b: OffsetFeatureVector) -> float:
    """Similarity in (0, 1]: s = 1 / (1 + euclidean distance)."""
    d = float(np.linalg.norm(a.as_array() - b.as_array()))
    return 1.0 / (1.0 + d)
