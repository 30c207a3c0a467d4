"""Position-to-velocity preprocessing: Savitzky-Golay differentiation,
5 s windowing, and train-only z-score normalization.

The derivative filter uses window length 7 and polynomial order 2. Edges are
handled by fitting the same polynomial to the one-sided end windows, so output
length equals input length. A missing input makes every output whose fit
window touches it missing; nothing is interpolated.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import savgol_filter

from .errors import DataLeakage, DegenerateStats, TooShort, ValidationError
from .records import GazeRecording, WindowKey

SG_WINDOW = 7
SG_ORDER = 2
DEFAULT_MAX_MISSING_FRAC = 0.5
DEFAULT_CLAMP_DPS = 1000.0  # implausible-velocity clamp, deg/s
TRAIN_SPLIT = "train"


@dataclass
class VelocityWindow:
    """One 5 s window of angular velocity, deg/s; NaN marks missing samples.

    ``split`` is a provenance tag; normalization statistics may only be fitted
    on windows tagged ``train``.
    """

    key: WindowKey
    vx: np.ndarray
    vy: np.ndarray
    missing_frac: float
    valid: bool
    split: str = TRAIN_SPLIT


@dataclass(frozen=True)
class NormStats:
    """Channel-wise z-score statistics (population convention)."""

    mean_x: float
    mean_y: float
    std_x: float
    std_y: float

    def __post_init__(self):
        if not (self.std_x > 0 and self.std_y > 0):
            raise DegenerateStats("standard deviation must be positive")


def _nan_neighborhood(nan_mask: np.ndarray) -> np.ndarray:
    """Outputs whose SG fit window touches a missing input."""
    half = SG_WINDOW // 2
    touched = np.convolve(nan_mask.astype(np.float64), np.ones(SG_WINDOW), mode="same") > 0
    # end outputs are fitted on the one-sided 7-sample windows
    if nan_mask[:SG_WINDOW].any():
        touched[:half] = True
    if nan_mask[-SG_WINDOW:].any():
        touched[-half:] = True
    return touched


def sg_differentiate(positions, rate_hz: float) -> np.ndarray:
    """First derivative of a position sequence (dva) in deg/s."""
    p = np.asarray(positions, dtype=np.float64)
    if p.size < SG_WINDOW:
        raise TooShort(f"need at least {SG_WINDOW} samples, got {p.size}")
    nan_mask = np.isnan(p)
    delta = 1.0 / rate_hz
    if nan_mask.any():
        filled = np.where(nan_mask, 0.0, p)
        v = savgol_filter(filled, SG_WINDOW, SG_ORDER, deriv=1, delta=delta, mode="interp")
        v[_nan_neighborhood(nan_mask)] = np.nan
    else:
        v = savgol_filter(p, SG_WINDOW, SG_ORDER, deriv=1, delta=delta, mode="interp")
    return v


def make_windows(
    recording: GazeRecording,
    max_missing_frac: float = DEFAULT_MAX_MISSING_FRAC,
    split: str = TRAIN_SPLIT,
) -> list[VelocityWindow]:
    """Differentiate a whole recording, then slice it into 5 s windows.

    Windows whose missing fraction exceeds ``max_missing_frac`` are flagged
    invalid but kept, so callers can report them.
    """
    count = recording.window_count()
    if count == 0:
        return []
    vx = sg_differentiate(recording.gx, recording.rate_hz)
    vy = sg_differentiate(recording.gy, recording.rate_hz)
    windows = []
    for i in range(count):
        sl = recording.window_slice(i)
        wx, wy = vx[sl], vy[sl]
        missing = float(np.mean(np.isnan(wx) | np.isnan(wy)))
        windows.append(
            VelocityWindow(
                key=recording.window_key(i),
                vx=wx,
                vy=wy,
                missing_frac=missing,
                valid=missing <= max_missing_frac,
                split=split,
            )
        )
    return windows


def _clamped(values: np.ndarray, clamp_dps: float) -> np.ndarray:
    return np.clip(values, -clamp_dps, clamp_dps)


def fit_norm(windows, clamp_dps: float = DEFAULT_CLAMP_DPS) -> NormStats:
    """Channel-wise mean/std over all non-missing training values.

    Uses the population (1/N) standard deviation. Rejects windows not tagged
    ``train`` to make normalization leakage impossible by construction.
    """
    windows = list(windows)
    if not windows:
        raise ValidationError("fit_norm needs at least one window")
    for w in windows:
        if w.split != TRAIN_SPLIT:
            raise DataLeakage(
                f"fit_norm received a window tagged {w.split!r}; only "
                f"{TRAIN_SPLIT!r} windows may shape normalization statistics"
            )
    xs = np.concatenate([w.vx for w in windows])
    ys = np.concatenate([w.vy for w in windows])
    xs = _clamped(xs[np.isfinite(xs)], clamp_dps)
    ys = _clamped(ys[np.isfinite(ys)], clamp_dps)
    if xs.size < 2 or ys.size < 2:
        raise ValidationError("need at least 2 non-missing values per channel")
    std_x = float(np.std(xs))
    std_y = float(np.std(ys))
    if std_x == 0.0 or std_y == 0.0:
        raise DegenerateStats("training velocities have zero variance")
    return NormStats(float(np.mean(xs)), float(np.mean(ys)), std_x, std_y)


def apply_norm(
    window: VelocityWindow, stats: NormStats, clamp_dps: float = DEFAULT_CLAMP_DPS
) -> VelocityWindow:
    """Standardize one window with training statistics; missing stays missing."""
    vx = (_clamped(window.vx, clamp_dps) - stats.mean_x) / stats.std_x
    vy = (_clamped(window.vy, clamp_dps) - stats.mean_y) / stats.std_y
    return replace(window, vx=vx, vy=vy)


def to_model_input(window: VelocityWindow, stats: NormStats) -> np.ndarray:
    """(n, 2) standardized velocity array for the embedding boundary.

    Missing samples are zero-filled after standardization, i.e. pinned at the
    training mean.
    """
    normed = apply_norm(window, stats)
    out = np.column_stack([normed.vx, normed.vy])
    return np.where(np.isnan(out), 0.0, out)
