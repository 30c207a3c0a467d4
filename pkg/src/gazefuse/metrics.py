"""Verification metrics: ROC points, equal error rate, FRR at a fixed FAR.

Conventions, fixed for cross-run agreement: thresholds sweep the sorted union
of all observed scores, FAR(t) is the fraction of impostor scores >= t and
FRR(t) the fraction of genuine scores < t, so ties are processed at a single
threshold. A virtual threshold above every score contributes the final
(FAR=0, FRR=1) point.
"""
from __future__ import annotations

import numpy as np

from .errors import EmptyClass


def _as_scores(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyClass(f"no {name} scores")
    if not np.all(np.isfinite(arr)):
        raise EmptyClass(f"{name} scores contain non-finite values")
    return arr


def roc_points(genuine, impostor) -> tuple[np.ndarray, np.ndarray]:
    """Return (far, frr) arrays over the union of scores plus the end point.

    Both arrays are monotone: far non-increasing, frr non-decreasing.
    """
    gen = np.sort(_as_scores(genuine, "genuine"))
    imp = np.sort(_as_scores(impostor, "impostor"))
    thresholds = np.unique(np.concatenate([gen, imp]))
    # counts strictly below each threshold
    far = (imp.size - np.searchsorted(imp, thresholds, side="left")) / imp.size
    frr = np.searchsorted(gen, thresholds, side="left") / gen.size
    far = np.append(far, 0.0)
    frr = np.append(frr, 1.0)
    return far, frr


def eer(genuine, impostor) -> float:
    """Equal error rate in percent.

    Linear interpolation between the two ROC points bracketing the FAR=FRR
    crossing; FRR-FAR is non-decreasing along the sweep so the crossing is
    unique.
    """
    far, frr = roc_points(genuine, impostor)
    d = frr - far
    j = int(np.argmax(d >= 0.0))  # first index at or past the crossing
    if d[j] == 0.0:
        return 100.0 * far[j]
    # d[j-1] < 0 <= d[j]; j >= 1 because d[0] = -1
    denom = (frr[j] - frr[j - 1]) - (far[j] - far[j - 1])
    alpha = (far[j - 1] - frr[j - 1]) / denom
    return 100.0 * (far[j - 1] + alpha * (far[j] - far[j - 1]))


def frr_at_far(genuine, impostor, far_target: float) -> tuple[float, bool]:
    """FRR in percent at the lowest threshold whose FAR <= far_target.

    The second element is a reliability flag: False when the impostor count
    is below 10/far_target, i.e. the FAR estimate cannot resolve the target.
    """
    if not 0.0 < far_target < 1.0:
        raise EmptyClass(f"far_target must be in (0,1), got {far_target}")
    far, frr = roc_points(genuine, impostor)
    j = int(np.argmax(far <= far_target))  # exists: final point has FAR 0
    imp_count = np.asarray(impostor).size
    reliable = imp_count >= 10.0 / far_target
    return 100.0 * frr[j], bool(reliable)
