"""Score-level fusion: weighted combination with an alpha sweep, engineered
interaction features, tree-based fusion, and cross-task score assembly.

Feature recipes are fixed and versioned; the recipe id is embedded in every
report so results are self-describing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlphaOutOfRange,
    MissingModality,
    MissingTask,
    SubjectLeakage,
    ValidationError,
)
from .metrics import eer
from .records import PairLabel, RecordingKey, Task
from .trees import class_weights, make_model, randomized_search

TWO_SCORE_RECIPE = "two-score-v1"  # s1, s2, s1*s2, s1^2, s2^2, |s1-s2|, min, max
THREE_SCORE_RECIPE = "three-score-v1"  # raw x3, products x3, squares x3, |diff| x3, triple
RECIPE_IDS = {"two_score": TWO_SCORE_RECIPE, "three_score": THREE_SCORE_RECIPE}

ALPHA_GRID = tuple(round(0.5 + 0.01 * i, 2) for i in range(51))

# canonical order in which present scores feed a recipe
_SCORE_FIELDS = ("s_ekyt_ran", "s_ekyt_tex", "s_spatial")


@dataclass
class ScoreVector:
    """Per-modality similarity scores for one enrollment/authentication pair."""

    enroll: RecordingKey
    auth: RecordingKey
    label: PairLabel
    s_ekyt_ran: float | None = None
    s_ekyt_tex: float | None = None
    s_spatial: float | None = None

    def __post_init__(self):
        present = self.present_scores()
        if not present:
            raise ValidationError(f"pair {self.group_id}: no scores present")
        for name, value in present:
            if not math.isfinite(value):
                raise ValidationError(f"pair {self.group_id}: {name} is not finite")
        expected = PairLabel.of(self.enroll, self.auth)
        if self.label != expected:
            raise ValidationError(
                f"pair {self.group_id}: label {self.label} contradicts subject ids"
            )

    @property
    def group_id(self) -> tuple[str, str]:
        """Unordered subject pair; the grouping unit for disjoint splits."""
        a, b = self.enroll.subject, self.auth.subject
        return (a, b) if a <= b else (b, a)

    @property
    def subjects(self) -> set[str]:
        return {self.enroll.subject, self.auth.subject}

    def present_scores(self) -> list[tuple[str, float]]:
        return [
            (name, getattr(self, name))
            for name in _SCORE_FIELDS
            if getattr(self, name) is not None
        ]

    def ekyt_score(self, task: Task) -> float:
        value = self.s_ekyt_ran if task == Task.RAN else self.s_ekyt_tex
        if value is None:
            raise MissingModality(f"pair {self.group_id}: no EKYT score for {task.value}")
        return value


def weighted_fuse(s_ekyt: float, s_spatial: float, alpha: float) -> float:
    """Linear fusion alpha*s_ekyt + (1-alpha)*s_spatial, alpha in [0.5, 1.0]."""
    if not 0.5 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must be in [0.5, 1.0], got {alpha}")
    return alpha * s_ekyt + (1.0 - alpha) * s_spatial


def _weighted_scores(vectors, task: Task) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ekyt = np.empty(len(vectors))
    spatial = np.empty(len(vectors))
    genuine = np.empty(len(vectors), dtype=bool)
    for i, v in enumerate(vectors):
        if v.s_spatial is None:
            raise MissingModality(f"pair {v.group_id}: spatial score missing")
        ekyt[i] = v.ekyt_score(task)
        spatial[i] = v.s_spatial
        genuine[i] = v.label == PairLabel.GENUINE
    return ekyt, spatial, genuine


def sweep_alpha(vectors, task: Task) -> tuple[float, float]:
    """EER-minimizing alpha over the 0.50..1.00 grid (51 points).

    Ties go to the largest alpha, so "no improvement" surfaces as full
    reliance on the EKYT score. The sweep is evaluated on the given pairs
    themselves; reports label the result oracle-alpha.
    """
    ekyt, spatial, genuine = _weighted_scores(list(vectors), task)
    best_alpha, best_eer = None, math.inf
    for alpha in ALPHA_GRID:
        fused = alpha * ekyt + (1.0 - alpha) * spatial
        value = eer(fused[genuine], fused[~genuine])
        if value <= best_eer:  # ascending grid: ties keep the larger alpha
            best_alpha, best_eer = alpha, value
    return best_alpha, best_eer


def engineer_features(v: ScoreVector, mode: str) -> np.ndarray:
    """Apply the versioned interaction-feature recipe for the fusion mode.

    ``two_score`` needs exactly two present scores, ``three_score`` all three;
    scores enter in canonical field order (RAN EKYT, TEX EKYT, spatial).
    """
    present = [value for _, value in v.present_scores()]
    if mode == "two_score":
        if len(present) != 2:
            raise MissingModality(
                f"pair {v.group_id}: two_score mode needs exactly 2 scores, "
                f"has {len(present)}"
            )
        s1, s2 = present
        return np.array(
            [s1, s2, s1 * s2, s1 * s1, s2 * s2, abs(s1 - s2), min(s1, s2), max(s1, s2)]
        )
    if mode == "three_score":
        if len(present) != 3:
            raise MissingModality(
                f"pair {v.group_id}: three_score mode needs all 3 scores, "
                f"has {len(present)}"
            )
        s1, s2, s3 = present
        return np.array(
            [
                s1, s2, s3,
                s1 * s2, s1 * s3, s2 * s3,
                s1 * s1, s2 * s2, s3 * s3,
                abs(s1 - s2), abs(s1 - s3), abs(s2 - s3),
                s1 * s2 * s3,
            ]
        )
    raise ValidationError(f"unknown feature mode {mode!r}")


def feature_matrix(vectors, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """(X, y) for a pair collection; y is 1 for genuine pairs."""
    vectors = list(vectors)
    X = np.vstack([engineer_features(v, mode) for v in vectors])
    y = np.array([1.0 if v.label == PairLabel.GENUINE else 0.0 for v in vectors])
    return X, y


def check_subject_disjoint(train, test) -> None:
    train_subjects = set().union(*(v.subjects for v in train)) if train else set()
    test_subjects = set().union(*(v.subjects for v in test)) if test else set()
    leaked = train_subjects & test_subjects
    if leaked:
        raise SubjectLeakage(
            f"{len(leaked)} subject(s) appear in both train and test: "
            f"{sorted(leaked)[:5]}"
        )


def fuse_tree(
    train,
    test,
    mode: str,
    kind: str = "random_forest",
    params: dict | None = None,
    random_state: int = 0,
    search_candidates: int = 0,
    search_folds: int = 3,
) -> tuple[np.ndarray, dict]:
    """Train a fusion classifier on ``train`` and score ``test`` pairs.

    Returns (fused scores for test pairs in order, fitted parameter record).
    Train and test must be subject-disjoint; class imbalance is handled by
    inverse-frequency sample weights. With ``search_candidates`` > 0 the
    hyperparameters come from a randomized search on the training pairs.
    """
    train, test = list(train), list(test)
    if not train or not test:
        raise ValidationError("fuse_tree needs non-empty train and test pair sets")
    check_subject_disjoint(train, test)
    X_train, y_train = feature_matrix(train, mode)
    X_test, _ = feature_matrix(test, mode)
    weights = class_weights(y_train)
    if params is None:
        params = {}
    if search_candidates > 0:
        groups = [v.group_id for v in train]
        searched, _ = randomized_search(
            X_train,
            y_train,
            groups,
            kind,
            n_candidates=search_candidates,
            cv_folds=search_folds,
            seed=random_state,
            sample_weight=weights,
        )
        params = {**searched, **params}
    model = make_model(kind, random_state=random_state, **params)
    model.fit(X_train, y_train, sample_weight=weights)
    fused = model.predict_proba(X_test)[:, 1]
    record = {"kind": kind, "params": model.get_params(), "recipe": RECIPE_IDS[mode]}
    return fused, record


def cross_task_scores(
    tex_pairs,
    ran_lookup: dict[tuple[RecordingKey, RecordingKey], float],
    require_complete: bool = True,
) -> list[ScoreVector]:
    """Join TEX-task EKYT pair scores with their RAN counterparts.

    ``tex_pairs`` holds (enroll, auth, score) triples of TEX recordings;
    the RAN counterpart is the same subject/round/session pairing with the
    task swapped. Missing counterparts raise MissingTask, or are skipped when
    ``require_complete`` is false.
    """
    out = []
    for enroll, auth, score in tex_pairs:
        if enroll.task != Task.TEX or auth.task != Task.TEX:
            raise ValidationError("cross_task_scores expects TEX pair keys")
        ran_key = (enroll.with_task(Task.RAN), auth.with_task(Task.RAN))
        if ran_key not in ran_lookup:
            if require_complete:
                raise MissingTask(
                    f"no RAN-task score for pairing {ran_key[0]} vs {ran_key[1]}"
                )
            continue
        out.append(
            ScoreVector(
                enroll=enroll,
                auth=auth,
                label=PairLabel.of(enroll, auth),
                s_ekyt_ran=ran_lookup[ran_key],
                s_ekyt_tex=score,
            )
        )
    return out
