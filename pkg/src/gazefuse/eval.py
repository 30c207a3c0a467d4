"""Pair formation, subject-disjoint cross-validation, and report assembly.

Enrollment is session 2 and authentication session 1 of the same round. For
CV methods the reported metric is the arithmetic mean across the 4 folds; a
pair belongs to a test fold only when BOTH its subjects sit in that fold's
subject group, and to a training set only when both subjects sit outside it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyClass,
    MissingModality,
    MissingSession,
    SubjectLeakage,
    TooFewSubjects,
    ValidationError,
)
from .fusion import RECIPE_IDS, fuse_tree, sweep_alpha
from .metrics import eer, frr_at_far, roc_points
from .records import PairLabel, RecordingKey, Task

# re-exported so evaluation callers have one import surface
__all__ = [
    "Pair",
    "form_pairs",
    "Fold",
    "FoldPlan",
    "subject_disjoint_folds",
    "audit_folds",
    "EvalReport",
    "run_cv",
    "eer",
    "frr_at_far",
]

DEFAULT_FAR_TARGET = 1e-4
CV_METHODS = {"tree": "two_score", "cross": "two_score", "triple": "three_score"}
METHODS = ("baseline", "weighted") + tuple(CV_METHODS)


@dataclass(frozen=True)
class Pair:
    enroll: RecordingKey
    auth: RecordingKey
    label: PairLabel


def form_pairs(keys, task: Task, round: int = 1) -> list[Pair]:
    """All session-2 x session-1 cross pairs for one task and round."""
    by_subject: dict[str, dict[int, RecordingKey]] = {}
    for key in keys:
        if key.task != task or key.round != round:
            continue
        by_subject.setdefault(key.subject, {})[key.session] = key
    if not by_subject:
        raise MissingSession(f"no {task.value} round-{round} recordings given")
    for subject in sorted(by_subject):
        sessions = by_subject[subject]
        if 1 not in sessions or 2 not in sessions:
            raise MissingSession(
                f"subject {subject} lacks session {1 if 1 not in sessions else 2} "
                f"for {task.value} round {round}"
            )
    subjects = sorted(by_subject)
    pairs = []
    for enroll_subject in subjects:
        for auth_subject in subjects:
            enroll = by_subject[enroll_subject][2]
            auth = by_subject[auth_subject][1]
            pairs.append(Pair(enroll, auth, PairLabel.of(enroll, auth)))
    return pairs


@dataclass(frozen=True)
class Fold:
    index: int
    subjects: frozenset[str]
    train_idx: np.ndarray
    test_idx: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    groups: list[list[str]]
    folds: list[Fold]


def subject_disjoint_folds(pairs, k: int = 4, seed: int = 0) -> FoldPlan:
    """Partition subjects into k groups and derive train/test pair indices.

    Test fold i holds pairs whose subjects are both in group i; its training
    set holds pairs whose subjects are both outside group i. Pairs straddling
    group i and another group are excluded from fold i entirely.
    """
    pairs = list(pairs)
    subjects = sorted({p.enroll.subject for p in pairs} | {p.auth.subject for p in pairs})
    if len(subjects) < k:
        raise TooFewSubjects(f"need at least {k} subjects, got {len(subjects)}")
    rng = np.random.default_rng(seed)
    shuffled = [subjects[i] for i in rng.permutation(len(subjects))]
    groups: list[list[str]] = [[] for _ in range(k)]
    for i, subject in enumerate(shuffled):
        groups[i % k].append(subject)
    group_of = {s: g for g, members in enumerate(groups) for s in members}
    folds = []
    for g in range(k):
        train_idx, test_idx = [], []
        for i, p in enumerate(pairs):
            ga = group_of[p.enroll.subject]
            gb = group_of[p.auth.subject]
            if ga == g and gb == g:
                test_idx.append(i)
            elif ga != g and gb != g:
                train_idx.append(i)
        folds.append(
            Fold(
                index=g,
                subjects=frozenset(groups[g]),
                train_idx=np.asarray(train_idx, dtype=np.intp),
                test_idx=np.asarray(test_idx, dtype=np.intp),
            )
        )
    return FoldPlan(k=k, seed=seed, groups=[sorted(g) for g in groups], folds=folds)


def audit_folds(pairs, plan: FoldPlan) -> list[int]:
    """Leaked-subject count per fold; every entry must be 0."""
    pairs = list(pairs)
    leaks = []
    for fold in plan.folds:
        train_subjects = set()
        for i in fold.train_idx:
            train_subjects |= {pairs[i].enroll.subject, pairs[i].auth.subject}
        test_subjects = set()
        for i in fold.test_idx:
            test_subjects |= {pairs[i].enroll.subject, pairs[i].auth.subject}
        leaks.append(len(train_subjects & test_subjects))
    return leaks


@dataclass
class EvalReport:
    """Metrics for one (task, method, n_seq) configuration."""

    config: dict
    eer_percent: float
    frr_percent: float
    far_target: float
    frr_reliable: bool
    alpha: float | None = None
    folds: list[dict] | None = None
    roc: list = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "eer_percent": self.eer_percent,
            "frr_percent": self.frr_percent,
            "far_target": self.far_target,
            "frr_reliable": self.frr_reliable,
            "alpha": self.alpha,
            "folds": self.folds,
            "roc": self.roc,
            "warnings": self.warnings,
        }


def _roc_list(genuine, impostor, max_points: int) -> list[list[float]]:
    far, frr = roc_points(genuine, impostor)
    if far.size > max_points > 0:
        idx = np.unique(np.linspace(0, far.size - 1, max_points).round().astype(int))
        far, frr = far[idx], frr[idx]
    return [[float(a), float(b)] for a, b in zip(far, frr)]


def _split_scores(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    genuine = np.asarray(labels, dtype=bool)
    if not genuine.any() or genuine.all():
        raise EmptyClass("need both genuine and impostor pairs")
    return scores[genuine], scores[~genuine]


def run_cv(
    vectors,
    method: str,
    task: Task,
    *,
    n_seq: int | None = None,
    model_kind: str = "random_forest",
    k: int = 4,
    seed: int = 0,
    far_target: float = DEFAULT_FAR_TARGET,
    params: dict | None = None,
    search_candidates: int = 0,
    roc_max_points: int = 512,
) -> EvalReport:
    """Evaluate one fusion method over a scored pair collection.

    ``baseline`` and ``weighted`` need no training and evaluate all pairs at
    once; CV methods train per fold and report the mean across folds, with the
    pooled out-of-fold scores providing the ROC points.
    """
    vectors = list(vectors)
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
    config = {
        "task": task.value,
        "method": method,
        "n_seq": n_seq,
        "k": k if method in CV_METHODS else None,
        "seed": seed,
        "model_kind": model_kind if method in CV_METHODS else None,
        "recipe": RECIPE_IDS[CV_METHODS[method]] if method in CV_METHODS else None,
        "search_candidates": search_candidates if method in CV_METHODS else None,
    }
    warnings: list[str] = []
    labels = [v.label == PairLabel.GENUINE for v in vectors]

    if method == "baseline":
        scores = np.array([v.ekyt_score(task) for v in vectors])
        genuine, impostor = _split_scores(scores, labels)
        eer_value = eer(genuine, impostor)
        frr_value, reliable = frr_at_far(genuine, impostor, far_target)
        if not reliable:
            warnings.append(
                f"impostor count {impostor.size} cannot resolve FAR={far_target:g}"
            )
        return EvalReport(
            config=config,
            eer_percent=eer_value,
            frr_percent=frr_value,
            far_target=far_target,
            frr_reliable=reliable,
            roc=_roc_list(genuine, impostor, roc_max_points),
            warnings=warnings,
        )

    if method == "weighted":
        alpha, eer_value = sweep_alpha(vectors, task)
        fused = np.array(
            [alpha * v.ekyt_score(task) + (1.0 - alpha) * v.s_spatial for v in vectors]
        )
        genuine, impostor = _split_scores(fused, labels)
        frr_value, reliable = frr_at_far(genuine, impostor, far_target)
        if not reliable:
            warnings.append(
                f"impostor count {impostor.size} cannot resolve FAR={far_target:g}"
            )
        warnings.append("weighted-fusion EER is oracle-alpha (swept on the same pairs)")
        return EvalReport(
            config=config,
            eer_percent=eer_value,
            frr_percent=frr_value,
            far_target=far_target,
            frr_reliable=reliable,
            alpha=alpha,
            roc=_roc_list(genuine, impostor, roc_max_points),
            warnings=warnings,
        )

    # tree / cross / triple: 4-fold subject-disjoint CV
    mode = CV_METHODS[method]
    plan = subject_disjoint_folds(vectors, k=k, seed=seed)
    leaks = audit_folds(vectors, plan)
    if any(leaks):
        raise SubjectLeakage(f"fold audit found leaked subjects: {leaks}")
    fold_rows = []
    pooled_scores: list[np.ndarray] = []
    pooled_labels: list[np.ndarray] = []
    for fold in plan.folds:
        train = [vectors[i] for i in fold.train_idx]
        test = [vectors[i] for i in fold.test_idx]
        if not train or not test:
            raise EmptyClass(f"fold {fold.index} has an empty train or test set")
        fused, model_record = fuse_tree(
            train,
            test,
            mode,
            kind=model_kind,
            params=params,
            random_state=seed * 100003 + fold.index,
            search_candidates=search_candidates,
        )
        test_labels = np.array([v.label == PairLabel.GENUINE for v in test])
        genuine, impostor = _split_scores(fused, test_labels)
        fold_eer = eer(genuine, impostor)
        fold_frr, reliable = frr_at_far(genuine, impostor, far_target)
        fold_rows.append(
            {
                "fold": fold.index,
                "eer_percent": fold_eer,
                "frr_percent": fold_frr,
                "frr_reliable": reliable,
                "n_train": len(train),
                "n_test": len(test),
                "n_test_genuine": int(test_labels.sum()),
                "n_test_impostor": int((~test_labels).sum()),
                "model": model_record,
            }
        )
        pooled_scores.append(fused)
        pooled_labels.append(test_labels)
    eer_value = float(np.mean([r["eer_percent"] for r in fold_rows]))
    frr_value = float(np.mean([r["frr_percent"] for r in fold_rows]))
    reliable = all(r["frr_reliable"] for r in fold_rows)
    if not reliable:
        warnings.append(
            f"per-fold impostor counts cannot resolve FAR={far_target:g}"
        )
    all_scores = np.concatenate(pooled_scores)
    all_labels = np.concatenate(pooled_labels)
    genuine, impostor = _split_scores(all_scores, all_labels)
    return EvalReport(
        config=config,
        eer_percent=eer_value,
        frr_percent=frr_value,
        far_target=far_target,
        frr_reliable=reliable,
        folds=fold_rows,
        roc=_roc_list(genuine, impostor, roc_max_points),
        warnings=warnings,
    )
