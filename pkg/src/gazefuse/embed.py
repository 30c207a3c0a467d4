"""Embedding ensembling and similarity scoring (the temporal modality).

Per recording, the first n_seq window embeddings of each fold are averaged and
the four fold centroids concatenated into one 512-vector; comparisons use
cosine similarity.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import MissingFold, MissingWindow, ValidationError, ZeroVector
from .ingest import EMBEDDING_DIM, N_FOLDS, EmbeddingRecord
from .records import RecordingKey

N_SEQ_GRID = (1, 2, 3, 4, 6, 8)


@dataclass(eq=False)
class AggregatedEmbedding:
    """Fold-concatenated centroid embedding for one recording."""

    key: RecordingKey
    n_seq: int
    vector: np.ndarray  # 4 folds x 128 dims


def aggregate(records: Iterable[EmbeddingRecord], n_seq: int) -> AggregatedEmbedding:
    """Average windows 0..n_seq-1 per fold, then concatenate folds 0..3."""
    if n_seq < 1:
        raise ValidationError(f"n_seq must be >= 1, got {n_seq}")
    records = list(records)
    if not records:
        raise MissingFold("no embedding records given")
    key = records[0].window.recording
    by_fold: dict[int, dict[int, np.ndarray]] = defaultdict(dict)
    for rec in records:
        if rec.window.recording != key:
            raise ValidationError(
                f"aggregate expects records of one recording; got {key} "
                f"and {rec.window.recording}"
            )
        by_fold[rec.fold][rec.window.index] = rec.vector
    parts = []
    for fold in range(N_FOLDS):
        if fold not in by_fold:
            raise MissingFold(f"{key}: fold {fold} has no embeddings")
        windows = by_fold[fold]
        missing = [i for i in range(n_seq) if i not in windows]
        if missing:
            raise MissingWindow(f"{key}: fold {fold} lacks windows {missing}")
        parts.append(np.mean([windows[i] for i in range(n_seq)], axis=0))
    return AggregatedEmbedding(key=key, n_seq=n_seq, vector=np.concatenate(parts))


def embed_similarity(enroll: AggregatedEmbedding, auth: AggregatedEmbedding) -> float:
    """Cosine similarity of two aggregated embeddings, in [-1, 1]."""
    if enroll.n_seq != auth.n_seq:
        raise ValidationError(
            f"n_seq mismatch: {enroll.n_seq} vs {auth.n_seq}"
        )
    na = np.linalg.norm(enroll.vector)
    nb = np.linalg.norm(auth.vector)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity undefined for a zero vector")
    return float(np.dot(enroll.vector, auth.vector) / (na * nb))


def aggregate_all(
    records: Iterable[EmbeddingRecord], n_seq: int
) -> dict[RecordingKey, AggregatedEmbedding]:
    """Aggregate every recording present in an embedding collection."""
    by_key: dict[RecordingKey, list[EmbeddingRecord]] = defaultdict(list)
    for rec in records:
        by_key[rec.window.recording].append(rec)
    return {key: aggregate(recs, n_seq) for key, recs in by_key.items()}


def score_pairs(
    pairs: Sequence[tuple[RecordingKey, RecordingKey]],
    aggregated: Mapping[RecordingKey, AggregatedEmbedding],
) -> np.ndarray:
    """Cosine score per (enrollment, authentication) pair, in pair order."""
    scores = np.empty(len(pairs))
    for i, (enroll, auth) in enumerate(pairs):
        if enroll not in aggregated or auth not in aggregated:
            missing = enroll if enroll not in aggregated else auth
            raise MissingWindow(f"no aggregated embedding for {missing}")
        scores[i] = embed_similarity(aggregated[enroll], aggregated[auth])
    return scores
