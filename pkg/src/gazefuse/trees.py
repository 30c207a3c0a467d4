"""From-scratch tree-ensemble classifiers used as fusion models.

Estimators follow the scikit-learn API (fit / predict_proba / get_params) so
they compose with the wider ecosystem, but the trees themselves are grown
here: greedy CART splits on weighted Gini impurity with deterministic
tie-breaking (lowest feature index, then lowest threshold), per-sample
weights throughout, and per-tree seeds derived from the estimator seed so
results do not depend on scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DimensionMismatch, EmptyClass, InsufficientGroups, ValidationError
from .metrics import eer

MODEL_KINDS = ("random_forest", "extra_trees", "gradient_boosting")

# declared randomized-search ranges, recorded in every report
SEARCH_RANGES = {
    "n_trees": (50, 400),
    "max_depth": (2, 10),
    "min_leaf": (1, 50),
    "learning_rate": (0.01, 0.3),  # log-uniform, boosting only
}

_PROB_CLIP = 1e-6  # avoids infinite log-odds in boosting


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValidationError(f"feature matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("feature matrix contains non-finite values")
    return X


def _as_labels(y, n_rows: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n_rows,):
        raise ValidationError(f"labels must have shape ({n_rows},), got {y.shape}")
    y = y.astype(np.float64)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValidationError("labels must be 0 (impostor) or 1 (genuine)")
    return y


def _as_weights(sample_weight, n_rows: int) -> np.ndarray:
    if sample_weight is None:
        return np.ones(n_rows)
    w = np.asarray(sample_weight, dtype=np.float64)
    if w.shape != (n_rows,):
        raise ValidationError(f"sample_weight must have shape ({n_rows},)")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValidationError("sample weights must be positive and finite")
    return w


def class_weights(y) -> np.ndarray:
    """Inverse class-frequency weights, normalized to mean 1."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    n_pos = float(np.sum(y == 1.0))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        return np.ones(n)
    return np.where(y == 1.0, n / (2.0 * n_pos), n / (2.0 * n_neg))


@dataclass
class _Tree:
    """Flat binary tree; feature < 0 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(X.shape[0], dtype=np.intp)
        active = self.feature[idx] >= 0
        while np.any(active):
            rows = np.flatnonzero(active)
            nodes = idx[rows]
            go_left = X[rows, self.feature[nodes]] < self.threshold[nodes]
            idx[rows] = np.where(go_left, self.left[nodes], self.right[nodes])
            active = self.feature[idx] >= 0
        return idx

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "_Tree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.intp),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            left=np.asarray(doc["left"], dtype=np.intp),
            right=np.asarray(doc["right"], dtype=np.intp),
            value=np.asarray(doc["value"], dtype=np.float64),
        )


def _best_split_exact(X, y, w, features, min_leaf, gini):
    """Best midpoint split over sorted values of each candidate feature.

    Returns (gain, feature, threshold) or None. Candidates are scanned in
    ascending feature order and, within a feature, ascending threshold order;
    an incumbent is replaced only on a strictly larger gain, which realizes
    the declared tie-breaking rule.
    """
    n = X.shape[0]
    W = float(np.sum(w))
    wy = w * y
    S = float(np.sum(wy))
    if gini:
        p = S / W
        parent = 1.0 - p * p - (1.0 - p) * (1.0 - p)
    counts = np.arange(1, n)
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        valid = (xs[:-1] < xs[1:]) & (counts >= min_leaf) & (n - counts >= min_leaf)
        if not np.any(valid):
            continue
        WL = np.cumsum(w[order])[:-1]
        SL = np.cumsum(wy[order])[:-1]
        WR = W - WL
        SR = S - SL
        with np.errstate(invalid="ignore", divide="ignore"):
            if gini:
                pl = SL / WL
                pr = SR / WR
                gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
                gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
                gain = parent - (WL * gl + WR * gr) / W
            else:
                # weighted-SSE reduction, up to the constant parent term
                gain = SL * SL / WL + SR * SR / WR - S * S / W
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        threshold_gain = float(gain[k])
        min_gain = 0.0 if gini else 1e-12
        if threshold_gain <= min_gain:
            continue
        if best is None or threshold_gain > best[0]:
            mid = 0.5 * (xs[k] + xs[k + 1])
            if mid <= xs[k]:  # guard against midpoint rounding onto the left value
                mid = xs[k + 1]
            best = (threshold_gain, int(f), float(mid))
    return best


def _best_split_random(X, y, w, features, min_leaf, gini, rng):
    """Extra-trees style split: one uniform random threshold per feature."""
    n = X.shape[0]
    W = float(np.sum(w))
    wy = w * y
    S = float(np.sum(wy))
    if gini:
        p = S / W
        parent = 1.0 - p * p - (1.0 - p) * (1.0 - p)
    best = None
    for f in features:
        col = X[:, f]
        lo = float(np.min(col))
        hi = float(np.max(col))
        if lo == hi:
            continue
        thr = float(rng.uniform(lo, hi))
        if thr <= lo:
            thr = np.nextafter(lo, hi)
        go_left = col < thr
        n_left = int(np.count_nonzero(go_left))
        if n_left < min_leaf or n - n_left < min_leaf:
            continue
        WL = float(np.sum(w[go_left]))
        SL = float(np.sum(wy[go_left]))
        WR = W - WL
        SR = S - SL
        if gini:
            pl = SL / WL
            pr = SR / WR
            gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
            gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
            gain = parent - (WL * gl + WR * gr) / W
            if gain <= 0.0:
                continue
        else:
            gain = SL * SL / WL + SR * SR / WR - S * S / W
            if gain <= 1e-12:
                continue
        if best is None or gain > best[0]:
            best = (gain, int(f), thr)
    return best


def _resolve_max_features(max_features, n_features: int) -> int:
    if max_features is None:
        return n_features
    if isinstance(max_features, float):
        if not 0.0 < max_features <= 1.0:
            raise ValidationError("max_features fraction must be in (0, 1]")
        return max(1, int(round(max_features * n_features)))
    m = int(max_features)
    if not 1 <= m <= n_features:
        raise ValidationError(f"max_features must be in [1, {n_features}]")
    return m


def _grow_tree(
    X,
    y,
    w,
    *,
    gini: bool,
    max_depth,
    min_leaf: int,
    max_features,
    rng: np.random.Generator,
    extra_random: bool = False,
) -> _Tree:
    n, n_features = X.shape
    m = _resolve_max_features(max_features, n_features)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def leaf_value(idx) -> float:
        return float(np.dot(w[idx], y[idx]) / np.sum(w[idx]))

    root = new_node()
    stack = [(np.arange(n, dtype=np.intp), 0, root)]
    while stack:
        idx, depth, node = stack.pop()
        yi = y[idx]
        pure = yi.min() == yi.max()
        can_split = (
            not pure
            and idx.size >= 2 * min_leaf
            and (max_depth is None or depth < max_depth)
        )
        split = None
        if can_split:
            if m < n_features:
                cand = np.sort(rng.choice(n_features, size=m, replace=False))
            else:
                cand = np.arange(n_features)
            if extra_random:
                split = _best_split_random(X[idx], yi, w[idx], cand, min_leaf, gini, rng)
            else:
                split = _best_split_exact(X[idx], yi, w[idx], cand, min_leaf, gini)
        if split is None:
            value[node] = leaf_value(idx)
            continue
        _, f, thr = split
        feature[node] = f
        threshold[node] = thr
        go_left = X[idx, f] < thr
        left_id = new_node()
        right_id = new_node()
        left[node] = left_id
        right[node] = right_id
        # push right first so the left child is grown first (stable rng order)
        stack.append((idx[~go_left], depth + 1, right_id))
        stack.append((idx[go_left], depth + 1, left_id))
    return _Tree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.asarray(value, dtype=np.float64),
    )


class _FittedMixin:
    def _check_matrix(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if not hasattr(self, "n_features_in_"):
            raise ValidationError("estimator is not fitted")
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


class DecisionTree(_FittedMixin, ClassifierMixin, BaseEstimator):
    """Weighted CART classifier with deterministic split tie-breaking."""

    def __init__(self, max_depth=None, min_leaf=1, max_features=None, random_state=0):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        X = _as_matrix(X)
        y = _as_labels(y, X.shape[0])
        w = _as_weights(sample_weight, X.shape[0])
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        self.tree_ = _grow_tree(
            X,
            y,
            w,
            gini=True,
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
            max_features=self.max_features,
            rng=np.random.default_rng(self.random_state),
        )
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = self._check_matrix(X)
        p = self.tree_.predict(X)
        return np.column_stack([1.0 - p, p])


class _BaseForest(_FittedMixin, ClassifierMixin, BaseEstimator):
    _bootstrap = True
    _extra_random = False

    def __init__(
        self,
        n_trees=100,
        max_depth=None,
        min_leaf=1,
        feature_fraction=1.0,
        random_state=0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_fraction = feature_fraction
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        X = _as_matrix(X)
        y = _as_labels(y, X.shape[0])
        w = _as_weights(sample_weight, X.shape[0])
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        n = X.shape[0]
        max_features = None if self.feature_fraction >= 1.0 else float(self.feature_fraction)
        self.trees_ = []
        for seed in np.random.SeedSequence(self.random_state).spawn(self.n_trees):
            rng = np.random.default_rng(seed)
            if self._bootstrap:
                counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
                rows = np.flatnonzero(counts)
                Xi, yi, wi = X[rows], y[rows], w[rows] * counts[rows]
            else:
                Xi, yi, wi = X, y, w
            self.trees_.append(
                _grow_tree(
                    Xi,
                    yi,
                    wi,
                    gini=True,
                    max_depth=self.max_depth,
                    min_leaf=self.min_leaf,
                    max_features=max_features,
                    rng=rng,
                    extra_random=self._extra_random,
                )
            )
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = self._check_matrix(X)
        p = np.mean([tree.predict(X) for tree in self.trees_], axis=0)
        return np.column_stack([1.0 - p, p])


class RandomForest(_BaseForest):
    """Bagged CART trees with a random feature subset per split."""

    _bootstrap = True

    def __init__(
        self,
        n_trees=100,
        max_depth=None,
        min_leaf=1,
        feature_fraction=1.0,
        bootstrap=True,
        random_state=0,
    ):
        super().__init__(n_trees, max_depth, min_leaf, feature_fraction, random_state)
        self.bootstrap = bootstrap

    def fit(self, X, y, sample_weight=None):
        self._bootstrap = bool(self.bootstrap)
        return super().fit(X, y, sample_weight)


class ExtraTrees(_BaseForest):
    """Extremely randomized trees: no bootstrap, random split thresholds."""

    _bootstrap = False
    _extra_random = True


class GradientBoosting(_FittedMixin, ClassifierMixin, BaseEstimator):
    """Logistic-loss gradient boosting on regression trees.

    Stages fit pseudo-residuals; leaves take a single Newton step. The initial
    score is the weighted log-odds of the positive class, and training loss is
    recorded per stage in ``train_loss_``.
    """

    def __init__(
        self, n_stages=100, learning_rate=0.1, max_depth=3, min_leaf=1, random_state=0
    ):
        self.n_stages = n_stages
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.random_state = random_state

    @staticmethod
    def _log_loss(y, p, w) -> float:
        p = np.clip(p, _PROB_CLIP, 1.0 - _PROB_CLIP)
        return float(-np.sum(w * (y * np.log(p) + (1.0 - y) * np.log(1.0 - p))) / np.sum(w))

    def fit(self, X, y, sample_weight=None):
        X = _as_matrix(X)
        y = _as_labels(y, X.shape[0])
        w = _as_weights(sample_weight, X.shape[0])
        if self.n_stages < 0:
            raise ValidationError("n_stages must be >= 0")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        p0 = np.clip(np.dot(w, y) / np.sum(w), _PROB_CLIP, 1.0 - _PROB_CLIP)
        self.base_score_ = float(math.log(p0 / (1.0 - p0)))
        F = np.full(X.shape[0], self.base_score_)
        losses = [self._log_loss(y, 1.0 / (1.0 + np.exp(-F)), w)]
        self.stages_ = []
        seeds = np.random.SeedSequence(self.random_state).spawn(max(self.n_stages, 1))
        for stage in range(self.n_stages):
            p = np.clip(1.0 / (1.0 + np.exp(-F)), _PROB_CLIP, 1.0 - _PROB_CLIP)
            residual = y - p
            hessian = p * (1.0 - p)
            tree = _grow_tree(
                X,
                residual,
                w,
                gini=False,
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                max_features=None,
                rng=np.random.default_rng(seeds[stage]),
            )
            leaves = tree.apply(X)
            # Newton step per terminal region
            num = np.bincount(leaves, weights=w * residual, minlength=tree.n_nodes)
            den = np.bincount(leaves, weights=w * hessian, minlength=tree.n_nodes)
            values = np.zeros(tree.n_nodes)
            filled = den > 0
            values[filled] = num[filled] / den[filled]
            tree.value = values
            self.stages_.append(tree)
            F = F + self.learning_rate * values[leaves]
            losses.append(self._log_loss(y, 1.0 / (1.0 + np.exp(-F)), w))
        self.train_loss_ = np.asarray(losses)
        return self

    def decision_function(self, X) -> np.ndarray:
        X = self._check_matrix(X)
        F = np.full(X.shape[0], self.base_score_)
        for tree in self.stages_:
            F = F + self.learning_rate * tree.predict(X)
        return F

    def predict_proba(self, X) -> np.ndarray:
        p = 1.0 / (1.0 + np.exp(-self.decision_function(X)))
        return np.column_stack([1.0 - p, p])


def make_model(kind: str, **params):
    """Instantiate a fusion classifier by kind name."""
    if kind == "random_forest":
        return RandomForest(**params)
    if kind == "extra_trees":
        return ExtraTrees(**params)
    if kind == "gradient_boosting":
        allowed = {"n_stages", "learning_rate", "max_depth", "min_leaf", "random_state"}
        if "n_trees" in params:  # shared search range names the tree budget n_trees
            params = dict(params)
            params["n_stages"] = params.pop("n_trees")
        unknown = set(params) - allowed
        if unknown:
            raise ValidationError(f"unknown gradient_boosting params: {sorted(unknown)}")
        return GradientBoosting(**params)
    raise ValidationError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def _group_folds(groups, cv_folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Round-robin partition of shuffled distinct groups into validation folds."""
    groups = list(groups)
    unique = sorted(set(groups))
    if len(unique) < cv_folds:
        raise InsufficientGroups(
            f"need at least {cv_folds} distinct groups, got {len(unique)}"
        )
    order = rng.permutation(len(unique))
    assignment = {unique[g]: i % cv_folds for i, g in enumerate(order)}
    fold_of_row = np.array([assignment[g] for g in groups])
    return [np.flatnonzero(fold_of_row == i) for i in range(cv_folds)]


def sample_candidate(kind: str, rng: np.random.Generator) -> dict:
    """One hyperparameter draw from the declared search ranges."""
    lo, hi = SEARCH_RANGES["n_trees"]
    params = {
        "n_trees": int(rng.integers(lo, hi + 1)),
        "max_depth": int(rng.integers(SEARCH_RANGES["max_depth"][0],
                                      SEARCH_RANGES["max_depth"][1] + 1)),
        "min_leaf": int(rng.integers(SEARCH_RANGES["min_leaf"][0],
                                     SEARCH_RANGES["min_leaf"][1] + 1)),
    }
    if kind == "gradient_boosting":
        log_lo, log_hi = (math.log(b) for b in SEARCH_RANGES["learning_rate"])
        params["learning_rate"] = float(math.exp(rng.uniform(log_lo, log_hi)))
    return params


def randomized_search(
    X,
    y,
    groups,
    kind: str,
    n_candidates: int,
    cv_folds: int = 3,
    seed: int = 0,
    sample_weight=None,
) -> tuple[dict, float]:
    """Pick the candidate with the best mean inner-CV EER.

    Inner folds are disjoint on ``groups``; a fold whose validation split
    lacks one class is skipped. Ties keep the earliest candidate, so a fixed
    seed reproduces the selection exactly.
    """
    X = _as_matrix(X)
    y = _as_labels(y, X.shape[0])
    w = _as_weights(sample_weight, X.shape[0])
    if n_candidates < 1:
        raise ValidationError("n_candidates must be >= 1")
    rng = np.random.default_rng(seed)
    candidates = [sample_candidate(kind, rng) for _ in range(n_candidates)]
    folds = _group_folds(groups, cv_folds, rng)
    all_rows = np.arange(X.shape[0])
    best_params, best_score = None, math.inf
    for i, params in enumerate(candidates):
        scores = []
        for val_rows in folds:
            train_rows = np.setdiff1d(all_rows, val_rows)
            y_val = y[val_rows]
            if train_rows.size == 0 or y_val.min() == y_val.max():
                continue
            model = make_model(kind, random_state=seed * 1000003 + i, **params)
            model.fit(X[train_rows], y[train_rows], sample_weight=w[train_rows])
            proba = model.predict_proba(X[val_rows])[:, 1]
            scores.append(eer(proba[y_val == 1.0], proba[y_val == 0.0]))
        if not scores:
            raise EmptyClass("every inner fold lacked a class; cannot score candidates")
        mean_eer = float(np.mean(scores))
        if mean_eer < best_score:
            best_params, best_score = params, mean_eer
    return best_params, best_score
