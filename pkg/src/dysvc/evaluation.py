"""Objective evaluation: MST-based Dp divergence, a linear SVM and the augmentation harness."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import SchemaMismatch, SingleClass, TooFewPoints
from .features import SCHEMA_VERSION

PRIM_MAX_N = 2000
KNN_K = 16
DP_TRIALS = 50
SVM_LAMBDA = 1e-3
SVM_EPOCHS = 200
NOISE_SNR_DB = 10.0


@dataclass
class LabeledSet:
    vectors: np.ndarray
    labels: np.ndarray
    speaker_ids: np.ndarray = None

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        self.labels = np.asarray(self.labels)
        if self.speaker_ids is None:
            self.speaker_ids = np.array([""] * len(self.labels))
        self.speaker_ids = np.asarray(self.speaker_ids)
        n = self.vectors.shape[0]
        if self.labels.shape != (n,) or self.speaker_ids.shape != (n,):
            raise ValueError("vectors, labels and speaker_ids disagree on row count")

    def __len__(self):
        return self.vectors.shape[0]

    def subset(self, rows) -> "LabeledSet":
        return LabeledSet(self.vectors[rows], self.labels[rows], self.speaker_ids[rows])

    @staticmethod
    def concat(sets: Sequence["LabeledSet"]) -> "LabeledSet":
        sets = [s for s in sets if len(s)]
        return LabeledSet(np.vstack([s.vectors for s in sets]),
                          np.concatenate([s.labels for s in sets]),
                          np.concatenate([s.speaker_ids for s in sets]))


@dataclass
class DivergenceReport:
    dp: float
    n_trials: int
    per_trial: List[float]
    balanced_n: int


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    reg_lambda: float
    classes: tuple
    mean: np.ndarray
    scale: np.ndarray
    schema_version: str = SCHEMA_VERSION


# ---------------------------------------------------------------------------
# minimum spanning tree


def _prim(points: np.ndarray):
    n = len(points)
    dist = cdist(points, points)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    parent = np.full(n, -1)
    in_tree[0] = True
    best[1:] = dist[0, 1:]
    parent[1:] = 0
    edges = []
    for _ in range(n - 1):
        cand = np.flatnonzero(~in_tree)
        w = best[cand]
        wmin = w.min()
        tied = cand[w == wmin]
        # lexicographic tie-break on (weight, smaller index, larger index)
        keys = [(min(v, parent[v]), max(v, parent[v])) for v in tied]
        v = tied[min(range(len(tied)), key=keys.__getitem__)]
        edges.append((int(min(v, parent[v])), int(max(v, parent[v])), float(wmin)))
        in_tree[v] = True
        closer = (~in_tree) & (dist[v] < best)
        # equal distance: keep the parent giving the lexicographically smaller edge
        ties = (~in_tree) & (dist[v] == best)
        for u in np.flatnonzero(ties):
            if (min(u, v), max(u, v)) < (min(u, parent[u]), max(u, parent[u])):
                parent[u] = v
        best[closer] = dist[v, closer]
        parent[closer] = v
    return edges


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def _kruskal_knn(points: np.ndarray, k: int = KNN_K):
    n = len(points)
    tree = cKDTree(points)
    d, j = tree.query(points, k=min(k + 1, n))
    cand = {}
    for i in range(n):
        for dist, nb in zip(d[i, 1:], j[i, 1:]):
            a, b = min(i, nb), max(i, nb)
            cand[(a, b)] = float(dist)
    ds = _DisjointSet(n)
    edges = []
    for (a, b), w in sorted(cand.items(), key=lambda e: (e[1], e[0])):
        if ds.union(a, b):
            edges.append((a, b, w))
    # connect any remaining components through their closest cross pairs
    while len(edges) < n - 1:
        roots = np.array([ds.find(i) for i in range(n)])
        comp = roots == roots[0]
        inside, outside = np.flatnonzero(comp), np.flatnonzero(~comp)
        dd = cdist(points[inside], points[outside])
        flat = int(np.argmin(dd))
        a, b = int(inside[flat // dd.shape[1]]), int(outside[flat % dd.shape[1]])
        ds.union(a, b)
        edges.append((min(a, b), max(a, b), float(dd.flat[flat])))
    return sorted(edges, key=lambda e: (e[2], e[0], e[1]))


def euclidean_mst(points) -> List[tuple]:
    """Edges ``(i, j, weight)`` with ``i < j`` of the Euclidean minimum spanning tree.

    Dense Prim up to 2000 points, Kruskal over a 16-nearest-neighbour graph
    beyond that.  The kNN route is exact unless the true tree needs an edge
    outside every endpoint's neighbour list.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) < 2:
        raise TooFewPoints(f"MST needs at least 2 points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    if len(pts) <= PRIM_MAX_N:
        return _prim(pts)
    return _kruskal_knn(pts)


def cross_edges(x, y) -> int:
    x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
    y = np.asarray(y, dtype=np.float64).reshape(len(y), -1)
    pooled = np.vstack([x, y])
    n = len(x)
    return sum((a < n) != (b < n) for a, b, _ in euclidean_mst(pooled))


def dp_divergence(x, y) -> float:
    n, m = len(x), len(y)
    if n < 1 or m < 1:
        raise TooFewPoints("both samples need at least one point")
    c = cross_edges(x, y)
    return float(min(max(1.0 - c * (n + m) / (2.0 * n * m), 0.0), 1.0))


def bootstrap_dp(x, y, n_trials: int = DP_TRIALS, seed: int = 0, rows_cap: Optional[int] = None) -> DivergenceReport:
    """Average Dp over ``n_trials`` class-balanced subsamples.

    Each trial draws ``min(N, M)`` rows without replacement from both sets
    (``rows_cap`` lowers that size further).  Trial ``t`` uses its own
    generator seeded by ``(seed, t)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 1 or len(y) < 1:
        raise TooFewPoints("both samples need at least one point")
    k = min(len(x), len(y))
    if rows_cap is not None:
        k = min(k, rows_cap)
    trials = []
    for t in range(n_trials):
        rng = np.random.default_rng([seed, t])
        xs = x if len(x) == k else x[np.sort(rng.choice(len(x), k, replace=False))]
        ys = y if len(y) == k else y[np.sort(rng.choice(len(y), k, replace=False))]
        trials.append(dp_divergence(xs, ys))
    return DivergenceReport(float(np.mean(trials)), n_trials, trials, k)


# ---------------------------------------------------------------------------
# linear SVM


def train_svm(train: LabeledSet, reg_lambda: float = SVM_LAMBDA, epochs: int = SVM_EPOCHS,
              seed: int = 0, positive=None) -> LinearSvmModel:
    """Pegasos on standardised features; the bias is a constant unit feature.

    ``positive`` picks which class gets the +1 side; by default it is the
    larger of the two sorted labels.
    """
    classes = sorted(set(train.labels.tolist()))
    if len(classes) != 2:
        raise SingleClass(f"need exactly two classes, got {classes}")
    if positive is None:
        positive = classes[1]
    negative = classes[0] if classes[1] == positive else classes[1]
    x = train.vectors
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    z = np.hstack([(x - mean) / scale, np.ones((len(x), 1))])
    y = np.where(train.labels == positive, 1.0, -1.0)
    rng = np.random.default_rng(seed)
    w = np.zeros(z.shape[1])
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(len(z)):
            t += 1
            eta = 1.0 / (reg_lambda * t)
            margin = y[i] * (z[i] @ w)
            w *= 1.0 - eta * reg_lambda
            if margin < 1.0:
                w += eta * y[i] * z[i]
    weights = w[:-1] / scale
    bias = float(w[-1] - weights @ mean)
    return LinearSvmModel(weights, bias, reg_lambda, (negative, positive), mean, scale)


def decision_function(model: LinearSvmModel, vectors) -> np.ndarray:
    x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if x.shape[1] != model.weights.size:
        raise SchemaMismatch(f"model expects {model.weights.size} features, got {x.shape[1]}")
    return x @ model.weights + model.bias


def predict(model: LinearSvmModel, vectors, schema_version: str = SCHEMA_VERSION) -> np.ndarray:
    if schema_version != model.schema_version:
        raise SchemaMismatch(f"model schema {model.schema_version}, vectors {schema_version}")
    score = decision_function(model, vectors)
    neg, pos = model.classes
    return np.where(score > 0, pos, neg)


# ---------------------------------------------------------------------------
# evaluation procedures


def objective_eval(healthy_test: np.ndarray, transformed_test: np.ndarray,
                   als_train: np.ndarray, healthy_train: np.ndarray,
                   n_trials: int = DP_TRIALS, seed: int = 0,
                   dp_sets: Optional[Dict[str, np.ndarray]] = None,
                   dp_rows_cap: Optional[int] = None,
                   svm_lambda: float = SVM_LAMBDA, svm_epochs: int = SVM_EPOCHS) -> dict:
    """Dp of healthy and transformed test material against ALS, plus SVM ALS rates.

    The first four arguments are utterance-level eval vectors.  ``dp_sets``
    optionally supplies separate ``{"healthy", "transformed", "als"}`` point
    clouds for the divergence (for instance frame-level vocoder features);
    otherwise the eval vectors are used.
    """
    if dp_sets is None:
        dp_sets = {"healthy": healthy_test, "transformed": transformed_test, "als": als_train}
    d_h = bootstrap_dp(dp_sets["healthy"], dp_sets["als"], n_trials, seed, dp_rows_cap)
    d_t = bootstrap_dp(dp_sets["transformed"], dp_sets["als"], n_trials, seed, dp_rows_cap)

    train = LabeledSet(np.vstack([als_train, healthy_train]),
                       np.array(["als"] * len(als_train) + ["healthy"] * len(healthy_train)))
    svm = train_svm(train, svm_lambda, svm_epochs, seed, positive="als")
    pct_h = 100.0 * float(np.mean(predict(svm, healthy_test) == "als"))
    pct_t = 100.0 * float(np.mean(predict(svm, transformed_test) == "als"))
    return {
        "dp_healthy_als": d_h.dp,
        "dp_transformed_als": d_t.dp,
        "pct_healthy_as_als": pct_h,
        "pct_transformed_as_als": pct_t,
        "trials": n_trials,
        "seed": seed,
        "dp_balanced_n": {"healthy": d_h.balanced_n, "transformed": d_t.balanced_n},
        "dp_per_trial": {"healthy": d_h.per_trial, "transformed": d_t.per_trial},
        "svm": {"kernel": "linear", "reg_lambda": svm_lambda, "epochs": svm_epochs,
                "n_train": len(train)},
    }


def add_white_noise(x: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add Gaussian noise scaled so that signal power / noise power is exactly ``snr_db``."""
    x = np.asarray(x, dtype=np.float64)
    noise = rng.standard_normal(x.shape)
    p_sig = np.mean(x ** 2)
    p_noise = np.mean(noise ** 2)
    return x + noise * np.sqrt(p_sig / (p_noise * 10.0 ** (snr_db / 10.0)))


def augmentation_experiment(base: LabeledSet, augmented_pool: Sequence[LabeledSet],
                            noise_pool: Optional[Sequence[LabeledSet]] = None,
                            k_max: Optional[int] = None, seed: int = 0,
                            svm_lambda: float = SVM_LAMBDA, svm_epochs: int = SVM_EPOCHS) -> List[dict]:
    """Leave-one-original-speaker-out accuracy as simulated speakers are added.

    Row ``k`` trains on the base set (minus the held-out speaker) plus the
    first ``k`` entries of ``augmented_pool``; ``baseline_accuracy`` uses the
    first ``k`` entries of ``noise_pool`` (noisy duplicates of base speakers)
    instead.  A noisy duplicate of the held-out speaker is skipped in that
    speaker's fold.  Accuracy is the utterance-level accuracy of each fold,
    averaged over folds.
    """
    if k_max is None:
        k_max = len(augmented_pool)
    speakers = sorted(set(base.speaker_ids.tolist()))

    def curve_point(extra: Sequence[LabeledSet]) -> float:
        accs = []
        for spk in speakers:
            held = base.speaker_ids == spk
            parts = [base.subset(~held)] + [e for e in extra if spk not in set(e.speaker_ids.tolist())]
            model = train_svm(LabeledSet.concat(parts), svm_lambda, svm_epochs, seed)
            pred = predict(model, base.vectors[held])
            accs.append(float(np.mean(pred == base.labels[held])))
        return float(np.mean(accs))

    rows = []
    for k in range(k_max + 1):
        acc = curve_point(augmented_pool[:k])
        if noise_pool is None:
            base_acc = float("nan")
        else:
            base_acc = acc if k == 0 else curve_point(noise_pool[:k])
        rows.append({"k": k, "accuracy": acc, "baseline_accuracy": base_acc})
    return rows
