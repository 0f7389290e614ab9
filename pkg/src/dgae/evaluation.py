"""Link-prediction metrics, clustering with label matching, and
latent-correlation diagnostics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .decoder import decode_pairs
from .encoder import encode
from .flows import apply_flows
from .graphs import Graph
from .tensor import Tensor


# ---------------------------------------------------------------------------
# ranking metrics

def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def rank_metrics(pos_scores, neg_scores) -> tuple[float, float]:
    """AUC and average precision for positive vs. negative score lists.

    AUC counts correctly ordered (positive, negative) pairs with ties worth
    one half. AP sorts all scores descending (ties keep input order,
    positives listed first) and averages the precision at each positive's
    rank.
    """
    pos = np.asarray(pos_scores, dtype=float).reshape(-1)
    neg = np.asarray(neg_scores, dtype=float).reshape(-1)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("rank_metrics needs non-empty score lists")

    ranks = _midranks(np.concatenate([pos, neg]))
    auc = (ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0) / (
        len(pos) * len(neg)
    )

    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    order = np.argsort(-np.concatenate([pos, neg]), kind="stable")
    hits = labels[order].cumsum()
    positions = np.nonzero(labels[order])[0]
    ap = float((hits[positions] / (positions + 1)).mean())
    return float(auc), ap


# ---------------------------------------------------------------------------
# clustering

def kmeans(points: np.ndarray, k: int, seed: int, restarts: int = 20,
           max_iter: int = 300, tol: float = 1e-6) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding and restart selection.

    Empty clusters are re-seeded to the point farthest from its current
    center. Deterministic for a fixed seed; the best run by inertia wins.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    sq_norms = (points * points).sum(axis=1)

    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _plus_plus_init(points, k, rng, sq_norms)
        labels = np.zeros(n, dtype=np.int64)
        previous = np.inf
        for _ in range(max_iter):
            d2 = _pairwise_sq(points, centers, sq_norms)
            labels = d2.argmin(axis=1)
            closest = d2[np.arange(n), labels]
            for c in range(k):
                members = labels == c
                if members.any():
                    centers[c] = points[members].mean(axis=0)
                else:
                    centers[c] = points[closest.argmax()]
            inertia = float(closest.sum())
            if abs(previous - inertia) <= tol * max(inertia, 1e-12):
                break
            previous = inertia
        d2 = _pairwise_sq(points, centers, sq_norms)
        labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    return best_labels


def _plus_plus_init(points, k, rng, sq_norms):
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = _pairwise_sq(points, centers[:1], sq_norms)[:, 0]
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            choice = rng.integers(n)
        else:
            choice = rng.choice(n, p=d2 / total)
        centers[i] = points[choice]
        d2 = np.minimum(d2, _pairwise_sq(points, centers[i:i + 1], sq_norms)[:, 0])
    return centers


def _pairwise_sq(points, centers, sq_norms):
    d2 = sq_norms[:, None] - 2.0 * points @ centers.T + (centers * centers).sum(axis=1)
    return np.maximum(d2, 0.0)


def munkres_match(pred_labels, true_labels) -> np.ndarray:
    """Best mapping from predicted cluster ids to true class ids.

    Maximizes the matched count via min-cost assignment on the negated
    confusion matrix. Predicted ids must not outnumber true ids. Returns
    an array mapping each predicted id to a distinct true id.
    """
    pred = np.asarray(pred_labels, dtype=np.int64)
    true = np.asarray(true_labels, dtype=np.int64)
    if pred.shape != true.shape:
        raise ValueError("label arrays must have equal length")
    n_pred = int(pred.max()) + 1
    n_true = int(true.max()) + 1
    if n_pred > n_true:
        raise ValueError("more predicted label ids than true label ids")
    confusion = np.zeros((n_pred, n_true), dtype=np.int64)
    np.add.at(confusion, (pred, true), 1)
    rows, cols = linear_sum_assignment(-confusion)
    mapping = np.zeros(n_pred, dtype=np.int64)
    mapping[rows] = cols
    return mapping


def clustering_metrics(matched_pred, true_labels) -> dict[str, float]:
    """Accuracy, macro precision/F1, NMI, and ARI of a matched labeling."""
    pred = np.asarray(matched_pred, dtype=np.int64)
    true = np.asarray(true_labels, dtype=np.int64)
    if pred.shape != true.shape:
        raise ValueError("label arrays must have equal length")
    acc = float((pred == true).mean())

    classes = np.unique(true)
    precisions, f1s = [], []
    for c in classes:
        tp = float(((pred == c) & (true == c)).sum())
        fp = float(((pred == c) & (true != c)).sum())
        fn = float(((pred != c) & (true == c)).sum())
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        precisions.append(precision)
        f1s.append(f1)

    return {
        "acc": acc,
        "precision": float(np.mean(precisions)),
        "f1": float(np.mean(f1s)),
        "nmi": normalized_mutual_info(pred, true),
        "ari": adjusted_rand_index(pred, true),
    }


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    table = np.zeros((int(a.max()) + 1, int(b.max()) + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def normalized_mutual_info(a, b) -> float:
    """Mutual information normalized by the arithmetic entropy mean.

    Defined as zero (with a warning) when either labeling is constant.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n = len(a)
    table = _contingency(a, b)
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    ha = -np.sum(pa[pa > 0] * np.log(pa[pa > 0]))
    hb = -np.sum(pb[pb > 0] * np.log(pb[pb > 0]))
    if ha == 0.0 or hb == 0.0:
        warnings.warn("constant labeling: NMI defined as 0")
        return 0.0
    joint = table / n
    outer = pa[:, None] * pb[None, :]
    mask = joint > 0
    mi = float(np.sum(joint[mask] * np.log(joint[mask] / outer[mask])))
    return float(mi / (0.5 * (ha + hb)))


def adjusted_rand_index(a, b) -> float:
    """Rand index corrected for chance via the usual expected-index form."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    table = _contingency(a, b)
    n = len(a)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(table.astype(float)).sum()
    sum_a = comb2(table.sum(axis=1).astype(float)).sum()
    sum_b = comb2(table.sum(axis=0).astype(float)).sum()
    expected = sum_a * sum_b / comb2(float(n))
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0  # both partitions trivial; identical by structure
    return float((sum_cells - expected) / (maximum - expected))


# ---------------------------------------------------------------------------
# latent correlation

@dataclass
class CorrelationReport:
    matrix: np.ndarray               # absolute Pearson correlations, (d, d)
    within_mean: float | None = None
    between_mean: float | None = None

    @property
    def block_ratio(self) -> float | None:
        if self.within_mean is None or not self.between_mean:
            return None
        return self.within_mean / self.between_mean


def latent_correlation(z: np.ndarray, channel_dim: int | None = None) -> CorrelationReport:
    """Absolute Pearson correlation between embedding dimensions.

    Zero-variance columns produce zero rows/columns (flagged with a
    warning). With ``channel_dim`` given, also summarizes the mean
    off-diagonal |correlation| inside each channel-aligned diagonal block
    against the mean between blocks.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[0] < 2:
        raise ValueError("need at least two rows of embeddings")
    n, d = z.shape
    centered = z - z.mean(axis=0)
    std = centered.std(axis=0)
    degenerate = std == 0
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} zero-variance dimension(s); rows zeroed")
    safe = np.where(degenerate, 1.0, std)
    unit = centered / safe
    corr = np.abs(unit.T @ unit / n)
    corr[degenerate, :] = 0.0
    corr[:, degenerate] = 0.0

    if channel_dim is None:
        return CorrelationReport(matrix=corr)
    if d % channel_dim != 0:
        raise ValueError(f"width {d} not divisible by channel_dim {channel_dim}")
    blocks = d // channel_dim
    block_of = np.repeat(np.arange(blocks), channel_dim)
    same_block = block_of[:, None] == block_of[None, :]
    off_diag = ~np.eye(d, dtype=bool)
    within = corr[same_block & off_diag]
    between = corr[~same_block]
    return CorrelationReport(
        matrix=corr,
        within_mean=float(within.mean()) if within.size else None,
        between_mean=float(between.mean()) if between.size else None,
    )


# ---------------------------------------------------------------------------
# model-level evaluation

def embed(model, graph: Graph) -> np.ndarray:
    """Test-time node embeddings: posterior means, flowed for dvga."""
    dtype = model.encoder.layers[0].weights[0].dtype
    x = Tensor(graph.features.astype(dtype))
    src, dst = graph.directed_edge_index()
    result = encode(
        x, src, dst, graph.num_nodes, model.encoder,
        variational=model.mode == "dvga", eps=None,
    )
    z, _ = apply_flows(result.z, model.flows)
    return np.array(z.data, dtype=float)


def score_pairs(z: np.ndarray, channels: int, pairs) -> np.ndarray:
    """Decoder scores restricted to the given node pairs."""
    return decode_pairs(z, channels, pairs)


def evaluate_link_prediction(model, split, channels: int) -> dict[str, float]:
    """Test AUC/AP from embeddings of the train graph."""
    z = embed(model, split.train)
    pos = score_pairs(z, channels, split.test_pos)
    neg = score_pairs(z, channels, split.test_neg)
    auc, ap = rank_metrics(pos, neg)
    return {"auc": auc, "ap": ap}


def evaluate_clustering(model, graph: Graph, k: int, seed: int,
                        true_labels: np.ndarray) -> dict[str, float]:
    """K-means on embeddings, label-matched against the given classes."""
    z = embed(model, graph)
    pred = kmeans(z, k, seed)
    true = np.asarray(true_labels, dtype=np.int64)
    mapping = munkres_match(pred, true)
    return clustering_metrics(mapping[pred], true)


def evaluate_correlation(model, graph: Graph, channel_dim: int) -> CorrelationReport:
    return latent_correlation(embed(model, graph), channel_dim=channel_dim)


def mean_stderr(values) -> tuple[float, float]:
    """Mean and standard error of a metric across runs."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("no values to aggregate")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))
