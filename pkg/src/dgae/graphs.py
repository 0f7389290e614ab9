"""Graph containers, file ingestion, edge splitting, and synthetic graphs.

File formats (all ASCII, whitespace-separated, '#' starts a comment line):

* edge list   -- one ``src dst`` pair per line
* features    -- one row per node: ``node_id v_1 ... v_f``
* labels      -- one row per node: ``node_id c_1 [c_2 ...]`` (one column
  per latent factor for synthetic graphs)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class Graph:
    """Undirected graph with dense node features and optional labels."""

    num_nodes: int
    edges: set[tuple[int, int]]  # canonical (i, j) with i < j
    features: np.ndarray         # (n, f)
    labels: np.ndarray | None = None  # (n,) or (n, m) integer class ids

    def __post_init__(self):
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop ({i}, {j}) is not allowed")
            if not (0 <= i < self.num_nodes and 0 <= j < self.num_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range")
        if self.features.shape[0] != self.num_nodes:
            raise ValueError(
                f"feature rows ({self.features.shape[0]}) != node count ({self.num_nodes})"
            )

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def adjacency(self, dtype=np.float64) -> np.ndarray:
        """Dense symmetric adjacency with a zero diagonal."""
        a = np.zeros((self.num_nodes, self.num_nodes), dtype=dtype)
        if self.edges:
            idx = np.array(sorted(self.edges))
            a[idx[:, 0], idx[:, 1]] = 1.0
            a[idx[:, 1], idx[:, 0]] = 1.0
        return a

    def directed_edge_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Each undirected edge listed in both directions: (src, dst) arrays."""
        if not self.edges:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy()
        idx = np.array(sorted(self.edges), dtype=np.int64)
        src = np.concatenate([idx[:, 0], idx[:, 1]])
        dst = np.concatenate([idx[:, 1], idx[:, 0]])
        order = np.lexsort((dst, src))
        return src[order], dst[order]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg


@dataclass
class EdgeSplit:
    """Train graph plus held-out positive/negative edge lists."""

    train: Graph
    val_pos: list[tuple[int, int]]
    val_neg: list[tuple[int, int]]
    test_pos: list[tuple[int, int]]
    test_neg: list[tuple[int, int]]


@dataclass
class SyntheticSpec:
    """Latent-factor graph recipe: one planted-partition graph per factor."""

    factors: int
    nodes: int
    classes: int
    intra_p: float
    inter_q: float
    seed: int = 0

    def __post_init__(self):
        if self.factors < 1 or self.nodes < 1 or self.classes < 1:
            raise ValueError("factors, nodes, and classes must be positive")
        if self.classes > self.nodes:
            raise ValueError("more classes than nodes")
        if not (0.0 <= self.inter_q <= self.intra_p <= 1.0):
            raise ValueError("need 0 <= q <= p <= 1")


def _canonical(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


def _read_rows(path) -> list[list[str]]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            rows.append([str(lineno)] + text.split())
    return rows


def load_graph(edge_path, feature_path=None, label_path=None) -> Graph:
    """Load a graph from disk, re-indexing node ids to 0..n-1.

    Duplicate edges collapse, self-loops are dropped with a warning, and a
    missing feature file yields identity features.
    """
    raw_edges: list[tuple[str, str]] = []
    for row in _read_rows(edge_path):
        if len(row) != 3:
            raise ValueError(f"{edge_path}:{row[0]}: expected 'src dst'")
        raw_edges.append((row[1], row[2]))

    feature_rows: dict[str, list[float]] = {}
    if feature_path is not None:
        for row in _read_rows(feature_path):
            if len(row) < 3:
                raise ValueError(f"{feature_path}:{row[0]}: expected 'node_id values...'")
            feature_rows[row[1]] = [float(v) for v in row[2:]]

    label_rows: dict[str, list[int]] = {}
    if label_path is not None:
        for row in _read_rows(label_path):
            if len(row) < 3:
                raise ValueError(f"{label_path}:{row[0]}: expected 'node_id class...'")
            label_rows[row[1]] = [int(v) for v in row[2:]]

    ids: set[str] = set(feature_rows) | set(label_rows)
    for a, b in raw_edges:
        ids.add(a)
        ids.add(b)
    ordered = sorted(ids, key=lambda s: (len(s), s) if s.isdigit() else (1 << 30, s))
    index = {node_id: i for i, node_id in enumerate(ordered)}
    n = len(ordered)

    edges: set[tuple[int, int]] = set()
    dropped = 0
    for a, b in raw_edges:
        i, j = index[a], index[b]
        if i == j:
            dropped += 1
            continue
        edges.add(_canonical(i, j))
    if dropped:
        warnings.warn(f"dropped {dropped} self-loop(s) from {edge_path}")

    if feature_path is None:
        features = np.eye(n)
    else:
        widths = {len(v) for v in feature_rows.values()}
        if len(widths) != 1:
            raise ValueError(f"{feature_path}: inconsistent feature widths {sorted(widths)}")
        if set(feature_rows) != set(ids):
            missing = sorted(ids - set(feature_rows))[:5]
            raise ValueError(f"{feature_path}: missing rows for nodes {missing}")
        f = widths.pop()
        features = np.zeros((n, f))
        for node_id, values in feature_rows.items():
            features[index[node_id]] = values

    labels = None
    if label_path is not None:
        widths = {len(v) for v in label_rows.values()}
        if len(widths) != 1:
            raise ValueError(f"{label_path}: inconsistent label widths {sorted(widths)}")
        if set(label_rows) != set(ids):
            missing = sorted(ids - set(label_rows))[:5]
            raise ValueError(f"{label_path}: missing rows for nodes {missing}")
        m = widths.pop()
        labels = np.zeros((n, m), dtype=np.int64)
        for node_id, values in label_rows.items():
            labels[index[node_id]] = values
        if m == 1:
            labels = labels[:, 0]

    return Graph(num_nodes=n, edges=edges, features=features, labels=labels)


def save_graph(graph: Graph, edge_path, feature_path=None, label_path=None) -> None:
    with open(edge_path, "w") as fh:
        for i, j in sorted(graph.edges):
            fh.write(f"{i} {j}\n")
    if feature_path is not None:
        with open(feature_path, "w") as fh:
            for i, row in enumerate(graph.features):
                fh.write(f"{i} " + " ".join(repr(float(v)) for v in row) + "\n")
    if label_path is not None and graph.labels is not None:
        labels = graph.labels
        if labels.ndim == 1:
            labels = labels[:, None]
        with open(label_path, "w") as fh:
            for i, row in enumerate(labels):
                fh.write(f"{i} " + " ".join(str(int(v)) for v in row) + "\n")


def split_edges(graph: Graph, val_frac: float, test_frac: float, seed: int) -> EdgeSplit:
    """Hold out edge fractions for validation/test with matched negatives.

    Positives are sampled uniformly without replacement; negatives are
    rejection-sampled non-edges of the full graph, disjoint across the two
    evaluation sets. Deterministic for a fixed seed.
    """
    if val_frac < 0 or test_frac < 0 or val_frac + test_frac >= 1:
        raise ValueError("need val_frac + test_frac < 1 and both nonnegative")
    rng = np.random.default_rng(seed)
    all_edges = sorted(graph.edges)
    order = rng.permutation(len(all_edges))

    n_val = int(len(all_edges) * val_frac)
    n_test = int(len(all_edges) * test_frac)
    val_pos = [all_edges[i] for i in order[:n_val]]
    test_pos = [all_edges[i] for i in order[n_val:n_val + n_test]]
    train_edges = {all_edges[i] for i in order[n_val + n_test:]}

    n = graph.num_nodes
    needed = n_val + n_test
    max_non_edges = n * (n - 1) // 2 - len(all_edges)
    if needed > max_non_edges:
        raise ValueError("graph too dense to sample matched negatives")
    negatives: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    while len(negatives) < needed:
        draws = rng.integers(0, n, size=(max(64, 2 * (needed - len(negatives))), 2))
        for i, j in draws:
            if i == j:
                continue
            pair = _canonical(int(i), int(j))
            if pair in graph.edges or pair in seen:
                continue
            seen.add(pair)
            negatives.append(pair)
            if len(negatives) == needed:
                break

    train = Graph(
        num_nodes=n,
        edges=train_edges,
        features=graph.features,
        labels=graph.labels,
    )
    return EdgeSplit(
        train=train,
        val_pos=val_pos,
        val_neg=negatives[:n_val],
        test_pos=test_pos,
        test_neg=negatives[n_val:],
    )


def synth_graph(spec: SyntheticSpec) -> Graph:
    """Union of per-factor planted-partition graphs.

    Per factor, nodes are split into equally sized classes after an
    independent random shuffle; same-class pairs connect with probability
    ``intra_p`` and others with ``inter_q``. The union adjacency defines
    the edges, node features are the rows of that adjacency, and the label
    matrix keeps one column per factor.
    """
    rng = np.random.default_rng(spec.seed)
    n, m = spec.nodes, spec.factors
    labels = np.zeros((n, m), dtype=np.int64)
    adj = np.zeros((n, n), dtype=bool)
    base = (np.arange(n) * spec.classes) // n  # class of rank i, balanced
    for factor in range(m):
        perm = rng.permutation(n)
        labels[perm, factor] = base
        same = labels[:, factor][:, None] == labels[:, factor][None, :]
        prob = np.where(same, spec.intra_p, spec.inter_q)
        draws = rng.random((n, n))
        upper = np.triu(draws < prob, k=1)
        adj |= upper | upper.T

    edges = {(int(i), int(j)) for i, j in zip(*np.nonzero(np.triu(adj, k=1)))}
    return Graph(
        num_nodes=n,
        edges=edges,
        features=adj.astype(np.float64),
        labels=labels,
    )


def joint_labels(labels: np.ndarray) -> np.ndarray:
    """Collapse an (n, m) per-factor label matrix into one combined id."""
    if labels.ndim == 1:
        return labels.copy()
    combined = np.zeros(labels.shape[0], dtype=np.int64)
    for col in range(labels.shape[1]):
        width = int(labels[:, col].max()) + 1
        combined = combined * width + labels[:, col]
    return combined


def tune_p_for_degree(nodes: int, classes: int, inter_q: float,
                      target_degree: float, seed: int = 0) -> float:
    """Closed-form intra-class probability hitting an expected mean degree.

    Solves ``target = p * (s - 1) + q * (n - s)`` for the average class
    size ``s = n / classes``, then verifies by sampling one graph (5%
    tolerance, skipped for near-zero targets where noise dominates).
    """
    if target_degree < 0 or target_degree > nodes - 1:
        raise ValueError("target degree must be within [0, n-1]")
    size = nodes / classes
    inter = inter_q * (nodes - size)
    p = (target_degree - inter) / (size - 1.0) if size > 1 else 0.0
    if p < -1e-9 or p > 1.0 + 1e-9:
        raise ValueError(
            f"target degree {target_degree} infeasible for q={inter_q}, classes={classes}"
        )
    p = min(max(p, 0.0), 1.0)

    sample = synth_graph(SyntheticSpec(
        factors=1, nodes=nodes, classes=classes, intra_p=p, inter_q=inter_q, seed=seed,
    ))
    realized = sample.degrees().mean()
    # 5% of target, widened when Bernoulli noise dominates on small graphs
    # (std of the sampled mean degree is about sqrt(2 * target / n))
    tolerance = max(0.05 * target_degree, 4.0 * np.sqrt(2.0 * max(target_degree, 1e-12) / nodes))
    if target_degree >= 1 and abs(realized - target_degree) > tolerance:
        raise ValueError(
            f"sampled mean degree {realized:.2f} misses target {target_degree}"
        )
    return p
