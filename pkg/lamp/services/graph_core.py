"""Graph data model, TU-format ingestion, degree featurization and batching.

Graphs are simple and undirected. Edges are stored once per unordered pair as
an (E, 2) int64 array with ``u < v``, rows in ascending order; every array a
Graph holds is read-only after construction.
"""

import io
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from lamp.services.exceptions import ArgumentError, FormatError, GraphError, LoadError

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def _canonical_edges(edges, node_count: int) -> np.ndarray:
    pairs = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if pairs.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if (pairs < 0).any() or (pairs >= node_count).any():
        raise GraphError(f"edge endpoint outside [0, {node_count})")
    if (pairs[:, 0] == pairs[:, 1]).any():
        raise GraphError("self-loops are not allowed in a simple graph")
    lo = pairs.min(axis=1)
    hi = pairs.max(axis=1)
    # np.unique sorts rows lexicographically and drops duplicate pairs
    return np.unique(np.stack([lo, hi], axis=1), axis=0)


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph with node features and an optional class label."""

    node_count: int
    edges: np.ndarray
    features: np.ndarray
    label: int | None = None

    def __post_init__(self):
        if self.node_count < 1:
            raise GraphError("a graph needs at least one node")
        if self.edges.ndim != 2 or self.edges.shape[1] != 2:
            raise GraphError(f"edges must be an (E, 2) array, got {self.edges.shape}")
        if self.edges.size and (
            self.edges.min() < 0 or self.edges.max() >= self.node_count
        ):
            raise GraphError(f"edge endpoint outside [0, {self.node_count})")
        if self.features.ndim != 2 or self.features.shape[0] != self.node_count:
            raise GraphError(
                f"features must have {self.node_count} rows, got {self.features.shape}"
            )

    @classmethod
    def build(cls, node_count: int, edges=(), features=None, label: int | None = None):
        """Canonicalize an arbitrary pair list (either orientation, repeats allowed)."""
        if node_count < 1:
            raise GraphError("a graph needs at least one node")
        canonical = _canonical_edges(edges, node_count)
        if features is None:
            matrix = np.ones((node_count, 1), dtype=np.float64)
        else:
            matrix = np.array(features, dtype=np.float64, copy=True)
            if matrix.ndim == 1:
                matrix = matrix.reshape(node_count, -1)
        return cls(
            node_count=int(node_count),
            edges=_frozen(canonical),
            features=_frozen(matrix),
            label=None if label is None else int(label),
        )

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.node_count)

    def neighbors(self) -> list[list[int]]:
        adjacency: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in self.edges.tolist():
            adjacency[u].append(v)
            adjacency[v].append(u)
        return adjacency

    def induced_subgraph(self, nodes) -> "Graph":
        """Keep ``nodes`` (re-indexed in ascending original order) and the edges among them."""
        keep = np.unique(np.asarray(nodes, dtype=np.int64))
        if keep.size == 0:
            raise GraphError("an induced subgraph needs at least one node")
        new_index = np.full(self.node_count, -1, dtype=np.int64)
        new_index[keep] = np.arange(keep.size)
        mapped = new_index[self.edges]
        inside = (mapped >= 0).all(axis=1)
        return Graph.build(
            keep.size, mapped[inside], self.features[keep], label=self.label
        )

    def relabel(self, permutation) -> "Graph":
        """Node ``i`` becomes node ``permutation[i]``."""
        perm = np.asarray(permutation, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.node_count)):
            raise ArgumentError("relabel needs a permutation of the node indices")
        features = np.empty_like(self.features)
        features[perm] = self.features
        return Graph.build(self.node_count, perm[self.edges], features, self.label)

    def with_features(self, features) -> "Graph":
        return Graph.build(self.node_count, self.edges, features, self.label)


@dataclass(frozen=True, eq=False)
class Dataset:
    graphs: tuple[Graph, ...]
    num_classes: int
    feature_dim: int
    name: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for index, graph in enumerate(self.graphs):
            if graph.feature_dim != self.feature_dim:
                raise GraphError(
                    f"graph {index} has feature_dim {graph.feature_dim}, "
                    f"dataset declares {self.feature_dim}"
                )
            if graph.label is not None and not 0 <= graph.label < self.num_classes:
                raise GraphError(
                    f"graph {index} label {graph.label} outside [0, {self.num_classes})"
                )

    def __len__(self):
        return len(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.array(
            [-1 if g.label is None else g.label for g in self.graphs], dtype=np.int64
        )

    def describe(self) -> dict:
        """JSON-ready metadata echo."""
        return {
            "name": self.name,
            "num_graphs": len(self.graphs),
            "num_classes": self.num_classes,
            "feature_dim": self.feature_dim,
            **self.metadata,
        }


@dataclass(frozen=True, eq=False)
class GraphBatch:
    """Disjoint union of graphs; ``graph_ids`` maps each node to its source graph."""

    total_nodes: int
    edges: np.ndarray
    features: np.ndarray
    graph_ids: np.ndarray
    batch_size: int
    node_counts: np.ndarray
    labels: np.ndarray

    @property
    def node_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.node_counts)[:-1]])


# =========================================================================
# TU FORMAT
# =========================================================================


def _read_ints(path: Path, *, columns: int) -> np.ndarray:
    # TU files mix "1, 2" and "1,2"; whitespace splitting accepts both
    text = path.read_text().replace(",", " ")
    try:
        values = np.loadtxt(io.StringIO(text), dtype=np.int64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"unparseable integer content ({exc})", path=path) from exc
    if values.size == 0:
        return values.reshape(0, columns)
    if values.shape[1] != columns:
        raise FormatError(
            f"expected {columns} comma-separated column(s), found {values.shape[1]}",
            path=path,
            line=1,
        )
    return values


def _find_prefix(directory: Path) -> str:
    matches = sorted(directory.glob("*_A.txt"))
    if len(matches) != 1:
        raise LoadError(f"missing mandatory file {directory / (directory.name + '_A.txt')}")
    return matches[0].name[: -len("_A.txt")]


def _mandatory(directory: Path, name: str, suffix: str) -> Path:
    path = directory / f"{name}_{suffix}.txt"
    if not path.is_file():
        raise LoadError(f"missing mandatory file {path}")
    return path


def load_tu_dataset(directory_path) -> Dataset:
    """Read the TU text layout: 1-based comma-separated edge pairs plus indicator/label files."""
    directory = Path(directory_path)
    if not directory.is_dir():
        raise LoadError(f"dataset directory not found: {directory}")
    name = _find_prefix(directory)
    a_path = _mandatory(directory, name, "A")
    indicator_path = _mandatory(directory, name, "graph_indicator")
    labels_path = _mandatory(directory, name, "graph_labels")
    node_labels_path = directory / f"{name}_node_labels.txt"

    indicator = _read_ints(indicator_path, columns=1)[:, 0]
    graph_labels = _read_ints(labels_path, columns=1)[:, 0]
    num_graphs = graph_labels.size
    total_nodes = indicator.size
    if num_graphs == 0 or total_nodes == 0:
        raise FormatError("dataset has no graphs", path=labels_path)

    bad = np.flatnonzero((indicator < 1) | (indicator > num_graphs))
    if bad.size:
        raise FormatError(
            f"graph id {indicator[bad[0]]} outside [1, {num_graphs}]",
            path=indicator_path,
            line=int(bad[0]) + 1,
        )
    decreasing = np.flatnonzero(np.diff(indicator) < 0)
    if decreasing.size:
        raise FormatError(
            "graph indicator must be non-decreasing",
            path=indicator_path,
            line=int(decreasing[0]) + 2,
        )
    node_counts = np.bincount(indicator - 1, minlength=num_graphs)
    empty = np.flatnonzero(node_counts == 0)
    if empty.size:
        raise FormatError(f"graph {empty[0] + 1} has no nodes", path=indicator_path)
    first_node = np.concatenate([[0], np.cumsum(node_counts)[:-1]])

    pairs = _read_ints(a_path, columns=2)
    bad = np.flatnonzero(((pairs < 1) | (pairs > total_nodes)).any(axis=1))
    if bad.size:
        raise FormatError(
            f"node index outside [1, {total_nodes}]", path=a_path, line=int(bad[0]) + 1
        )
    pairs = pairs - 1
    owner = indicator[pairs] - 1
    crossing = np.flatnonzero(owner[:, 0] != owner[:, 1])
    if crossing.size:
        row = int(crossing[0])
        raise FormatError(
            f"edge ({pairs[row, 0] + 1}, {pairs[row, 1] + 1}) references a node "
            f"outside graph {owner[row, 0] + 1}",
            path=a_path,
            line=row + 1,
        )
    loops = np.flatnonzero(pairs[:, 0] == pairs[:, 1])
    if loops.size:
        raise FormatError(
            "self-loops are not allowed", path=a_path, line=int(loops[0]) + 1
        )

    # Duplicates and reverse directions collapse here; nodes of one graph are
    # contiguous, so sorted unique pairs come out grouped by graph.
    canonical = np.unique(np.sort(pairs, axis=1), axis=0)
    edge_owner = indicator[canonical[:, 0]] - 1
    bounds = np.searchsorted(edge_owner, np.arange(num_graphs + 1))

    has_node_labels = node_labels_path.is_file()
    if has_node_labels:
        node_labels = _read_ints(node_labels_path, columns=1)[:, 0]
        if node_labels.size != total_nodes:
            raise FormatError(
                f"expected {total_nodes} node labels, found {node_labels.size}",
                path=node_labels_path,
            )
        node_label_values, node_codes = np.unique(node_labels, return_inverse=True)
        features = np.eye(node_label_values.size, dtype=np.float64)[node_codes]
    else:
        node_label_values = np.zeros(0, dtype=np.int64)
        features = np.ones((total_nodes, 1), dtype=np.float64)

    label_values, label_codes = np.unique(graph_labels, return_inverse=True)

    graphs = []
    for g in range(num_graphs):
        start = first_node[g]
        local = canonical[bounds[g] : bounds[g + 1]] - start
        graphs.append(
            Graph(
                node_count=int(node_counts[g]),
                edges=_frozen(local.copy()),
                features=_frozen(features[start : start + node_counts[g]].copy()),
                label=int(label_codes[g]),
            )
        )

    dataset = Dataset(
        graphs=tuple(graphs),
        num_classes=int(label_values.size),
        feature_dim=int(features.shape[1]),
        name=name,
        metadata={
            "source": str(directory),
            "label_values": label_values.tolist(),
            "has_node_labels": has_node_labels,
            "node_label_values": node_label_values.tolist(),
            "features": "node_labels" if has_node_labels else "constant",
        },
    )
    logger.info(
        "Loaded %s: %d graphs, %d classes, %d nodes, %d undirected edges",
        name,
        num_graphs,
        dataset.num_classes,
        total_nodes,
        canonical.shape[0],
    )
    return dataset


def featurize_degrees(dataset: Dataset, max_degree: int) -> Dataset:
    """Replace node features by a one-hot of min(degree, max_degree)."""
    if max_degree < 1:
        raise ArgumentError(f"max_degree must be >= 1, got {max_degree}")
    eye = np.eye(max_degree + 1, dtype=np.float64)
    graphs = tuple(
        graph.with_features(eye[np.minimum(graph.degrees(), max_degree)])
        for graph in dataset.graphs
    )
    return replace(
        dataset,
        graphs=graphs,
        feature_dim=max_degree + 1,
        metadata={**dataset.metadata, "features": "degree", "max_degree": max_degree},
    )


def prepare_dataset(directory_path, max_degree: int) -> Dataset:
    """Load, then degree-featurize when the files carry no node labels."""
    from lamp.policies.datasets import needs_degree_features

    dataset = load_tu_dataset(directory_path)
    if needs_degree_features(dataset):
        logger.info("%s has no node labels; using degree one-hot features", dataset.name)
        dataset = featurize_degrees(dataset, max_degree)
    return dataset


# =========================================================================
# BATCHING
# =========================================================================


def make_batch(graphs) -> GraphBatch:
    graphs = list(graphs)
    if not graphs:
        raise ArgumentError("make_batch needs at least one graph")
    dims = {g.feature_dim for g in graphs}
    if len(dims) != 1:
        raise ArgumentError(f"mixed feature dims in batch: {sorted(dims)}")

    node_counts = np.array([g.node_count for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(node_counts)[:-1]])
    edges = np.concatenate(
        [g.edges + offset for g, offset in zip(graphs, offsets)], axis=0
    ).reshape(-1, 2)
    return GraphBatch(
        total_nodes=int(node_counts.sum()),
        edges=edges,
        features=np.concatenate([g.features for g in graphs], axis=0),
        graph_ids=np.repeat(np.arange(len(graphs)), node_counts),
        batch_size=len(graphs),
        node_counts=node_counts,
        labels=np.array([-1 if g.label is None else g.label for g in graphs]),
    )


def unbatch(batch: GraphBatch) -> list[Graph]:
    offsets = batch.node_offsets
    edge_owner = batch.graph_ids[batch.edges[:, 0]] if batch.edges.size else np.zeros(0)
    graphs = []
    for g in range(batch.batch_size):
        start, count = int(offsets[g]), int(batch.node_counts[g])
        label = int(batch.labels[g])
        graphs.append(
            Graph.build(
                count,
                batch.edges[edge_owner == g] - start,
                batch.features[start : start + count],
                None if label < 0 else label,
            )
        )
    return graphs


def volume(graph: Graph) -> int:
    """vol(V): the sum of all node degrees."""
    return 2 * graph.num_edges


def dataset_statistics(dataset: Dataset) -> dict:
    nodes = np.array([g.node_count for g in dataset.graphs], dtype=np.float64)
    edges = np.array([g.num_edges for g in dataset.graphs], dtype=np.float64)
    counts = np.bincount(dataset.labels[dataset.labels >= 0], minlength=dataset.num_classes)
    return {
        "name": dataset.name,
        "graphs": len(dataset),
        "classes": dataset.num_classes,
        "avg_nodes": float(nodes.mean()),
        "std_nodes": float(nodes.std()),
        "avg_edges": float(edges.mean()),
        "feature_dim": dataset.feature_dim,
        "class_counts": counts.tolist(),
        "majority_rate": float(counts.max() / counts.sum()) if counts.sum() else 0.0,
        "label_values": dataset.metadata.get("label_values", []),
    }
