"""Structural damage of classical graph augmentations, measured by one-level
structural entropy of the degree distribution.

Entropies are in bits. Only ratios of entropies enter the percent change, so
the logarithm base does not affect audit results.
"""

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np
from django.db import models

from lamp.services.exceptions import ArgumentError, DomainError
from lamp.services.graph_core import Dataset, Graph, volume
from lamp.services.rounding import ceil_count, floor_count
from lamp.services.seeding import child_rng

logger = logging.getLogger(__name__)

HISTOGRAM_BIN_WIDTH = 0.05
HISTOGRAM_BINS = 40  # [-1, 1]


class Augmentation(models.TextChoices):
    NODE_DROP = "node_drop", "Node dropping"
    EDGE_PERTURB = "edge_perturb", "Edge perturbation"
    SUBGRAPH = "subgraph", "Subgraph"
    IDENTITY = "identity", "Identity"


@dataclass
class DamageReport:
    dataset_name: str
    augmentation: str
    strength: float
    # (graph_index, repeat, percent_change)
    samples: list[tuple[int, int, float]]
    mean: float
    std: float
    min: float
    max: float
    histogram: list[tuple[float, float, int]]
    skipped_edgeless: int = 0
    repeats: int = 1
    seed: int = 0

    @property
    def values(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples], dtype=np.float64)

    def summary(self) -> dict:
        return {
            "dataset": self.dataset_name,
            "augmentation": self.augmentation,
            "strength": self.strength,
            "repeats": self.repeats,
            "seed": self.seed,
            "samples": len(self.samples),
            "skipped_edgeless": self.skipped_edgeless,
            "negative_samples": int((self.values < 0).sum()),
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
            "histogram": [
                {"bin_lo": lo, "bin_hi": hi, "count": count}
                for lo, hi, count in self.histogram
            ],
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["graph_index", "repeat", "percent_change"])
        for graph_index, repeat, value in self.samples:
            writer.writerow([graph_index, repeat, repr(float(value))])
        return buffer.getvalue()


# =========================================================================
# ENTROPY
# =========================================================================


def structural_entropy(graph: Graph) -> float:
    """-sum_v (g_v / vol) log2(g_v / vol); isolated nodes contribute 0."""
    vol = volume(graph)
    if vol == 0:
        raise DomainError("structural entropy is undefined for an edgeless graph")
    degrees = graph.degrees()
    p = degrees[degrees > 0] / vol
    return float(-(p * np.log2(p)).sum())


def entropy_percent_change(original: Graph, augmented: Graph) -> float:
    """1 - H(augmented) / H(original). Positive means structural information was lost."""
    baseline = structural_entropy(original)
    if augmented.num_edges == 0:
        return 1.0
    return 1.0 - structural_entropy(augmented) / baseline


# =========================================================================
# AUGMENTATIONS
# =========================================================================


def _check_ratio(ratio: float):
    if not 0.0 < ratio < 1.0:
        raise ArgumentError(f"augmentation ratio must lie in (0, 1), got {ratio}")


def augment_node_drop(graph: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    _check_ratio(ratio)
    # never drop the last node
    dropped = min(floor_count(ratio, graph.node_count), graph.node_count - 1)
    if dropped == 0:
        return graph
    drop = rng.choice(graph.node_count, size=dropped, replace=False)
    keep = np.setdiff1d(np.arange(graph.node_count), drop)
    return graph.induced_subgraph(keep)


def augment_edge_perturb(
    graph: Graph,
    ratio: float,
    rng: np.random.Generator,
    add_probability: float = 0.5,
) -> Graph:
    """Each action drops an existing edge or adds an absent one, skipping impossible actions."""
    _check_ratio(ratio)
    actions = floor_count(ratio, graph.num_edges)
    if actions == 0:
        return graph

    n = graph.node_count
    capacity = n * (n - 1) // 2
    edges = [tuple(e) for e in graph.edges.tolist()]
    present = set(edges)
    for _ in range(actions):
        if rng.random() < add_probability:
            if len(present) >= capacity:
                continue
            while True:
                u, v = (int(x) for x in rng.integers(0, n, size=2))
                pair = (min(u, v), max(u, v))
                if u != v and pair not in present:
                    break
            edges.append(pair)
            present.add(pair)
        else:
            if not edges:
                continue
            pair = edges.pop(int(rng.integers(len(edges))))
            present.discard(pair)
    return Graph.build(n, edges, graph.features, graph.label)


def _component_ids(graph: Graph, adjacency: list[list[int]]) -> np.ndarray:
    component = np.full(graph.node_count, -1, dtype=np.int64)
    current = 0
    for root in range(graph.node_count):
        if component[root] >= 0:
            continue
        stack = [root]
        component[root] = current
        while stack:
            node = stack.pop()
            for neighbor in adjacency[node]:
                if component[neighbor] < 0:
                    component[neighbor] = current
                    stack.append(neighbor)
        current += 1
    return component


def augment_subgraph(graph: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Random-walk node sample of size ceil(ratio * n); restarts when a component is used up."""
    _check_ratio(ratio)
    n = graph.node_count
    target = min(max(ceil_count(ratio, n), 1), n)
    adjacency = graph.neighbors()
    component = _component_ids(graph, adjacency)
    remaining = np.bincount(component)

    visited: set[int] = set()

    def visit(node: int):
        visited.add(node)
        remaining[component[node]] -= 1

    current = int(rng.integers(n))
    visit(current)
    while len(visited) < target:
        if remaining[component[current]] == 0:
            unvisited = np.setdiff1d(np.arange(n), np.fromiter(visited, dtype=np.int64))
            current = int(unvisited[rng.integers(unvisited.size)])
        else:
            options = adjacency[current]
            current = options[int(rng.integers(len(options)))]
        if current not in visited:
            visit(current)
    return graph.induced_subgraph(sorted(visited))


def augment(
    graph: Graph, augmentation: str, strength: float, rng: np.random.Generator
) -> Graph:
    if augmentation == Augmentation.IDENTITY:
        return graph
    if augmentation == Augmentation.NODE_DROP:
        return augment_node_drop(graph, strength, rng)
    if augmentation == Augmentation.EDGE_PERTURB:
        return augment_edge_perturb(graph, strength, rng)
    if augmentation == Augmentation.SUBGRAPH:
        return augment_subgraph(graph, strength, rng)
    raise ArgumentError(
        f"unknown augmentation {augmentation!r}; choose from {', '.join(Augmentation.values)}"
    )


# =========================================================================
# AUDIT
# =========================================================================


def histogram(values) -> list[tuple[float, float, int]]:
    values = np.asarray(values, dtype=np.float64)
    bins = np.floor((values + 1.0) / HISTOGRAM_BIN_WIDTH).astype(np.int64)
    counts = np.bincount(np.clip(bins, 0, HISTOGRAM_BINS - 1), minlength=HISTOGRAM_BINS)
    return [
        (
            round(-1.0 + i * HISTOGRAM_BIN_WIDTH, 10),
            round(-1.0 + (i + 1) * HISTOGRAM_BIN_WIDTH, 10),
            int(counts[i]),
        )
        for i in range(HISTOGRAM_BINS)
    ]


def audit_dataset(
    dataset: Dataset,
    augmentation: str,
    strength: float,
    repeats: int,
    seed: int,
) -> DamageReport:
    if repeats < 1:
        raise ArgumentError(f"repeats must be >= 1, got {repeats}")
    if augmentation != Augmentation.IDENTITY:
        _check_ratio(strength)

    samples: list[tuple[int, int, float]] = []
    skipped = 0
    for graph_index, graph in enumerate(dataset.graphs):
        if graph.num_edges == 0:
            skipped += 1
            continue
        for repeat in range(repeats):
            rng = child_rng(seed, graph_index, repeat)
            augmented = augment(graph, augmentation, strength, rng)
            samples.append(
                (graph_index, repeat, entropy_percent_change(graph, augmented))
            )

    values = np.array([s[2] for s in samples], dtype=np.float64)
    if values.size == 0:
        raise DomainError(f"{dataset.name}: every graph is edgeless, nothing to audit")
    report = DamageReport(
        dataset_name=dataset.name,
        augmentation=str(augmentation),
        strength=float(strength),
        samples=samples,
        mean=float(values.mean()),
        std=float(values.std()),
        min=float(values.min()),
        max=float(values.max()),
        histogram=histogram(values),
        skipped_edgeless=skipped,
        repeats=repeats,
        seed=seed,
    )
    logger.info(
        "Audit %s %s@%.2f: mean %.4f std %.4f over %d samples (%d edgeless skipped)",
        dataset.name,
        augmentation,
        strength,
        report.mean,
        report.std,
        values.size,
        skipped,
    )
    return report
