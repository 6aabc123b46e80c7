from pathlib import Path

import factory
import networkx as nx
import numpy as np
import pytest
from django.conf import settings
from factory.declarations import LazyAttribute
from factory.django import DjangoModelFactory
from factory.faker import Faker

import lamp.models as lamp_models
from lamp.services.graph_core import Dataset, Graph


class GraphFactory(factory.Factory):
    """Connected random graph: a path through every node plus G(n, 0.4) extras."""

    class Meta:
        model = Graph

    class Params:
        graph_seed = Faker("random_int", min=0, max=100_000)
        feature_dim = 3
        extra_edge_probability = 0.4

    node_count = Faker("random_int", min=3, max=8)
    edges = LazyAttribute(
        lambda o: [(i, i + 1) for i in range(o.node_count - 1)]
        + list(nx.gnp_random_graph(o.node_count, o.extra_edge_probability, seed=o.graph_seed).edges())
    )
    features = LazyAttribute(
        lambda o: np.random.default_rng(o.graph_seed).random((o.node_count, o.feature_dim))
    )
    label = Faker("random_int", min=0, max=1)

    @classmethod
    def _build(cls, model_class, *args, **kwargs):
        return model_class.build(*args, **kwargs)

    @classmethod
    def _create(cls, model_class, *args, **kwargs):
        return model_class.build(*args, **kwargs)


class RunFactory(DjangoModelFactory):
    class Meta:
        model = lamp_models.Run

    command = lamp_models.Run.Command.PRETRAIN
    status = lamp_models.Run.Status.SUCCEEDED
    dataset_name = Faker("bothify", text="DS-###")
    seed = Faker("random_int", min=0, max=1000)
    config = LazyAttribute(lambda o: {"gamma": 0.3, "alpha": 1.0, "seed": o.seed})
    out_dir = Faker("file_path", depth=2)
    wall_clock_seconds = Faker("pyfloat", min_value=0.1, max_value=600.0)


def write_tu_dataset(directory: Path, name: str, graphs, labels, node_labels=None) -> Path:
    """Write ``graphs`` (lists of 0-based edge pairs with a node count) in the TU text layout."""
    target = directory / name
    target.mkdir(parents=True, exist_ok=True)
    edge_lines, indicator, offset = [], [], 0
    for graph_id, (node_count, edges) in enumerate(graphs, start=1):
        for u, v in edges:
            edge_lines.append(f"{u + offset + 1}, {v + offset + 1}")
            edge_lines.append(f"{v + offset + 1}, {u + offset + 1}")
        indicator += [str(graph_id)] * node_count
        offset += node_count
    (target / f"{name}_A.txt").write_text("\n".join(edge_lines) + "\n")
    (target / f"{name}_graph_indicator.txt").write_text("\n".join(indicator) + "\n")
    (target / f"{name}_graph_labels.txt").write_text("\n".join(str(l) for l in labels) + "\n")
    if node_labels is not None:
        (target / f"{name}_node_labels.txt").write_text(
            "\n".join(str(l) for l in node_labels) + "\n"
        )
    return target


def synthetic_graphs(count: int, seed: int = 0):
    """Two structural classes: sparse rings (0) and dense near-cliques (1), 6 to 9 nodes."""
    rng = np.random.default_rng(seed)
    graphs = []
    for index in range(count):
        label = index % 2
        n = int(rng.integers(6, 10))
        if label == 0:
            edges = [(i, (i + 1) % n) for i in range(n)]
        else:
            edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.8]
            edges += [(i, i + 1) for i in range(n - 1)]
        graphs.append((n, edges, label))
    return graphs


@pytest.fixture
def graph_factory():
    return GraphFactory


@pytest.fixture
def run_factory():
    return RunFactory


@pytest.fixture
def toy_tu_dir(tmp_path):
    """Three labelled graphs: a triangle, a 3-path and a 4-star."""
    return write_tu_dataset(
        tmp_path,
        "TOY",
        graphs=[
            (3, [(0, 1), (1, 2), (0, 2)]),
            (3, [(0, 1), (1, 2)]),
            (4, [(0, 1), (0, 2), (0, 3)]),
        ],
        labels=[1, -1, 1],
        node_labels=[0, 0, 1, 2, 2, 2, 0, 1, 1, 1],
    )


@pytest.fixture
def synthetic_tu_dir(tmp_path):
    """40 graphs of two separable classes, no node labels (degree features)."""
    graphs = synthetic_graphs(40)
    return write_tu_dataset(
        tmp_path,
        "SYNTH",
        graphs=[(n, edges) for n, edges, _ in graphs],
        labels=[label for _, _, label in graphs],
    )


@pytest.fixture
def synthetic_dataset():
    """40 graphs of two classes with 5-wide degree one-hot features, built in memory."""
    eye = np.eye(5)
    graphs = []
    for n, edges, label in synthetic_graphs(40):
        graph = Graph.build(n, edges, label=label)
        graphs.append(graph.with_features(eye[np.minimum(graph.degrees(), 4)]))
    return Dataset(graphs=tuple(graphs), num_classes=2, feature_dim=5, name="SYNTH")


@pytest.fixture
def real_dataset_dir():
    """Directory of a real TU dataset under LAMP_DATA_DIR, or skip."""

    def locate(name):
        directory = Path(settings.LAMP_DATA_DIR) / name
        if not (directory / f"{name}_A.txt").is_file():
            pytest.skip(f"{name} not available under {settings.LAMP_DATA_DIR}")
        return directory

    return locate
