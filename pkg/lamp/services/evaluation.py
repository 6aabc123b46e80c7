"""Frozen embeddings and the unsupervised 10-fold protocol.

Embeddings come from the dense encoder (the pruned twin only exists to create
contrast during training). Each fold standardizes on its training rows and
fits a softmax regression by full-batch gradient descent.
"""

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.model_selection import StratifiedKFold
from sklearn.preprocessing import StandardScaler

from lamp.services.encoder import Encoder, Readout, encode, readout
from lamp.services.exceptions import ArgumentError, ContractError, FormatError, StratificationError
from lamp.services.graph_core import Dataset, make_batch

logger = logging.getLogger(__name__)

EMBED_BATCH_SIZE = 256


@dataclass(eq=False)
class EmbeddingSet:
    embeddings: np.ndarray
    labels: np.ndarray
    dataset_name: str = ""
    checkpoint_id: str = ""

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] != self.labels.shape[0]:
            raise ContractError(
                f"{self.embeddings.shape[0]} embedding rows for {self.labels.shape[0]} labels"
            )
        if not np.isfinite(self.embeddings).all():
            raise ContractError("embeddings contain NaN or Inf")

    def __len__(self):
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["graph_index", "label", *(f"e{i}" for i in range(self.dim))])
        for index, (row, label) in enumerate(zip(self.embeddings, self.labels)):
            writer.writerow([index, int(label), *(repr(float(v)) for v in row)])
        return buffer.getvalue()

    @classmethod
    def from_csv(cls, text: str, *, dataset_name: str = "", checkpoint_id: str = "") -> "EmbeddingSet":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][:2] != ["graph_index", "label"]:
            raise FormatError("embedding CSV must start with graph_index,label,e0..", line=1)
        width = len(rows[0]) - 2
        labels, embeddings = [], []
        for line, row in enumerate(rows[1:], start=2):
            if len(row) != width + 2:
                raise FormatError(f"expected {width + 2} columns, got {len(row)}", line=line)
            try:
                index, label = int(row[0]), int(row[1])
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise FormatError(str(exc), line=line) from exc
            if index != line - 2:
                raise FormatError(f"graph_index {index} out of order", line=line)
            labels.append(label)
            embeddings.append(values)
        return cls(
            np.array(embeddings, dtype=np.float64).reshape(-1, width),
            np.array(labels, dtype=np.int64),
            dataset_name,
            checkpoint_id,
        )


@dataclass
class EvalResult:
    # one list of k fold accuracies in [0, 1] per repeat
    fold_accuracies: list[list[float]]
    mean: float
    std: float
    repeats: int
    seeds: list[int]
    folds: int = 10
    dataset_name: str = ""
    repeat_means: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def summary_line(self) -> str:
        return f"{self.mean:.2f} ± {self.std:.2f} (%)"


def embed_dataset(
    encoder: Encoder,
    dataset: Dataset,
    readout_mode: str = Readout.SUM,
    checkpoint_id: str = "",
    batch_size: int = EMBED_BATCH_SIZE,
) -> EmbeddingSet:
    """Dense-branch graph embeddings for every graph, in dataset order. Runs without a tape."""
    chunks = []
    for start in range(0, len(dataset), batch_size):
        batch = make_batch(dataset.graphs[start : start + batch_size])
        nodes = encode(encoder, batch)
        chunks.append(readout(nodes, batch.graph_ids, readout_mode, batch.batch_size).value)
    embeddings = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, encoder.hidden_dim))
    return EmbeddingSet(embeddings, dataset.labels, dataset.name, checkpoint_id)


class SoftmaxRegression:
    """Multinomial logistic regression trained by full-batch gradient descent."""

    def __init__(self, num_classes: int, iterations: int = 500, learning_rate: float = 0.1, l2: float = 1e-4):
        self.num_classes = num_classes
        self.iterations = iterations
        self.learning_rate = learning_rate
        self.l2 = l2
        self.weights = None
        self.bias = None

    def _probabilities(self, x):
        logits = x @ self.weights + self.bias
        logits -= logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        return exp / exp.sum(axis=1, keepdims=True)

    def fit(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        targets = np.eye(self.num_classes)[np.asarray(y, dtype=np.int64)]
        self.weights = np.zeros((x.shape[1], self.num_classes))
        self.bias = np.zeros(self.num_classes)
        for _ in range(self.iterations):
            residual = (self._probabilities(x) - targets) / x.shape[0]
            self.weights -= self.learning_rate * (x.T @ residual + self.l2 * self.weights)
            self.bias -= self.learning_rate * residual.sum(axis=0)
        return self

    def predict(self, x):
        return self._probabilities(np.asarray(x, dtype=np.float64)).argmax(axis=1)


def evaluate_fold(x_train, y_train, x_test, y_test, num_classes: int) -> tuple[float, StandardScaler]:
    """Accuracy on the held-out fold, plus the scaler fitted on the training rows only."""
    scaler = StandardScaler().fit(x_train)
    model = SoftmaxRegression(num_classes).fit(scaler.transform(x_train), y_train)
    predictions = model.predict(scaler.transform(x_test))
    return float((predictions == np.asarray(y_test)).mean()), scaler


def kfold_eval(embeds: EmbeddingSet, k: int = 10, repeats: int = 5, seed: int = 0) -> EvalResult:
    if repeats < 1:
        raise ArgumentError(f"repeats must be >= 1, got {repeats}")
    if (embeds.labels < 0).any():
        raise ArgumentError("every graph needs a class label for evaluation")
    if len(embeds) < k:
        raise ArgumentError(f"{k}-fold evaluation needs at least {k} graphs, got {len(embeds)}")

    classes, y = np.unique(embeds.labels, return_inverse=True)
    num_classes = classes.size
    x = embeds.embeddings
    seeds = [seed + r for r in range(repeats)]

    fold_accuracies = []
    for repeat_seed in seeds:
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=repeat_seed)
        try:
            splits = list(splitter.split(x, y))
        except ValueError as exc:
            raise StratificationError(str(exc)) from exc
        accuracies = []
        for fold, (train, test) in enumerate(splits):
            if np.unique(y[train]).size < num_classes:
                raise StratificationError(
                    f"fold {fold} (seed {repeat_seed}): a class is missing from the training rows"
                )
            accuracy, _ = evaluate_fold(x[train], y[train], x[test], y[test], num_classes)
            logger.debug("Seed %d fold %d accuracy %.4f", repeat_seed, fold, accuracy)
            accuracies.append(accuracy)
        fold_accuracies.append(accuracies)

    repeat_means = [float(np.mean(a)) for a in fold_accuracies]
    return EvalResult(
        fold_accuracies=fold_accuracies,
        mean=float(np.mean(repeat_means) * 100.0),
        std=float(np.std(repeat_means) * 100.0),
        repeats=repeats,
        seeds=seeds,
        folds=k,
        dataset_name=embeds.dataset_name,
        repeat_means=repeat_means,
    )
