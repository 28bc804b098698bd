"""Multinomial logistic regression over sparse tf-idf vectors.

Training is deterministic full-batch gradient descent on L2-regularized
multinomial cross-entropy: weights start at zero and follow the exact
analytic gradient with a fixed step size, so the same data, hyper-
parameters, and seed always reproduce bit-identical weights.
Multi-label documents are handled by expansion into repeated
single-label instances that share one feature vector.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document, axis_labels, primary_label
from .encode import SparseVector, TfIdfModel, TokenStream, fit_tfidf, transform
from .errors import DomainError, TrainingError, ValidationError


@dataclass
class LabeledDataset:
    """Feature vectors with one string label each.

    ``dim`` is the feature-space dimension; it defaults to the largest
    index seen plus one but should normally be the vocabulary size of
    the encoder that produced the vectors.
    """

    vectors: list[SparseVector]
    labels: list[str]
    dim: int = 0

    def __post_init__(self):
        if len(self.vectors) != len(self.labels):
            raise ValidationError("vectors and labels must align")
        max_index = max((v.indices[-1] for v in self.vectors if v.indices), default=-1)
        if self.dim <= max_index:
            self.dim = max_index + 1

    def classes(self) -> list[str]:
        return sorted(set(self.labels))


@dataclass
class LogRegModel:
    classes: list[str]
    weights: np.ndarray  # shape (n_classes, dim)
    bias: np.ndarray  # shape (n_classes,)
    metadata: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "classes": list(self.classes),
            "weights": [[float(x) for x in row] for row in self.weights],
            "bias": [float(x) for x in self.bias],
            "metadata": dict(self.metadata),
        }

    @staticmethod
    def from_record(record: dict) -> "LogRegModel":
        return LogRegModel(list(record["classes"]),
                           np.array(record["weights"], dtype=float),
                           np.array(record["bias"], dtype=float),
                           dict(record.get("metadata", {})))


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row maximum for stability."""
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def loss_and_gradient(weights: np.ndarray, bias: np.ndarray, x: np.ndarray,
                      y: np.ndarray, l2: float):
    """Mean cross-entropy plus (l2/2)||W||^2 and its analytic gradient.

    ``y`` holds class indices; the bias is not regularized.  Returns
    (loss, weight gradient, bias gradient).
    """
    n = x.shape[0]
    probs = softmax(x @ weights.T + bias)
    with np.errstate(divide="ignore"):  # zero prob -> inf loss, caught by caller
        log_likelihood = np.log(probs[np.arange(n), y])
    loss = -float(log_likelihood.mean()) + 0.5 * l2 * float((weights ** 2).sum())
    residual = probs
    residual[np.arange(n), y] -= 1.0
    grad_w = residual.T @ x / n + l2 * weights
    grad_b = residual.mean(axis=0)
    return loss, grad_w, grad_b


def _dense(vectors: list[SparseVector], dim: int) -> np.ndarray:
    x = np.zeros((len(vectors), dim), dtype=float)
    for row, vector in enumerate(vectors):
        for index, value in zip(vector.indices, vector.values):
            if index >= dim:
                raise ValidationError(f"vector index {index} exceeds dimension {dim}")
            x[row, index] = value
    return x


def train_logreg(data: LabeledDataset, l2: float = 1e-4, step: float = 0.5,
                 max_iterations: int = 500, tolerance: float = 1e-6,
                 seed: int = 0) -> LogRegModel:
    """Fit the classifier by full-batch gradient descent.

    Stops when the loss improves by less than ``tolerance`` or after
    ``max_iterations`` steps.  Requires at least two distinct labels.
    """
    classes = data.classes()
    if len(classes) < 2:
        raise ValidationError("training needs at least two distinct labels")
    index_of = {label: i for i, label in enumerate(classes)}
    x = _dense(data.vectors, data.dim)
    y = np.array([index_of[label] for label in data.labels], dtype=int)
    weights = np.zeros((len(classes), data.dim), dtype=float)
    bias = np.zeros(len(classes), dtype=float)
    previous = math.inf
    loss = previous
    iterations = 0
    converged = False
    for iterations in range(1, max_iterations + 1):
        loss, grad_w, grad_b = loss_and_gradient(weights, bias, x, y, l2)
        if not math.isfinite(loss):
            raise TrainingError(f"loss diverged at iteration {iterations}")
        if abs(previous - loss) < tolerance:
            converged = True
            break
        weights -= step * grad_w
        bias -= step * grad_b
        previous = loss
    metadata = {"iterations": iterations, "final_loss": loss, "converged": converged,
                "l2": l2, "step": step, "seed": seed}
    return LogRegModel(classes, weights, bias, metadata)


def predict_proba(model: LogRegModel, vector: SparseVector) -> np.ndarray:
    """Class probabilities for one vector; probabilities sum to 1."""
    dim = model.weights.shape[1]
    scores = model.bias.copy()
    for index, value in zip(vector.indices, vector.values):
        if index >= dim:
            raise ValidationError(f"vector index {index} exceeds model dimension {dim}")
        scores += model.weights[:, index] * value
    return softmax(scores)


def predict_label(model: LogRegModel, vector: SparseVector) -> str:
    """Argmax class; ties resolve to the lexicographically smallest."""
    probs = predict_proba(model, vector)
    return model.classes[int(np.argmax(probs))]


def evaluate_accuracy(model: LogRegModel, data: LabeledDataset) -> float:
    if not data.vectors:
        raise DomainError("accuracy undefined on an empty dataset")
    hits = sum(1 for vector, label in zip(data.vectors, data.labels)
               if predict_label(model, vector) == label)
    return hits / len(data.vectors)


# ---------------------------------------------------------------------------
# Label expansion and the category-from-category experiment


def expand_multilabel(documents: list[Document], axis: str) -> tuple[list[tuple[str, str]], int]:
    """(doc_id, label) pairs, one per label on the axis.

    A document with k labels yields k instances; unlabeled documents
    are skipped and counted in the second return value.
    """
    pairs = []
    skipped = 0
    for doc in documents:
        labels = axis_labels(doc, axis)
        if not labels:
            skipped += 1
            continue
        for label in labels:
            pairs.append((doc.doc_id, label))
    return pairs, skipped


def derive_seed(seed: int, *parts: str) -> int:
    """Stable per-stage seed derived from a master seed and name parts."""
    import hashlib

    digest = hashlib.sha256(("/".join([str(seed), *parts])).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stratified_split(labels: list[str], test_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Seeded per-label split into train/test index lists.

    Each label keeps at least one training instance; labels with a
    single instance stay entirely in the training set.
    """
    if not 0.0 <= test_fraction < 1.0:
        raise ValidationError(f"test fraction must lie in [0, 1), got {test_fraction}")
    by_label: dict[str, list[int]] = {}
    for index, label in enumerate(labels):
        by_label.setdefault(label, []).append(index)
    train: list[int] = []
    test: list[int] = []
    for label in sorted(by_label):
        indices = sorted(by_label[label])
        rng = random.Random(derive_seed(seed, "split", label))
        rng.shuffle(indices)
        n_test = min(int(len(indices) * test_fraction), len(indices) - 1)
        test.extend(indices[:n_test])
        train.extend(indices[n_test:])
    return sorted(train), sorted(test)


def truncate_label(label: str, axis: str, granularity: str) -> str:
    """Coarse labels keep the top level: arXiv up to the dot, MSC the
    two leading digits.  Fine labels pass through unchanged."""
    if granularity == "fine":
        return label
    if granularity != "coarse":
        raise ValidationError(f"granularity must be 'coarse' or 'fine', got {granularity!r}")
    if axis == "arxiv":
        return label.split(".")[0]
    return label[:2]


@dataclass(frozen=True)
class CategoryPredictionReport:
    direction: str
    label_mode: str
    granularity: str
    accuracy: float
    train_accuracy: float
    n_train: int
    n_test: int
    skipped: int
    evaluated_on: str  # "test", or "train" when the split left no test set


def predict_categories(documents: list[Document], direction: str,
                       label_mode: str = "single", granularity: str = "fine",
                       seed: int = 0, test_fraction: float = 0.2,
                       l2: float = 1e-4, step: float = 0.5,
                       max_iterations: int = 500, tolerance: float = 1e-6) -> CategoryPredictionReport:
    """Predict one category axis from the other.

    The source-axis labels of a document are its token stream (one
    token per code), tf-idf encoded and classified toward the target
    axis.  ``label_mode`` "single" keeps the primary target label,
    "multi" expands every target label into its own instance sharing
    the document's feature vector.
    """
    if direction == "arxiv-from-msc":
        source_axis, target_axis = "msc", "arxiv"
    elif direction == "msc-from-arxiv":
        source_axis, target_axis = "arxiv", "msc"
    else:
        raise ValidationError(f"unknown direction {direction!r}")
    if label_mode not in ("single", "multi"):
        raise ValidationError(f"label_mode must be 'single' or 'multi', got {label_mode!r}")

    streams = []
    target_sets = []
    skipped = 0
    for doc in documents:
        source = [truncate_label(c, source_axis, granularity) for c in axis_labels(doc, source_axis)]
        target = [truncate_label(c, target_axis, granularity) for c in axis_labels(doc, target_axis)]
        if not source or not target:
            skipped += 1
            continue
        streams.append(TokenStream.of(doc.doc_id, source))
        target_sets.append(target[:1] if label_mode == "single" else target)
    if not streams:
        raise ValidationError("no document carries labels on both axes")

    encoder = fit_tfidf(streams)
    doc_vectors = [transform(encoder, s) for s in streams]
    vectors = []
    labels = []
    for vector, targets in zip(doc_vectors, target_sets):
        for label in targets:
            vectors.append(vector)
            labels.append(label)

    train_idx, test_idx = stratified_split(labels, test_fraction, derive_seed(seed, "categories", direction))
    train = LabeledDataset([vectors[i] for i in train_idx], [labels[i] for i in train_idx],
                           dim=len(encoder.vocabulary))
    model = train_logreg(train, l2=l2, step=step, max_iterations=max_iterations,
                         tolerance=tolerance, seed=seed)
    train_accuracy = evaluate_accuracy(model, train)
    if test_idx:
        test = LabeledDataset([vectors[i] for i in test_idx], [labels[i] for i in test_idx],
                              dim=len(encoder.vocabulary))
        accuracy = evaluate_accuracy(model, test)
        evaluated_on = "test"
    else:
        accuracy = train_accuracy
        evaluated_on = "train"
    return CategoryPredictionReport(direction, label_mode, granularity, accuracy,
                                    train_accuracy, len(train_idx), len(test_idx),
                                    skipped, evaluated_on)


def classifier_label_map(documents: list[Document], direction: str, seed: int = 0,
                         **train_kwargs) -> dict[str, str]:
    """Train on the full corpus and map each source label to a prediction.

    Used to compare the classifier against co-occurrence argmax
    predictions label by label.
    """
    if direction == "arxiv-from-msc":
        source_axis, target_axis = "msc", "arxiv"
    elif direction == "msc-from-arxiv":
        source_axis, target_axis = "arxiv", "msc"
    else:
        raise ValidationError(f"unknown direction {direction!r}")
    streams = []
    labels = []
    source_labels = set()
    for doc in documents:
        source = axis_labels(doc, source_axis)
        target = primary_label(doc, target_axis)
        if not source or target is None:
            continue
        source_labels.update(source)
        streams.append(TokenStream.of(doc.doc_id, source))
        labels.append(target)
    if not streams:
        raise ValidationError("no document carries labels on both axes")
    encoder = fit_tfidf(streams)
    data = LabeledDataset([transform(encoder, s) for s in streams], labels,
                          dim=len(encoder.vocabulary))
    model = train_logreg(data, seed=seed, **train_kwargs)
    predictions = {}
    for label in sorted(source_labels):
        vector = transform(encoder, TokenStream.of("probe", [label]))
        predictions[label] = predict_label(model, vector)
    return predictions
