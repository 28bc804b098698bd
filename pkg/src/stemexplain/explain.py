"""Local surrogate explanations and entity-level explanation rankings.

``lime_explain`` perturbs a document by dropping random subsets of its
distinct in-vocabulary tokens, queries the classifier on each masked
variant, and fits a weighted ridge surrogate whose sample weights decay
with cosine distance from the original vector through the kernel
exp(-d^2 / width^2).  The surrogate coefficients are the token
weights of the explanation.

``rank_entities`` aggregates either document frequencies (MFreq) or
mean absolute surrogate weights (MDisc) into per-class entity rankings,
and ``class_entity_entropy`` condenses a ranking into a single entropy
in one of two directions: ClsEnt averages the class-distribution
entropy of the top entities, EntCls averages the entropy of each
class's top entity strengths.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .classify import LogRegModel, derive_seed, softmax
from .corpus import Document, primary_label
from .encode import STOPWORDS, TfIdfModel, TokenStream, tokenize
from .errors import DomainError, ValidationError
from .stats import CountDistribution, shannon_entropy

MFREQ = "MFreq"
MDISC = "MDisc"
TEXT_KIND = "Text"
MATH_KIND = "Math"
CLS_ENT = "ClsEnt"
ENT_CLS = "EntCls"

# Full-scale reference entropies for the eight-row report, metadata only.
FULL_SCALE_REFERENCE = {
    "MDiscTextClsEnt": 4.22, "MDiscTextEntCls": 0.54,
    "MFreqTextClsEnt": 7.71, "MFreqTextEntCls": 0.72,
    "MDiscMathClsEnt": 4.16, "MDiscMathEntCls": 0.33,
    "MFreqMathClsEnt": 7.22, "MFreqMathEntCls": 0.74,
}


@dataclass(frozen=True)
class Explanation:
    doc_id: str
    target_class: str
    features: tuple[tuple[str, float], ...]  # (token, weight), |weight| descending
    intercept: float
    fidelity: float
    num_samples: int
    kernel_width: float
    seed: int


def lime_explain(model: LogRegModel, encoder: TfIdfModel, doc_id: str,
                 tokens: list[str], target_class: str, num_samples: int = 1000,
                 kernel_width: float | None = None, ridge: float = 1.0,
                 top_k: int | None = 10, seed: int = 0) -> Explanation:
    """Explain the target-class probability for one token sequence.

    Interpretable features are the distinct in-vocabulary tokens in
    first-appearance order; masking a token removes all of its
    occurrences.  The default kernel width is 0.75 * sqrt(F) for F
    distinct tokens.  Identical seeds yield identical explanations.
    """
    if num_samples < 1:
        raise ValidationError(f"num_samples must be >= 1, got {num_samples}")
    if target_class not in model.classes:
        raise ValidationError(f"unknown target class {target_class!r}")
    features: list[str] = []
    counts: dict[str, int] = {}
    for token in tokens:
        if token in encoder.vocabulary:
            if token not in counts:
                features.append(token)
            counts[token] = counts.get(token, 0) + 1
    if not features:
        raise ValidationError("document has no in-vocabulary tokens to explain")
    n_features = len(features)
    if kernel_width is None:
        kernel_width = 0.75 * math.sqrt(n_features)

    indices = np.array([encoder.vocabulary[t] for t in features])
    base = np.array([counts[t] * encoder.idf[encoder.vocabulary[t]] for t in features])
    class_index = model.classes.index(target_class)
    sub_weights = model.weights[:, indices]  # (C, F)

    rng = np.random.default_rng(seed)
    masks = rng.integers(0, 2, size=(num_samples, n_features)).astype(float)

    masked = masks * base  # unnormalized masked vectors, (S, F)
    norms = np.sqrt((masked ** 2).sum(axis=1))
    safe = np.where(norms > 0, norms, 1.0)
    scores = (masked / safe[:, None]) @ sub_weights.T + model.bias
    probs = softmax(scores)
    y = probs[:, class_index]
    # Masked vectors are sub-vectors of the original, so cosine
    # similarity reduces to norm(masked) / norm(original).
    original_norm = float(np.sqrt((base ** 2).sum()))
    distances = 1.0 - norms / original_norm
    sample_weights = np.exp(-(distances ** 2) / (kernel_width ** 2))

    design = np.hstack([np.ones((num_samples, 1)), masks])
    penalty = ridge * np.eye(n_features + 1)
    penalty[0, 0] = 0.0  # intercept is not shrunk
    weighted = design * sample_weights[:, None]
    coef = np.linalg.solve(weighted.T @ design + penalty, weighted.T @ y)
    intercept = float(coef[0])
    token_weights = coef[1:]

    predicted = design @ coef
    residual = float((sample_weights * (y - predicted) ** 2).sum())
    mean_y = float((sample_weights * y).sum() / sample_weights.sum())
    total = float((sample_weights * (y - mean_y) ** 2).sum())
    fidelity = 1.0 if total == 0.0 else 1.0 - residual / total

    ranked = sorted(zip(features, token_weights), key=lambda kv: (-abs(kv[1]), kv[0]))
    if top_k is not None:
        ranked = ranked[:top_k]
    return Explanation(doc_id, target_class, tuple((t, float(w)) for t, w in ranked),
                       intercept, fidelity, num_samples, kernel_width, seed)


# ---------------------------------------------------------------------------
# Entity rankings


@dataclass(frozen=True)
class EntityRanking:
    """Per-class ranked (entity, strength) lists."""

    mode: str
    kind: str
    per_class: dict[str, tuple[tuple[str, float], ...]]
    warnings: tuple[str, ...] = ()


def _entity_stream(doc: Document, kind: str, math_streams: dict[str, list[str]] | None,
                   stopwords: frozenset[str]) -> list[str]:
    if kind == TEXT_KIND:
        return [t for t in doc.text_tokens() if t not in stopwords]
    if kind == MATH_KIND:
        if math_streams is None or doc.doc_id not in math_streams:
            raise ValidationError(f"no math token stream for document {doc.doc_id!r}")
        return list(math_streams[doc.doc_id])
    raise ValidationError(f"unknown feature kind {kind!r}")


def rank_entities(documents: list[Document], model: LogRegModel, encoder: TfIdfModel,
                  mode: str, kind: str, budget: int = 5, seed: int = 0,
                  math_streams: dict[str, list[str]] | None = None,
                  class_axis: str = "arxiv", num_samples: int = 1000,
                  stopwords: frozenset[str] | None = None) -> EntityRanking:
    """Rank entities per class by frequency (MFreq) or surrogate weight (MDisc).

    MFreq strength is the number of the class's documents containing
    the entity.  MDisc samples up to ``budget`` documents per class
    (seeded), explains each toward its class, and averages absolute
    token weights.  Classes without usable documents are omitted and
    reported in the warnings.
    """
    if mode not in (MFREQ, MDISC):
        raise ValidationError(f"unknown ranking mode {mode!r}")
    words = STOPWORDS if stopwords is None else stopwords
    by_class: dict[str, list[Document]] = {}
    for doc in documents:
        label = primary_label(doc, class_axis)
        if label is not None:
            by_class.setdefault(label, []).append(doc)
    if not by_class:
        raise ValidationError(f"no document carries a label on axis {class_axis!r}")

    per_class = {}
    warnings = []
    for label in sorted(by_class):
        docs = sorted(by_class[label], key=lambda d: d.doc_id)
        strengths: dict[str, float] = {}
        if mode == MFREQ:
            for doc in docs:
                for entity in set(_entity_stream(doc, kind, math_streams, words)):
                    strengths[entity] = strengths.get(entity, 0.0) + 1.0
        else:
            if label not in model.classes:
                warnings.append(f"class {label!r} unknown to the classifier; omitted")
                continue
            rng = random.Random(derive_seed(seed, "mdisc", label))
            chosen = docs if len(docs) <= budget else rng.sample(docs, budget)
            chosen = sorted(chosen, key=lambda d: d.doc_id)
            explained = 0
            sums: dict[str, float] = {}
            for doc in chosen:
                stream = _entity_stream(doc, kind, math_streams, words)
                if not any(t in encoder.vocabulary for t in stream):
                    warnings.append(f"document {doc.doc_id!r} has no in-vocabulary tokens; skipped")
                    continue
                explanation = lime_explain(model, encoder, doc.doc_id, stream, label,
                                           num_samples=num_samples, top_k=None,
                                           seed=derive_seed(seed, "lime", doc.doc_id))
                explained += 1
                for token, weight in explanation.features:
                    sums[token] = sums.get(token, 0.0) + abs(weight)
            if explained == 0:
                warnings.append(f"class {label!r} has no explainable documents; omitted")
                continue
            strengths = {t: s / explained for t, s in sums.items()}
        if not strengths:
            warnings.append(f"class {label!r} has no entities; omitted")
            continue
        ordered = sorted(strengths.items(), key=lambda kv: (-kv[1], kv[0]))
        per_class[label] = tuple(ordered)
    return EntityRanking(mode, kind, per_class, tuple(warnings))


def class_entity_entropy(ranking: EntityRanking, direction: str, top_m: int = 20) -> float:
    """Condense a ranking into one entropy, in bits.

    ClsEnt: mean over the global top-m entities (by total strength) of
    the entropy of their per-class strength distribution; an entity
    present in a single class contributes 0.  EntCls: mean over classes
    of the entropy of the class's top-m entity strengths.
    """
    if not ranking.per_class:
        raise DomainError("entropy undefined for an empty ranking")
    if direction == CLS_ENT:
        totals: dict[str, float] = {}
        spread: dict[str, dict[str, float]] = {}
        for label, entities in ranking.per_class.items():
            for entity, strength in entities:
                if strength <= 0:
                    continue
                totals[entity] = totals.get(entity, 0.0) + strength
                spread.setdefault(entity, {})[label] = strength
        if not totals:
            raise DomainError("no entity has positive strength")
        top = sorted(totals, key=lambda e: (-totals[e], e))[:top_m]
        values = [shannon_entropy(CountDistribution(spread[e])) for e in top]
        return sum(values) / len(values)
    if direction == ENT_CLS:
        values = []
        for label in sorted(ranking.per_class):
            top = [(e, s) for e, s in ranking.per_class[label][:top_m] if s > 0]
            if not top:
                continue
            values.append(shannon_entropy(CountDistribution(dict(top))))
        if not values:
            raise DomainError("no class has positive entity strengths")
        return sum(values) / len(values)
    raise ValidationError(f"direction must be '{CLS_ENT}' or '{ENT_CLS}', got {direction!r}")


REPORT_ROWS = (
    (MDISC, TEXT_KIND, CLS_ENT), (MDISC, TEXT_KIND, ENT_CLS),
    (MFREQ, TEXT_KIND, CLS_ENT), (MFREQ, TEXT_KIND, ENT_CLS),
    (MDISC, MATH_KIND, CLS_ENT), (MDISC, MATH_KIND, ENT_CLS),
    (MFREQ, MATH_KIND, CLS_ENT), (MFREQ, MATH_KIND, ENT_CLS),
)


@dataclass(frozen=True)
class EntropyReport:
    rows: tuple[tuple[str, float], ...]  # (row label, entropy)
    top_m: int
    reference: dict = field(default_factory=lambda: dict(FULL_SCALE_REFERENCE))

    def value(self, label: str) -> float:
        for row_label, value in self.rows:
            if row_label == label:
                return value
        raise KeyError(label)


def compute_rankings(documents: list[Document],
                     text_model: LogRegModel, text_encoder: TfIdfModel,
                     math_model: LogRegModel, math_encoder: TfIdfModel,
                     math_streams: dict[str, list[str]], budget: int = 5,
                     seed: int = 0, num_samples: int = 1000,
                     class_axis: str = "arxiv",
                     stopwords: frozenset[str] | None = None) -> dict[tuple[str, str], EntityRanking]:
    """All four rankings over MDisc/MFreq x Text/Math."""
    rankings = {}
    for mode in (MDISC, MFREQ):
        for kind in (TEXT_KIND, MATH_KIND):
            model = text_model if kind == TEXT_KIND else math_model
            encoder = text_encoder if kind == TEXT_KIND else math_encoder
            rankings[(mode, kind)] = rank_entities(
                documents, model, encoder, mode, kind, budget=budget, seed=seed,
                math_streams=math_streams, class_axis=class_axis,
                num_samples=num_samples, stopwords=stopwords)
    return rankings


def build_entropy_report(rankings: dict[tuple[str, str], EntityRanking],
                         top_m: int = 20) -> EntropyReport:
    """The eight-row entropy table over MDisc/MFreq x Text/Math x direction."""
    rows = []
    for mode, kind, direction in REPORT_ROWS:
        value = class_entity_entropy(rankings[(mode, kind)], direction, top_m)
        rows.append((f"{mode}{kind}{direction}", value))
    return EntropyReport(tuple(rows), top_m)
