"""Math-aware document augmentation and feature ablation experiments.

A symbol-name source ranks candidate names for identifier symbols by
frequency.  Augmentation appends, for each distinct symbol of a
document, the tokens of its ``top_k`` candidate names to the text
token stream.  Ablation composes token streams from text tokens and a
designated math token set (identifier names and/or concept phrase
tokens) in four modes and measures how classification accuracy reacts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .classify import LabeledDataset, derive_seed, evaluate_accuracy, stratified_split, train_logreg
from .corpus import Document, document_identifiers, primary_label
from .encode import TokenStream, fit_tfidf, tokenize, transform
from .errors import ParseError, ValidationError

# Full-scale reference accuracies for the experiments this module
# mirrors at desk scale; recorded as report metadata only.
FULL_SCALE_REFERENCE = {
    "text_only": 0.806,
    "text_plus_symbols": 0.230,
    "augmented_top3": {"arxiv": 0.53, "wikipedia": 0.49, "wikidata": 0.51},
    "augmented_top5": {"arxiv": 0.50, "wikipedia": 0.46, "wikidata": 0.49},
    "ablation_accuracy": {"text": 0.73, "math": 0.60, "text_plus_math": 0.60,
                          "text_minus_math": 0.19},
    "ablation_relative_cost": {"text": 1.0, "math": 0.21, "text_plus_math": 0.20,
                               "text_minus_math": 0.04},
}

TEXT_MODE = "Text"
MATH_MODE = "Math"
TEXT_PLUS_MATH = "TextPlusMath"
TEXT_MINUS_MATH = "TextMinusMath"
ABLATION_MODES = (TEXT_MODE, MATH_MODE, TEXT_PLUS_MATH, TEXT_MINUS_MATH)


@dataclass(frozen=True)
class SymbolNameSource:
    """Ranked candidate names per identifier symbol.

    Rankings are sorted by descending frequency with lexicographic
    tie-breaks, so the top-k prefix is deterministic.
    """

    name: str
    rankings: dict[str, tuple[tuple[str, float], ...]]

    def top_names(self, symbol: str, top_k: int) -> list[str]:
        return [name for name, _ in self.rankings.get(symbol, ())[:top_k]]

    @staticmethod
    def from_counts(name: str, counts: dict[str, dict[str, float]]) -> "SymbolNameSource":
        rankings = {}
        for symbol in sorted(counts):
            ordered = sorted(counts[symbol].items(), key=lambda kv: (-kv[1], kv[0]))
            rankings[symbol] = tuple(ordered)
        return SymbolNameSource(name, rankings)


def load_symbol_source(path: str, name: str) -> SymbolNameSource:
    """Load a ``symbol<TAB>name<TAB>frequency`` file."""
    counts: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", line_no)
            symbol, candidate, frequency = parts
            try:
                value = float(frequency)
            except ValueError as exc:
                raise ParseError(f"bad frequency {frequency!r}", line_no) from exc
            counts.setdefault(symbol, {})[candidate] = counts.get(symbol, {}).get(candidate, 0.0) + value
    return SymbolNameSource.from_counts(name, counts)


@dataclass(frozen=True)
class ConceptCategoryMap:
    """Concept phrases mapped to the class they are characteristic of."""

    phrase_to_class: dict[str, str]

    def phrases(self) -> list[str]:
        return sorted(self.phrase_to_class)

    def token_set(self) -> frozenset[str]:
        tokens = set()
        for phrase in self.phrase_to_class:
            tokens.update(tokenize(phrase))
        return frozenset(tokens)


def load_concept_map(path: str) -> ConceptCategoryMap:
    """Load a ``phrase<TAB>class`` file."""
    mapping = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ParseError(f"expected 2 tab-separated fields, got {len(parts)}", line_no)
            mapping[parts[0]] = parts[1]
    return ConceptCategoryMap(mapping)


def distinct_symbols(doc: Document) -> list[str]:
    """Distinct identifier symbols in order of first appearance."""
    seen = []
    for occurrence in document_identifiers(doc):
        if occurrence.symbol not in seen:
            seen.append(occurrence.symbol)
    return seen


def symbol_tokens(doc: Document) -> list[str]:
    """One lowercase token per identifier occurrence, in order."""
    tokens = []
    for occurrence in document_identifiers(doc):
        tokens.extend(tokenize(occurrence.symbol))
    return tokens


def augment_identifiers(doc: Document, source: SymbolNameSource, top_k: int) -> TokenStream:
    """Text tokens plus the top_k candidate-name tokens per distinct symbol.

    Symbols absent from the source contribute nothing.
    """
    if top_k < 1:
        raise ValidationError(f"top_k must be >= 1, got {top_k}")
    tokens = doc.text_tokens()
    for symbol in distinct_symbols(doc):
        for name in source.top_names(symbol, top_k):
            tokens.extend(tokenize(name))
    return TokenStream.of(doc.doc_id, tokens)


def ablate(doc: Document, mode: str, math_tokens: frozenset[str]) -> TokenStream:
    """Compose the mode's token stream from text tokens and math tokens.

    Text keeps the text stream; Math keeps only occurrences of math
    tokens; TextPlusMath concatenates both, so its length is exactly
    the sum of the other two; TextMinusMath removes math tokens.
    """
    text = doc.text_tokens()
    math_part = [t for t in text if t in math_tokens]
    if mode == TEXT_MODE:
        tokens = text
    elif mode == MATH_MODE:
        tokens = math_part
    elif mode == TEXT_PLUS_MATH:
        tokens = text + math_part
    elif mode == TEXT_MINUS_MATH:
        tokens = [t for t in text if t not in math_tokens]
    else:
        raise ValidationError(f"unknown ablation mode {mode!r}")
    return TokenStream.of(doc.doc_id, tokens)


# ---------------------------------------------------------------------------
# Experiments


@dataclass(frozen=True)
class AugmentationCell:
    source: str
    top_k: int
    accuracy: float


@dataclass(frozen=True)
class AugmentationReport:
    class_axis: str
    text_only: float
    symbols_only: float
    text_plus_symbols: float
    cells: tuple[AugmentationCell, ...]
    n_train: int
    n_test: int
    reference: dict = field(default_factory=lambda: dict(FULL_SCALE_REFERENCE))


def _labeled_docs(documents: list[Document], class_axis: str) -> tuple[list[Document], list[str]]:
    docs = []
    labels = []
    for doc in documents:
        label = primary_label(doc, class_axis)
        if label is not None:
            docs.append(doc)
            labels.append(label)
    if not docs:
        raise ValidationError(f"no document carries a label on axis {class_axis!r}")
    return docs, labels


def _split_accuracy(streams: list[TokenStream], labels: list[str],
                    train_idx: list[int], test_idx: list[int],
                    seed: int, **train_kwargs) -> float:
    """Fit tf-idf and the classifier on the training part, score the test part."""
    train_streams = [streams[i] for i in train_idx]
    encoder = fit_tfidf(train_streams)
    dim = len(encoder.vocabulary)
    train = LabeledDataset([transform(encoder, s) for s in train_streams],
                           [labels[i] for i in train_idx], dim=dim)
    model = train_logreg(train, seed=seed, **train_kwargs)
    eval_idx = test_idx if test_idx else train_idx
    test = LabeledDataset([transform(encoder, streams[i]) for i in eval_idx],
                          [labels[i] for i in eval_idx], dim=dim)
    return evaluate_accuracy(model, test)


def run_augmentation_experiment(documents: list[Document], sources: list[SymbolNameSource],
                                top_ks: list[int], seed: int = 0, class_axis: str = "arxiv",
                                test_fraction: float = 0.2, **train_kwargs) -> AugmentationReport:
    """Accuracy per (source, top_k) cell plus three reference baselines.

    All cells share one seeded stratified document split, so their
    accuracies are comparable.  Baselines: text only, identifier symbol
    occurrences only, and text plus symbol occurrences.
    """
    docs, labels = _labeled_docs(documents, class_axis)
    train_idx, test_idx = stratified_split(labels, test_fraction, derive_seed(seed, "augment"))

    text_streams = [TokenStream.of(d.doc_id, d.text_tokens()) for d in docs]
    symbol_streams = [TokenStream.of(d.doc_id, symbol_tokens(d)) for d in docs]
    both_streams = [TokenStream.of(d.doc_id, t.tokens + s.tokens)
                    for d, t, s in zip(docs, text_streams, symbol_streams)]

    def cell_accuracy(streams):
        return _split_accuracy(streams, labels, train_idx, test_idx, seed, **train_kwargs)

    cells = []
    for source in sources:
        for top_k in top_ks:
            augmented = [augment_identifiers(d, source, top_k) for d in docs]
            cells.append(AugmentationCell(source.name, top_k, cell_accuracy(augmented)))
    return AugmentationReport(class_axis, cell_accuracy(text_streams),
                              cell_accuracy(symbol_streams), cell_accuracy(both_streams),
                              tuple(cells), len(train_idx), len(test_idx))


@dataclass(frozen=True)
class AblationRow:
    mode: str
    accuracy: float
    relative_cost: float


@dataclass(frozen=True)
class AblationReport:
    class_axis: str
    rows: tuple[AblationRow, ...]
    coverage_violations: tuple[tuple[str, str], ...]  # (phrase, class) pairs
    n_train: int
    n_test: int
    reference: dict = field(default_factory=lambda: dict(FULL_SCALE_REFERENCE))


def _phrase_in_tokens(phrase_tokens: list[str], tokens: list[str]) -> bool:
    n = len(phrase_tokens)
    if n == 0 or n > len(tokens):
        return False
    return any(tokens[i:i + n] == phrase_tokens for i in range(len(tokens) - n + 1))


def concept_coverage_violations(documents: list[Document], concept_map: ConceptCategoryMap,
                                class_axis: str = "arxiv") -> list[tuple[str, str]]:
    """(phrase, class) pairs where the phrase's own class never contains it.

    Each phrase is checked only against the class the map assigns it to;
    absence from other classes is the expected situation, not a defect.
    """
    docs, labels = _labeled_docs(documents, class_axis)
    tokens_by_class: dict[str, list[list[str]]] = {}
    for doc, label in zip(docs, labels):
        tokens_by_class.setdefault(label, []).append(doc.text_tokens())
    violations = []
    for phrase in concept_map.phrases():
        phrase_tokens = tokenize(phrase)
        label = concept_map.phrase_to_class[phrase]
        class_docs = tokens_by_class.get(label, [])
        if not any(_phrase_in_tokens(phrase_tokens, toks) for toks in class_docs):
            violations.append((phrase, label))
    return violations


def run_ablation_experiment(documents: list[Document], concept_map: ConceptCategoryMap,
                            seed: int = 0, class_axis: str = "arxiv",
                            test_fraction: float = 0.2, **train_kwargs) -> AblationReport:
    """Accuracy for the four ablation modes over one shared split.

    The math token set is the union of all concept phrase tokens.  The
    relative cost column is the mode's total token volume divided by
    the Text mode's, a deterministic proxy for runtime.  Concept
    phrases missing from every document of their own class are
    reported as coverage violations rather than failing the run.
    """
    docs, labels = _labeled_docs(documents, class_axis)
    math_tokens = concept_map.token_set()
    train_idx, test_idx = stratified_split(labels, test_fraction, derive_seed(seed, "ablate"))
    violations = concept_coverage_violations(documents, concept_map, class_axis)

    rows = []
    text_volume = None
    for mode in ABLATION_MODES:
        streams = [ablate(d, mode, math_tokens) for d in docs]
        volume = sum(len(s.tokens) for s in streams)
        if mode == TEXT_MODE:
            text_volume = volume
        accuracy = _split_accuracy(streams, labels, train_idx, test_idx, seed, **train_kwargs)
        cost = volume / text_volume if text_volume else 0.0
        rows.append(AblationRow(mode, accuracy, cost))
    return AblationReport(class_axis, tuple(rows), tuple(violations),
                          len(train_idx), len(test_idx))
