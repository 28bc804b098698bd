"""Gazetteer-based entity linking for text n-grams and formula concepts.

Text linking slides n-gram windows (1..max_n) over the document's text
tokens and looks each candidate up in an offline gazetteer by exact
match on a normalized surface form; candidates consisting entirely of
stopwords are never linked.  Formula-concept linking searches a fixed
token window before and after each formula and records a signed rank:
positive distances sit before the formula, negative distances after.

Evaluation compares produced links against gold relevance judgments
per mode, where a mode is a (gazetteer source, target field) pair.
Relevance-1/2 tuples follow a documented special rule: they are
excluded from TP/FP/TN entirely and count as FN only when no link of
the mode covers any non-stopword token of the tuple.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .corpus import Document, GoldAnnotations
from .encode import STOPWORDS, lemmatize, tokenize
from .errors import DomainError, ParseError, ValidationError

_QID_RE = re.compile(r"^Q[0-9]+$")


def normalize_surface(surface: str) -> str:
    """Canonical lookup form: underscores to spaces, tokenized, space-joined."""
    return " ".join(tokenize(surface.replace("_", " ")))


@dataclass(frozen=True)
class GazetteerEntry:
    title: str | None = None
    item_id: str | None = None


@dataclass
class Gazetteer:
    """Normalized surface form -> link target, tagged with its source.

    A target matching ``Q<digits>`` is an item id; anything else is a
    page title (doubling as a URL suffix).  Duplicate surface forms
    keep the first entry; the number dropped is recorded.
    """

    source: str
    entries: dict[str, GazetteerEntry] = field(default_factory=dict)
    duplicates_dropped: int = 0

    @staticmethod
    def from_pairs(source: str, pairs) -> "Gazetteer":
        gazetteer = Gazetteer(source)
        for surface, target in pairs:
            gazetteer.add(surface, target)
        return gazetteer

    def add(self, surface: str, target: str):
        key = normalize_surface(surface)
        if not key:
            raise ValidationError(f"surface form {surface!r} normalizes to nothing")
        if key in self.entries:
            self.duplicates_dropped += 1
            return
        if _QID_RE.match(target):
            self.entries[key] = GazetteerEntry(item_id=target)
        else:
            self.entries[key] = GazetteerEntry(title=target)


def load_gazetteer(path: str, source: str) -> Gazetteer:
    """Load a ``surface_form<TAB>target`` file."""
    gazetteer = Gazetteer(source)
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ParseError(f"expected 2 tab-separated fields, got {len(parts)}", line_no)
            gazetteer.add(parts[0], parts[1])
    return gazetteer


def generate_ngrams(tokens: list[str], max_n: int) -> list[tuple[int, tuple[str, ...]]]:
    """All (start, gram) pairs for n in 1..max_n, overlapping included."""
    if max_n < 1:
        raise ValidationError(f"max_n must be >= 1, got {max_n}")
    out = []
    for n in range(1, max_n + 1):
        for start in range(len(tokens) - n + 1):
            out.append((start, tuple(tokens[start:start + n])))
    return out


@dataclass(frozen=True)
class EntityLink:
    """A text n-gram matched to a gazetteer target."""

    doc_id: str
    start: int
    length: int
    surface: str  # original token n-gram, space-joined
    match_form: str  # the form that hit the gazetteer (lemmatized or not)
    target_title: str | None
    target_item: str | None
    source: str
    lemmatized: bool


def link_text_entities(doc: Document, gazetteer: Gazetteer, max_n: int = 3,
                       lemmatized: bool = False,
                       stopwords: frozenset[str] | None = None) -> list[EntityLink]:
    """Exact-match n-grams of the document text against the gazetteer.

    With ``lemmatized`` each token is lemmatized before lookup; the
    link keeps the original surface.  N-grams made up entirely of
    stopwords are never linked.
    """
    words = STOPWORDS if stopwords is None else stopwords
    tokens = doc.text_tokens()
    links = []
    for start, gram in generate_ngrams(tokens, max_n):
        if all(t in words for t in gram):
            continue
        form_tokens = [lemmatize(t) for t in gram] if lemmatized else list(gram)
        form = " ".join(form_tokens)
        entry = gazetteer.entries.get(form)
        if entry is None:
            continue
        links.append(EntityLink(doc.doc_id, start, len(gram), " ".join(gram), form,
                                entry.title, entry.item_id, gazetteer.source, lemmatized))
    return links


# ---------------------------------------------------------------------------
# Evaluation against gold relevance


@dataclass(frozen=True)
class EvalMode:
    """One evaluation view: links of a source judged by one target field."""

    name: str
    source: str
    field: str  # "name" | "url" | "item" | "qid"


DEFAULT_EVAL_MODES = (
    EvalMode("eval1", "wikidump", "name"),
    EvalMode("eval2", "wikidump", "url"),
    EvalMode("eval3", "item-name", "item"),
    EvalMode("eval4", "item-name", "qid"),
    EvalMode("eval5", "sparql-export", "item"),
    EvalMode("eval6", "sparql-export", "qid"),
)

UNLEMMATIZED = "unlemmatized"
LEMMATIZED = "lemmatized"
VARIANTS = (UNLEMMATIZED, LEMMATIZED)


@dataclass
class ModeCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    excluded: int = 0

    def evaluated(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    def f1(self) -> float:
        p, r = self.precision(), self.recall()
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class LinkEvalReport:
    """Confusion counts per (mode, variant) plus per-tuple assignments.

    ``assignments[mode][variant][tuple]`` is one of TP, FP, FN, TN, or
    EXCL for skipped relevance-1/2 tuples.  For every mode and variant,
    tp + fp + fn + tn + excluded equals the number of gold tuples.
    """

    counts: dict[str, dict[str, ModeCounts]]
    assignments: dict[str, dict[str, dict[str, str]]]
    n_tuples: int


def _field_value(link: EntityLink, field_name: str) -> str | None:
    """The link's answer under one target field, None when it has none.

    The "item" field falls back to the matched surface form when the
    entry only carries an item id, mirroring item exports whose keys
    are the item names themselves.
    """
    if field_name == "name":
        return link.target_title
    if field_name == "url":
        return f"wiki/{link.target_title}" if link.target_title else None
    if field_name == "item":
        if link.target_title:
            return link.target_title
        return link.match_form if link.target_item else None
    if field_name == "qid":
        return link.target_item
    raise ValidationError(f"unknown eval field {field_name!r}")


def _target_matches(value: str, field_name: str, gold_target: dict[str, str]) -> bool:
    """Compare a link's field value against the gold target.

    Title-like fields compare on normalized surface form; qid compares
    exactly.  A gold target without the relevant key accepts any value.
    """
    if field_name == "qid":
        expected = gold_target.get("qid")
        return expected is None or value == expected
    expected = gold_target.get("title")
    if expected is None:
        return True
    if field_name == "url":
        value = value[len("wiki/"):]
    return normalize_surface(value) == normalize_surface(expected)


def evaluate_linking(links: list[EntityLink], gold: GoldAnnotations,
                     modes: tuple[EvalMode, ...] = DEFAULT_EVAL_MODES,
                     stopwords: frozenset[str] | None = None) -> LinkEvalReport:
    """Score links against gold relevance, one confusion table per mode.

    Every gold tuple is classified: relevance 1 is TP when a correct
    link exists and FN otherwise (a link to the wrong target counts as
    a miss); relevance 0 is FP when linked, TN when not; relevance 1/2
    is excluded unless no link of the mode covers any non-stopword
    token of the tuple, in which case it is FN.  A link whose surface
    has no gold entry is a validation error.
    """
    words = STOPWORDS if stopwords is None else stopwords
    tuples = {normalize_surface(k): rel for k, rel in gold.entity_relevance.items()}
    targets = {normalize_surface(k): v for k, v in gold.entity_targets.items()}
    for link in links:
        if normalize_surface(link.surface) not in tuples:
            raise ValidationError(f"no gold relevance for linked n-gram {link.surface!r}")

    counts = {mode.name: {v: ModeCounts() for v in VARIANTS} for mode in modes}
    assignments = {mode.name: {v: {} for v in VARIANTS} for mode in modes}
    for mode in modes:
        for variant in VARIANTS:
            flag = variant == LEMMATIZED
            mode_links = [l for l in links if l.source == mode.source and l.lemmatized == flag]
            by_surface: dict[str, list[EntityLink]] = {}
            for link in mode_links:
                by_surface.setdefault(normalize_surface(link.surface), []).append(link)
            tally = counts[mode.name][variant]
            marks = assignments[mode.name][variant]
            for ngram, relevance in tuples.items():
                linked = [l for l in by_surface.get(ngram, ())
                          if _field_value(l, mode.field) is not None]
                if relevance == 1.0:
                    gold_target = targets.get(ngram, {})
                    correct = any(_target_matches(_field_value(l, mode.field), mode.field, gold_target)
                                  for l in linked)
                    mark = "TP" if correct else "FN"
                elif relevance == 0.0:
                    mark = "FP" if linked else "TN"
                else:
                    covered = _half_covered(ngram, mode_links, mode.field, words)
                    mark = "EXCL" if covered else "FN"
                marks[ngram] = mark
                if mark == "TP":
                    tally.tp += 1
                elif mark == "FP":
                    tally.fp += 1
                elif mark == "FN":
                    tally.fn += 1
                elif mark == "TN":
                    tally.tn += 1
                else:
                    tally.excluded += 1
    return LinkEvalReport(counts, assignments, len(tuples))


def _half_covered(ngram: str, mode_links: list[EntityLink], field_name: str,
                  stopwords: frozenset[str]) -> bool:
    """True when some link of the mode covers a non-stopword token of the tuple."""
    tuple_tokens = {t for t in ngram.split(" ") if t not in stopwords}
    for link in mode_links:
        if _field_value(link, field_name) is None:
            continue
        link_tokens = set(normalize_surface(link.surface).split(" "))
        if tuple_tokens & link_tokens:
            return True
    return False


# ---------------------------------------------------------------------------
# Formula-concept linking


@dataclass(frozen=True)
class FormulaConceptLink:
    """A concept phrase found near a formula.

    ``rank`` is the signed token distance of the phrase start from the
    formula: positive before, negative after.  When a gold score of 0
    is attached the rank is cleared, matching evaluation tables that
    print irrelevant candidates without a position.
    """

    doc_id: str
    formula_id: str
    phrase: str
    length: int
    rank: int | None
    score: int | None
    target_title: str | None
    target_item: str | None
    source: str


def link_formula_concepts(doc: Document, gazetteer: Gazetteer, window: int = 10,
                          max_n: int = 3, gold: GoldAnnotations | None = None,
                          stopwords: frozenset[str] | None = None) -> list[FormulaConceptLink]:
    """Match gazetteer phrases within +-window tokens of each formula.

    The window holds at most ``window`` text tokens on each side, so a
    phrase starting at distance ``window`` on the near side is included
    and distance ``window + 1`` is not.  When ``gold`` is given, scores
    come from its formula-concept judgments.
    """
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    words = STOPWORDS if stopwords is None else stopwords
    tokens, positions = doc.token_layout()
    gold_scores: dict[str, dict[str, int]] = {}
    if gold:
        gold_scores = {fid: {normalize_surface(p): s for p, s in phrases.items()}
                       for fid, phrases in gold.concept_relevance.items()}
    links = []
    for fid, position in positions:
        before = tokens[max(0, position - window):position]
        after = tokens[position:position + window]
        sides = (
            (before, lambda start: len(before) - start),
            (after, lambda start: -(start + 1)),
        )
        for side_tokens, rank_of in sides:
            for start, gram in generate_ngrams(side_tokens, max_n):
                if all(t in words for t in gram):
                    continue
                form = " ".join(gram)
                entry = gazetteer.entries.get(form)
                if entry is None:
                    continue
                rank: int | None = rank_of(start)
                score = gold_scores.get(fid, {}).get(form) if gold else None
                if score == 0:
                    rank = None
                links.append(FormulaConceptLink(doc.doc_id, fid, form, len(gram), rank,
                                                score, entry.title, entry.item_id,
                                                gazetteer.source))
    return links


def merge_concept_links(*link_lists: list[FormulaConceptLink]) -> list[FormulaConceptLink]:
    """Merge per-gazetteer results on (doc, formula, phrase, rank).

    Titles and item ids complement each other when different gazetteers
    know different halves of the target.
    """
    merged: dict[tuple, FormulaConceptLink] = {}
    for links in link_lists:
        for link in links:
            key = (link.doc_id, link.formula_id, link.phrase, link.rank)
            kept = merged.get(key)
            if kept is None:
                merged[key] = link
            else:
                merged[key] = FormulaConceptLink(
                    link.doc_id, link.formula_id, link.phrase, link.length, link.rank,
                    kept.score if kept.score is not None else link.score,
                    kept.target_title or link.target_title,
                    kept.target_item or link.target_item,
                    kept.source if kept.source == link.source else f"{kept.source}+{link.source}",
                )
    return list(merged.values())


@dataclass(frozen=True)
class CoverageReport:
    """Window and knowledge-base coverage over gold formula concepts."""

    n_concepts: int
    fraction_with_article: float
    fraction_with_item: float
    fraction_name_in_window: float
    highly_relevant_found: int


def mathel_coverage_report(links: list[FormulaConceptLink], gold: GoldAnnotations) -> CoverageReport:
    """Coverage ratios over the gold concept set.

    A concept is "found" when any link matches its formula and phrase;
    article/item fractions count concepts whose links carry a title or
    an item id.  Highly relevant counts gold score-2 concepts that were
    found.
    """
    concepts = [(fid, phrase, normalize_surface(phrase))
                for fid in gold.concept_relevance
                for phrase in gold.concept_relevance[fid]]
    if not concepts:
        raise DomainError("coverage undefined without gold formula concepts")
    by_concept: dict[tuple[str, str], list[FormulaConceptLink]] = {}
    for link in links:
        by_concept.setdefault((link.formula_id, link.phrase), []).append(link)
    n = len(concepts)
    with_article = 0
    with_item = 0
    found = 0
    highly = 0
    for fid, raw_phrase, phrase in concepts:
        concept_links = by_concept.get((fid, phrase), [])
        if concept_links:
            found += 1
            if any(l.target_title for l in concept_links):
                with_article += 1
            if any(l.target_item for l in concept_links):
                with_item += 1
            if gold.concept_relevance[fid][raw_phrase] == 2:
                highly += 1
    return CoverageReport(n, with_article / n, with_item / n, found / n, highly)
