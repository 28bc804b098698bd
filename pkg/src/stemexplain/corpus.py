"""Document model and corpus file IO.

A corpus file is UTF-8 text with one JSON record per line:

    {"id": "...", "arxiv": [...], "msc": [...],
     "segments": [{"kind": "text", "content": "..."},
                  {"kind": "formula", "content": "<mi>E</mi>...", "fid": "f1"}],
     "gold": {...}}

Segments preserve the original interleaving of prose and formula
markup.  The optional ``gold`` object carries human annotations used by
the statistics and evaluation layers: identifier names per formula,
entity-linking relevance (with optional expected targets), and
formula-concept relevance scores.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .encode import tokenize
from .errors import ParseError, ValidationError
from .formulas import extract_identifiers, parse_formula

TEXT = "text"
FORMULA = "formula"

_ARXIV_RE = re.compile(r"^[A-Za-z0-9-]+(\.[A-Za-z0-9-]+)?$")
_MSC_RE = re.compile(r"^[0-9]{2}[A-Za-z-][0-9]{2}$")


@dataclass(frozen=True)
class Segment:
    """One stretch of a document: prose text or formula markup."""

    kind: str
    content: str
    fid: str | None = None


@dataclass
class GoldAnnotations:
    """Optional human ground truth attached to a document.

    identifier_names: formula id -> symbol -> name.
    entity_relevance: text n-gram -> relevance in {0, 0.5, 1}.
    entity_targets:   text n-gram -> expected link target, a dict with
                      optional "title" and "qid" keys; used to decide
                      whether a produced link points at the right thing.
    concept_relevance: formula id -> candidate phrase -> score in {0, 1, 2}.
    """

    identifier_names: dict[str, dict[str, str]] = field(default_factory=dict)
    entity_relevance: dict[str, float] = field(default_factory=dict)
    entity_targets: dict[str, dict[str, str]] = field(default_factory=dict)
    concept_relevance: dict[str, dict[str, int]] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not (self.identifier_names or self.entity_relevance
                    or self.entity_targets or self.concept_relevance)


@dataclass
class Document:
    doc_id: str
    segments: list[Segment]
    arxiv_categories: list[str]
    msc_codes: list[str]
    gold: GoldAnnotations | None = None

    def text_tokens(self) -> list[str]:
        """All tokens of the text segments, in reading order."""
        tokens: list[str] = []
        for segment in self.segments:
            if segment.kind == TEXT:
                tokens.extend(tokenize(segment.content))
        return tokens

    def formula_segments(self) -> list[tuple[str, Segment]]:
        """(formula id, segment) pairs in document order.

        Formulas without an explicit fid get a positional one derived
        from the segment index, so every identifier occurrence can be
        traced back to its formula.
        """
        out = []
        for index, segment in enumerate(self.segments):
            if segment.kind == FORMULA:
                out.append((segment.fid or f"seg{index}", segment))
        return out

    def formula_ids(self) -> list[str]:
        return [fid for fid, _ in self.formula_segments()]

    def token_layout(self) -> tuple[list[str], list[tuple[str, int]]]:
        """Text tokens plus formula positions within that token stream.

        A formula position p means the formula sits between text token
        p-1 and text token p; p equals the number of text tokens that
        precede the formula.
        """
        tokens: list[str] = []
        positions: list[tuple[str, int]] = []
        for index, segment in enumerate(self.segments):
            if segment.kind == TEXT:
                tokens.extend(tokenize(segment.content))
            else:
                positions.append((segment.fid or f"seg{index}", len(tokens)))
        return tokens, positions


@dataclass(frozen=True)
class IdentifierOccurrence:
    """One identifier symbol occurrence inside a formula."""

    doc_id: str
    formula_id: str
    symbol: str
    name: str | None = None


def document_identifiers(doc: Document) -> list[IdentifierOccurrence]:
    """Extract identifier occurrences, attaching gold names when present."""
    names = doc.gold.identifier_names if doc.gold else {}
    out = []
    for fid, segment in doc.formula_segments():
        formula_names = names.get(fid, {})
        for symbol in extract_identifiers(segment.content):
            out.append(IdentifierOccurrence(doc.doc_id, fid, symbol, formula_names.get(symbol)))
    return out


def _require(condition: bool, message: str, line: int | None):
    if not condition:
        raise ParseError(message, line)


def _parse_gold(raw: dict, line: int | None) -> GoldAnnotations:
    _require(isinstance(raw, dict), "gold must be an object", line)
    known = {"identifier_names", "entity_relevance", "entity_targets", "concept_relevance"}
    unknown = set(raw) - known
    _require(not unknown, f"unknown gold keys: {sorted(unknown)}", line)
    gold = GoldAnnotations()
    for fid, names in raw.get("identifier_names", {}).items():
        gold.identifier_names[str(fid)] = {str(k): str(v) for k, v in names.items()}
    for ngram, rel in raw.get("entity_relevance", {}).items():
        rel = float(rel)
        _require(rel in (0.0, 0.5, 1.0), f"entity relevance must be 0, 0.5 or 1, got {rel}", line)
        gold.entity_relevance[str(ngram)] = rel
    for ngram, target in raw.get("entity_targets", {}).items():
        _require(isinstance(target, dict), "entity target must be an object", line)
        unknown = set(target) - {"title", "qid"}
        _require(not unknown, f"unknown entity target keys: {sorted(unknown)}", line)
        gold.entity_targets[str(ngram)] = {str(k): str(v) for k, v in target.items()}
    for fid, phrases in raw.get("concept_relevance", {}).items():
        scores = {}
        for phrase, score in phrases.items():
            score = int(score)
            _require(score in (0, 1, 2), f"concept score must be 0, 1 or 2, got {score}", line)
            scores[str(phrase)] = score
        gold.concept_relevance[str(fid)] = scores
    return gold


def record_to_document(record: dict, line: int | None = None) -> Document:
    """Build a Document from one parsed JSON record, validating fields."""
    _require(isinstance(record, dict), "record must be an object", line)
    known = {"id", "arxiv", "msc", "segments", "gold"}
    unknown = set(record) - known
    _require(not unknown, f"unknown record keys: {sorted(unknown)}", line)
    for key in ("id", "arxiv", "msc", "segments"):
        _require(key in record, f"missing required field {key!r}", line)
    doc_id = record["id"]
    _require(isinstance(doc_id, str) and doc_id != "", "id must be a non-empty string", line)
    arxiv = record["arxiv"]
    msc = record["msc"]
    _require(isinstance(arxiv, list), "arxiv must be an array", line)
    _require(isinstance(msc, list), "msc must be an array", line)
    for code in arxiv:
        _require(isinstance(code, str) and _ARXIV_RE.match(code) is not None,
                 f"bad arxiv category {code!r}", line)
    for code in msc:
        _require(isinstance(code, str) and _MSC_RE.match(code) is not None,
                 f"bad msc code {code!r}", line)
    segments = []
    fids_seen = set()
    _require(isinstance(record["segments"], list), "segments must be an array", line)
    for raw in record["segments"]:
        _require(isinstance(raw, dict), "segment must be an object", line)
        unknown = set(raw) - {"kind", "content", "fid"}
        _require(not unknown, f"unknown segment keys: {sorted(unknown)}", line)
        kind = raw.get("kind")
        _require(kind in (TEXT, FORMULA), f"segment kind must be text or formula, got {kind!r}", line)
        content = raw.get("content")
        _require(isinstance(content, str), "segment content must be a string", line)
        fid = raw.get("fid")
        _require(fid is None or kind == FORMULA, "fid is only valid on formula segments", line)
        if fid is not None:
            _require(isinstance(fid, str) and fid != "", "fid must be a non-empty string", line)
            _require(fid not in fids_seen, f"duplicate formula id {fid!r}", line)
            fids_seen.add(fid)
        if kind == FORMULA:
            try:
                parse_formula(content)
            except ParseError as exc:
                raise ParseError(f"in document {doc_id!r}: {exc}", line) from exc
        segments.append(Segment(kind, content, fid))
    gold = None
    if "gold" in record and record["gold"] is not None:
        gold = _parse_gold(record["gold"], line)
    return Document(doc_id, segments, list(arxiv), list(msc), gold)


def document_to_record(doc: Document) -> dict:
    record = {
        "id": doc.doc_id,
        "arxiv": list(doc.arxiv_categories),
        "msc": list(doc.msc_codes),
        "segments": [],
    }
    for segment in doc.segments:
        raw = {"kind": segment.kind, "content": segment.content}
        if segment.fid is not None:
            raw["fid"] = segment.fid
        record["segments"].append(raw)
    if doc.gold is not None and not doc.gold.is_empty():
        gold = {}
        if doc.gold.identifier_names:
            gold["identifier_names"] = doc.gold.identifier_names
        if doc.gold.entity_relevance:
            gold["entity_relevance"] = doc.gold.entity_relevance
        if doc.gold.entity_targets:
            gold["entity_targets"] = doc.gold.entity_targets
        if doc.gold.concept_relevance:
            gold["concept_relevance"] = doc.gold.concept_relevance
        record["gold"] = gold
    return record


def parse_corpus_text(text: str) -> list[Document]:
    documents = []
    seen_ids = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line_no) from exc
        doc = record_to_document(record, line_no)
        if doc.doc_id in seen_ids:
            raise ValidationError(f"duplicate document id {doc.doc_id!r} at line {line_no}")
        seen_ids.add(doc.doc_id)
        documents.append(doc)
    return documents


def load_corpus(path: str) -> list[Document]:
    """Load a corpus file; raises ParseError/ValidationError on bad input."""
    with open(path, encoding="utf-8") as handle:
        return parse_corpus_text(handle.read())


def corpus_to_text(documents: list[Document]) -> str:
    lines = [json.dumps(document_to_record(d), ensure_ascii=False) for d in documents]
    return "".join(line + "\n" for line in lines)


def save_corpus(documents: list[Document], path: str):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(corpus_to_text(documents))


def primary_label(doc: Document, axis: str) -> str | None:
    """First label on the chosen axis ("arxiv" or "msc"), if any."""
    if axis == "arxiv":
        labels = doc.arxiv_categories
    elif axis == "msc":
        labels = doc.msc_codes
    else:
        raise ValidationError(f"unknown label axis {axis!r}")
    return labels[0] if labels else None


def axis_labels(doc: Document, axis: str) -> list[str]:
    """All labels on the chosen axis."""
    if axis == "arxiv":
        return list(doc.arxiv_categories)
    if axis == "msc":
        return list(doc.msc_codes)
    raise ValidationError(f"unknown label axis {axis!r}")
