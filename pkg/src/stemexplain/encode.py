"""Text normalization and TF-IDF encoding.

The pipeline is deliberately small and fully deterministic: a
boundary-split tokenizer, a fixed shipped stopword list, a rule-based
plural lemmatizer with an exception table, and a TF-IDF model with

    idf(t) = ln((1 + N) / (1 + df(t))) + 1

applied to raw term counts followed by L2 normalization.  Vocabulary
indices follow first-seen token order, and out-of-vocabulary tokens are
ignored at transform time.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from .errors import ValidationError

# Alphanumeric runs; underscore is a boundary like any other punctuation.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Split ``text`` on non-alphanumeric boundaries and lowercase.

    "Velocity dispersion is" -> ["velocity", "dispersion", "is"], and
    "E=mc2" -> ["e", "mc2"].  Empty input yields an empty list.
    """
    return _TOKEN_RE.findall(text.lower())


def _load_wordlist(name: str) -> list[str]:
    path = resources.files("stemexplain.data").joinpath(name)
    return path.read_text(encoding="utf-8").splitlines()


def load_stopwords(path: str | None = None) -> frozenset[str]:
    """Load the stopword set, one entry per line, UTF-8.

    Without ``path`` the fixed list shipped with the package is used.
    """
    if path is None:
        lines = _load_wordlist("stopwords.txt")
    else:
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    return frozenset(w.strip() for w in lines if w.strip())


def load_lemma_exceptions(path: str | None = None) -> dict[str, str]:
    """Load the irregular-plural exception table (``form<TAB>lemma``)."""
    if path is None:
        lines = _load_wordlist("lemma_exceptions.txt")
    else:
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    table = {}
    for line in lines:
        if not line.strip():
            continue
        form, _, lemma = line.partition("\t")
        table[form.strip()] = lemma.strip()
    return table


STOPWORDS = load_stopwords()
LEMMA_EXCEPTIONS = load_lemma_exceptions()


def lemmatize(token: str, exceptions: dict[str, str] | None = None) -> str:
    """Reduce an English plural to its lemma.

    Rule order: exception table, -ies -> -y, sibilant -es stripping,
    plain -s stripping.  The guards (-ss, -us, -is, minimum lengths)
    keep the map idempotent: lemmatize(lemmatize(w)) == lemmatize(w).
    """
    table = LEMMA_EXCEPTIONS if exceptions is None else exceptions
    if token in table:
        return table[token]
    if token.endswith("ies") and len(token) >= 5:
        return token[:-3] + "y"
    if token.endswith("es") and len(token) >= 4 and token[:-2].endswith(("s", "x", "z", "ch", "sh")):
        return token[:-2]
    if token.endswith("s") and len(token) >= 4 and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    return token


@dataclass(frozen=True)
class TokenStream:
    """An ordered token sequence attributed to a document."""

    doc_id: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise ValidationError(f"bad token {tok!r} in stream for {self.doc_id!r}")

    @staticmethod
    def of(doc_id: str, tokens) -> "TokenStream":
        return TokenStream(doc_id, tuple(tokens))


def remove_stopwords(stream: TokenStream, stopwords: frozenset[str] | None = None) -> TokenStream:
    """Drop stopword tokens, preserving the order of the rest."""
    words = STOPWORDS if stopwords is None else stopwords
    return TokenStream(stream.doc_id, tuple(t for t in stream.tokens if t not in words))


def lemmatize_stream(stream: TokenStream, exceptions: dict[str, str] | None = None) -> TokenStream:
    return TokenStream(stream.doc_id, tuple(lemmatize(t, exceptions) for t in stream.tokens))


@dataclass(frozen=True)
class SparseVector:
    """Sorted sparse vector with strictly increasing indices."""

    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValidationError("index/value length mismatch")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValidationError("indices must be strictly increasing")

    @staticmethod
    def from_items(items) -> "SparseVector":
        pairs = sorted((i, v) for i, v in items if v != 0.0)
        return SparseVector(tuple(i for i, _ in pairs), tuple(v for _, v in pairs))

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))

    def dot(self, other: "SparseVector") -> float:
        if len(self.indices) > len(other.indices):
            return other.dot(self)
        lookup = dict(zip(other.indices, other.values))
        return sum(v * lookup[i] for i, v in zip(self.indices, self.values) if i in lookup)

    def cosine_distance(self, other: "SparseVector") -> float:
        """1 - cosine similarity; distance to or from a zero vector is 1."""
        denom = self.norm() * other.norm()
        if denom == 0.0:
            return 1.0
        return 1.0 - self.dot(other) / denom


@dataclass
class TfIdfModel:
    """Fitted TF-IDF vocabulary and inverse document frequencies.

    ``vocabulary`` maps token to column index in first-seen order and
    ``idf`` holds one weight per index; with the smoothed formula every
    idf value is strictly positive.
    """

    vocabulary: dict[str, int]
    idf: list[float]
    document_count: int = 0

    def to_record(self) -> dict:
        tokens = sorted(self.vocabulary, key=self.vocabulary.get)
        return {"tokens": tokens, "idf": list(self.idf), "document_count": self.document_count}

    @staticmethod
    def from_record(record: dict) -> "TfIdfModel":
        vocab = {tok: i for i, tok in enumerate(record["tokens"])}
        return TfIdfModel(vocab, [float(x) for x in record["idf"]], int(record["document_count"]))


def fit_tfidf(streams: list[TokenStream]) -> TfIdfModel:
    """Fit vocabulary and idf over token streams.

    N is the number of streams passed (empty streams count as
    documents).  Raises ValidationError when every stream is empty.
    """
    if not any(stream.tokens for stream in streams):
        raise ValidationError("cannot fit tf-idf: all token streams are empty")
    vocabulary: dict[str, int] = {}
    df = Counter()
    for stream in streams:
        seen = set()
        for tok in stream.tokens:
            if tok not in vocabulary:
                vocabulary[tok] = len(vocabulary)
            seen.add(tok)
        df.update(seen)
    n = len(streams)
    idf = [0.0] * len(vocabulary)
    for tok, index in vocabulary.items():
        idf[index] = math.log((1 + n) / (1 + df[tok])) + 1.0
    return TfIdfModel(vocabulary, idf, n)


def transform(model: TfIdfModel, stream: TokenStream) -> SparseVector:
    """Encode one stream as an L2-normalized tf-idf vector.

    Out-of-vocabulary tokens are ignored; a stream with no known tokens
    encodes to the zero vector.
    """
    counts = Counter(stream.tokens)
    items = []
    for tok, count in counts.items():
        index = model.vocabulary.get(tok)
        if index is not None:
            items.append((index, count * model.idf[index]))
    items.sort()
    norm = math.sqrt(sum(v * v for _, v in items))
    if norm == 0.0:
        return SparseVector((), ())
    return SparseVector(tuple(i for i, _ in items), tuple(v / norm for _, v in items))


def transform_all(model: TfIdfModel, streams: list[TokenStream]) -> list[SparseVector]:
    return [transform(model, s) for s in streams]
