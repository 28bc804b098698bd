"""Entropy, margin, the distribution library, and the co-occurrence matrix."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stemexplain.corpus import record_to_document
from stemexplain.errors import DomainError, ValidationError
from stemexplain.stats import (CooccurrenceMatrix, CountDistribution,
                               DistributionLibrary, argmax_predict,
                               build_cooccurrence, build_distribution_library,
                               compare_predictions, entropy_summary,
                               margin_uncertainty, marginalize_middle,
                               shannon_entropy, uncertainty_report)

from .oracles import entropy_bits, margin


counts_strategy = st.dictionaries(
    st.text(alphabet="abcdefgh", min_size=1, max_size=3),
    st.integers(min_value=0, max_value=10**6),
    min_size=1, max_size=16,
).filter(lambda d: sum(d.values()) > 0)


class TestEntropy:
    def test_single_outcome_zero(self):
        assert shannon_entropy(CountDistribution({"a": 7})) == 0.0

    def test_uniform_four_is_two_bits(self):
        dist = CountDistribution({"a": 1, "b": 1, "c": 1, "d": 1})
        assert shannon_entropy(dist) == pytest.approx(2.0, abs=1e-12)

    def test_reference_counts_against_oracle(self):
        # document counts for one symbol's name spread: 55/9/9
        counts = {"time": 55, "system": 9, "function": 9}
        value = shannon_entropy(CountDistribution(counts))
        assert value == pytest.approx(entropy_bits(counts), abs=1e-12)
        assert value == pytest.approx(1.0523802538140186, abs=1e-12)

    def test_zero_count_labels_contribute_nothing(self):
        with_zero = CountDistribution({"a": 3, "b": 1, "c": 0})
        without = CountDistribution({"a": 3, "b": 1})
        assert shannon_entropy(with_zero) == shannon_entropy(without)

    def test_empty_distribution_rejected(self):
        with pytest.raises(DomainError):
            shannon_entropy(CountDistribution({}))
        with pytest.raises(DomainError):
            shannon_entropy(CountDistribution({"a": 0}))

    def test_negative_count_rejected(self):
        with pytest.raises(ValidationError):
            shannon_entropy(CountDistribution({"a": -1, "b": 2}))

    @given(counts_strategy)
    @settings(max_examples=200, deadline=None)
    def test_matches_oracle(self, counts):
        dist = CountDistribution(counts)
        assert shannon_entropy(dist) == pytest.approx(entropy_bits(counts), abs=1e-12)
        assert margin_uncertainty(dist) == pytest.approx(margin(counts), abs=1e-12)

    @given(counts_strategy, st.integers(min_value=1, max_value=1000))
    @settings(max_examples=200, deadline=None)
    def test_scale_invariance(self, counts, k):
        scaled = {label: value * k for label, value in counts.items()}
        assert shannon_entropy(CountDistribution(scaled)) == pytest.approx(
            shannon_entropy(CountDistribution(counts)), abs=1e-12)
        assert margin_uncertainty(CountDistribution(scaled)) == pytest.approx(
            margin_uncertainty(CountDistribution(counts)), abs=1e-12)

    @given(counts_strategy)
    @settings(max_examples=200, deadline=None)
    def test_zero_entropy_iff_margin_one_iff_single_label(self, counts):
        dist = CountDistribution(counts)
        single = sum(1 for v in counts.values() if v > 0) == 1
        assert (shannon_entropy(dist) == 0.0) == single
        assert (margin_uncertainty(dist) == 1.0) == single

    def test_bounded_by_log_nonzero_labels(self):
        dist = CountDistribution({"a": 3, "b": 5, "c": 0})
        assert 0.0 <= shannon_entropy(dist) <= math.log2(2)


class TestMargin:
    def test_single_label_is_one(self):
        assert margin_uncertainty(CountDistribution({"a": 10})) == 1.0

    def test_tie_is_zero(self):
        assert margin_uncertainty(CountDistribution({"a": 5, "b": 5})) == 0.0

    def test_reference_counts(self):
        counts = {"time": 831, "coordinate": 215, "function": 182}
        assert margin_uncertainty(CountDistribution(counts)) == pytest.approx(
            (831 - 215) / 1228, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            margin_uncertainty(CountDistribution({}))


def doc(doc_id, arxiv, msc, formulas):
    """formulas: list of {symbol: name-or-None} dicts, one per formula."""
    segments = []
    names = {}
    for i, symbols in enumerate(formulas):
        fid = f"{doc_id}-f{i}"
        markup = "".join(f"<mi>{s}</mi>" for s in symbols)
        segments.append({"kind": "formula", "content": markup, "fid": fid})
        named = {s: n for s, n in symbols.items() if n is not None}
        if named:
            names[fid] = named
    record = {"id": doc_id, "arxiv": arxiv, "msc": msc, "segments": segments}
    if names:
        record["gold"] = {"identifier_names": names}
    return record_to_document(record)


class TestDistributionLibrary:
    def test_two_doc_hand_count(self):
        docs = [doc("d1", ["quant-ph"], [], [{"t": "time"}]),
                doc("d2", ["quant-ph"], [], [{"t": "time"}])]
        library = build_distribution_library(docs)
        assert library.identifier_class_name == {"t": {"quant-ph": {"time": 2}}}
        assert library.identifier_class == {"t": {"quant-ph": 2}}
        assert library.name_class_identifier == {"time": {"quant-ph": {"t": 2}}}
        assert library.class_counts == {"quant-ph": 2}

    def test_unnamed_identifier_only_in_symbol_tables(self):
        docs = [doc("d1", ["hep-th"], [], [{"x": None}])]
        library = build_distribution_library(docs)
        assert library.identifier_class == {"x": {"hep-th": 1}}
        assert library.identifier_name == {}
        assert library.name_class == {}

    def test_document_level_presence_not_occurrences(self):
        # same symbol twice in one doc still counts once
        docs = [doc("d1", ["hep-th"], [], [{"x": "position"}, {"x": "position"}])]
        library = build_distribution_library(docs)
        assert library.identifier_class == {"x": {"hep-th": 1}}
        assert library.identifier_name == {"x": {"position": 1}}

    def test_primary_label_counting_and_skip(self):
        docs = [doc("d1", ["hep-th", "math-ph"], [], [{"x": None}]),
                doc("d2", [], [], [{"x": None}])]
        library = build_distribution_library(docs)
        assert library.class_counts == {"hep-th": 1}
        assert library.skipped_unlabeled == 1

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValidationError):
            build_distribution_library([])
        with pytest.raises(ValidationError):
            build_distribution_library([doc("d1", [], [], [{"x": None}])])

    def test_marginalization_identities(self):
        rng = random.Random(4)
        docs = []
        for i in range(40):
            formulas = [{rng.choice("txy"): rng.choice(["time", "position", None])}
                        for _ in range(rng.randrange(1, 4))]
            docs.append(doc(f"d{i}", [rng.choice(["hep-th", "quant-ph"])], [], formulas))
        library = build_distribution_library(docs)
        assert marginalize_middle(library.identifier_class_name) == library.identifier_name
        assert marginalize_middle(library.name_class_identifier) == library.name_identifier

    def test_symmetric_totals(self):
        docs = [doc("d1", ["a-b"], [], [{"t": "time", "x": "position"}]),
                doc("d2", ["a-b"], [], [{"t": "temperature"}])]
        library = build_distribution_library(docs)
        total_in = sum(v for inner in library.identifier_name.values() for v in inner.values())
        total_ni = sum(v for inner in library.name_identifier.values() for v in inner.values())
        assert total_in == total_ni

    def test_round_trip_records(self):
        docs = [doc("d1", ["a-b"], [], [{"t": "time"}])]
        library = build_distribution_library(docs)
        assert DistributionLibrary.from_records(library.to_records()) == library


class TestEntropySummary:
    def test_single_key_single_class(self):
        docs = [doc("d1", ["hep-th"], [], [{"t": "time"}])]
        library = build_distribution_library(docs)
        summary = entropy_summary(library, keyed="identifier")
        assert (summary.minimum, summary.mean, summary.maximum) == (0.0, 0.0, 0.0)

    def test_min_mean_max_arithmetic(self):
        # symbol a uniform over two classes (1 bit), symbol b in one (0 bits)
        docs = [doc("d1", ["c-a"], [], [{"a": None}]),
                doc("d2", ["c-b"], [], [{"a": None}]),
                doc("d3", ["c-a"], [], [{"b": None}])]
        summary = entropy_summary(build_distribution_library(docs), keyed="identifier")
        assert summary.minimum == pytest.approx(0.0)
        assert summary.mean == pytest.approx(0.5)
        assert summary.maximum == pytest.approx(1.0)

    def test_empty_axis_rejected(self):
        docs = [doc("d1", ["hep-th"], [], [{"t": None}])]
        library = build_distribution_library(docs)
        with pytest.raises(DomainError):
            entropy_summary(library, keyed="name")


def matrix_corpus():
    return [
        doc("d1", ["astro-ph.SR"], ["85A05"], []),
        doc("d2", ["astro-ph.SR"], ["85A05"], []),
        doc("d3", ["astro-ph.SR"], ["83C05"], []),
        doc("d4", ["gr-qc"], ["83C05"], []),
    ]


class TestCooccurrence:
    def test_single_doc_single_cell(self):
        matrix = build_cooccurrence([doc("d1", ["astro-ph.SR"], ["85A05"], [])])
        assert matrix.row_labels == ("astro-ph.SR",)
        assert matrix.col_labels == ("85A05",)
        assert matrix.counts == [[1]]

    def test_multi_label_cross_product(self):
        matrix = build_cooccurrence([doc("d1", ["a-b", "c-d"], ["11A11", "22B22"], [])])
        assert matrix.counts == [[1, 1], [1, 1]]

    def test_doc_missing_axis_skipped(self):
        matrix = build_cooccurrence([doc("d1", ["a-b"], ["11A11"], []),
                                     doc("d2", ["a-b"], [], [])])
        assert matrix.skipped == 1
        assert matrix.counts == [[1]]

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValidationError):
            build_cooccurrence([])

    def test_total_is_label_cross_product_sum(self):
        docs = matrix_corpus()
        matrix = build_cooccurrence(docs)
        want = sum(len(d.arxiv_categories) * len(d.msc_codes) for d in docs)
        assert sum(sum(row) for row in matrix.counts) == want


class TestUncertaintyReport:
    def test_identity_matrix(self):
        matrix = CooccurrenceMatrix(("r1", "r2"), ("c1", "c2"), [[1, 0], [0, 1]], 0)
        report = uncertainty_report(matrix, "rows")
        assert report.entropy_mean == 0.0 and report.entropy_max == 0.0
        assert report.margin_mean == 1.0 and report.margin_max == 1.0

    def test_single_row_closed_form(self):
        matrix = CooccurrenceMatrix(("r",), ("c1", "c2"), [[3, 1]], 0)
        report = uncertainty_report(matrix, "rows")
        (label, entropy, row_margin), = report.rows
        assert label == "r"
        assert entropy == pytest.approx(0.8112781244591328, abs=1e-12)
        assert row_margin == pytest.approx(0.5)

    def test_fanout_direction(self):
        # each MSC code maps to exactly one arXiv class, while each arXiv
        # class fans out over three MSC codes: column margins are sharp,
        # row margins are not
        rows = [[4, 3, 3, 0, 0, 0], [0, 0, 0, 4, 3, 3]]
        matrix = CooccurrenceMatrix(("a-x", "b-y"),
                                    ("11A01", "11A02", "11A03",
                                     "22B01", "22B02", "22B03"), rows, 0)
        by_row = uncertainty_report(matrix, "rows")
        by_col = uncertainty_report(matrix, "columns")
        assert by_col.margin_mean == 1.0
        assert by_row.margin_mean < 0.2
        assert by_row.entropy_mean > 1.0 > by_col.entropy_mean

    def test_all_zero_matrix_rejected(self):
        matrix = CooccurrenceMatrix(("r",), ("c",), [[0]], 0)
        with pytest.raises(DomainError):
            uncertainty_report(matrix, "rows")


class TestArgmaxPredict:
    def test_row_argmax(self):
        matrix = CooccurrenceMatrix(("astro-ph.SR",), ("83C05", "85A05"), [[1, 9]], 0)
        assert argmax_predict(matrix, "rows") == {"astro-ph.SR": "85A05"}

    def test_tie_breaks_lexicographically(self):
        matrix = CooccurrenceMatrix(("r",), ("B", "A"), [[5, 5]], 0)
        assert argmax_predict(matrix, "rows") == {"r": "A"}

    def test_zero_total_label_omitted(self):
        matrix = CooccurrenceMatrix(("r1", "r2"), ("c",), [[1], [0]], 0)
        assert argmax_predict(matrix, "rows") == {"r1": "c"}

    def test_columns_direction(self):
        matrix = CooccurrenceMatrix(("r1", "r2"), ("c1",), [[2], [5]], 0)
        assert argmax_predict(matrix, "columns") == {"c1": "r2"}

    def test_compare_predictions_counts(self):
        first = {"a": "x", "b": "y", "c": "z"}
        second = {"a": "x", "b": "w", "d": "q"}
        assert compare_predictions(first, second) == (1, 1)
