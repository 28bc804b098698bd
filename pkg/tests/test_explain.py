"""Surrogate explanations and entity-ranking entropy summaries."""

import numpy as np
import pytest

from stemexplain.classify import LabeledDataset, LogRegModel, train_logreg
from stemexplain.corpus import record_to_document
from stemexplain.encode import TokenStream, fit_tfidf, transform
from stemexplain.errors import DomainError, ValidationError
from stemexplain.explain import (CLS_ENT, ENT_CLS, MATH_KIND, MDISC, MFREQ,
                                 REPORT_ROWS, TEXT_KIND, EntityRanking,
                                 build_entropy_report, class_entity_entropy,
                                 compute_rankings, lime_explain, rank_entities)


def fit_two_class():
    """Classifier separating 'wave' docs from 'star' docs."""
    streams = [
        TokenStream.of("a1", ["wave", "packet", "spreads"]),
        TokenStream.of("a2", ["wave", "collapse", "spreads"]),
        TokenStream.of("b1", ["star", "cluster", "spreads"]),
        TokenStream.of("b2", ["star", "formation", "spreads"]),
    ]
    encoder = fit_tfidf(streams)
    data = LabeledDataset([transform(encoder, s) for s in streams],
                          ["quant", "quant", "astro", "astro"],
                          dim=len(encoder.vocabulary))
    return train_logreg(data), encoder


class TestLimeExplain:
    def test_deterministic_per_seed(self):
        model, encoder = fit_two_class()
        tokens = ["wave", "packet", "spreads"]
        a = lime_explain(model, encoder, "d", tokens, "quant", seed=4)
        b = lime_explain(model, encoder, "d", tokens, "quant", seed=4)
        c = lime_explain(model, encoder, "d", tokens, "quant", seed=5)
        assert a == b
        assert a.features != c.features

    def test_discriminative_token_gets_positive_weight(self):
        model, encoder = fit_two_class()
        explanation = lime_explain(model, encoder, "d",
                                   ["wave", "packet", "spreads"], "quant",
                                   num_samples=500, seed=1)
        weights = dict(explanation.features)
        assert weights["wave"] > 0
        assert weights["wave"] > weights["spreads"]
        # the same token argues against the other class
        flipped = lime_explain(model, encoder, "d",
                               ["wave", "packet", "spreads"], "astro",
                               num_samples=500, seed=1)
        assert dict(flipped.features)["wave"] < 0

    def test_features_sorted_by_magnitude(self):
        model, encoder = fit_two_class()
        explanation = lime_explain(model, encoder, "d",
                                   ["wave", "packet", "spreads"], "quant", seed=1)
        magnitudes = [abs(w) for _, w in explanation.features]
        assert magnitudes == sorted(magnitudes, reverse=True)

    def test_top_k_truncates(self):
        model, encoder = fit_two_class()
        explanation = lime_explain(model, encoder, "d",
                                   ["wave", "packet", "spreads"], "quant",
                                   top_k=2, seed=1)
        assert len(explanation.features) == 2

    def test_out_of_vocabulary_tokens_ignored(self):
        model, encoder = fit_two_class()
        explanation = lime_explain(model, encoder, "d",
                                   ["wave", "unseen", "spreads"], "quant", seed=1)
        assert "unseen" not in dict(explanation.features)

    def test_all_oov_rejected(self):
        model, encoder = fit_two_class()
        with pytest.raises(ValidationError):
            lime_explain(model, encoder, "d", ["unseen", "tokens"], "quant")

    def test_unknown_class_rejected(self):
        model, encoder = fit_two_class()
        with pytest.raises(ValidationError):
            lime_explain(model, encoder, "d", ["wave"], "nuclear")

    def test_bad_sample_count_rejected(self):
        model, encoder = fit_two_class()
        with pytest.raises(ValidationError):
            lime_explain(model, encoder, "d", ["wave"], "quant", num_samples=0)

    def test_default_kernel_width(self):
        model, encoder = fit_two_class()
        explanation = lime_explain(model, encoder, "d",
                                   ["wave", "packet", "spreads"], "quant", seed=1)
        assert explanation.kernel_width == pytest.approx(0.75 * np.sqrt(3))

    def test_fidelity_reasonable_on_near_linear_model(self):
        model, encoder = fit_two_class()
        explanation = lime_explain(model, encoder, "d",
                                   ["wave", "packet", "spreads"], "quant",
                                   num_samples=800, seed=1)
        assert 0.0 < explanation.fidelity <= 1.0


def labeled_docs():
    texts = {
        "quant-ph": ["wave packet dynamics", "wave collapse model",
                     "wave interference study"],
        "astro-ph": ["star cluster survey", "star formation rate",
                     "star luminosity fit"],
    }
    docs = []
    for cls, bodies in texts.items():
        for i, body in enumerate(bodies):
            docs.append(record_to_document({
                "id": f"{cls}-{i}", "arxiv": [cls], "msc": [],
                "segments": [{"kind": "text", "content": body}]}))
    return docs


def fit_on(docs, streams):
    encoder = fit_tfidf(streams)
    labels = [d.arxiv_categories[0] for d in docs]
    data = LabeledDataset([transform(encoder, s) for s in streams], labels,
                          dim=len(encoder.vocabulary))
    return train_logreg(data), encoder


class TestRankEntities:
    def test_mfreq_counts_documents_not_occurrences(self):
        docs = labeled_docs()
        model, encoder = fit_on(docs, [TokenStream.of(d.doc_id, d.text_tokens())
                                       for d in docs])
        ranking = rank_entities(docs, model, encoder, MFREQ, TEXT_KIND)
        strengths = dict(ranking.per_class["quant-ph"])
        assert strengths["wave"] == 3.0
        assert strengths["packet"] == 1.0
        assert "star" not in strengths

    def test_mdisc_puts_marker_token_first(self):
        docs = labeled_docs()
        model, encoder = fit_on(docs, [TokenStream.of(d.doc_id, d.text_tokens())
                                       for d in docs])
        ranking = rank_entities(docs, model, encoder, MDISC, TEXT_KIND,
                                num_samples=400, seed=2)
        assert ranking.per_class["quant-ph"][0][0] == "wave"
        assert ranking.per_class["astro-ph"][0][0] == "star"
        assert ranking.warnings == ()

    def test_mdisc_budget_limits_documents(self):
        docs = labeled_docs()
        model, encoder = fit_on(docs, [TokenStream.of(d.doc_id, d.text_tokens())
                                       for d in docs])
        small = rank_entities(docs, model, encoder, MDISC, TEXT_KIND,
                              budget=1, num_samples=200, seed=2)
        # one document per class still yields a ranking
        assert set(small.per_class) == {"quant-ph", "astro-ph"}

    def test_math_kind_requires_streams(self):
        docs = labeled_docs()
        model, encoder = fit_on(docs, [TokenStream.of(d.doc_id, d.text_tokens())
                                       for d in docs])
        with pytest.raises(ValidationError):
            rank_entities(docs, model, encoder, MFREQ, MATH_KIND)

    def test_math_streams_feed_math_kind(self):
        docs = labeled_docs()
        streams = {d.doc_id: ["psi"] if d.arxiv_categories[0] == "quant-ph"
                   else ["lum"] for d in docs}
        model, encoder = fit_on(docs, [TokenStream.of(d.doc_id, streams[d.doc_id])
                                       for d in docs])
        ranking = rank_entities(docs, model, encoder, MFREQ, MATH_KIND,
                                math_streams=streams)
        assert dict(ranking.per_class["quant-ph"]) == {"psi": 3.0}

    def test_unknown_mode_rejected(self):
        docs = labeled_docs()
        model, encoder = fit_on(docs, [TokenStream.of(d.doc_id, d.text_tokens())
                                       for d in docs])
        with pytest.raises(ValidationError):
            rank_entities(docs, model, encoder, "MWild", TEXT_KIND)

    def test_class_unknown_to_model_warned_and_omitted(self):
        docs = labeled_docs()
        model, encoder = fit_on(docs, [TokenStream.of(d.doc_id, d.text_tokens())
                                       for d in docs])
        extra = record_to_document({
            "id": "gr-0", "arxiv": ["gr-qc"], "msc": [],
            "segments": [{"kind": "text", "content": "metric tensor waves"}]})
        ranking = rank_entities(docs + [extra], model, encoder, MDISC, TEXT_KIND,
                                num_samples=200, seed=2)
        assert "gr-qc" not in ranking.per_class
        assert any("gr-qc" in w for w in ranking.warnings)


class TestClassEntityEntropy:
    def test_single_class_entity_contributes_zero_clsent(self):
        ranking = EntityRanking(MFREQ, TEXT_KIND, {
            "a": (("only", 4.0),), "b": (("other", 4.0),)})
        assert class_entity_entropy(ranking, CLS_ENT) == 0.0

    def test_shared_entity_even_split_gives_one_bit(self):
        ranking = EntityRanking(MFREQ, TEXT_KIND, {
            "a": (("shared", 2.0),), "b": (("shared", 2.0),)})
        assert class_entity_entropy(ranking, CLS_ENT) == pytest.approx(1.0)

    def test_entcls_mean_over_classes(self):
        ranking = EntityRanking(MFREQ, TEXT_KIND, {
            "a": (("x", 1.0), ("y", 1.0)),  # 1 bit
            "b": (("z", 1.0),),             # 0 bits
        })
        assert class_entity_entropy(ranking, ENT_CLS) == pytest.approx(0.5)

    def test_top_m_limits_both_directions(self):
        ranking = EntityRanking(MFREQ, TEXT_KIND, {
            "a": (("x", 8.0), ("y", 1.0), ("z", 1.0))})
        # with top_m=1 only x is kept: one entity, one class
        assert class_entity_entropy(ranking, ENT_CLS, top_m=1) == 0.0
        assert class_entity_entropy(ranking, CLS_ENT, top_m=1) == 0.0

    def test_zero_strengths_dropped(self):
        ranking = EntityRanking(MDISC, TEXT_KIND, {
            "a": (("x", 1.0), ("dead", 0.0))})
        assert class_entity_entropy(ranking, ENT_CLS) == 0.0

    def test_empty_ranking_rejected(self):
        with pytest.raises(DomainError):
            class_entity_entropy(EntityRanking(MFREQ, TEXT_KIND, {}), CLS_ENT)

    def test_all_zero_rejected(self):
        ranking = EntityRanking(MDISC, TEXT_KIND, {"a": (("x", 0.0),)})
        with pytest.raises(DomainError):
            class_entity_entropy(ranking, CLS_ENT)
        with pytest.raises(DomainError):
            class_entity_entropy(ranking, ENT_CLS)

    def test_unknown_direction_rejected(self):
        ranking = EntityRanking(MFREQ, TEXT_KIND, {"a": (("x", 1.0),)})
        with pytest.raises(ValidationError):
            class_entity_entropy(ranking, "Sideways")


class TestEntropyReport:
    def test_eight_rows_in_fixed_order(self):
        assert len(REPORT_ROWS) == 8
        assert REPORT_ROWS[0] == (MDISC, TEXT_KIND, CLS_ENT)
        assert REPORT_ROWS[-1] == (MFREQ, MATH_KIND, ENT_CLS)

    def test_build_report_from_rankings(self):
        docs = labeled_docs()
        text_streams = [TokenStream.of(d.doc_id, d.text_tokens()) for d in docs]
        math_streams = {d.doc_id: ["psi", "h"] if d.arxiv_categories[0] == "quant-ph"
                        else ["lum", "h"] for d in docs}
        text_model, text_encoder = fit_on(docs, text_streams)
        math_model, math_encoder = fit_on(
            docs, [TokenStream.of(d.doc_id, math_streams[d.doc_id]) for d in docs])
        rankings = compute_rankings(docs, text_model, text_encoder,
                                    math_model, math_encoder, math_streams,
                                    num_samples=200, seed=3)
        report = build_entropy_report(rankings, top_m=10)
        labels = [label for label, _ in report.rows]
        assert labels == ["MDiscTextClsEnt", "MDiscTextEntCls",
                          "MFreqTextClsEnt", "MFreqTextEntCls",
                          "MDiscMathClsEnt", "MDiscMathEntCls",
                          "MFreqMathClsEnt", "MFreqMathEntCls"]
        for _, value in report.rows:
            assert value >= 0.0
        # the shared math token "h" sits in both classes: ClsEnt sees spread
        assert report.value("MFreqMathClsEnt") > 0.0
        with pytest.raises(KeyError):
            report.value("NoSuchRow")
