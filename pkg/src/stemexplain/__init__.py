"""Desk-scale toolkit for classifying STEM documents and explaining the
classifiers through identifier symbols, their semantic names, and linked
entities.

The pipeline stages live in their own modules: corpus handling, token and
vector encoding, formula identifier extraction, distribution statistics,
category classification, identifier augmentation and ablation experiments,
gazetteer entity linking, and surrogate explanations.  The cli module ties
them together behind one executable.
"""

__version__ = "0.1.0"

from .corpus import (Document, GoldAnnotations, IdentifierOccurrence, Segment,
                     document_identifiers, load_corpus, parse_corpus_text,
                     save_corpus)
from .encode import (SparseVector, TfIdfModel, TokenStream, fit_tfidf,
                     lemmatize, tokenize, transform)
from .errors import (DomainError, ParseError, ToolkitError, TrainingError,
                     ValidationError)
from .formulas import extract_identifiers
from .stats import (CountDistribution, build_cooccurrence,
                    build_distribution_library, margin_uncertainty,
                    shannon_entropy)
from .classify import LogRegModel, predict_categories, train_logreg
from .linker import (Gazetteer, evaluate_linking, link_formula_concepts,
                     link_text_entities)
from .explain import build_entropy_report, compute_rankings, lime_explain

__all__ = [
    "__version__",
    "Document", "GoldAnnotations", "IdentifierOccurrence", "Segment",
    "document_identifiers", "load_corpus", "parse_corpus_text", "save_corpus",
    "SparseVector", "TfIdfModel", "TokenStream", "fit_tfidf", "lemmatize",
    "tokenize", "transform",
    "DomainError", "ParseError", "ToolkitError", "TrainingError",
    "ValidationError",
    "extract_identifiers",
    "CountDistribution", "build_cooccurrence", "build_distribution_library",
    "margin_uncertainty", "shannon_entropy",
    "LogRegModel", "predict_categories", "train_logreg",
    "Gazetteer", "evaluate_linking", "link_formula_concepts",
    "link_text_entities",
    "build_entropy_report", "compute_rankings", "lime_explain",
]
