"""Terminology mapping engine: Python bindings."""

import json

from ._core import (
    Concept,
    ConceptStore,
    HashEmbeddingProvider,
    Pipeline,
    ScoredConcept,
    SearchQuery,
    StubBackend,
    TermmapError,
    VectorHit,
    VectorIndex,
    indel_similarity,
    preprocess_search_term,
    rank_candidates,
)

__all__ = [
    "Concept",
    "ConceptStore",
    "HashEmbeddingProvider",
    "Pipeline",
    "ScoredConcept",
    "SearchQuery",
    "StubBackend",
    "TermmapError",
    "VectorHit",
    "VectorIndex",
    "concept_details",
    "indel_similarity",
    "preprocess_search_term",
    "rank_candidates",
    "run_pipeline",
]


def run_pipeline(pipeline, names, options=None):
    """Runs `names` through `pipeline`; returns the decoded [{name, events}] list."""
    payload = json.dumps(options) if options else ""
    return json.loads(pipeline.run_json(list(names), payload))


def concept_details(store, concept_id, synonyms=False, ancestors=False, relationships=False):
    return json.loads(
        store.concept_details_json(concept_id, synonyms, ancestors, relationships)
    )
