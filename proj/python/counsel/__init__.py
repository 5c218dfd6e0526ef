"""Python interface to the multi-agent legal consultation engine.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports its public names so ``import counsel`` is all callers need.
"""

from ._core import (  # noqa: F401
    CitationMention,
    CounselError,
    ElementGraph,
    Entity,
    Event,
    MetricScore,
    Relationship,
    SearchHit,
    Split,
    Statute,
    StatuteIndex,
    Triplet,
    ValidationReport,
    Violation,
    bleu,
    consult_scripted,
    dpo_loss,
    dpo_pref,
    encode_prompt,
    extract_citations,
    load_corpus,
    load_triplets,
    metric_tokenize,
    normalize_law_name,
    parse_graph,
    replay_trace,
    rouge_l,
    rouge_n,
    serialize_graph,
    tokenize,
    validate_graph,
    verify_citations,
)

__all__ = [
    "CitationMention",
    "CounselError",
    "ElementGraph",
    "Entity",
    "Event",
    "MetricScore",
    "Relationship",
    "SearchHit",
    "Split",
    "Statute",
    "StatuteIndex",
    "Triplet",
    "ValidationReport",
    "Violation",
    "bleu",
    "consult_scripted",
    "dpo_loss",
    "dpo_pref",
    "encode_prompt",
    "extract_citations",
    "load_corpus",
    "load_triplets",
    "metric_tokenize",
    "normalize_law_name",
    "parse_graph",
    "replay_trace",
    "rouge_l",
    "rouge_n",
    "serialize_graph",
    "tokenize",
    "validate_graph",
    "verify_citations",
]
