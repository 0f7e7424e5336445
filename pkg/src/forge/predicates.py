"""The defining predicate of each hallucination category, as pure functions
of the recorded evidence. A sample is emitted exactly when its predicate
holds, and the predicate can be re-checked later from the sample alone."""
from typing import Any, Callable, Dict

from forge.models import NegativeCategory, NegativeSample


ENTAIL = 'entail'
NOT_ENTAIL = 'not_entail'


def faulty_reasoning(evidence: Dict[str, Any]) -> bool:
    """The documents do not entail the alternative reasoning"""
    return evidence.get('nli_reasoning_docs') == NOT_ENTAIL


def missing_answer(evidence: Dict[str, Any]) -> bool:
    """A stable question, answered correctly alone, answered differently
    given the alternative reasoning"""
    plain = evidence.get('answer_without_reasoning')
    return (
        evidence.get('group') == 'stable'
        and plain is not None
        and plain == evidence.get('gold')
        and evidence.get('answer_with_reasoning') != plain
    )


def over_refusal(evidence: Dict[str, Any]) -> bool:
    """The alternative refused although the primary reasoning is entailed by
    the documents and leads to the same answer as none"""
    return (
        evidence.get('primary_kind') == 'cite_reason'
        and evidence.get('alt_kind') == 'nka'
        and evidence.get('nli_primary_docs') == ENTAIL
        and evidence.get('answer_with_primary') is not None
        and evidence.get('answer_with_primary') == evidence.get('answer_without_reasoning')
    )


def misattribution(evidence: Dict[str, Any]) -> bool:
    """Distractors similar to the source documents do not entail the
    reasoning"""
    similarity = evidence.get('similarity')
    delta = evidence.get('delta')
    return (
        similarity is not None and delta is not None
        and similarity > delta
        and evidence.get('nli_reasoning_distractors') == NOT_ENTAIL
    )


PREDICATES: Dict[str, Callable[[Dict[str, Any]], bool]] = {
    NegativeCategory.faulty_reasoning.value: faulty_reasoning,
    NegativeCategory.missing_answer.value: missing_answer,
    NegativeCategory.over_refusal.value: over_refusal,
    NegativeCategory.misattribution.value: misattribution,
}


def revalidate(sample: NegativeSample) -> bool:
    return PREDICATES[sample.category](sample.evidence)
