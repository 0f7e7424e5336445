"""Classifies answered questions into the four hallucination categories using
the NLI judge and the frozen generator as oracles.

Per record:
- a statement not entailed by the documents it cites is a misattribution if
  some other shown document entails it, otherwise faulty reasoning;
- a reasoning verdict from which the generator does not reach the gold
  answer is a missing answer;
- a refusal when the shown documents entail the gold answer is an
  over-refusal.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence
import math

from pydantic import BaseModel

from corpus.errors import CorpusError
from corpus.models import BenchmarkQuestion
from gateway.errors import GatewayError
from gateway.models import NliLabel
from gateway.prompts import answer_hypothesis
from pipeline.models import AnswerRecord, VerdictKind
from verdicts.models import CiteReason, NegativeKnowledgeAssertion


CATEGORIES = ('faulty_reasoning', 'misattribution', 'missing_answer', 'over_refusal')

DENOMINATORS = {
    'faulty_reasoning': 'audited records whose verdict is CiteReason',
    'misattribution': 'audited records whose verdict is CiteReason',
    'missing_answer': 'audited records whose verdict is CiteReason',
    'over_refusal': 'audited records whose verdict is a refusal',
}


class StatementAudit(BaseModel):
    index: int
    cited_doc_ids: List[str]
    cited_label: str
    supporting_doc_ids: List[str] = []
    category: Optional[str] = None


class RecordAudit(BaseModel):
    q_id: str
    verdict_kind: str
    doc_ids: List[str]
    categories: List[str] = []
    statements: List[StatementAudit] = []
    answer_with_reasoning: Optional[str] = None
    gold: str
    evidence_label: Optional[str] = None


class Unauditable(BaseModel):
    q_id: str
    reason: str


class CategoryStat(BaseModel):
    count: int
    denominator: int
    denominator_definition: str
    proportion: float


class HallucinationReport(BaseModel):
    variant: str
    audited: int
    categories: Dict[str, CategoryStat]
    records: List[RecordAudit]
    unauditable: List[Unauditable]


class NotAuditable(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def final_round(record: AnswerRecord):
    """The last round with a parsed verdict, which is the one judged"""
    for rnd in reversed(record.trace.rounds):
        if rnd.verdict_kind in (VerdictKind.cite_reason, VerdictKind.nka) and rnd.verdict is not None:
            return rnd
    return None


def audit_record(itgs, record: AnswerRecord, question: BenchmarkQuestion, nli: str = 'nli',
                 generator: str = 'generator') -> RecordAudit:
    """Audits one record.

    Raises:
    - `NotAuditable`: If the record has no judged verdict, or an oracle or
      the store failed
    """
    if record.error is not None:
        raise NotAuditable(f'answering failed: {record.error}')
    rnd = final_round(record)
    if rnd is None:
        raise NotAuditable('no round produced a verdict')

    try:
        docs = [itgs.store.get_document(doc_id) for doc_id in rnd.doc_ids]
        if isinstance(rnd.verdict, NegativeKnowledgeAssertion):
            label = itgs.gateway.call_nli(docs, answer_hypothesis(question), endpoint=nli)
            return RecordAudit(
                q_id=record.q_id, verdict_kind=VerdictKind.nka.value, doc_ids=rnd.doc_ids,
                categories=['over_refusal'] if label == NliLabel.entail else [],
                gold=question.gold, evidence_label=label.value
            )
        return _audit_reasoning(itgs, record, question, rnd.verdict, rnd.doc_ids, docs, nli, generator)
    except (GatewayError, CorpusError) as exc:
        raise NotAuditable(f'{type(exc).__name__}: {exc}')


def _audit_reasoning(itgs, record, question, verdict: CiteReason, doc_ids, docs, nli, generator) -> RecordAudit:
    statements = []
    for idx, statement in enumerate(verdict.statements):
        if any(c > len(docs) for c in statement.citations):
            raise NotAuditable(f'statement {idx} cites beyond the {len(docs)} shown documents')
        cited_positions = list(dict.fromkeys(c - 1 for c in statement.citations))
        cited = [docs[p] for p in cited_positions]
        label = itgs.gateway.call_nli(cited, statement.text, endpoint=nli)
        audit = StatementAudit(
            index=idx, cited_doc_ids=[d.doc_id for d in cited], cited_label=label.value
        )
        if label == NliLabel.not_entail:
            for position, doc in enumerate(docs):
                if position in cited_positions:
                    continue
                if itgs.gateway.call_nli(doc, statement.text, endpoint=nli) == NliLabel.entail:
                    audit.supporting_doc_ids.append(doc.doc_id)
            audit.category = 'misattribution' if audit.supporting_doc_ids else 'faulty_reasoning'
        statements.append(audit)

    answer = itgs.gateway.call_generator(question, verdict, endpoint=generator)
    categories = set(s.category for s in statements if s.category is not None)
    if answer != question.gold:
        categories.add('missing_answer')

    return RecordAudit(
        q_id=record.q_id, verdict_kind=VerdictKind.cite_reason.value, doc_ids=doc_ids,
        categories=[c for c in CATEGORIES if c in categories], statements=statements,
        answer_with_reasoning=answer, gold=question.gold
    )


def audit_hallucinations(itgs, records: Sequence[AnswerRecord], questions: Sequence[BenchmarkQuestion],
                         variant: str = 'base', nli: str = 'nli', generator: str = 'generator',
                         parallelism: int = 1) -> HallucinationReport:
    """Audits every record and aggregates per category counts, each over its
    stated denominator. Records which cannot be audited are listed and
    excluded."""
    by_question = {q.q_id: q for q in questions}

    def work(record):
        question = by_question.get(record.q_id)
        if question is None:
            return Unauditable(q_id=record.q_id, reason='question not in benchmark')
        try:
            return audit_record(itgs, record, question, nli=nli, generator=generator)
        except NotAuditable as exc:
            itgs.logger.warning('{} is not auditable: {}', record.q_id, exc.reason)
            return Unauditable(q_id=record.q_id, reason=exc.reason)

    if parallelism > 1 and len(records) > 1:
        itgs.store
        itgs.gateway
        with ThreadPoolExecutor(max_workers=parallelism) as executor:
            results = list(executor.map(work, records))
    else:
        results = [work(r) for r in records]

    audited = [r for r in results if isinstance(r, RecordAudit)]
    unauditable = [r for r in results if isinstance(r, Unauditable)]
    return HallucinationReport(
        variant=variant, audited=len(audited), categories=category_stats(audited),
        records=audited, unauditable=unauditable
    )


def category_stats(audited: Sequence[RecordAudit]) -> Dict[str, CategoryStat]:
    """Counts recomputed from the record audits alone"""
    reasoning = sum(1 for r in audited if r.verdict_kind == VerdictKind.cite_reason.value)
    refusals = sum(1 for r in audited if r.verdict_kind == VerdictKind.nka.value)
    stats = {}
    for category in CATEGORIES:
        denominator = refusals if category == 'over_refusal' else reasoning
        count = sum(1 for r in audited if category in r.categories)
        stats[category] = CategoryStat(
            count=count, denominator=denominator, denominator_definition=DENOMINATORS[category],
            proportion=0.0 if denominator == 0 else count / denominator
        )
    return stats


def proportion_consistent(stat: CategoryStat) -> bool:
    expected = 0.0 if stat.denominator == 0 else stat.count / stat.denominator
    return math.isclose(stat.proportion, expected, rel_tol=0, abs_tol=1e-15)
