"""The retrieve, verify and refine loop.

Each round retrieves for the current query and shows the verifier the top
documents. Validated reasoning goes to the generator and ends the loop; a
refusal refines the query with the verifier's gap analysis. If no round
validates, the generator answers from its own knowledge.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence, Set, Union
import json

import pytypeutils as tus

from corpus.models import BenchmarkQuestion, Document
from gateway.errors import GatewayError, UnparseableVerdict
from pipeline.models import (
    AnswerRecord, IterationTrace, Outcome, PipelineConfig, RoundRecord, VerdictKind
)
from verdicts.models import CiteReason, GapAnalysis


FOCUS_MARKER = ' ; focus: '
FOCUS_JOIN = '; '


class PipelineError(Exception):
    pass


class EmptyGap(PipelineError):
    def __init__(self):
        super().__init__('query augmentation needs at least one gap term')


class QuestionAborted(PipelineError):
    """A question failed part way; the trace so far is attached"""
    def __init__(self, q_id: str, trace: IterationTrace, cause: Exception):
        super().__init__(f'question {q_id} aborted: {type(cause).__name__}: {cause}')
        self.q_id = q_id
        self.trace = trace
        self.cause = cause


def augment_query(query: str, gap: Union[GapAnalysis, Sequence[str]]) -> str:
    """Appends the gap terms to the query as a focus clause, replacing any
    focus clause already present.

    Raises:
    - `EmptyGap`: If there are no gap terms
    """
    terms = gap.missing_aspects if isinstance(gap, GapAnalysis) else [t.strip() for t in gap if t.strip()]
    if not terms:
        raise EmptyGap()

    marker_at = query.find(FOCUS_MARKER)
    base = query if marker_at < 0 else query[:marker_at]
    return base + FOCUS_MARKER + FOCUS_JOIN.join(terms)


def select_view(docs: Sequence[Document], shown: Set[str], size: int) -> List[Document]:
    """The documents to show the verifier: unseen documents first, then those
    shown in earlier rounds, each group in retrieval order."""
    unseen = [d for d in docs if d.doc_id not in shown]
    seen = [d for d in docs if d.doc_id in shown]
    return (unseen + seen)[:size]


def answer_question(itgs, question: BenchmarkQuestion, config: PipelineConfig) -> AnswerRecord:
    """Answers one question.

    Arguments:
    - `itgs (LazyIntegrations)`: Provides the retriever, gateway and logger
    - `question (BenchmarkQuestion)`: The question
    - `config (PipelineConfig)`: Rounds, depths and ablation switches

    Returns:
    - `record (AnswerRecord)`: The prediction and the full trace

    Raises:
    - `QuestionAborted`: If a gateway call failed, or the verifier response
      was unparseable and `config.abort_on_unparseable` is set
    """
    tus.check(question=(question, BenchmarkQuestion), config=(config, PipelineConfig))
    trace = IterationTrace()
    verifier = config.active_verifier()
    query = question.question
    shown = set()
    reasoning: Optional[CiteReason] = None

    try:
        for iteration in range(config.rounds_allowed()):
            evidence = itgs.retriever.retrieve(query, config.depth, iteration=iteration)
            view = select_view(evidence.docs, shown, config.verifier_view)
            if not view:
                itgs.logger.debug('{} round {}: nothing retrieved for {!r}', question.q_id, iteration, query)
                trace.rounds.append(RoundRecord(
                    iteration=iteration, query=query, doc_ids=[], verdict_kind=VerdictKind.no_evidence
                ))
                break

            doc_ids = [d.doc_id for d in view]
            shown.update(doc_ids)
            model = itgs.gateway.endpoint(verifier).model_name

            try:
                output = itgs.gateway.call_verifier(question, view, endpoint=verifier)
            except UnparseableVerdict as exc:
                itgs.logger.warning('{} round {}: unparseable verifier output', question.q_id, iteration)
                trace.rounds.append(RoundRecord(
                    iteration=iteration, query=query, doc_ids=doc_ids, verifier_model=model,
                    verifier_raw=exc.raw, verdict_kind=VerdictKind.unparseable
                ))
                if config.abort_on_unparseable:
                    raise
                continue

            if isinstance(output.verdict, CiteReason):
                trace.rounds.append(RoundRecord(
                    iteration=iteration, query=query, doc_ids=doc_ids, verifier_model=model,
                    verifier_raw=output.raw, verdict_kind=VerdictKind.cite_reason, verdict=output.verdict
                ))
                reasoning = output.verdict
                trace.outcome = Outcome.validated
                break

            trace.rounds.append(RoundRecord(
                iteration=iteration, query=query, doc_ids=doc_ids, verifier_model=model,
                verifier_raw=output.raw, verdict_kind=VerdictKind.nka, verdict=output.verdict,
                gap=output.gap.missing_aspects
            ))
            query = augment_query(query, output.gap)
            itgs.logger.trace('{} round {}: refined query to {!r}', question.q_id, iteration, query)

        predicted = itgs.gateway.call_generator(question, reasoning, endpoint=config.generator_endpoint)
    except GatewayError as exc:
        raise QuestionAborted(question.q_id, trace, exc)

    itgs.logger.debug(
        '{}: predicted {} (gold {}) after {} rounds, {}',
        question.q_id, predicted, question.gold, len(trace.rounds), trace.outcome
    )
    return AnswerRecord(
        q_id=question.q_id, question=question.question, predicted=predicted, gold=question.gold,
        trace=trace, final_verdict=reasoning
    )


def error_record(question: BenchmarkQuestion, exc: Exception) -> AnswerRecord:
    trace = IterationTrace()
    cause = exc
    if isinstance(exc, QuestionAborted):
        trace = exc.trace
        cause = exc.cause
    return AnswerRecord(
        q_id=question.q_id, question=question.question, gold=question.gold, trace=trace,
        error=f'{type(cause).__name__}: {cause}'
    )


def answer_batch(itgs, questions: Sequence[BenchmarkQuestion], config: PipelineConfig,
                 parallelism: int = 1) -> List[AnswerRecord]:
    """Answers every question, in parallel when `parallelism > 1`. Records
    come back in input order. A question which fails yields a record with
    `error` set and no prediction; the rest of the batch continues."""
    tus.check(parallelism=(parallelism, int))
    if parallelism < 1:
        raise ValueError(f'parallelism must be at least 1, got {parallelism}')

    def work(question):
        try:
            return answer_question(itgs, question, config)
        except Exception as exc:  # noqa
            itgs.logger.exception('Failed to answer {}', question.q_id)
            return error_record(question, exc)

    if parallelism == 1 or len(questions) <= 1:
        return [work(q) for q in questions]

    # open the shared handles before any worker can race to create them
    itgs.retriever
    itgs.gateway
    with ThreadPoolExecutor(max_workers=parallelism) as executor:
        return list(executor.map(work, questions))


def write_answer_records(path: str, records: Iterable[AnswerRecord]):
    """One line per record, including the full trace"""
    with open(path, 'w', encoding='utf-8') as outfile:
        for record in records:
            outfile.write(json.dumps(json.loads(record.json()), sort_keys=True))
            outfile.write('\n')


def read_answer_records(path: str) -> List[AnswerRecord]:
    with open(path, 'r', encoding='utf-8') as infile:
        return [AnswerRecord.parse_raw(line) for line in infile if line.strip()]
