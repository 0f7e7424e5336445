"""Stratifies questions by how consistently a model answers them across k
rounds of self-assessment under varied decoding settings."""
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence
import json

import pytypeutils as tus

from corpus.models import BenchmarkQuestion
from gateway.errors import GatewayError
from gateway.models import DecodingParams
from medrank.models import (
    DEFAULT_CRITERIA, DEFAULT_SCHEDULE, DifficultyLabel, EvalCriteria, SelfAssessmentRound,
    Stratification, StratifiedQuestion, group_for
)


class MedrankError(Exception):
    pass


class BadSchedule(MedrankError):
    def __init__(self, k: int, entries: int):
        super().__init__(f'k={k} rounds need k decoding entries, got {entries}')
        self.k = k
        self.entries = entries


def default_schedule(k: int) -> List[DecodingParams]:
    """The default settings for k rounds: the four default temperatures,
    cycled when k exceeds four."""
    return [DEFAULT_SCHEDULE[idx % len(DEFAULT_SCHEDULE)] for idx in range(k)]


def run_self_assessment(itgs, question: BenchmarkQuestion, endpoint: str, k: int,
                        schedule: Optional[Sequence[DecodingParams]] = None,
                        criteria: Optional[EvalCriteria] = None) -> List[SelfAssessmentRound]:
    """Runs k rounds of self-assessment in schedule order. A round whose call
    fails is recorded as incorrect with its error.

    Raises:
    - `BadSchedule`: If k < 2 or the schedule does not have k entries
    """
    tus.check(question=(question, BenchmarkQuestion), endpoint=(endpoint, str), k=(k, int))
    schedule = list(schedule) if schedule is not None else default_schedule(k)
    if k < 2 or len(schedule) != k:
        raise BadSchedule(k, len(schedule))
    criteria = criteria if criteria is not None else EvalCriteria(criteria=list(DEFAULT_CRITERIA))

    rounds = []
    for round_index, decoding in enumerate(schedule):
        try:
            predicted = itgs.gateway.self_assess(question, decoding, criteria.criteria, endpoint=endpoint)
        except GatewayError as exc:
            itgs.logger.warning('{} round {}: self assessment failed: {}', question.q_id, round_index, exc)
            rounds.append(SelfAssessmentRound(
                round_index=round_index, decoding=decoding, correct=False,
                error=f'{type(exc).__name__}: {exc}'
            ))
            continue

        rounds.append(SelfAssessmentRound(
            round_index=round_index, decoding=decoding, predicted=predicted,
            correct=predicted == question.gold
        ))
    return rounds


def assess_difficulty(rounds: Sequence[SelfAssessmentRound]) -> DifficultyLabel:
    """Counts incorrect rounds into a difficulty label"""
    if not rounds:
        raise ValueError('at least one round is needed')
    incorrect = sum(1 for r in rounds if not r.correct)
    return DifficultyLabel(l=incorrect, k=len(rounds), group=group_for(incorrect, len(rounds)))


def stratify_corpus(itgs, questions: Sequence[BenchmarkQuestion], endpoint: str, k: int,
                    schedule: Optional[Sequence[DecodingParams]] = None,
                    criteria: Optional[EvalCriteria] = None, parallelism: int = 1,
                    rejects_path: Optional[str] = None) -> Stratification:
    """Partitions the questions into stable, medium and challenging groups.

    A question is quarantined, rather than labelled challenging, when every
    one of its rounds failed or it could not be assessed at all; quarantined
    questions and their reasons go to `rejects_path` if given.
    """
    schedule = list(schedule) if schedule is not None else default_schedule(k)
    if k < 2 or len(schedule) != k:
        raise BadSchedule(k, len(schedule))

    def work(question):
        try:
            return question, run_self_assessment(itgs, question, endpoint, k, schedule, criteria), None
        except Exception as exc:  # noqa
            itgs.logger.exception('Failed to assess {}', question.q_id)
            return question, None, f'{type(exc).__name__}: {exc}'

    if parallelism > 1 and len(questions) > 1:
        itgs.gateway
        with ThreadPoolExecutor(max_workers=parallelism) as executor:
            results = list(executor.map(work, questions))
    else:
        results = [work(q) for q in questions]

    result = Stratification()
    rejects = []
    for question, rounds, error in results:
        if rounds is not None and all(r.error is not None for r in rounds):
            error = '; '.join(sorted(set(r.error for r in rounds)))
            rounds = None
        if rounds is None:
            result.quarantined.append(question.q_id)
            rejects.append({'q_id': question.q_id, 'reason': error})
            continue

        label = assess_difficulty(rounds)
        getattr(result, label.group).append(question.q_id)
        result.records.append(StratifiedQuestion(q_id=question.q_id, rounds=rounds, l=label.l, group=label.group))

    itgs.logger.info(
        'Stratified {} questions: {} stable, {} medium, {} challenging, {} quarantined',
        len(questions), len(result.stable), len(result.medium), len(result.challenging), len(result.quarantined)
    )

    if rejects_path is not None:
        with open(rejects_path, 'w', encoding='utf-8') as outfile:
            for reject in rejects:
                outfile.write(json.dumps(reject, sort_keys=True))
                outfile.write('\n')
    return result


def write_stratification(path: str, stratification: Stratification):
    """One `{q_id, rounds, l, group}` line per stratified question"""
    with open(path, 'w', encoding='utf-8') as outfile:
        for record in stratification.records:
            outfile.write(record.json())
            outfile.write('\n')


def read_stratification(path: str) -> Stratification:
    result = Stratification()
    with open(path, 'r', encoding='utf-8') as infile:
        for line in infile:
            if not line.strip():
                continue
            record = StratifiedQuestion.parse_raw(line)
            result.records.append(record)
            getattr(result, record.group).append(record.q_id)
    return result
