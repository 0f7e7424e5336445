"""Exact match scoring and benchmark runs."""
from typing import List, Optional, Sequence
import math
import os

from pydantic import BaseModel, root_validator

from corpus.models import BenchmarkQuestion
from pipeline.loop import answer_batch, write_answer_records
from pipeline.models import AnswerRecord, PipelineConfig


class EvaluationError(Exception):
    pass


class EmptyBenchmark(EvaluationError):
    def __init__(self, dataset: str):
        super().__init__(f'benchmark {dataset} has no questions')
        self.dataset = dataset


def exact_match(predicted: Optional[str], gold: str) -> bool:
    """Case insensitive label equality; a missing prediction never matches"""
    if predicted is None:
        return False
    return predicted.strip().upper() == gold.strip().upper()


class QuestionResult(BaseModel):
    q_id: str
    predicted: Optional[str] = None
    gold: str
    correct: bool
    rounds_used: int
    outcome: str
    error: Optional[str] = None


class EvalReport(BaseModel):
    dataset: str
    n: int
    em: float
    per_question: List[QuestionResult]

    @root_validator(skip_on_failure=True)
    def _counted(cls, values):
        per_question = values['per_question']
        if values['n'] != len(per_question):
            raise ValueError('n must equal the number of per question results')
        return values


class BenchSummary(BaseModel):
    """Per dataset reports and their unweighted average"""
    reports: List[EvalReport]
    average_em: float


def report_from_records(dataset: str, records: Sequence[AnswerRecord]) -> EvalReport:
    """Aggregates answer records into a report. Failed questions count as
    incorrect and keep their error."""
    if not records:
        raise EmptyBenchmark(dataset)
    per_question = [
        QuestionResult(
            q_id=r.q_id, predicted=r.predicted, gold=r.gold, correct=exact_match(r.predicted, r.gold),
            rounds_used=r.rounds_used(), outcome='error' if r.error else r.trace.outcome, error=r.error
        )
        for r in records
    ]
    em = math.fsum(1.0 for q in per_question if q.correct) / len(per_question)
    return EvalReport(dataset=dataset, n=len(per_question), em=em, per_question=per_question)


def run_benchmark(itgs, dataset: str, questions: Sequence[BenchmarkQuestion], config: PipelineConfig,
                  parallelism: int = 1, out_dir: Optional[str] = None) -> EvalReport:
    """Answers every question and scores the results. If `out_dir` is given
    the traces and report are written there as `<dataset>.traces.jsonl` and
    `<dataset>.report.json`.

    Raises:
    - `EmptyBenchmark`: If there are no questions
    """
    if not questions:
        raise EmptyBenchmark(dataset)

    records = answer_batch(itgs, questions, config, parallelism)
    report = report_from_records(dataset, records)
    failed = sum(1 for r in records if r.error)
    itgs.logger.info(
        '{}: EM {:.4f} over {} questions ({} failed)', dataset, report.em, report.n, failed
    )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_answer_records(os.path.join(out_dir, f'{dataset}.traces.jsonl'), records)
        with open(os.path.join(out_dir, f'{dataset}.report.json'), 'w', encoding='utf-8') as outfile:
            outfile.write(report.json(indent=2, sort_keys=True))
            outfile.write('\n')
    return report


def summarize_reports(reports: List[EvalReport]) -> BenchSummary:
    if not reports:
        raise EmptyBenchmark('summary')
    return BenchSummary(reports=reports, average_em=math.fsum(r.em for r in reports) / len(reports))
