"""Answers the questions of a benchmark file and writes one answer record,
with its full trace, per line."""
import sys

from corpus.benchmark import load_benchmark
from integrations import LazyIntegrations
from pipeline.loop import answer_batch, write_answer_records
from .utils import finish


LOGGER_IDEN = 'runners/answer.py#main'


def add_arguments(parser):
    parser.add_argument('--questions', required=True, help='benchmark file')
    parser.add_argument('--out', help='answer records file; stdout if omitted')


def main(args, config):
    questions = load_benchmark(args.questions)
    with LazyIntegrations(config, logger_iden=LOGGER_IDEN) as itgs:
        records = answer_batch(itgs, questions, config.pipeline, config.parallelism)
        if args.out:
            write_answer_records(args.out, records)
        else:
            for record in records:
                sys.stdout.write(record.json(sort_keys=True))
                sys.stdout.write('\n')
        failed = sum(1 for r in records if r.error)
        itgs.logger.info('Answered {} questions, {} failed', len(records), failed)
        finish(itgs)
    return 0
