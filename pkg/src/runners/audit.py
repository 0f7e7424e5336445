"""Audits answer records, such as the traces `bench` writes, for the four
hallucination categories."""
from corpus.benchmark import load_benchmark
from evaluation.audit import audit_hallucinations
from integrations import LazyIntegrations
from pipeline.loop import read_answer_records
from .utils import emit_json, finish, write_json


LOGGER_IDEN = 'runners/audit.py#main'


def add_arguments(parser):
    parser.add_argument('--records', required=True, help='answer records file')
    parser.add_argument('--questions', required=True, help='the benchmark the records answer')
    parser.add_argument('--variant', default='base', help='label for the model variant audited')
    parser.add_argument('--out', help='file for the full report with its evidence')


def main(args, config):
    records = read_answer_records(args.records)
    questions = load_benchmark(args.questions)
    settings = config.evaluation

    with LazyIntegrations(config, logger_iden=LOGGER_IDEN) as itgs:
        report = audit_hallucinations(
            itgs, records, questions, variant=args.variant, nli=settings.nli,
            generator=settings.generator, parallelism=config.parallelism
        )
        itgs.logger.info(
            'Audited {} records of {}, {} unauditable', report.audited, args.variant, len(report.unauditable)
        )
        finish(itgs)

    if args.out:
        write_json(args.out, report.dict())
    emit_json({
        'variant': report.variant,
        'audited': report.audited,
        'unauditable': [u.dict() for u in report.unauditable],
        'categories': {name: stat.dict() for name, stat in report.categories.items()},
    })
    return 0
