"""Runs the pipeline over one or more benchmark files and reports exact
match per benchmark and on average. With `--out` the traces, per benchmark
reports and the summary are written there."""
import os

from corpus.benchmark import load_benchmark
from evaluation.metrics import run_benchmark, summarize_reports
from integrations import LazyIntegrations
from .utils import dataset_name, emit_json, finish, write_json


LOGGER_IDEN = 'runners/bench.py#main'
SUMMARY_FILE = 'summary.json'


def add_arguments(parser):
    parser.add_argument('benchmarks', nargs='+', help='benchmark files')
    parser.add_argument('--out', help='directory for traces and reports')


def main(args, config):
    reports = []
    with LazyIntegrations(config, logger_iden=LOGGER_IDEN) as itgs:
        for path in args.benchmarks:
            questions = load_benchmark(path)
            reports.append(run_benchmark(
                itgs, dataset_name(path), questions, config.pipeline,
                parallelism=config.parallelism, out_dir=args.out
            ))
        summary = summarize_reports(reports)
        itgs.logger.info('Average EM {:.4f} over {} benchmarks', summary.average_em, len(reports))
        finish(itgs)

    payload = {
        'average_em': summary.average_em,
        'datasets': {r.dataset: {'n': r.n, 'em': r.em} for r in summary.reports},
    }
    if args.out:
        write_json(os.path.join(args.out, SUMMARY_FILE), payload)
    emit_json(payload)
    return 0
