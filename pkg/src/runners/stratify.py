"""Stratifies a question set into stable, medium and challenging groups by
repeated self-assessment."""
from corpus.benchmark import load_benchmark
from integrations import LazyIntegrations
from medrank.builder import stratify_corpus, write_stratification
from medrank.models import EvalCriteria
from .utils import emit_json, finish


LOGGER_IDEN = 'runners/stratify.py#main'


def add_arguments(parser):
    parser.add_argument('--questions', required=True, help='benchmark file')
    parser.add_argument('--out', required=True, help='stratification records file')
    parser.add_argument('--rejects', help='file for quarantined questions')
    parser.add_argument('--k', type=int, help='rounds per question, instead of the configured value')


def main(args, config):
    settings = config.medrank
    k = args.k if args.k is not None else settings.k
    schedule = [settings.schedule[idx % len(settings.schedule)] for idx in range(k)]
    questions = load_benchmark(args.questions)

    with LazyIntegrations(config, logger_iden=LOGGER_IDEN) as itgs:
        stratification = stratify_corpus(
            itgs, questions, settings.endpoint, k, schedule=schedule,
            criteria=EvalCriteria(criteria=settings.criteria), parallelism=config.parallelism,
            rejects_path=args.rejects
        )
        write_stratification(args.out, stratification)
        finish(itgs)

    emit_json({
        'stable': stratification.stable,
        'medium': stratification.medium,
        'challenging': stratification.challenging,
        'quarantined': stratification.quarantined,
    })
    return 0
