"""Builds the hallucination-aware preference corpus and the matching
supervised corpus for a question set."""
from corpus.benchmark import load_benchmark
from forge.corpus import emit_preference_corpus, forge_corpus, summarize, write_forge_outputs
from integrations import LazyIntegrations
from .utils import emit_json, finish, load_groups


LOGGER_IDEN = 'runners/forge_align.py#main'


def add_arguments(parser):
    parser.add_argument('--questions', required=True, help='benchmark file')
    parser.add_argument('--out', required=True, help='output directory')
    parser.add_argument(
        '--stratification',
        help='stratification records; without them no question counts as stable'
    )


def main(args, config):
    settings = config.forge
    questions = load_benchmark(args.questions)
    groups = load_groups(args.stratification)

    with LazyIntegrations(config, logger_iden=LOGGER_IDEN) as itgs:
        results = forge_corpus(itgs, questions, groups, settings, parallelism=config.parallelism)
        positives, negatives, quarantined, docsets = summarize(results)
        endpoints = {
            name: itgs.gateway.endpoint(name).model_name
            for name in sorted({
                settings.primary_drafter, settings.alt_drafter, settings.nli,
                settings.generator, settings.embedder
            })
        }
        pairs, manifest = emit_preference_corpus(itgs, questions, positives, negatives, settings, endpoints)
        manifest = manifest.copy(update={'quarantined_drafts': quarantined, 'docsets': docsets})
        write_forge_outputs(args.out, questions, results, pairs, manifest)
        itgs.logger.info(
            'Forged {} pairs from {} positives and {} negatives over {} questions',
            len(pairs), len(positives), len(negatives), len(questions)
        )
        finish(itgs)

    emit_json({
        'pairs': manifest.pairs,
        'pairs_per_category': manifest.pairs_per_category,
        'positives': manifest.positives,
        'unpaired_negatives': manifest.unpaired_negatives,
    })
    return 0
