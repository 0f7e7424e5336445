"""Validates a corpus file and appends its documents to the store. Nothing
is kept if any record is invalid."""
from integrations import LazyIntegrations
from .utils import emit_json


LOGGER_IDEN = 'runners/ingest.py#main'


def add_arguments(parser):
    parser.add_argument('--corpus', required=True, help='line delimited corpus file')
    parser.add_argument('--store', help='store directory, instead of the configured one')


def main(args, config):
    if args.store:
        config = config.copy(update={'store': config.store.copy(update={'directory': args.store})})

    with LazyIntegrations(config, logger_iden=LOGGER_IDEN) as itgs:
        itgs.logger.debug('Ingesting {} into {}', args.corpus, config.store.directory)
        stats = itgs.store.ingest_corpus(args.corpus)
        itgs.logger.info(
            'Store {} now holds {} documents ({} tokens)',
            config.store.directory, stats.doc_count, stats.total_tokens
        )
        emit_json(stats.dict())
    return 0
