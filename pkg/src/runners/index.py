"""Builds the sparse index over the store and persists it next to the
documents."""
from integrations import LazyIntegrations
from retrieval.sparse import build_index, save_index
from .utils import emit_json


LOGGER_IDEN = 'runners/index.py#main'


def add_arguments(parser):
    pass


def main(args, config):
    with LazyIntegrations(config, logger_iden=LOGGER_IDEN) as itgs:
        index = build_index(itgs.store)
        path = save_index(index, itgs.store.directory)
        itgs.logger.info('Indexed {} documents, {} terms, into {}', len(index), len(index.postings), path)
        emit_json({'documents': len(index), 'terms': len(index.postings), 'path': path})
    return 0
