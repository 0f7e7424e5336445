"""Prints the fused ranking for one query, one `doc_id<TAB>score` line per
document."""
import sys

from integrations import LazyIntegrations
from .utils import finish


LOGGER_IDEN = 'runners/retrieve.py#main'


def add_arguments(parser):
    parser.add_argument('--q', required=True, help='the query text')


def main(args, config):
    with LazyIntegrations(config, logger_iden=LOGGER_IDEN) as itgs:
        evidence = itgs.retriever.retrieve(args.q, config.retrieval.depth)
        for doc_id, score in zip(evidence.doc_ids(), evidence.scores):
            sys.stdout.write(f'{doc_id}\t{score:.12f}\n')
        if itgs.retriever.dense_clients:
            finish(itgs)
    return 0
