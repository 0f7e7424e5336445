"""Writes the offline fixture bundle: toy corpus, benchmark, forge
questions, mock script, config and expected outputs."""
from fixtures.generator import DEFAULT_SEED, generate_fixtures, write_bundle
from .utils import emit_json


LOGGER_IDEN = 'runners/fixtures.py#main'


def add_arguments(parser):
    parser.add_argument('--out', required=True, help='directory to write the bundle into')
    parser.add_argument('--seed', type=int, default=DEFAULT_SEED)


def main(args, config):
    bundle = generate_fixtures(args.seed)
    paths = write_bundle(bundle, args.out)
    emit_json(paths)
    return 0
