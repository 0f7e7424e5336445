"""Main entry point into the application. Each subcommand is implemented by a
runner module exposing `add_arguments(parser)` and `main(args, config)`.

    python src/main.py --config cfg/config.json bench data/medqa.jsonl --out out/

Exit codes: 0 on success, 1 on any failure (reported on stderr as
`error: <Type>: <message>`), 2 on a usage error.
"""
from typing import List, Optional
import argparse
import importlib
import sys

from loguru import logger

from config import AppConfig, ConfigError, load_config
from corpus.errors import CorpusError
from dpo.loss import DpoError
from evaluation.metrics import EvaluationError
from forge.compose import ForgeError
from gateway.errors import GatewayError
from medrank.builder import MedrankError
from pipeline.loop import PipelineError
from pipeline.models import PipelineConfig
from retrieval.fusion import RetrievalError
from verdicts.format import VerdictError


SUBCOMMANDS = {
    'ingest': 'runners.ingest',
    'index': 'runners.index',
    'retrieve': 'runners.retrieve',
    'answer': 'runners.answer',
    'bench': 'runners.bench',
    'stratify': 'runners.stratify',
    'forge-align': 'runners.forge_align',
    'dpo-check': 'runners.dpo_check',
    'audit': 'runners.audit',
    'fixtures': 'runners.fixtures',
}

PACKAGE_ERRORS = (
    ConfigError, CorpusError, DpoError, EvaluationError, ForgeError, GatewayError, MedrankError,
    PipelineError, RetrievalError, VerdictError, OSError
)
"""Expected failures, reported without a traceback"""

LOG_FORMAT = '{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {extra[iden]} | {message}'


def build_parser() -> argparse.ArgumentParser:
    """The argument parser, with one subparser per runner. Every subcommand
    accepts the configuration overrides."""
    overrides = argparse.ArgumentParser(add_help=False)
    overrides.add_argument('--depth', type=int, help='documents retrieved per query')
    overrides.add_argument('--t-max', type=int, dest='t_max', help='most verify rounds per question')
    overrides.add_argument('--no-iteration', action='store_true', help='stop after the first round')
    overrides.add_argument('--no-mtam', action='store_true', help='use the base verifier endpoint')
    overrides.add_argument('--no-retrieval', action='store_true', help='answer without retrieval')
    overrides.add_argument('--parallelism', type=int, help='questions answered at once')
    overrides.add_argument('--mock', help='scripted session routing every endpoint offline')

    parser = argparse.ArgumentParser(prog='medverify', description=__doc__.split('\n')[0])
    parser.add_argument('--config', help='config file; defaults to $MEDVERIFY_CONFIG or cfg/config.json')
    parser.add_argument('--log-level', dest='log_level', help='TRACE, DEBUG, INFO, WARNING or ERROR')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    for name, modnm in SUBCOMMANDS.items():
        mod = importlib.import_module(modnm)
        doc = (mod.__doc__ or '').strip().split('\n')[0]
        sub = subparsers.add_parser(name, parents=[overrides], help=doc, description=mod.__doc__)
        mod.add_arguments(sub)
        sub.set_defaults(runner=modnm)
    return parser


def apply_overrides(config: AppConfig, args) -> AppConfig:
    """The configuration with the command line overrides applied.

    Raises:
    - `ConfigError`: If an override makes the configuration invalid
    """
    pipeline = config.pipeline.dict()
    retrieval = config.retrieval.copy()
    gateway = config.gateway.copy()
    update = {}

    if args.depth is not None:
        pipeline['depth'] = args.depth
        pipeline['verifier_view'] = min(pipeline['verifier_view'], args.depth)
        retrieval = retrieval.copy(update={'depth': args.depth})
    if args.t_max is not None:
        pipeline['t_max'] = args.t_max
    if args.no_iteration:
        pipeline['enable_iteration'] = False
    if args.no_mtam:
        pipeline['enable_mtam_verifier'] = False
    if args.no_retrieval:
        pipeline['enable_retrieval'] = False
    if args.mock:
        gateway = gateway.copy(update={'mock_script': args.mock})
    if args.parallelism is not None:
        if args.parallelism < 1:
            raise ConfigError('--parallelism', 'must be at least 1')
        update['parallelism'] = args.parallelism
    if args.log_level:
        update['log_level'] = args.log_level

    try:
        update['pipeline'] = PipelineConfig.parse_obj(pipeline)
    except ValueError as exc:
        raise ConfigError('command line', str(exc))
    update['retrieval'] = retrieval
    update['gateway'] = gateway
    return config.copy(update=update)


def configure_logging(level: str):
    logger.remove()
    logger.configure(extra={'iden': 'main'})
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Parses the arguments, loads the configuration and runs the selected
    subcommand.

    Returns:
    - `code (int)`: The process exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    try:
        config = apply_overrides(load_config(args.config), args)
        configure_logging(config.log_level)
        mod = importlib.import_module(args.runner)
        return mod.main(args, config) or 0
    except Exception as exc:  # noqa
        if not isinstance(exc, PACKAGE_ERRORS):
            logger.bind(iden='main.py#cli_main').exception('{} failed unexpectedly', args.command)
        sys.stderr.write(f'error: {type(exc).__name__}: {exc}\n')
        return 1


if __name__ == '__main__':
    sys.exit(cli_main())
