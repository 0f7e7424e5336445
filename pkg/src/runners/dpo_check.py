"""Computes the preference loss of a batch of log-probabilities and checks
the analytic gradient against finite differences.

The input file is json: `{"beta": 0.1, "pairs": [{logp_policy_chosen,
logp_ref_chosen, logp_policy_rejected, logp_ref_rejected}, ...]}`.
"""
import json

from dpo.loss import PairLogProbs, dpo_batch_loss, dpo_loss, grad_check
from .utils import emit_json


LOGGER_IDEN = 'runners/dpo_check.py#main'
LOGPROB_NOTE = 'sequence log-probabilities are summed over tokens, not length normalized'


def add_arguments(parser):
    parser.add_argument('--pairs', required=True, help='json file of {beta, pairs}')
    parser.add_argument('--beta', type=float, help='overrides the file and the configured beta')
    parser.add_argument('--h', type=float, help='finite difference step, instead of the configured one')


def main(args, config):
    with open(args.pairs, 'r', encoding='utf-8') as infile:
        raw = json.load(infile)

    beta = args.beta if args.beta is not None else raw.get('beta', config.dpo.beta)
    h = args.h if args.h is not None else config.dpo.h
    pairs = [PairLogProbs.parse_obj(pair) for pair in raw.get('pairs', [])]

    per_pair = []
    for pair in pairs:
        result = dpo_loss(pair, beta)
        per_pair.append({
            'loss': result.loss,
            'margin': result.margin,
            'grad': list(result.grad),
            'grad_check': grad_check(pair, beta, h),
        })

    emit_json({
        'note': LOGPROB_NOTE,
        'beta': beta,
        'h': h,
        'n': len(pairs),
        'loss': dpo_batch_loss(pairs, beta),
        'max_grad_check': max(p['grad_check'] for p in per_pair),
        'pairs': per_pair,
    })
    return 0
