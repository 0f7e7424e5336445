"""Reference implementation of the DPO objective and its gradient over given
sequence log-probabilities (natural log, not length normalized).

The loss of a pair is `-log sigmoid(margin)` where
`margin = beta * ((policy_chosen - ref_chosen) - (policy_rejected - ref_rejected))`,
computed as `softplus(-margin)` so it neither overflows nor loses precision
for large margins of either sign.
"""
from typing import List, Sequence, Tuple
import math

import numpy as np
from pydantic import BaseModel


DEFAULT_BETA = 0.1
MAX_STEP = 1e-3


class DpoError(Exception):
    pass


class NonFiniteInput(DpoError):
    def __init__(self, field: str, value):
        super().__init__(f'{field} must be finite, got {value}')
        self.field = field
        self.value = value


class EmptyBatch(DpoError):
    def __init__(self):
        super().__init__('the batch has no pairs')


class InvalidBeta(DpoError):
    def __init__(self, beta):
        super().__init__(f'beta must be positive and finite, got {beta}')
        self.beta = beta


class PairLogProbs(BaseModel):
    logp_policy_chosen: float
    logp_ref_chosen: float
    logp_policy_rejected: float
    logp_ref_rejected: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.logp_policy_chosen, self.logp_ref_chosen, self.logp_policy_rejected, self.logp_ref_rejected)


FIELDS = tuple(PairLogProbs.__fields__.keys())


class DpoResult(BaseModel):
    """`grad` is the partial derivative of the loss with respect to each of
    the four log-probabilities, in PairLogProbs field order"""
    loss: float
    margin: float
    grad: Tuple[float, float, float, float]


def _check_beta(beta: float):
    if not isinstance(beta, (int, float)) or not math.isfinite(beta) or beta <= 0:
        raise InvalidBeta(beta)


def _margin(values: Sequence[float], beta: float) -> float:
    policy_chosen, ref_chosen, policy_rejected, ref_rejected = values
    return beta * ((policy_chosen - ref_chosen) - (policy_rejected - ref_rejected))


def softplus(x: float) -> float:
    return float(np.logaddexp(0.0, x))


def sigmoid_neg(margin: float) -> float:
    """sigmoid(-margin), stable for any finite margin"""
    return float(np.exp(-np.logaddexp(0.0, margin)))


def dpo_loss(pair: PairLogProbs, beta: float = DEFAULT_BETA) -> DpoResult:
    """The loss, margin and analytic gradient for one pair.

    Raises:
    - `NonFiniteInput`: If any log-probability is infinite or NaN
    - `InvalidBeta`: If beta is not a positive finite number
    """
    _check_beta(beta)
    values = pair.as_tuple()
    for field, value in zip(FIELDS, values):
        if not math.isfinite(value):
            raise NonFiniteInput(field, value)

    margin = _margin(values, beta)
    scale = beta * sigmoid_neg(margin)
    return DpoResult(
        loss=softplus(-margin),
        margin=margin,
        grad=(-scale, scale, scale, -scale)
    )


def dpo_batch_loss(pairs: Sequence[PairLogProbs], beta: float = DEFAULT_BETA) -> float:
    """The mean loss over the batch. Summed exactly, so the order of the
    pairs does not matter.

    Raises:
    - `EmptyBatch`: If there are no pairs
    """
    if not pairs:
        raise EmptyBatch()
    return math.fsum(dpo_loss(pair, beta).loss for pair in pairs) / len(pairs)


def grad_check(pair: PairLogProbs, beta: float = DEFAULT_BETA, h: float = 1e-5) -> float:
    """Compares the analytic gradient against central finite differences
    with step `h`, returning the largest relative error over the four
    inputs. A component where both estimates are zero has error zero."""
    if not 0 < h <= MAX_STEP:
        raise ValueError(f'h must be in (0, {MAX_STEP}], got {h}')

    analytic = dpo_loss(pair, beta).grad
    values = list(pair.as_tuple())
    errors: List[float] = []
    for idx in range(len(values)):
        up = list(values)
        down = list(values)
        up[idx] += h
        down[idx] -= h
        numeric = (softplus(-_margin(up, beta)) - softplus(-_margin(down, beta))) / (2 * h)
        scale = max(abs(analytic[idx]), abs(numeric))
        errors.append(0.0 if scale == 0 else abs(analytic[idx] - numeric) / scale)
    return max(errors)
