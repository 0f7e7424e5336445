"""Extracts the chosen option label from a free text response. The first
standalone label in any of the shapes "answer is X", "(X)" or a line
starting "X." wins."""
from typing import Sequence

from corpus.models import OPTION_LABELS
from gateway.errors import NoLabelFound
from parsing.ext_tokens import create_label_token
from parsing.parser import Parser


def _parsers(labels: Sequence[str]):
    return (
        Parser('answer is', [{'token': create_label_token(labels), 'optional': False}], ignore_case=True),
        Parser('(', [{'token': create_label_token(labels, parenthesized=False, terminator=')'), 'optional': False}]),
        Parser('\n', [{'token': create_label_token(labels, parenthesized=False, terminator='.'), 'optional': False}]),
    )


PARSERS = _parsers(OPTION_LABELS)


def extract_label(raw: str, labels: Sequence[str] = OPTION_LABELS) -> str:
    """Finds the answer label in the response.

    Raises:
    - `NoLabelFound`: If no pattern matches
    """
    parsers = PARSERS if tuple(labels) == OPTION_LABELS else _parsers(labels)
    text = '\n' + raw

    best = None
    for parser in parsers:
        found = parser.find(text)
        if found is not None and (best is None or found[0] < best[0]):
            best = found

    if best is None:
        raise NoLabelFound(raw)
    return best[1][0]
