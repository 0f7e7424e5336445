"""This module contains our extension tokens, ie., tokens that are actually
useful in and of themselves: inline document citations and answer labels.
"""
import parsing.tokens as tkns
import re


CITATION_REGEX = r'\[\s*Doc\s*([0-9]{1,9})\s*\]'
"""A literal `[Doc N]` citation, tolerating whitespace inside the brackets
and between Doc and the number. N is decimal with at most nine digits; longer
runs are not citations."""


def create_citation_token():
    """Creates a token for one inline citation, such as `[Doc 3]` or
    `[Doc3]`, optionally preceded by whitespace. The value is the cited
    1-based document index as an int.
    """
    return tkns.TransformedToken(
        tkns.RegexToken(r'\A\s*' + CITATION_REGEX, 1),
        int
    )


def create_citation_run_token():
    """Creates a token for a maximal run of adjacent citations, such as
    `[Doc 2][Doc 3]` or `[Doc 2] [Doc 3]`. The value is the list of cited
    indices in order."""
    return tkns.RepeatedToken(create_citation_token(), minimum=1)


def create_label_token(labels, parenthesized=None, terminator=None):
    """Creates a token for a standalone option label.

    Arguments:
    - `labels (iterable[str])`: The single-letter labels to accept, e.g. A-D.
      Matching is case sensitive so that articles like "a" are not taken as
      labels.
    - `parenthesized (bool, None)`: True to require `(X)`, False to forbid
      parentheses, None to allow either.
    - `terminator (str, None)`: A literal which must follow the label, such as
      `.` for line initial `X.` labels.

    The value of the token is the label.
    """
    label_class = '[' + ''.join(re.escape(lab) for lab in labels) + ']'
    if parenthesized is True:
        body = r'\((' + label_class + r')\)'
    elif parenthesized is False:
        body = r'(' + label_class + r')'
    else:
        body = r'\(?(' + label_class + r')\)?'

    if terminator is not None:
        body += re.escape(terminator)

    return tkns.RegexToken(r'\A[ \t]*[:\-]?[ \t]*' + body + r'(?![0-9A-Za-z])', 1)
