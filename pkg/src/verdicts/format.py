"""Parses and renders verdict text.

A reasoning verdict reads `statement_1 [Doc 1] statement_2 [Doc 2][Doc 3]`:
each statement is followed by the maximal run of citations after it. A
refusal is any text beginning with the canonical refusal prefix.
"""
from typing import Set
import re

from parsing.ext_tokens import CITATION_REGEX, create_citation_run_token
from verdicts.models import (
    CiteReason, CiteStatement, NegativeKnowledgeAssertion, Verdict, is_nka_text
)


CITATION_START = re.compile(CITATION_REGEX)
CITATION_RUN = create_citation_run_token()


class VerdictError(Exception):
    pass


class EmptyVerdict(VerdictError):
    def __init__(self):
        super().__init__('verdict text is empty')


class CitationOutOfRange(VerdictError):
    def __init__(self, index: int, num_docs: int):
        super().__init__(f'citation [Doc {index}] is outside the {num_docs} presented documents')
        self.index = index
        self.num_docs = num_docs


class UncitedStatement(VerdictError):
    def __init__(self, text: str):
        super().__init__(f'statement has no citation: {text[:80]!r}')
        self.text = text


class OrphanCitation(VerdictError):
    def __init__(self, position: int):
        super().__init__(f'citation at character {position} follows no statement')
        self.position = position


class NotCiteReason(VerdictError):
    def __init__(self):
        super().__init__('expected a CiteReason verdict')


def parse_verdict(text: str, num_docs: int) -> Verdict:
    """Parses verdict text produced against `num_docs` presented documents.

    Arguments:
    - `text (str)`: The raw verdict
    - `num_docs (int)`: How many documents were presented; citations must be
      in 1..num_docs

    Returns:
    - `verdict (Verdict)`: A NegativeKnowledgeAssertion if the text begins
      with the refusal prefix, otherwise a CiteReason

    Raises:
    - `EmptyVerdict`: If the text is blank
    - `CitationOutOfRange`: If a citation is outside 1..num_docs
    - `UncitedStatement`: If text trails the last citation run
    - `OrphanCitation`: If a citation run has no statement before it
    """
    if num_docs < 0:
        raise ValueError(f'num_docs must be non-negative, got {num_docs}')

    stripped = text.strip()
    if not stripped:
        raise EmptyVerdict()

    if is_nka_text(stripped):
        return NegativeKnowledgeAssertion(text=stripped)

    statements = []
    cursor = 0
    while True:
        match = CITATION_START.search(stripped, cursor)
        if match is None:
            break

        statement_text = stripped[cursor:match.start()].strip()
        if not statement_text:
            raise OrphanCitation(match.start())

        consumed, citations = CITATION_RUN.consume(stripped, match.start())
        for index in citations:
            if not 1 <= index <= num_docs:
                raise CitationOutOfRange(index, num_docs)

        statements.append(CiteStatement(text=statement_text, citations=citations))
        cursor = match.start() + consumed

    trailing = stripped[cursor:].strip()
    if trailing:
        raise UncitedStatement(trailing)

    return CiteReason(statements=statements)


def render_statement(statement: CiteStatement) -> str:
    return statement.text + ' ' + ''.join(f'[Doc {c}]' for c in statement.citations)


def render_verdict(verdict: Verdict) -> str:
    """Renders the verdict canonically, such that parsing the result against
    enough documents gives back an equal verdict."""
    if isinstance(verdict, NegativeKnowledgeAssertion):
        return verdict.text
    return ' '.join(render_statement(s) for s in verdict.statements)


def cited_docs(verdict: Verdict) -> Set[int]:
    """The set of document indices cited anywhere in the verdict.

    Raises:
    - `NotCiteReason`: For refusals
    """
    if not isinstance(verdict, CiteReason):
        raise NotCiteReason()
    return {c for statement in verdict.statements for c in statement.citations}
