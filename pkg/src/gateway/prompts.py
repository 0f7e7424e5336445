"""Renders the versioned prompt templates in `gateway/templates`. The
templates are reconstructions written to the verdict output contract; the
version is part of the file name so that scripted sessions and real runs can
be tied to the exact prompt which produced them.
"""
from typing import List, Optional, Sequence
import functools
import os

from corpus.models import BenchmarkQuestion, Document


TEMPLATE_VERSION = 'v1'
TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'templates')

DOCUMENT_SEPARATOR = '\n\n'
"""Between documents, both in prompts and in concatenated NLI premises"""


@functools.lru_cache(maxsize=None)
def load_template(name: str, version: str = TEMPLATE_VERSION) -> str:
    with open(os.path.join(TEMPLATE_DIR, f'{name}.{version}.txt'), 'r', encoding='utf-8') as infile:
        return infile.read()


def render_options(question: BenchmarkQuestion) -> str:
    return '\n'.join(f'{label}. {text}' for label, text in question.options.items())


def render_documents(docs: Sequence[Document]) -> str:
    """Numbers the documents from 1 in presented order, matching the
    citation indices the verifier must use."""
    return DOCUMENT_SEPARATOR.join(
        f'[Doc {idx}] {document_text(doc)}' for idx, doc in enumerate(docs, start=1)
    )


def document_text(doc: Document) -> str:
    if doc.title:
        return f'{doc.title}. {doc.text}'
    return doc.text


def premise_text(premise) -> str:
    """The NLI premise for a document, a statement, or a list of either,
    concatenated in order."""
    if isinstance(premise, Document):
        return document_text(premise)
    if isinstance(premise, str):
        return premise
    return DOCUMENT_SEPARATOR.join(premise_text(part) for part in premise)


def answer_hypothesis(question: BenchmarkQuestion, label: Optional[str] = None) -> str:
    """The hypothesis that the given option (the gold one by default) answers
    the question."""
    label = question.gold if label is None else label
    return f'{question.question} {question.option_text(label)}'


def verifier_prompt(question: BenchmarkQuestion, docs: Sequence[Document]) -> str:
    return load_template('verifier').format(
        question=question.question, options=render_options(question), documents=render_documents(docs)
    )


def generator_prompt(question: BenchmarkQuestion, reasoning_text: Optional[str]) -> str:
    if reasoning_text:
        reasoning = f'Validated reasoning:\n{reasoning_text}\n'
    else:
        reasoning = 'Answer from your own medical knowledge.\n'
    return load_template('generator').format(
        question=question.question, options=render_options(question),
        reasoning=reasoning, labels=', '.join(question.options.keys())
    )


def self_assess_prompt(question: BenchmarkQuestion, criteria: List[str]) -> str:
    return load_template('self_assess').format(
        question=question.question, options=render_options(question),
        criteria='\n'.join(f'- {c}' for c in criteria), labels=', '.join(question.options.keys())
    )


def drafter_prompt(question: BenchmarkQuestion, docs: Sequence[Document]) -> str:
    return load_template('drafter').format(
        question=question.question, options=render_options(question), documents=render_documents(docs)
    )


def nli_prompt(premise: str, hypothesis: str) -> str:
    return load_template('nli').format(premise=premise, hypothesis=hypothesis)
