"""Loads multiple choice benchmark files. Each line is an object with the keys
q_id, question, options (an object keyed A through D) and gold, plus an
optional subject.
"""
from typing import Iterable, List, Optional
import json

from corpus.models import BenchmarkQuestion, OPTION_LABELS
from corpus.errors import MalformedRecord, MissingGold, BadLabel


MEDICAL_SUBJECTS = (
    'anatomy', 'clinical_knowledge', 'college_biology', 'college_medicine',
    'medical_genetics', 'professional_medicine'
)
"""The medical subdomains kept when filtering a general knowledge benchmark"""


def parse_benchmark_record(line: str, line_no: int) -> BenchmarkQuestion:
    try:
        raw = json.loads(line)
    except ValueError as ex:
        raise MalformedRecord(line_no, f'invalid json ({ex})')

    if not isinstance(raw, dict):
        raise MalformedRecord(line_no, 'expected an object')

    for key in ('q_id', 'question'):
        if not isinstance(raw.get(key), str) or not raw[key]:
            raise MalformedRecord(line_no, f'{key} must be a non-empty string')

    options = raw.get('options')
    if not isinstance(options, dict) or len(options) != len(OPTION_LABELS):
        raise MalformedRecord(line_no, f'expected exactly {len(OPTION_LABELS)} options')

    for label, text in options.items():
        if label not in OPTION_LABELS:
            raise BadLabel(line_no, label)
        if not isinstance(text, str):
            raise MalformedRecord(line_no, f'option {label} must be a string')

    if raw.get('gold') is None or raw.get('gold') == '':
        raise MissingGold(line_no)

    gold = raw['gold']
    if gold not in OPTION_LABELS:
        raise BadLabel(line_no, gold)

    subject = raw.get('subject')
    if subject is not None and not isinstance(subject, str):
        raise MalformedRecord(line_no, 'subject must be a string')

    return BenchmarkQuestion(
        q_id=raw['q_id'],
        question=raw['question'],
        options={label: options[label] for label in OPTION_LABELS},
        gold=gold,
        subject=subject
    )


def load_benchmark(path: str, subjects: Optional[Iterable[str]] = None) -> List[BenchmarkQuestion]:
    """Loads the benchmark at the given path, preserving file order.

    Arguments:
    - `path (str)`: The line delimited benchmark file
    - `subjects (iterable[str], None)`: If specified, only questions whose
      subject is in this collection are returned.

    Returns:
    - `questions (list[BenchmarkQuestion])`: The questions in file order

    Raises:
    - `MalformedRecord`: If a record is not valid json or lacks fields
    - `MissingGold`: If a record has no gold label
    - `BadLabel`: If an option label or the gold label is not A through D
    """
    keep = frozenset(subjects) if subjects is not None else None
    result = []
    with open(path, 'r', encoding='utf-8') as infile:
        for line_no, line in enumerate(infile, start=1):
            if not line.strip():
                continue
            question = parse_benchmark_record(line, line_no)
            if keep is not None and question.subject not in keep:
                continue
            result.append(question)
    return result
