"""The data transfer objects for documents and benchmark questions."""
from enum import Enum
from typing import Dict, Optional
from pydantic import BaseModel, validator


OPTION_LABELS = ('A', 'B', 'C', 'D')
"""The labels a benchmark question must use for its options, in order"""


class Source(str, Enum):
    """Where a document was taken from"""
    pubmed = 'pubmed'
    statpearls = 'statpearls'
    textbook = 'textbook'
    wikipedia = 'wikipedia'
    other = 'other'


class Document(BaseModel):
    """One retrievable unit of text.

    Attributes:
    - `doc_id (str)`: Unique within a store
    - `title (str)`: The title, which may be empty
    - `text (str)`: The body of the document. Never empty once ingested.
    - `source (Source)`: Which corpus this document came from
    """
    doc_id: str
    title: str = ''
    text: str
    source: Source = Source.other

    class Config:
        use_enum_values = True


class BenchmarkQuestion(BaseModel):
    """A four option multiple choice question.

    Attributes:
    - `q_id (str)`: Unique within a benchmark
    - `question (str)`: The question stem
    - `options (dict[str, str])`: Label to option text, labels A through D in
      order
    - `gold (str)`: The label of the correct option
    - `subject (str, None)`: The subdomain of the question, if the benchmark
      provides one
    """
    q_id: str
    question: str
    options: Dict[str, str]
    gold: str
    subject: Optional[str] = None

    def option_text(self, label: str) -> str:
        return self.options[label]

    def gold_text(self) -> str:
        return self.options[self.gold]


class CorpusStats(BaseModel):
    doc_count: int = 0
    total_tokens: int = 0
    avg_doc_len: float = 0.0

    @validator('avg_doc_len', always=True)
    def _consistent_average(cls, v, values):
        doc_count = values.get('doc_count', 0)
        if doc_count > 0:
            return values.get('total_tokens', 0) / doc_count
        return 0.0
