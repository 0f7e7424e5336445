"""Errors raised while ingesting or reading the corpus and benchmarks."""


class CorpusError(Exception):
    pass


class MalformedRecord(CorpusError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f'malformed record on line {line_no}: {reason}')
        self.line_no = line_no
        self.reason = reason


class DuplicateDocId(CorpusError):
    def __init__(self, doc_id: str):
        super().__init__(f'duplicate doc_id: {doc_id}')
        self.doc_id = doc_id


class EmptyText(CorpusError):
    def __init__(self, doc_id: str):
        super().__init__(f'document {doc_id} has no text')
        self.doc_id = doc_id


class NotFound(CorpusError):
    def __init__(self, doc_id: str):
        super().__init__(f'no document with doc_id {doc_id}')
        self.doc_id = doc_id


class StoreLocked(CorpusError):
    def __init__(self, directory: str):
        super().__init__(f'another ingestion holds the lock on {directory}')
        self.directory = directory


class MissingGold(CorpusError):
    def __init__(self, line_no: int):
        super().__init__(f'benchmark record on line {line_no} has no gold label')
        self.line_no = line_no


class BadLabel(CorpusError):
    def __init__(self, line_no: int, label):
        super().__init__(f'benchmark record on line {line_no} has invalid label {label!r}')
        self.line_no = line_no
        self.label = label
