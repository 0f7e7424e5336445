"""A single-directory document store. Documents are appended to a line
delimited file and located through a sidecar sqlite index of byte offsets,
which is rebuilt from the document file whenever it is missing.

The store is read-only once opened except through `ingest_corpus`, which
takes an exclusive lock file for the duration of the batch.
"""
from enum import Enum
from typing import Dict, Iterator, List, Tuple
from pypika import Query, Table, Column, Parameter
import pytypeutils as tus
import threading
import sqlite3
import json
import os

from corpus.models import Document, CorpusStats, Source
from corpus.errors import (
    MalformedRecord, DuplicateDocId, EmptyText, NotFound, StoreLocked
)
from retrieval.tokenizer import tokenize


DOCUMENTS_FILE = 'documents.jsonl'
OFFSETS_FILE = 'offsets.sqlite'
LOCK_FILE = '.ingest.lock'

OFFSETS = Table('offsets')

SOURCES = frozenset(s.value for s in Source)


class CorpusFormat(str, Enum):
    jsonl = 'jsonl'


def parse_corpus_record(line: str, line_no: int) -> Document:
    """Parses one line of a corpus file into a document.

    Arguments:
    - `line (str)`: The raw line, without the trailing newline
    - `line_no (int)`: The 1-based line number, for error reporting

    Returns:
    - `doc (Document)`: The parsed document

    Raises:
    - `MalformedRecord`: If the line is not a flat object with a string
      doc_id and text
    - `EmptyText`: If the text is blank
    """
    try:
        raw = json.loads(line)
    except ValueError as ex:
        raise MalformedRecord(line_no, f'invalid json ({ex})')

    if not isinstance(raw, dict):
        raise MalformedRecord(line_no, 'expected an object')

    doc_id = raw.get('doc_id')
    if not isinstance(doc_id, str) or not doc_id:
        raise MalformedRecord(line_no, 'doc_id must be a non-empty string')

    for key in ('title', 'text'):
        if key in raw and not isinstance(raw[key], str):
            raise MalformedRecord(line_no, f'{key} must be a string')

    if 'text' not in raw:
        raise MalformedRecord(line_no, 'missing text')

    if not raw['text'].strip():
        raise EmptyText(doc_id)

    source = raw.get('source', Source.other.value)
    if source not in SOURCES:
        raise MalformedRecord(line_no, f'unknown source {source!r}')

    return Document(
        doc_id=doc_id,
        title=raw.get('title', ''),
        text=raw['text'],
        source=source
    )


class CorpusStore:
    """A directory holding an append-only document file and its offsets.

    Attributes:
    - `directory (str)`: Where the store lives
    - `offsets (dict[str, tuple[int, int]])`: doc_id to (byte offset, length)
    - `order (list[str])`: The doc ids in file order
    """
    def __init__(self, directory: str):
        tus.check(directory=(directory, str))
        self.directory = directory
        self.offsets: Dict[str, Tuple[int, int]] = {}
        self.order: List[str] = []
        self._read_lock = threading.Lock()
        self._handle = None

    @classmethod
    def open(cls, directory: str) -> 'CorpusStore':
        """Opens the store in the given directory, creating it if it does not
        exist and rebuilding the offsets index if it is missing."""
        os.makedirs(directory, exist_ok=True)
        store = cls(directory)
        store._load_offsets()
        return store

    @property
    def documents_path(self) -> str:
        return os.path.join(self.directory, DOCUMENTS_FILE)

    @property
    def offsets_path(self) -> str:
        return os.path.join(self.directory, OFFSETS_FILE)

    def __len__(self) -> int:
        return len(self.order)

    def __contains__(self, doc_id) -> bool:
        return doc_id in self.offsets

    def doc_ids(self) -> List[str]:
        return list(self.order)

    def ingest_corpus(self, path: str, fmt: CorpusFormat = CorpusFormat.jsonl) -> CorpusStats:
        """Validates every record in the given file and, only if all of them
        are valid, appends them to the store.

        Arguments:
        - `path (str)`: The corpus file; UTF-8, one record per line
        - `fmt (CorpusFormat)`: The format of the file

        Returns:
        - `stats (CorpusStats)`: Statistics over the whole store after the
          ingestion

        Raises:
        - `MalformedRecord`, `EmptyText`: If any line is invalid
        - `DuplicateDocId`: If any doc_id repeats within the file or is already
          in the store. Nothing from the batch is kept.
        - `StoreLocked`: If another ingestion is in progress
        """
        tus.check(path=(path, str))
        fmt = CorpusFormat(fmt)

        batch = []
        seen = set()
        with open(path, 'r', encoding='utf-8') as infile:
            for line_no, line in enumerate(infile, start=1):
                line = line.rstrip('\n')
                if not line.strip():
                    continue
                doc = parse_corpus_record(line, line_no)
                if doc.doc_id in seen or doc.doc_id in self.offsets:
                    raise DuplicateDocId(doc.doc_id)
                seen.add(doc.doc_id)
                batch.append(doc)

        with self._ingest_lock():
            self._append(batch)

        return self.stats()

    def get_document(self, doc_id: str) -> Document:
        """Fetches the document with the given id exactly as it was ingested.

        Raises:
        - `NotFound`: If there is no such document
        """
        loc = self.offsets.get(doc_id)
        if loc is None:
            raise NotFound(doc_id)

        offset, length = loc
        with self._read_lock:
            if self._handle is None:
                self._handle = open(self.documents_path, 'rb')
            self._handle.seek(offset)
            raw = self._handle.read(length)

        return Document(**json.loads(raw.decode('utf-8')))

    def iter_documents(self) -> Iterator[Document]:
        for doc_id in self.order:
            yield self.get_document(doc_id)

    def stats(self) -> CorpusStats:
        """Recomputes the corpus statistics from the stored documents."""
        doc_count = 0
        total_tokens = 0
        for doc in self.iter_documents():
            doc_count += 1
            total_tokens += len(tokenize(doc.text))
        return CorpusStats(doc_count=doc_count, total_tokens=total_tokens)

    def close(self):
        with self._read_lock:
            if self._handle is not None:
                self._handle.close()
                self._handle = None

    def _append(self, batch: List[Document]):
        if not batch:
            return

        new_rows = []
        with open(self.documents_path, 'ab') as outfile:
            offset = outfile.tell()
            for doc in batch:
                encoded = (json.dumps(doc.dict(), ensure_ascii=False) + '\n').encode('utf-8')
                outfile.write(encoded)
                new_rows.append((doc.doc_id, offset, len(encoded) - 1))
                offset += len(encoded)

        conn = sqlite3.connect(self.offsets_path)
        try:
            conn.executemany(
                Query.into(OFFSETS)
                .columns(OFFSETS.doc_id, OFFSETS.byte_offset, OFFSETS.length)
                .insert(Parameter('?'), Parameter('?'), Parameter('?'))
                .get_sql(),
                new_rows
            )
            conn.commit()
        finally:
            conn.close()

        for doc_id, offset, length in new_rows:
            self.offsets[doc_id] = (offset, length)
            self.order.append(doc_id)

        self.close()

    def _load_offsets(self):
        if not os.path.exists(self.offsets_path):
            self._rebuild_offsets()
            return

        conn = sqlite3.connect(self.offsets_path)
        try:
            rows = conn.execute(
                Query.from_(OFFSETS)
                .select(OFFSETS.doc_id, OFFSETS.byte_offset, OFFSETS.length)
                .orderby(OFFSETS.byte_offset)
                .get_sql()
            ).fetchall()
        finally:
            conn.close()

        for doc_id, offset, length in rows:
            self.offsets[doc_id] = (offset, length)
            self.order.append(doc_id)

    def _rebuild_offsets(self):
        rows = []
        if os.path.exists(self.documents_path):
            with open(self.documents_path, 'rb') as infile:
                offset = 0
                for raw in infile:
                    stripped = raw.rstrip(b'\n')
                    if stripped:
                        doc_id = json.loads(stripped.decode('utf-8'))['doc_id']
                        rows.append((doc_id, offset, len(stripped)))
                    offset += len(raw)

        conn = sqlite3.connect(self.offsets_path)
        try:
            conn.execute(
                Query.create_table(OFFSETS)
                .columns(
                    Column('doc_id', 'TEXT', nullable=False),
                    Column('byte_offset', 'INTEGER', nullable=False),
                    Column('length', 'INTEGER', nullable=False)
                )
                .primary_key('doc_id')
                .get_sql()
            )
            if rows:
                conn.executemany(
                    Query.into(OFFSETS)
                    .columns(OFFSETS.doc_id, OFFSETS.byte_offset, OFFSETS.length)
                    .insert(Parameter('?'), Parameter('?'), Parameter('?'))
                    .get_sql(),
                    rows
                )
            conn.commit()
        finally:
            conn.close()

        for doc_id, offset, length in rows:
            self.offsets[doc_id] = (offset, length)
            self.order.append(doc_id)

    def _ingest_lock(self):
        return _LockFile(os.path.join(self.directory, LOCK_FILE), self.directory)


class _LockFile:
    def __init__(self, path: str, directory: str):
        self.path = path
        self.directory = directory

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StoreLocked(self.directory)
        os.close(fd)
        return self

    def __exit__(self, *args):
        os.remove(self.path)
        return False
