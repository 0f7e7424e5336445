"""The sparse half of hybrid retrieval: an inverted index over the corpus and
Okapi BM25 ranking with a non-negative idf.

The index can be persisted into the store directory as an sqlite file so it
does not need to be rebuilt for every command.
"""
from typing import Dict, Iterable, List
from pypika import Query, Table, Column, Parameter, Order
import pytypeutils as tus
import sqlite3
import math
import os

from corpus.models import Document
from retrieval.tokenizer import tokenize
from retrieval.fusion import RankedList, RetrievalError


BM25_K1 = 1.2
BM25_B = 0.75
BM25_RETRIEVER_ID = 'bm25'

INDEX_FILE = 'index.sqlite'

POSTINGS = Table('postings')
DOC_LENGTHS = Table('doc_lengths')


class EmptyCorpus(RetrievalError):
    def __init__(self):
        super().__init__('cannot build an index over an empty corpus')


class SparseIndex:
    """An inverted index.

    Attributes:
    - `doc_ids (list[str])`: Indexed documents in corpus order
    - `doc_lengths (dict[str, int])`: Token count of each document
    - `avg_length (float)`: Mean of `doc_lengths`
    - `postings (dict[str, dict[str, int]])`: term to (doc_id to term
      frequency). Inner dicts are in corpus order.
    """
    def __init__(self, doc_ids: List[str], doc_lengths: Dict[str, int],
                 postings: Dict[str, Dict[str, int]]):
        self.doc_ids = doc_ids
        self.doc_lengths = doc_lengths
        self.postings = postings
        self.avg_length = (
            sum(doc_lengths.values()) / len(doc_ids) if doc_ids else 0.0
        )

    def __len__(self) -> int:
        return len(self.doc_ids)

    def df(self, term: str) -> int:
        """The number of documents containing the term"""
        return len(self.postings.get(term, ()))

    def tf(self, term: str, doc_id: str) -> int:
        return self.postings.get(term, {}).get(doc_id, 0)

    def idf(self, term: str) -> float:
        n = len(self.doc_ids)
        df = self.df(term)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseIndex)
            and self.doc_ids == other.doc_ids
            and self.doc_lengths == other.doc_lengths
            and self.postings == other.postings
        )


def build_index_from_documents(documents: Iterable[Document]) -> SparseIndex:
    """Builds the inverted index over the given documents, in order.

    Raises:
    - `EmptyCorpus`: If there are no documents
    """
    doc_ids = []
    doc_lengths = {}
    postings = {}
    for doc in documents:
        tokens = tokenize(doc.text)
        doc_ids.append(doc.doc_id)
        doc_lengths[doc.doc_id] = len(tokens)
        for token in tokens:
            term_postings = postings.setdefault(token, {})
            term_postings[doc.doc_id] = term_postings.get(doc.doc_id, 0) + 1

    if not doc_ids:
        raise EmptyCorpus()

    return SparseIndex(doc_ids, doc_lengths, postings)


def build_index(store) -> SparseIndex:
    """Builds the inverted index over every document in the given store.

    Arguments:
    - `store (CorpusStore)`: The opened store

    Raises:
    - `EmptyCorpus`: If the store has no documents
    """
    return build_index_from_documents(store.iter_documents())


def bm25_rank(index: SparseIndex, query: str, top_n: int) -> RankedList:
    """Ranks documents against the query with BM25.

    Each distinct query term contributes once, so repeating a word in the
    query does not change the scores. Documents with a zero score are not
    returned.

    Arguments:
    - `index (SparseIndex)`: The index to search
    - `query (str)`: The raw query text
    - `top_n (int)`: The maximum number of documents to return

    Returns:
    - `ranked (RankedList)`: Best first, ties broken by ascending doc_id
    """
    tus.check(index=(index, SparseIndex), query=(query, str), top_n=(top_n, int))

    terms = list(dict.fromkeys(tokenize(query)))
    scores = {}
    for term in terms:
        term_postings = index.postings.get(term)
        if not term_postings:
            continue
        idf = index.idf(term)
        for doc_id, tf in term_postings.items():
            norm = BM25_K1 * (1.0 - BM25_B + BM25_B * index.doc_lengths[doc_id] / index.avg_length)
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (BM25_K1 + 1.0) / (tf + norm)

    ranked = sorted(
        ((doc_id, score) for doc_id, score in scores.items() if score > 0),
        key=lambda item: (-item[1], item[0])
    )
    return RankedList(retriever_id=BM25_RETRIEVER_ID, entries=ranked[:max(top_n, 0)])


def save_index(index: SparseIndex, directory: str) -> str:
    """Writes the index into the given store directory, replacing any
    previous index. Returns the path written."""
    path = os.path.join(directory, INDEX_FILE)
    tmp_path = path + '.tmp'
    if os.path.exists(tmp_path):
        os.remove(tmp_path)

    conn = sqlite3.connect(tmp_path)
    try:
        conn.execute(
            Query.create_table(DOC_LENGTHS)
            .columns(
                Column('position', 'INTEGER', nullable=False),
                Column('doc_id', 'TEXT', nullable=False),
                Column('length', 'INTEGER', nullable=False)
            )
            .primary_key('position')
            .get_sql()
        )
        conn.execute(
            Query.create_table(POSTINGS)
            .columns(
                Column('term', 'TEXT', nullable=False),
                Column('doc_position', 'INTEGER', nullable=False),
                Column('tf', 'INTEGER', nullable=False)
            )
            .primary_key('term', 'doc_position')
            .get_sql()
        )

        positions = {doc_id: pos for pos, doc_id in enumerate(index.doc_ids)}
        conn.executemany(
            Query.into(DOC_LENGTHS)
            .columns(DOC_LENGTHS.position, DOC_LENGTHS.doc_id, DOC_LENGTHS.length)
            .insert(Parameter('?'), Parameter('?'), Parameter('?'))
            .get_sql(),
            [(pos, doc_id, index.doc_lengths[doc_id]) for doc_id, pos in positions.items()]
        )
        conn.executemany(
            Query.into(POSTINGS)
            .columns(POSTINGS.term, POSTINGS.doc_position, POSTINGS.tf)
            .insert(Parameter('?'), Parameter('?'), Parameter('?'))
            .get_sql(),
            [
                (term, positions[doc_id], tf)
                for term, term_postings in index.postings.items()
                for doc_id, tf in term_postings.items()
            ]
        )
        conn.commit()
    finally:
        conn.close()

    os.replace(tmp_path, path)
    return path


def load_index(directory: str):
    """Loads the index persisted in the given store directory.

    Returns:
    - `index (SparseIndex, None)`: The index, or None if none was saved
    """
    path = os.path.join(directory, INDEX_FILE)
    if not os.path.exists(path):
        return None

    conn = sqlite3.connect(path)
    try:
        length_rows = conn.execute(
            Query.from_(DOC_LENGTHS)
            .select(DOC_LENGTHS.position, DOC_LENGTHS.doc_id, DOC_LENGTHS.length)
            .orderby(DOC_LENGTHS.position, order=Order.asc)
            .get_sql()
        ).fetchall()
        posting_rows = conn.execute(
            Query.from_(POSTINGS)
            .select(POSTINGS.term, POSTINGS.doc_position, POSTINGS.tf)
            .orderby(POSTINGS.term, POSTINGS.doc_position)
            .get_sql()
        ).fetchall()
    finally:
        conn.close()

    if not length_rows:
        raise EmptyCorpus()

    doc_ids = [doc_id for _, doc_id, _ in length_rows]
    doc_lengths = {doc_id: length for _, doc_id, length in length_rows}
    postings = {}
    for term, pos, tf in posting_rows:
        postings.setdefault(term, {})[doc_ids[pos]] = tf

    return SparseIndex(doc_ids, doc_lengths, postings)
