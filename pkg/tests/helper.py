import os
import sys

curdir = os.getcwd()

if os.path.split(curdir)[1] == 'tests':
    os.chdir(os.path.split(os.getcwd())[0])


if 'src' not in sys.path:
    sys.path.append('src')


import json  # noqa: E402

from corpus.models import BenchmarkQuestion, Document  # noqa: E402
from corpus.store import CorpusStore  # noqa: E402
from fixtures.generator import ScriptBook, fixture_endpoints  # noqa: E402
from gateway.client import Gateway  # noqa: E402
from integrations import LazyIntegrations  # noqa: E402


def quiet_endpoints():
    """The fixture endpoints without retries, so a missing script fails
    immediately"""
    return {
        name: endpoint.copy(update={'max_retries': 0})
        for name, endpoint in fixture_endpoints().items()
    }


def write_lines(path, records):
    with open(path, 'w', encoding='utf-8') as outfile:
        for record in records:
            outfile.write(json.dumps(record, sort_keys=True))
            outfile.write('\n')


def make_store(directory, documents):
    """A store in `directory/store` holding the given documents"""
    corpus = os.path.join(directory, 'corpus.jsonl')
    write_lines(corpus, (doc.dict() for doc in documents))
    store = CorpusStore.open(os.path.join(directory, 'store'))
    store.ingest_corpus(corpus)
    return store


def scripted(directory, documents, endpoints=None):
    """Integrations over a fresh store with a scripted gateway.

    Returns:
    - `(itgs, book)`: The integrations and the script book feeding the
      gateway. Close `itgs.store` when done.
    """
    endpoints = endpoints if endpoints is not None else quiet_endpoints()
    book = ScriptBook(endpoints)
    store = make_store(directory, documents)
    gateway = Gateway(endpoints, mock=book.transport, backoff_ms=0)
    itgs = LazyIntegrations(store=store, gateway=gateway, logger_iden='tests')
    return itgs, book


def doc(doc_id, text, title=''):
    return Document(doc_id=doc_id, title=title, text=text)


def question(q_id='q1', text='Which drug treats the condition?', gold='B'):
    return BenchmarkQuestion(
        q_id=q_id, question=text,
        options={'A': 'aspirin', 'B': 'metformin', 'C': 'insulin', 'D': 'statin'},
        gold=gold
    )
