"""Tests ingesting corpora into the document store and loading benchmarks"""
import unittest
import helper  # noqa
import json
import os
import tempfile

from corpus.benchmark import load_benchmark
from corpus.errors import BadLabel, DuplicateDocId, EmptyText, MalformedRecord, MissingGold, NotFound
from corpus.store import OFFSETS_FILE, CorpusStore


class Test(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.store = CorpusStore.open(os.path.join(self.tmp.name, 'store'))

    def tearDown(self):
        self.store.close()
        self.tmp.cleanup()

    def corpus(self, records, name='corpus.jsonl'):
        path = os.path.join(self.tmp.name, name)
        helper.write_lines(path, records)
        return path

    def raw_file(self, text, name='raw.jsonl'):
        path = os.path.join(self.tmp.name, name)
        with open(path, 'w', encoding='utf-8') as outfile:
            outfile.write(text)
        return path

    def test_three_documents(self):
        stats = self.store.ingest_corpus(self.corpus([
            {'doc_id': 'd1', 'title': 'One', 'text': 'heart attack symptoms'},
            {'doc_id': 'd2', 'title': 'Two', 'text': 'heart failure'},
            {'doc_id': 'd3', 'title': 'Three', 'text': 'renal failure causes'},
        ]))
        self.assertEqual(stats.doc_count, 3)
        self.assertEqual(stats.total_tokens, 8)
        self.assertAlmostEqual(stats.avg_doc_len, 8 / 3)
        self.assertEqual(self.store.doc_ids(), ['d1', 'd2', 'd3'])

    def test_duplicate_rejects_whole_batch(self):
        path = self.corpus([
            {'doc_id': 'd1', 'text': 'first'},
            {'doc_id': 'd2', 'text': 'second'},
            {'doc_id': 'd1', 'text': 'again'},
        ])
        with self.assertRaises(DuplicateDocId) as ctx:
            self.store.ingest_corpus(path)
        self.assertEqual(ctx.exception.doc_id, 'd1')
        self.assertEqual(len(self.store), 0)
        self.assertNotIn('d2', self.store)

    def test_duplicate_of_stored_document(self):
        self.store.ingest_corpus(self.corpus([{'doc_id': 'd1', 'text': 'first'}], 'a.jsonl'))
        with self.assertRaises(DuplicateDocId):
            self.store.ingest_corpus(self.corpus([{'doc_id': 'd1', 'text': 'other'}], 'b.jsonl'))
        self.assertEqual(self.store.get_document('d1').text, 'first')

    def test_empty_file(self):
        stats = self.store.ingest_corpus(self.raw_file(''))
        self.assertEqual(stats.doc_count, 0)
        self.assertEqual(stats.avg_doc_len, 0)

    def test_malformed_line_number(self):
        path = self.raw_file('{"doc_id": "d1", "text": "fine"}\nnot json\n')
        with self.assertRaises(MalformedRecord) as ctx:
            self.store.ingest_corpus(path)
        self.assertEqual(ctx.exception.line_no, 2)

    def test_empty_text(self):
        with self.assertRaises(EmptyText):
            self.store.ingest_corpus(self.corpus([{'doc_id': 'd1', 'text': '   '}]))

    def test_round_trip_is_exact(self):
        original = {
            'doc_id': 'd1', 'title': '', 'text': 'Naïve  text\twith "quotes" and – dashes',
            'source': 'pubmed'
        }
        self.store.ingest_corpus(self.corpus([original]))
        doc = self.store.get_document('d1')
        self.assertEqual(doc.title, '')
        self.assertEqual(doc.text, original['text'])
        self.assertEqual(doc.source, 'pubmed')

    def test_not_found(self):
        with self.assertRaises(NotFound):
            self.store.get_document('missing')

    def test_reopen_and_rebuild_offsets(self):
        self.store.ingest_corpus(self.corpus([
            {'doc_id': 'd1', 'text': 'alpha beta'},
            {'doc_id': 'd2', 'text': 'gamma'},
        ]))
        expected = self.store.stats()
        self.store.close()

        os.remove(os.path.join(self.store.directory, OFFSETS_FILE))
        reopened = CorpusStore.open(self.store.directory)
        try:
            self.assertEqual(reopened.doc_ids(), ['d1', 'd2'])
            self.assertEqual(reopened.get_document('d2').text, 'gamma')
            self.assertEqual(reopened.stats(), expected)
        finally:
            reopened.close()

    def test_benchmark_accepts_four_options(self):
        path = self.raw_file(json.dumps({
            'q_id': 'q1', 'question': 'Which?', 'gold': 'C',
            'options': {'A': 'a', 'B': 'b', 'C': 'c', 'D': 'd'}
        }) + '\n', 'bench.jsonl')
        questions = load_benchmark(path)
        self.assertEqual(len(questions), 1)
        self.assertEqual(questions[0].gold, 'C')
        self.assertEqual(questions[0].gold_text(), 'c')

    def test_benchmark_three_options(self):
        path = self.raw_file(json.dumps({
            'q_id': 'q1', 'question': 'Which?', 'gold': 'A', 'options': {'A': 'a', 'B': 'b', 'C': 'c'}
        }) + '\n', 'bench.jsonl')
        with self.assertRaises(MalformedRecord):
            load_benchmark(path)

    def test_benchmark_bad_gold(self):
        path = self.raw_file(json.dumps({
            'q_id': 'q1', 'question': 'Which?', 'gold': 'E',
            'options': {'A': 'a', 'B': 'b', 'C': 'c', 'D': 'd'}
        }) + '\n', 'bench.jsonl')
        with self.assertRaises(BadLabel):
            load_benchmark(path)

    def test_benchmark_missing_gold(self):
        path = self.raw_file(json.dumps({
            'q_id': 'q1', 'question': 'Which?', 'options': {'A': 'a', 'B': 'b', 'C': 'c', 'D': 'd'}
        }) + '\n', 'bench.jsonl')
        with self.assertRaises(MissingGold):
            load_benchmark(path)

    def test_benchmark_subject_filter(self):
        options = {'A': 'a', 'B': 'b', 'C': 'c', 'D': 'd'}
        path = self.raw_file(''.join(json.dumps(r) + '\n' for r in (
            {'q_id': 'q1', 'question': 'x', 'gold': 'A', 'options': options, 'subject': 'anatomy'},
            {'q_id': 'q2', 'question': 'y', 'gold': 'A', 'options': options, 'subject': 'astronomy'},
        )), 'bench.jsonl')
        self.assertEqual([q.q_id for q in load_benchmark(path, subjects=['anatomy'])], ['q1'])


if __name__ == '__main__':
    unittest.main()
