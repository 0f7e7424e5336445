"""Tests the iterative retrieve and verify loop with scripted agents"""
import unittest
import helper  # noqa
import tempfile

from fixtures.generator import answer_text, refusal_text
from pipeline.loop import (
    FOCUS_MARKER, EmptyGap, QuestionAborted, answer_batch, answer_question, augment_query, select_view
)
from pipeline.models import PipelineConfig
from verdicts.format import render_verdict
from verdicts.models import CiteReason, CiteStatement, GapAnalysis


DOCS = [
    helper.doc('d1', 'metformin drug for the condition'),
    helper.doc('d2', 'insulin drug dosing'),
    helper.doc('d3', 'the condition and its drug therapy'),
    helper.doc('d4', 'drug interactions overview'),
    helper.doc('d5', 'condition prognosis'),
    helper.doc('d6', 'renal dosing of metformin'),
    helper.doc('d7', 'lactic acidosis risk'),
]

REASONING = CiteReason(statements=[
    CiteStatement(text='Metformin is first line for the condition.', citations=[1]),
    CiteStatement(text='Dosing depends on kidney function.', citations=[2]),
])


class Test(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.itgs, self.book = helper.scripted(self.tmp.name, DOCS)
        self.question = helper.question()
        self.config = PipelineConfig()

    def tearDown(self):
        self.itgs.store.close()
        self.tmp.cleanup()

    def test_augment_query(self):
        self.assertEqual(
            augment_query('Drug X first line?', ['renal dosing']), 'Drug X first line? ; focus: renal dosing'
        )
        self.assertEqual(augment_query('q', ['a', 'b', 'c']), 'q ; focus: a; b; c')
        self.assertEqual(
            augment_query(augment_query('q', ['g1']), GapAnalysis(missing_aspects=['g2'])), 'q ; focus: g2'
        )
        with self.assertRaises(EmptyGap):
            augment_query('q', ['  '])

    def test_select_view_demotes_seen(self):
        docs = DOCS[:5]
        view = select_view(docs, {'d1', 'd2'}, 4)
        self.assertEqual([d.doc_id for d in view], ['d3', 'd4', 'd5', 'd1'])
        self.assertEqual([d.doc_id for d in select_view(docs, set(), 2)], ['d1', 'd2'])

    def test_validated_first_round(self):
        self.book.verify(self.question, [render_verdict(REASONING)])
        self.book.generate(self.question, REASONING, 'B')

        record = answer_question(self.itgs, self.question, self.config)
        self.assertEqual(record.predicted, 'B')
        self.assertEqual(record.trace.outcome, 'validated')
        self.assertEqual(record.rounds_used(), 1)
        self.assertEqual(record.final_verdict, REASONING)
        self.assertEqual(record.trace.rounds[0].verifier_model, 'mock-verifier')
        self.assertEqual(len(record.trace.rounds[0].doc_ids), 5)

    def test_refine_twice_then_validate(self):
        self.book.verify(self.question, [
            refusal_text(['renal dosing']), refusal_text(['lactic acidosis']), render_verdict(REASONING)
        ])
        self.book.generate(self.question, REASONING, 'B')

        record = answer_question(self.itgs, self.question, self.config)
        rounds = record.trace.rounds
        self.assertEqual(len(rounds), 3)
        self.assertEqual([r.verdict_kind for r in rounds], ['nka', 'nka', 'cite_reason'])
        self.assertEqual(rounds[0].query, self.question.question)
        self.assertEqual(rounds[1].query, self.question.question + FOCUS_MARKER + 'renal dosing')
        self.assertEqual(rounds[2].query, self.question.question + FOCUS_MARKER + 'lactic acidosis')
        self.assertEqual(rounds[0].gap, ['renal dosing'])
        self.assertEqual(record.trace.outcome, 'validated')
        for rnd in rounds:
            self.assertTrue(rnd.query.startswith(self.question.question))

    def test_unseen_documents_shown_first(self):
        self.book.verify(self.question, [refusal_text(['renal dosing']), render_verdict(REASONING)])
        self.book.generate(self.question, REASONING, 'B')

        rounds = answer_question(self.itgs, self.question, self.config).trace.rounds
        first = set(rounds[0].doc_ids)
        second = rounds[1].doc_ids
        unseen = [d for d in second if d not in first]
        self.assertTrue(unseen)
        self.assertEqual(second[:len(unseen)], unseen)

    def test_fallback_after_three_refusals(self):
        self.book.verify(self.question, [refusal_text(['renal dosing'])])
        self.book.generate(self.question, None, 'C')

        record = answer_question(self.itgs, self.question, self.config)
        self.assertEqual(record.rounds_used(), 3)
        self.assertEqual(record.trace.outcome, 'fallback')
        self.assertIsNone(record.final_verdict)
        self.assertEqual(record.predicted, 'C')

    def test_generator_called_once(self):
        self.book.verify(self.question, [refusal_text(['renal dosing'])])
        self.book.generate(self.question, None, 'C')
        answer_question(self.itgs, self.question, self.config)
        tasks = [call.task for call in self.itgs.gateway.call_log()]
        self.assertEqual(tasks.count('generate'), 1)
        self.assertEqual(tasks.count('verify'), 3)

    def test_without_iteration(self):
        self.book.verify(self.question, [refusal_text(['renal dosing'])])
        self.book.generate(self.question, None, 'A')
        config = PipelineConfig(enable_iteration=False)
        record = answer_question(self.itgs, self.question, config)
        self.assertEqual(record.rounds_used(), 1)
        self.assertEqual(record.trace.outcome, 'fallback')

    def test_base_verifier(self):
        self.book.add(
            'base_verifier', 'verify', [self.question.q_id, self.question.question], [render_verdict(REASONING)]
        )
        self.book.generate(self.question, REASONING, 'B')
        config = PipelineConfig(enable_mtam_verifier=False)
        record = answer_question(self.itgs, self.question, config)
        self.assertEqual(record.trace.rounds[0].verifier_model, 'mock-base_verifier')
        self.assertEqual(record.trace.outcome, 'validated')

    def test_without_retrieval(self):
        self.book.generate(self.question, None, 'D')
        record = answer_question(self.itgs, self.question, PipelineConfig(enable_retrieval=False))
        self.assertEqual(record.rounds_used(), 0)
        self.assertEqual(record.predicted, 'D')

    def test_unparseable_round_retries_plainly(self):
        self.book.verify(self.question, ['Nonsense [Doc 42]', render_verdict(REASONING)])
        self.book.generate(self.question, REASONING, 'B')
        rounds = answer_question(self.itgs, self.question, self.config).trace.rounds
        self.assertEqual([r.verdict_kind for r in rounds], ['unparseable', 'cite_reason'])
        self.assertEqual(rounds[0].query, rounds[1].query)
        self.assertEqual(rounds[0].verifier_raw, 'Nonsense [Doc 42]')

    def test_unparseable_aborts_when_configured(self):
        self.book.verify(self.question, ['Nonsense [Doc 42]'])
        with self.assertRaises(QuestionAborted) as ctx:
            answer_question(self.itgs, self.question, PipelineConfig(abort_on_unparseable=True))
        self.assertEqual(len(ctx.exception.trace.rounds), 1)

    def test_nothing_retrieved(self):
        question = helper.question(q_id='q2', text='Zzz?')
        self.book.generate(question, None, 'A')
        record = answer_question(self.itgs, question, self.config)
        self.assertEqual([r.verdict_kind for r in record.trace.rounds], ['no_evidence'])
        self.assertEqual(record.trace.outcome, 'fallback')

    def test_config_validation(self):
        with self.assertRaises(ValueError):
            PipelineConfig(t_max=0)
        with self.assertRaises(ValueError):
            PipelineConfig(depth=3, verifier_view=5)

    def batch_questions(self):
        return [helper.question(q_id=f'q{n}', text=f'Which drug treats condition {n}?') for n in range(10)]

    def test_batch_keeps_order_and_continues(self):
        questions = self.batch_questions()
        self.book.default('verifier', [render_verdict(REASONING)])
        self.book.default('generator', [answer_text('B')])
        self.book.verify(questions[3], [{'error': 'transport'}])

        records = answer_batch(self.itgs, questions, self.config, parallelism=4)
        self.assertEqual([r.q_id for r in records], [q.q_id for q in questions])
        failed = [r for r in records if r.error]
        self.assertEqual([r.q_id for r in failed], ['q3'])
        self.assertIn('TransportError', failed[0].error)
        self.assertIsNone(failed[0].predicted)
        self.assertTrue(all(r.predicted == 'B' for r in records if not r.error))

    def test_batch_parallelism_is_deterministic(self):
        questions = self.batch_questions()
        self.book.default('verifier', [refusal_text(['renal dosing']), render_verdict(REASONING)])
        self.book.default('generator', [answer_text('B')])

        serial = answer_batch(self.itgs, questions, self.config, parallelism=1)
        self.book.transport.reset()
        parallel = answer_batch(self.itgs, questions, self.config, parallelism=4)
        self.assertEqual(serial, parallel)
        self.assertTrue(all(r.rounds_used() == 2 for r in serial))

    def test_equal_stems_keep_their_own_scripts(self):
        questions = [helper.question(q_id=q_id) for q_id in ('first', 'second')]
        self.book.verify(questions[0], [render_verdict(REASONING)])
        self.book.verify(questions[1], [refusal_text(['renal dosing'])])
        self.book.generate(questions[0], REASONING, 'B')
        self.book.generate(questions[0], None, 'C')

        for _ in range(3):
            self.book.transport.reset()
            records = answer_batch(self.itgs, questions, self.config, parallelism=4)
            self.assertEqual([r.trace.outcome for r in records], ['validated', 'fallback'])
            self.assertEqual([r.predicted for r in records], ['B', 'C'])

    def test_bad_parallelism(self):
        with self.assertRaises(ValueError):
            answer_batch(self.itgs, [], self.config, parallelism=0)


if __name__ == '__main__':
    unittest.main()
