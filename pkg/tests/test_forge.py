"""Tests document set composition, the sample constructors and pairing"""
import unittest
import helper  # noqa
import math
import random
import tempfile

import numpy as np

from config import ForgeSettings
from fixtures.generator import ScriptBook
from forge.builders import (
    FaultyReasoningBuilder, MisattributionBuilder, MissingAnswerBuilder, OverRefusalBuilder,
    build_positive, distractor_query, verify_positive
)
from forge.compose import (
    ForgeContext, QuestionMemo, TooFewCandidates, compose_document_sets, set_similarity
)
from forge.corpus import cap_pairs, emit_preference_corpus
from forge.models import ComposedDocSet, NegativeSample, PositiveSample, PreferencePair
from forge.predicates import revalidate
from gateway.client import Gateway
from gateway.models import NliLabel
from gateway.prompts import answer_hypothesis
from integrations import LazyIntegrations
from retrieval.fusion import RankedList
from retrieval.hybrid import EvidenceSet
from retrieval.sparse import build_index
from verdicts.format import render_verdict
from verdicts.models import CiteReason, CiteStatement, NegativeKnowledgeAssertion


DOCS = [helper.doc(f'd{n}', f'drug evidence item {n}', title=f'Source {n}') for n in range(1, 8)]

PRIMARY = CiteReason(statements=[
    CiteStatement(text='Metformin is first line.', citations=[1]),
    CiteStatement(text='It lowers hepatic glucose output.', citations=[2]),
])
ALT = CiteReason(statements=[CiteStatement(text='Insulin is always first line.', citations=[3])])
REFUSAL = NegativeKnowledgeAssertion()

VECTORS = {
    'same': [1.0, 0.0, 0.0, 0.0],
    'near': [0.95, math.sqrt(1 - 0.95 ** 2), 0.0, 0.0],
    'far': [0.7, math.sqrt(1 - 0.7 ** 2), 0.0, 0.0],
    'orthogonal': [0.0, 0.0, 0.0, 1.0],
}


def docset(doc_ids, labels=None):
    labels = labels if labels is not None else [NliLabel.entail] * len(doc_ids)
    entailing = sum(1 for label in labels if label == NliLabel.entail)
    return ComposedDocSet(
        q_id='q1', doc_ids=doc_ids, labels=labels, composition=(entailing, len(labels) - entailing)
    )


def positive(q_id='q1', verdict=PRIMARY, kind='reasoning', doc_ids=None):
    return PositiveSample(
        q_id=q_id, doc_ids=doc_ids or ['d1', 'd2', 'd3', 'd4', 'd5'], verdict=verdict, kind=kind,
        provenance='mock-primary_drafter', group='stable'
    )


def negative(category, q_id='q1', verdict=ALT, doc_ids=None):
    return NegativeSample(
        q_id=q_id, doc_ids=doc_ids or ['d1', 'd2', 'd3', 'd4', 'd5'], verdict=verdict, category=category,
        evidence={}, provenance='mock-alt_drafter', group='stable'
    )


class Test(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.store = helper.make_store(cls.tmp.name, DOCS)
        cls.index = build_index(cls.store)

    @classmethod
    def tearDownClass(cls):
        cls.store.close()
        cls.tmp.cleanup()

    def setUp(self):
        self.settings = ForgeSettings()
        self.question = helper.question(text='Which drug is first line?', gold='B')
        self.fresh()

    def fresh(self):
        self.book = ScriptBook(helper.quiet_endpoints())
        self.itgs = LazyIntegrations(
            store=self.store, index=self.index, logger_iden='tests',
            gateway=Gateway(self.book.endpoints, mock=self.book.transport, backoff_ms=0)
        )

    def context(self, group='stable', doc_ids=('d1', 'd2', 'd3', 'd4', 'd5')):
        docs = [self.store.get_document(d) for d in doc_ids]
        return ForgeContext(self.itgs, self.question, group, docset(list(doc_ids)), docs, self.settings, QuestionMemo())

    def candidates(self, count):
        docs = [helper.doc(f'c{n:02d}', f'candidate {n}') for n in range(count)]
        return docs, EvidenceSet(query_text=self.question.question, docs=docs)

    def test_compose_mixed(self):
        docs, evidence = self.candidates(10)
        hypothesis = answer_hypothesis(self.question)
        for idx, doc in enumerate(docs):
            self.book.nli(doc, hypothesis, NliLabel.entail if idx in (1, 4, 8) else NliLabel.not_entail)

        sets = compose_document_sets(self.itgs, self.question, evidence)
        self.assertEqual([tuple(s.composition) for s in sets], [(3, 2), (2, 3), (1, 4), (0, 5)])
        self.assertEqual(sets[0].doc_ids, ['c00', 'c01', 'c02', 'c04', 'c08'])
        self.assertEqual(sets[-1].doc_ids, ['c00', 'c02', 'c03', 'c05', 'c06'])
        for composed in sets:
            self.assertEqual(len(composed.doc_ids), 5)
            self.assertEqual(sum(1 for label in composed.labels if label == 'entail'), composed.composition[0])

    def test_compose_all_entail(self):
        docs, evidence = self.candidates(10)
        self.book.default('nli', ['entail'])
        sets = compose_document_sets(self.itgs, self.question, evidence)
        self.assertEqual([tuple(s.composition) for s in sets], [(5, 0)])
        self.assertEqual(sets[0].doc_ids, ['c00', 'c01', 'c02', 'c03', 'c04'])

    def test_compose_too_few(self):
        _, evidence = self.candidates(4)
        with self.assertRaises(TooFewCandidates):
            compose_document_sets(self.itgs, self.question, evidence)

    def test_composition_oracle(self):
        rng = random.Random(7)
        for _ in range(30):
            self.fresh()
            count = rng.randint(5, 12)
            docs, evidence = self.candidates(count)
            labels = [rng.choice([NliLabel.entail, NliLabel.not_entail]) for _ in docs]
            for doc, label in zip(docs, labels):
                self.book.nli(doc, answer_hypothesis(self.question), label)
            entail = labels.count(NliLabel.entail)
            expected = [
                (e, 5 - e) for e in (5, 4, 3, 2, 1, 0)
                if e <= entail and 5 - e <= count - entail
            ]
            sets = compose_document_sets(self.itgs, self.question, evidence)
            self.assertEqual([tuple(s.composition) for s in sets], expected)

    def test_docset_validation(self):
        with self.assertRaises(ValueError):
            docset(['d1', 'd2', 'd3', 'd4'])
        with self.assertRaises(ValueError):
            ComposedDocSet(
                q_id='q1', doc_ids=['d1', 'd2', 'd3', 'd4', 'd5'], labels=[NliLabel.entail] * 5, composition=(4, 1)
            )

    def embed_all(self, vectors):
        for doc_id, vector in vectors.items():
            self.book.embed(self.store.get_document(doc_id), vector)

    def test_similarity_identity(self):
        self.embed_all({'d1': [1, 0, 0, 0], 'd2': [0, 3, 4, 0]})
        docs = [self.store.get_document(d) for d in ('d1', 'd2')]
        self.assertAlmostEqual(set_similarity(self.itgs, docs, docs), 1.0)

    def test_similarity_orthogonal(self):
        self.embed_all({'d1': [1, 0, 0, 0], 'd2': [0, 0, 0, 1]})
        source = [self.store.get_document('d1')]
        other = [self.store.get_document('d2')]
        self.assertAlmostEqual(set_similarity(self.itgs, source, other), 0.0)

    def test_similarity_mean_of_max(self):
        self.embed_all({'d1': [1, 0, 0, 0], 'd2': [0, 1, 0, 0], 'd3': [1, 1, 0, 0], 'd4': [1, 0, 0, 0]})
        source = [self.store.get_document(d) for d in ('d1', 'd2')]
        other = [self.store.get_document(d) for d in ('d3', 'd4')]
        self.assertAlmostEqual(set_similarity(self.itgs, source, other), (1 / math.sqrt(2) + 1.0) / 2)

    def test_similarity_needs_documents(self):
        with self.assertRaises(ValueError):
            set_similarity(self.itgs, [], [self.store.get_document('d1')])

    def test_positive_reasoning(self):
        ctx = self.context()
        self.book.draft('primary_drafter', self.question, ctx.docset.doc_ids, PRIMARY)
        self.book.generate(self.question, PRIMARY, 'B')
        sample = build_positive(ctx)
        self.assertEqual(sample.kind, 'reasoning')
        self.assertEqual(sample.verdict, PRIMARY)
        self.assertEqual(sample.provenance, 'mock-primary_drafter')

    def test_positive_wrong_answer(self):
        ctx = self.context()
        self.book.draft('primary_drafter', self.question, ctx.docset.doc_ids, PRIMARY)
        self.book.generate(self.question, PRIMARY, 'C')
        self.assertIsNone(build_positive(ctx))

    def test_verify_positive_timeout(self):
        ctx = self.context()
        self.book.add('generator', 'generate', [self.question.question, render_verdict(PRIMARY)], [
            {'error': 'timeout'}
        ])
        self.assertFalse(verify_positive(ctx, PRIMARY))

    def test_positive_refusal(self):
        ctx = self.context()
        self.book.draft('primary_drafter', self.question, ctx.docset.doc_ids, REFUSAL)
        self.book.nli(ctx.docs, answer_hypothesis(self.question), NliLabel.not_entail)
        self.assertEqual(build_positive(ctx).kind, 'refusal')

        self.fresh()
        ctx = self.context()
        self.book.draft('primary_drafter', self.question, ctx.docset.doc_ids, REFUSAL)
        self.book.nli(ctx.docs, answer_hypothesis(self.question), NliLabel.entail)
        self.assertIsNone(build_positive(ctx))

    def test_faulty_reasoning(self):
        ctx = self.context()
        self.book.draft('alt_drafter', self.question, ctx.docset.doc_ids, ALT)
        self.book.nli(ctx.docs, render_verdict(ALT), NliLabel.not_entail)
        sample = FaultyReasoningBuilder().build(ctx)
        self.assertEqual(sample.category, 'faulty_reasoning')
        self.assertEqual(sample.evidence, {'nli_reasoning_docs': 'not_entail'})
        self.assertTrue(revalidate(sample))

    def test_faulty_reasoning_entailed(self):
        ctx = self.context()
        self.book.draft('alt_drafter', self.question, ctx.docset.doc_ids, ALT)
        self.book.nli(ctx.docs, render_verdict(ALT), NliLabel.entail)
        self.assertIsNone(FaultyReasoningBuilder().build(ctx))

    def test_missing_answer(self):
        ctx = self.context()
        self.book.draft('alt_drafter', self.question, ctx.docset.doc_ids, ALT)
        self.book.generate(self.question, None, 'B')
        self.book.generate(self.question, ALT, 'C')
        sample = MissingAnswerBuilder().build(ctx)
        self.assertEqual(sample.category, 'missing_answer')
        self.assertEqual(sample.evidence['answer_with_reasoning'], 'C')
        self.assertTrue(revalidate(sample))

    def test_missing_answer_same_answer(self):
        ctx = self.context()
        self.book.draft('alt_drafter', self.question, ctx.docset.doc_ids, ALT)
        self.book.generate(self.question, None, 'B')
        self.book.generate(self.question, ALT, 'B')
        self.assertIsNone(MissingAnswerBuilder().build(ctx))

    def test_missing_answer_needs_stable(self):
        self.assertFalse(MissingAnswerBuilder().might_apply(self.context(group='challenging')))
        self.assertTrue(MissingAnswerBuilder().might_apply(self.context(group='stable')))

    def test_over_refusal(self):
        ctx = self.context()
        self.book.draft('primary_drafter', self.question, ctx.docset.doc_ids, PRIMARY)
        self.book.draft('alt_drafter', self.question, ctx.docset.doc_ids, REFUSAL)
        self.book.nli(ctx.docs, render_verdict(PRIMARY), NliLabel.entail)
        self.book.generate(self.question, None, 'B')
        self.book.generate(self.question, PRIMARY, 'B')
        sample = OverRefusalBuilder().build(ctx)
        self.assertEqual(sample.category, 'over_refusal')
        self.assertEqual(sample.verdict, REFUSAL)
        self.assertTrue(revalidate(sample))

    def test_over_refusal_not_entailed(self):
        ctx = self.context()
        self.book.draft('primary_drafter', self.question, ctx.docset.doc_ids, PRIMARY)
        self.book.draft('alt_drafter', self.question, ctx.docset.doc_ids, REFUSAL)
        self.book.nli(ctx.docs, render_verdict(PRIMARY), NliLabel.not_entail)
        self.assertIsNone(OverRefusalBuilder().build(ctx))

    def test_over_refusal_inconsistent_answers(self):
        ctx = self.context()
        self.book.draft('primary_drafter', self.question, ctx.docset.doc_ids, PRIMARY)
        self.book.draft('alt_drafter', self.question, ctx.docset.doc_ids, REFUSAL)
        self.book.nli(ctx.docs, render_verdict(PRIMARY), NliLabel.entail)
        self.book.generate(self.question, None, 'B')
        self.book.generate(self.question, PRIMARY, 'A')
        self.assertIsNone(OverRefusalBuilder().build(ctx))

    def script_misattribution(self, ctx, distractor_vector, label):
        self.book.draft('primary_drafter', self.question, ctx.docset.doc_ids, PRIMARY)
        self.embed_all({d: VECTORS['same'] for d in ctx.docset.doc_ids})
        self.embed_all({'d6': distractor_vector, 'd7': distractor_vector})
        distractors = [self.store.get_document(d) for d in ('d6', 'd7')]
        self.book.nli(distractors, render_verdict(PRIMARY), label)

    def test_misattribution(self):
        ctx = self.context()
        self.script_misattribution(ctx, VECTORS['near'], NliLabel.not_entail)
        sample = MisattributionBuilder().build(ctx)
        self.assertEqual(sample.category, 'misattribution')
        self.assertEqual(sample.doc_ids, ['d6', 'd7'])
        self.assertAlmostEqual(sample.evidence['similarity'], 0.95)
        self.assertTrue(revalidate(sample))

    def test_misattribution_below_threshold(self):
        ctx = self.context()
        self.script_misattribution(ctx, VECTORS['far'], NliLabel.not_entail)
        self.assertIsNone(MisattributionBuilder().build(ctx))

    def test_misattribution_entailed(self):
        ctx = self.context()
        self.script_misattribution(ctx, VECTORS['near'], NliLabel.entail)
        self.assertIsNone(MisattributionBuilder().build(ctx))

    def test_misattribution_distractors_from_dense_search(self):
        ctx = self.context()
        self.book.draft('primary_drafter', self.question, ctx.docset.doc_ids, PRIMARY)
        self.embed_all({d: VECTORS['same'] for d in ctx.docset.doc_ids})
        self.embed_all({'d7': VECTORS['near']})
        self.book.nli([self.store.get_document('d7')], render_verdict(PRIMARY), NliLabel.not_entail)

        queries = []

        def dense(query, top_n):
            queries.append(query)
            return RankedList(retriever_id='dense', entries=[('d7', 0.9), ('d2', 0.8)])
        self.itgs.retriever.register_dense(dense)

        sample = MisattributionBuilder().build(ctx)
        self.assertEqual(queries, [distractor_query(ctx.docs)])
        self.assertEqual(sample.doc_ids, ['d7'])
        self.assertAlmostEqual(sample.evidence['similarity'], 0.95)

    def test_constructors_match_predicates(self):
        """Every constructor emits exactly when its predicate holds on the
        scripted oracle outcomes"""
        rng = random.Random(11)
        labels = ['A', 'B', 'C', 'D']
        builders = {
            'faulty_reasoning': FaultyReasoningBuilder(),
            'missing_answer': MissingAnswerBuilder(),
            'over_refusal': OverRefusalBuilder(),
            'misattribution': MisattributionBuilder(),
        }
        counts = {name: [0, 0] for name in builders}

        for _ in range(240):
            self.fresh()
            group = rng.choice(['stable', 'medium', 'challenging'])
            ctx = self.context(group=group)
            primary = rng.choice([PRIMARY, REFUSAL])
            alt = rng.choice([ALT, REFUSAL])
            plain = rng.choice(labels)
            with_alt = rng.choice(labels)
            with_primary = rng.choice(labels)
            nli_alt = rng.choice([NliLabel.entail, NliLabel.not_entail])
            nli_primary = rng.choice([NliLabel.entail, NliLabel.not_entail])
            nli_distractors = rng.choice([NliLabel.entail, NliLabel.not_entail])
            vector = VECTORS[rng.choice(['same', 'near', 'far', 'orthogonal'])]

            self.book.draft('primary_drafter', self.question, ctx.docset.doc_ids, primary)
            self.book.draft('alt_drafter', self.question, ctx.docset.doc_ids, alt)
            self.book.generate(self.question, None, plain)
            if isinstance(alt, CiteReason):
                self.book.generate(self.question, alt, with_alt)
                self.book.nli(ctx.docs, render_verdict(alt), nli_alt)
            if isinstance(primary, CiteReason):
                self.book.generate(self.question, primary, with_primary)
                self.book.nli(ctx.docs, render_verdict(primary), nli_primary)
                distractors = [self.store.get_document(d) for d in ('d6', 'd7')]
                self.book.nli(distractors, render_verdict(primary), nli_distractors)
            self.embed_all({d: VECTORS['same'] for d in ctx.docset.doc_ids})
            self.embed_all({'d6': vector, 'd7': vector})

            source = np.array([VECTORS['same']] * 5)
            other = np.array([vector, vector])
            cosines = other @ source.T / (np.linalg.norm(other, axis=1)[:, None] * np.linalg.norm(source, axis=1))
            similarity = float(cosines.max(axis=1).mean())

            expected = {
                'faulty_reasoning': alt is ALT and nli_alt == NliLabel.not_entail,
                'missing_answer': (
                    group == 'stable' and plain == 'B' and alt is ALT and with_alt != plain
                ),
                'over_refusal': (
                    primary is PRIMARY and alt is REFUSAL and nli_primary == NliLabel.entail
                    and with_primary == plain
                ),
                'misattribution': (
                    primary is PRIMARY and similarity > self.settings.delta
                    and nli_distractors == NliLabel.not_entail
                ),
            }

            for name, builder in builders.items():
                sample = builder.build(ctx) if builder.might_apply(ctx) else None
                self.assertEqual(sample is not None, expected[name], name)
                counts[name][sample is not None] += 1
                if sample is not None:
                    self.assertEqual(sample.category, name)
                    self.assertTrue(revalidate(sample))

        for name, (skipped, emitted) in counts.items():
            self.assertGreater(emitted, 0, name)
            self.assertGreater(skipped, 0, name)

    def test_one_pair(self):
        pairs, manifest = emit_preference_corpus(
            self.itgs, [self.question], [positive()], [negative('faulty_reasoning')], self.settings
        )
        self.assertEqual(len(pairs), 1)
        self.assertEqual(pairs[0].category, 'faulty_reasoning')
        self.assertEqual(pairs[0].chosen, PRIMARY)
        self.assertEqual(pairs[0].rejected, ALT)
        self.assertEqual(manifest.pairs_per_category, {'faulty_reasoning': 1})
        self.assertEqual(manifest.thresholds, {'delta': 0.8})

    def test_four_categories(self):
        negatives = [
            negative('faulty_reasoning'), negative('missing_answer'),
            negative('over_refusal', verdict=REFUSAL), negative('misattribution', verdict=PRIMARY, doc_ids=['d6', 'd7'])
        ]
        pairs, manifest = emit_preference_corpus(self.itgs, [self.question], [positive()], negatives, self.settings)
        self.assertEqual(sorted(p.category for p in pairs), sorted(n.category for n in negatives))
        self.assertEqual(manifest.pairs_per_group, {'stable': 4})
        self.assertEqual(manifest.unpaired_negatives, 0)

        misattributed = next(p for p in pairs if p.category == 'misattribution')
        self.assertEqual(misattributed.doc_ids, ['d6', 'd7'])
        self.assertEqual(misattributed.chosen, REFUSAL)
        self.assertEqual(misattributed.rejected, PRIMARY)
        self.assertEqual(misattributed.provenance['chosen'], 'canonical_refusal')

    def test_misattribution_prefers_refusal_positive(self):
        refusal = positive(verdict=REFUSAL, kind='refusal', doc_ids=['d3', 'd4', 'd5', 'd6', 'd7'])
        pairs, _ = emit_preference_corpus(
            self.itgs, [self.question], [positive(), refusal],
            [negative('misattribution', verdict=PRIMARY, doc_ids=['d6', 'd7'])], self.settings
        )
        self.assertEqual(len(pairs), 1)
        self.assertEqual(pairs[0].chosen, REFUSAL)
        self.assertEqual(pairs[0].provenance['chosen'], 'mock-primary_drafter')

    def test_positive_without_negative(self):
        other = helper.question(q_id='q2', text='Another question?')
        pairs, manifest = emit_preference_corpus(
            self.itgs, [self.question, other], [positive(), positive(q_id='q2')], [negative('faulty_reasoning')],
            self.settings
        )
        self.assertEqual(len(pairs), 1)
        self.assertEqual(manifest.positives_without_negatives, 1)

    def test_unpairable_negative(self):
        pairs, manifest = emit_preference_corpus(
            self.itgs, [self.question], [positive(verdict=ALT)], [negative('faulty_reasoning', verdict=ALT)],
            self.settings
        )
        self.assertEqual(pairs, [])
        self.assertEqual(manifest.unpaired_negatives, 1)

    def test_pair_prefers_same_documents(self):
        near = positive(verdict=PRIMARY, doc_ids=['d6', 'd7', 'd1', 'd2', 'd3'])
        pairs, _ = emit_preference_corpus(
            self.itgs, [self.question], [positive(verdict=REFUSAL, kind='refusal'), near],
            [negative('faulty_reasoning', doc_ids=['d6', 'd7', 'd1', 'd2', 'd3'])], self.settings
        )
        self.assertEqual(pairs[0].chosen, PRIMARY)

    def test_pair_validation(self):
        with self.assertRaises(ValueError):
            PreferencePair(
                q_id='q1', question='q', options={}, doc_ids=[], chosen=ALT, rejected=ALT,
                category='faulty_reasoning', provenance={}
            )

    def test_cap_pairs(self):
        negatives = [negative('faulty_reasoning') for _ in range(5)] + [negative('missing_answer')]
        pairs, _ = emit_preference_corpus(self.itgs, [self.question], [positive()], negatives, self.settings)
        capped = cap_pairs(pairs, 2, seed=3)
        self.assertEqual(sum(1 for p in capped if p.category == 'faulty_reasoning'), 2)
        self.assertEqual(sum(1 for p in capped if p.category == 'missing_answer'), 1)
        self.assertEqual(capped, cap_pairs(pairs, 2, seed=3))


if __name__ == '__main__':
    unittest.main()
