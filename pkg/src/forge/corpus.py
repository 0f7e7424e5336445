"""Runs the constructors over a question set and emits the preference corpus,
its manifest, and the matching supervised fine-tuning corpus."""
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple
import json
import os
import random

from pydantic import BaseModel

from corpus.models import BenchmarkQuestion
from forge.builders import NEGATIVE_BUILDERS, build_positive
from forge.compose import ForgeContext, QuestionMemo, UnpairableSample, compose_document_sets
from forge.models import (
    ComposedDocSet, ForgeManifest, NegativeCategory, NegativeSample, PositiveKind, PositiveSample,
    PreferencePair
)
from gateway.errors import GatewayError
from verdicts.format import render_verdict
from verdicts.models import NegativeKnowledgeAssertion


PREFERENCE_FILE = 'preference.jsonl'
SFT_FILE = 'sft.jsonl'
MANIFEST_FILE = 'manifest.json'
DOCSETS_FILE = 'docsets.jsonl'
NEGATIVES_FILE = 'negatives.jsonl'


class QuestionForge(BaseModel):
    """Everything built for one question"""
    q_id: str
    docsets: List[ComposedDocSet] = []
    positives: List[PositiveSample] = []
    negatives: List[NegativeSample] = []
    quarantined_drafts: int = 0
    error: Optional[str] = None


def forge_question(itgs, question: BenchmarkQuestion, group: Optional[str], settings) -> QuestionForge:
    """Composes the document sets for one question and runs the positive
    constructor and every applicable negative constructor on each. Oracle
    failures skip the constructor that hit them."""
    result = QuestionForge(q_id=question.q_id)
    candidates = itgs.retriever.retrieve(question.question, settings.candidate_depth)
    result.docsets = compose_document_sets(itgs, question, candidates, nli_endpoint=settings.nli)
    by_id = {doc.doc_id: doc for doc in candidates.docs}
    memo = QuestionMemo()

    for docset in result.docsets:
        ctx = ForgeContext(itgs, question, group, docset, [by_id[d] for d in docset.doc_ids], settings, memo)
        try:
            positive = build_positive(ctx)
            if positive is not None:
                result.positives.append(positive)
        except GatewayError as exc:
            itgs.logger.warning('{} {}: primary draft skipped: {}', question.q_id, docset.composition, exc)
            result.quarantined_drafts += 1

        for builder in NEGATIVE_BUILDERS:
            if not builder.might_apply(ctx):
                continue
            try:
                sample = builder.build(ctx)
            except GatewayError as exc:
                itgs.logger.debug('{} {}: {} skipped: {}', question.q_id, docset.composition, builder.category, exc)
                continue
            if sample is not None:
                result.negatives.append(sample)
    return result


def forge_corpus(itgs, questions: Sequence[BenchmarkQuestion], groups: Dict[str, str], settings,
                 parallelism: int = 1) -> List[QuestionForge]:
    """Runs forge_question on every question, in input order. A question
    which fails outright is kept with its error and contributes nothing."""
    def work(question):
        try:
            return forge_question(itgs, question, groups.get(question.q_id), settings)
        except Exception as exc:  # noqa
            itgs.logger.exception('Failed to forge {}', question.q_id)
            return QuestionForge(q_id=question.q_id, error=f'{type(exc).__name__}: {exc}')

    if parallelism > 1 and len(questions) > 1:
        itgs.retriever
        itgs.gateway
        with ThreadPoolExecutor(max_workers=parallelism) as executor:
            return list(executor.map(work, questions))
    return [work(q) for q in questions]


CANONICAL_REFUSAL = 'canonical_refusal'
"""Provenance of the refusal chosen over distractors when the question has
no refusal positive"""


def _pick_positive(negative: NegativeSample, positives: List[PositiveSample]) -> Optional[PositiveSample]:
    """The chosen side for the negative, or None if it cannot be paired.

    A misattribution rejects the question's own verified reasoning over
    distractors that do not entail it, so its chosen side is a refusal over
    those distractors: a refusal positive of the question if there is one,
    else the canonical refusal. Other negatives take a positive of the same
    question whose verdict differs, preferring one over the same documents.
    """
    if negative.category == NegativeCategory.misattribution:
        refusals = [p for p in positives if isinstance(p.verdict, NegativeKnowledgeAssertion)]
        for positive in refusals:
            if positive.doc_ids == negative.doc_ids:
                return positive
        if refusals:
            return refusals[0]
        return PositiveSample(
            q_id=negative.q_id, doc_ids=negative.doc_ids, verdict=NegativeKnowledgeAssertion(),
            kind=PositiveKind.refusal, provenance=CANONICAL_REFUSAL, group=negative.group
        )

    usable = [p for p in positives if p.verdict != negative.verdict]
    for positive in usable:
        if positive.doc_ids == negative.doc_ids:
            return positive
    return usable[0] if usable else None


def emit_preference_corpus(itgs, questions: Sequence[BenchmarkQuestion], positives: List[PositiveSample],
                           negatives: List[NegativeSample], settings,
                           endpoints: Dict[str, str] = None) -> Tuple[List[PreferencePair], ForgeManifest]:
    """Pairs every negative with a positive of the same question, preferring
    one over the same documents, or with a refusal over a misattribution's
    distractors. Then caps each category if configured.

    Negatives with no usable positive are logged as unpairable; positives
    whose question has no negative are logged and left out.
    """
    by_question = {q.q_id: q for q in questions}
    positives_by_q: Dict[str, List[PositiveSample]] = {}
    for positive in positives:
        positives_by_q.setdefault(positive.q_id, []).append(positive)

    pairs = []
    unpaired = 0
    for negative in negatives:
        positive = _pick_positive(negative, positives_by_q.get(negative.q_id, []))
        if positive is None:
            itgs.logger.warning('{}', UnpairableSample(negative.q_id, negative.category))
            unpaired += 1
            continue
        question = by_question[negative.q_id]
        pairs.append(PreferencePair(
            q_id=negative.q_id, question=question.question, options=question.options,
            doc_ids=negative.doc_ids, chosen=positive.verdict, rejected=negative.verdict,
            category=negative.category, provenance={'chosen': positive.provenance, 'rejected': negative.provenance},
            group=negative.group
        ))

    negative_questions = {n.q_id for n in negatives}
    lonely = sorted({p.q_id for p in positives if p.q_id not in negative_questions})
    for q_id in lonely:
        itgs.logger.info('{} has positives but no negatives; no pair emitted', q_id)

    if settings.max_pairs_per_category is not None:
        pairs = cap_pairs(pairs, settings.max_pairs_per_category, settings.seed)

    manifest = ForgeManifest(
        pairs=len(pairs),
        pairs_per_category=_count(p.category for p in pairs),
        pairs_per_group=_count(p.group or 'unstratified' for p in pairs),
        negatives_per_category=_count(n.category for n in negatives),
        negatives_per_group=_count(n.group or 'unstratified' for n in negatives),
        positives=_count(p.kind for p in positives),
        unpaired_negatives=unpaired,
        positives_without_negatives=len(lonely),
        thresholds={'delta': settings.delta},
        endpoints=endpoints or {},
        balance=settings.balance,
        max_pairs_per_category=settings.max_pairs_per_category,
        seed=settings.seed,
    )
    return pairs, manifest


def cap_pairs(pairs: List[PreferencePair], cap: int, seed: int) -> List[PreferencePair]:
    """Samples each category down to at most `cap` pairs, keeping the
    original order of those kept"""
    rng = random.Random(seed)
    keep = set()
    for category in NegativeCategory:
        indices = [idx for idx, p in enumerate(pairs) if p.category == category.value]
        if len(indices) > cap:
            indices = rng.sample(indices, cap)
        keep.update(indices)
    return [p for idx, p in enumerate(pairs) if idx in keep]


def _count(values) -> Dict[str, int]:
    counts = {}
    for value in values:
        counts[value] = counts.get(value, 0) + 1
    return dict(sorted(counts.items()))


def pair_record(pair: PreferencePair) -> dict:
    return {
        'q_id': pair.q_id,
        'prompt': {'question': pair.question, 'options': pair.options, 'docs': pair.doc_ids},
        'chosen_text': render_verdict(pair.chosen),
        'rejected_text': render_verdict(pair.rejected),
        'category': pair.category,
        'group': pair.group,
        'provenance': pair.provenance,
    }


def sft_record(question: BenchmarkQuestion, positive: PositiveSample) -> dict:
    return {
        'q_id': positive.q_id,
        'prompt': {'question': question.question, 'options': question.options, 'docs': positive.doc_ids},
        'completion': render_verdict(positive.verdict),
        'kind': positive.kind,
    }


def _write_lines(path: str, records):
    with open(path, 'w', encoding='utf-8') as outfile:
        for record in records:
            outfile.write(json.dumps(record, sort_keys=True))
            outfile.write('\n')


def write_forge_outputs(directory: str, questions: Sequence[BenchmarkQuestion], results: List[QuestionForge],
                        pairs: List[PreferencePair], manifest: ForgeManifest):
    """Writes the preference corpus, the SFT corpus, the manifest, and the
    composed sets and negatives with their evidence for auditing."""
    os.makedirs(directory, exist_ok=True)
    by_question = {q.q_id: q for q in questions}
    _write_lines(os.path.join(directory, PREFERENCE_FILE), (pair_record(p) for p in pairs))
    _write_lines(os.path.join(directory, SFT_FILE), (
        sft_record(by_question[p.q_id], p) for r in results for p in r.positives
    ))
    _write_lines(os.path.join(directory, DOCSETS_FILE), (
        json.loads(d.json()) for r in results for d in r.docsets
    ))
    _write_lines(os.path.join(directory, NEGATIVES_FILE), (
        json.loads(n.json()) for r in results for n in r.negatives
    ))
    with open(os.path.join(directory, MANIFEST_FILE), 'w', encoding='utf-8') as outfile:
        json.dump(json.loads(manifest.json()), outfile, sort_keys=True, indent=2)
        outfile.write('\n')


def summarize(results: List[QuestionForge]) -> Tuple[List[PositiveSample], List[NegativeSample], int, int]:
    """(positives, negatives, quarantined drafts, docsets) over all
    questions, in question order"""
    positives = [p for r in results for p in r.positives]
    negatives = [n for r in results for n in r.negatives]
    return positives, negatives, sum(r.quarantined_drafts for r in results), sum(len(r.docsets) for r in results)
