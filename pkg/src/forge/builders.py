"""Builds verified positives and the four kinds of hallucinated negatives for
one composed document set.

Each negative constructor follows the same interface: a cheap, side effect
free `might_apply` and a `build` which consults the oracles, records their
outcomes as evidence, and emits a sample only if the category predicate holds
on that evidence.
"""
from typing import List, Optional

import numpy as np

from forge.compose import ForgeContext, cosine_matrix, set_similarity
from forge.models import NegativeCategory, NegativeSample, PositiveKind, PositiveSample
from forge import predicates
from gateway.errors import GatewayError
from gateway.prompts import answer_hypothesis, premise_text
from gateway.models import NliLabel
from verdicts.models import CiteReason, NegativeKnowledgeAssertion


MAX_DISTRACTORS = 5


def draft_reasoning(ctx: ForgeContext, endpoint: str):
    """The parsed draft from the given endpoint over the document set.

    Raises:
    - `UnparseableVerdict`: If the draft does not parse
    """
    return ctx.draft(endpoint)[0]


def verify_positive(ctx: ForgeContext, reasoning: CiteReason) -> bool:
    """True iff the frozen generator, given only the reasoning, picks the
    gold answer. Gateway failures count as unverified."""
    try:
        return ctx.answer_with(reasoning) == ctx.question.gold
    except GatewayError as exc:
        ctx.itgs.logger.warning('{}: could not verify positive: {}', ctx.question.q_id, exc)
        return False


def build_positive(ctx: ForgeContext) -> Optional[PositiveSample]:
    """The primary draft as a positive sample, if it is verified reasoning or
    a refusal the documents do not contradict.

    Raises:
    - `UnparseableVerdict`: If the primary draft does not parse
    """
    verdict = ctx.primary()
    provenance = ctx.itgs.gateway.endpoint(ctx.settings.primary_drafter).model_name

    if isinstance(verdict, CiteReason):
        if not verify_positive(ctx, verdict):
            return None
        kind = PositiveKind.reasoning
    else:
        label = ctx.itgs.gateway.call_nli(ctx.docs, answer_hypothesis(ctx.question), endpoint=ctx.settings.nli)
        if label != NliLabel.not_entail:
            return None
        kind = PositiveKind.refusal

    return PositiveSample(
        q_id=ctx.question.q_id, doc_ids=ctx.docset.doc_ids, verdict=verdict, kind=kind,
        provenance=provenance, group=ctx.group
    )


class NegativeBuilder:
    """Produces negatives of one category.

    Attributes:
    - `category (NegativeCategory)`: What this builder emits
    """
    category: NegativeCategory = None

    def might_apply(self, ctx: ForgeContext) -> bool:
        """Whether this builder could emit anything for the context. Must not
        call any oracle."""
        return True

    def build(self, ctx: ForgeContext) -> Optional[NegativeSample]:
        raise NotImplementedError()

    def emit(self, ctx: ForgeContext, doc_ids: List[str], verdict, evidence: dict,
             endpoint: str) -> Optional[NegativeSample]:
        if not predicates.PREDICATES[self.category.value](evidence):
            return None
        return NegativeSample(
            q_id=ctx.question.q_id, doc_ids=doc_ids, verdict=verdict, category=self.category,
            evidence=evidence, provenance=ctx.itgs.gateway.endpoint(endpoint).model_name, group=ctx.group
        )


class FaultyReasoningBuilder(NegativeBuilder):
    """Alternative reasoning the documents do not entail"""
    category = NegativeCategory.faulty_reasoning

    def build(self, ctx):
        alt = ctx.alternative()
        if not isinstance(alt, CiteReason):
            return None
        evidence = {'nli_reasoning_docs': ctx.nli(ctx.docs, alt)}
        return self.emit(ctx, ctx.docset.doc_ids, alt, evidence, ctx.settings.alt_drafter)


class MissingAnswerBuilder(NegativeBuilder):
    """Alternative reasoning which talks the generator out of the answer it
    gets right on its own. Stable questions only."""
    category = NegativeCategory.missing_answer

    def might_apply(self, ctx):
        return ctx.group == 'stable'

    def build(self, ctx):
        plain = ctx.plain_answer()
        if plain != ctx.question.gold:
            ctx.itgs.logger.debug('{}: no longer answered correctly alone, skipping', ctx.question.q_id)
            return None
        alt = ctx.alternative()
        if not isinstance(alt, CiteReason):
            return None
        evidence = {
            'group': ctx.group,
            'gold': ctx.question.gold,
            'answer_without_reasoning': plain,
            'answer_with_reasoning': ctx.answer_with(alt),
        }
        return self.emit(ctx, ctx.docset.doc_ids, alt, evidence, ctx.settings.alt_drafter)


class OverRefusalBuilder(NegativeBuilder):
    """An alternative refusal where the primary reasoning is entailed by the
    documents and consistent with the generator's own answer"""
    category = NegativeCategory.over_refusal

    def build(self, ctx):
        primary = ctx.primary()
        alt = ctx.alternative()
        if not isinstance(primary, CiteReason) or not isinstance(alt, NegativeKnowledgeAssertion):
            return None
        evidence = {
            'primary_kind': primary.kind,
            'alt_kind': alt.kind,
            'nli_primary_docs': ctx.nli(ctx.docs, primary),
        }
        if evidence['nli_primary_docs'] == predicates.ENTAIL:
            evidence['answer_without_reasoning'] = ctx.plain_answer()
            evidence['answer_with_primary'] = ctx.answer_with(primary)
        return self.emit(ctx, ctx.docset.doc_ids, alt, evidence, ctx.settings.alt_drafter)


class MisattributionBuilder(NegativeBuilder):
    """The primary reasoning paired with distractor documents which look like
    its sources but do not entail it"""
    category = NegativeCategory.misattribution

    def build(self, ctx):
        primary = ctx.primary()
        if not isinstance(primary, CiteReason):
            return None

        distractors = find_distractors(ctx)
        if not distractors:
            return None

        similarity = set_similarity(ctx.itgs, ctx.docs, distractors, ctx=ctx)
        evidence = {'similarity': similarity, 'delta': ctx.settings.delta}
        if similarity > ctx.settings.delta:
            evidence['nli_reasoning_distractors'] = ctx.nli(distractors, primary)
        return self.emit(ctx, [d.doc_id for d in distractors], primary, evidence, ctx.settings.primary_drafter)


def find_distractors(ctx: ForgeContext):
    """Up to five documents outside the set, most similar to the set first,
    ties in retrieval order.

    Candidates come from the dense retrievers over the store, queried with
    the set's documents, when any are configured. Otherwise they come from
    hybrid retrieval for the question.
    """
    in_set = set(ctx.docset.doc_ids)
    retriever = ctx.itgs.retriever
    if retriever.dense_clients:
        pool = retriever.retrieve(distractor_query(ctx.docs), ctx.settings.distractor_pool, dense_only=True)
    else:
        pool = retriever.retrieve(ctx.question.question, ctx.settings.distractor_pool)
    candidates = [d for d in pool.docs if d.doc_id not in in_set]
    if not candidates:
        return []

    source = np.array([ctx.embed(d) for d in ctx.docs], dtype=np.float64)
    others = np.array([ctx.embed(d) for d in candidates], dtype=np.float64)
    best = cosine_matrix(others, source).max(axis=1)
    order = sorted(range(len(candidates)), key=lambda idx: (-best[idx], idx))
    return [candidates[idx] for idx in order[:MAX_DISTRACTORS]]


def distractor_query(docs) -> str:
    """The dense search query which looks for documents like the given set"""
    return premise_text(docs)


NEGATIVE_BUILDERS = (
    FaultyReasoningBuilder(),
    MissingAnswerBuilder(),
    OverRefusalBuilder(),
    MisattributionBuilder(),
)
