"""Generates a small synthetic corpus, benchmark and scripted model session
which exercise every pipeline outcome, every planted hallucination and every
negative sample category offline.

The scripts are keyed with the same prompt and fingerprint helpers the
gateway uses, and the documents each question is shown are found by running
the real retriever over the generated corpus, so the bundle stays in step
with the code that consumes it. Everything is derived from the seed.

Scenarios:
- B01..B04 validate in the first round; B04's reasoning leads the generator
  to a wrong answer
- B05, B06 refuse twice and validate in the third round
- B07 refuses once and validates in the second round
- B08..B10 refuse every round and fall back; only B08 is answered correctly
- Auditing the benchmark run finds faulty reasoning on B02, misattribution
  on B03, a missing answer on B04 and an over-refusal on B08
- F1..F4 each yield exactly one negative: faulty reasoning, missing answer,
  over-refusal and misattribution respectively
"""
from typing import Dict, List, Optional, Sequence
import json
import os
import random

from pydantic import BaseModel

from config import default_endpoints
from corpus.models import OPTION_LABELS, BenchmarkQuestion, Document
from forge.builders import distractor_query
from forge.compose import compose_document_sets
from gateway.client import Gateway
from gateway.mock import DEFAULT_FINGERPRINT, ScriptedTransport
from gateway.models import AgentEndpoint, EndpointRole, NliLabel
from gateway.prompts import answer_hypothesis, premise_text
from gateway.transport import fingerprint
from integrations import LazyIntegrations
from pipeline.loop import augment_query, select_view
from pipeline.models import PipelineConfig
from retrieval.sparse import build_index_from_documents
from verdicts.format import render_verdict
from verdicts.models import NKA_SENTENCE, CiteReason, CiteStatement


DEFAULT_SEED = 42
EMBED_DIMENSION = 4

CONSONANTS = 'bdfgklmnprstvz'
VOWELS = 'aeiou'
QUESTION_TEMPLATE = 'Which option best explains {} with {} and {}?'
RESERVED_WORDS = frozenset(('which', 'option', 'best', 'explains', 'with', 'and', 'focus'))

SUBJECTS = ('anatomy', 'clinical_knowledge', 'college_medicine', 'professional_medicine')
SOURCES = ('pubmed', 'statpearls', 'textbook', 'wikipedia')

CORPUS_FILE = 'corpus.jsonl'
BENCH_FILE = 'bench.jsonl'
FORGE_FILE = 'forge.jsonl'
SCRIPT_FILE = 'mock_script.jsonl'
CONFIG_FILE = 'config.json'
EXPECTED_FILE = 'expected.json'
DPO_FILE = 'dpo_pairs.json'
STORE_DIR = 'store'

FORGE_SETTINGS = {'delta': 0.8, 'candidate_depth': 10, 'distractor_pool': 20}

SIMILAR = [1.0, 0.0, 0.0, 0.0]
NEAR = [0.95, 0.31224989991991997, 0.0, 0.0]
UNRELATED = [0.0, 0.0, 0.0, 1.0]


class FixtureBundle(BaseModel):
    """Everything needed to run the system offline.

    Attributes:
    - `documents (list[Document])`: The toy corpus, in file order
    - `benchmark (list[BenchmarkQuestion])`: The benchmark scenarios
    - `forge_questions (list[BenchmarkQuestion])`: The preference corpus
      scenarios
    - `scripts (list[dict])`: Scripted transport records
    - `config (dict)`: Configuration for running the bundle; paths are
      filled in when it is written
    - `dpo_batch (dict)`: `{beta, pairs}` for the loss check
    - `expected (dict)`: The outcomes the scripts were written to produce
    """
    seed: int
    documents: List[Document]
    benchmark: List[BenchmarkQuestion]
    forge_questions: List[BenchmarkQuestion]
    scripts: List[dict]
    config: dict
    dpo_batch: dict
    expected: dict


class _Words:
    """Unique pronounceable nonsense words"""
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.used = set(RESERVED_WORDS)

    def fresh(self, syllables: int = 3) -> str:
        while True:
            word = ''.join(self.rng.choice(CONSONANTS) + self.rng.choice(VOWELS) for _ in range(syllables))
            if word not in self.used:
                self.used.add(word)
                return word

    def many(self, count: int) -> List[str]:
        return [self.fresh() for _ in range(count)]


class _MemoryStore:
    """Just enough of a corpus store for the retriever"""
    def __init__(self, documents: Sequence[Document]):
        self.directory = ':memory:'
        self.documents = {doc.doc_id: doc for doc in documents}

    def __contains__(self, doc_id) -> bool:
        return doc_id in self.documents

    def __len__(self) -> int:
        return len(self.documents)

    def get_document(self, doc_id: str) -> Document:
        return self.documents[doc_id]

    def iter_documents(self):
        return iter(self.documents.values())

    def close(self):
        pass


class ScriptBook:
    """Builds scripted responses keyed exactly as the gateway keys its
    requests"""
    def __init__(self, endpoints: Dict[str, AgentEndpoint]):
        self.endpoints = endpoints
        self.transport = ScriptedTransport()

    def add(self, name: str, task: str, parts: Sequence[str], responses: list):
        endpoint = self.endpoints[name]
        self.transport.add(endpoint.role, fingerprint(endpoint.model_name, task, *parts), responses)

    def default(self, name: str, responses: list):
        self.transport.add(self.endpoints[name].role, DEFAULT_FINGERPRINT, responses)

    def verify(self, question: BenchmarkQuestion, raws: List[str]):
        self.add('verifier', 'verify', [question.q_id, question.question], raws)

    def generate(self, question: BenchmarkQuestion, reasoning: Optional[CiteReason], label: str):
        reasoning_text = render_verdict(reasoning) if reasoning is not None else ''
        self.add('generator', 'generate', [question.question, reasoning_text], [answer_text(label)])

    def assess(self, question: BenchmarkQuestion, labels: List[str]):
        self.add(
            'assessor', 'self_assess', [question.q_id, question.question], [answer_text(label) for label in labels]
        )

    def draft(self, name: str, question: BenchmarkQuestion, doc_ids: Sequence[str], verdict):
        self.add(name, 'draft', [question.question, ','.join(doc_ids)], [render_verdict(verdict)])

    def nli(self, premise, hypothesis: str, label: NliLabel):
        self.add('nli', 'nli', [premise_text(premise), hypothesis], [label.value])

    def embed(self, doc: Document, vector: List[float]):
        self.add('embedder', 'embed', [premise_text(doc)], [list(vector)])

    def records(self) -> List[dict]:
        return self.transport.records()


def answer_text(label: str) -> str:
    return f'The answer is ({label}).'


def refusal_text(gap: Sequence[str]) -> str:
    return NKA_SENTENCE + '\nGAP: ' + '; '.join(gap)


def fixture_endpoints() -> Dict[str, AgentEndpoint]:
    endpoints = default_endpoints()
    endpoints['embedder'] = endpoints['embedder'].copy(update={'dimension': EMBED_DIMENSION})
    endpoints['dense'] = AgentEndpoint(role=EndpointRole.dense_search, model_name='mock-dense')
    return endpoints


class _Builder:
    """Holds the generation state while the scenarios are laid out"""
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.words = _Words(self.rng)
        self.filler = self.words.many(40)
        self.pending = []

    def sentence(self, keywords: Sequence[str], extra: int = 8) -> str:
        tokens = list(keywords) + self.rng.sample(self.filler, extra)
        self.rng.shuffle(tokens)
        return ' '.join(tokens).capitalize() + '.'

    def doc(self, tag: str, keywords: Sequence[str]):
        self.pending.append({
            'tag': tag,
            'title': ' '.join(self.words.many(2)).title(),
            'text': self.sentence(keywords) + ' ' + self.sentence(keywords[:1], extra=6),
            'source': self.rng.choice(SOURCES),
        })

    def question(self, q_id: str):
        keywords = self.words.many(3)
        options = {label: f'{self.words.fresh()} {self.words.fresh()}' for label in OPTION_LABELS}
        gold = self.rng.choice(OPTION_LABELS)
        question = BenchmarkQuestion(
            q_id=q_id, question=QUESTION_TEMPLATE.format(*keywords), options=options, gold=gold,
            subject=self.rng.choice(SUBJECTS)
        )
        return question, keywords

    def statement(self, keyword: str, citations: List[int]) -> CiteStatement:
        return CiteStatement(
            text=f'{keyword.capitalize()} is linked to {self.words.fresh()} {self.words.fresh()}.',
            citations=citations
        )

    def reasoning(self, keyword: str, citations: Sequence[int] = (1, 2)) -> CiteReason:
        return CiteReason(statements=[self.statement(keyword, [c]) for c in citations])

    def finish_documents(self) -> Dict[str, Document]:
        """Shuffles the corpus, assigns doc ids in file order, and returns
        tag to document"""
        self.rng.shuffle(self.pending)
        by_tag = {}
        for idx, spec in enumerate(self.pending, start=1):
            by_tag[spec['tag']] = Document(
                doc_id=f'D{idx:03d}', title=spec['title'], text=spec['text'], source=spec['source']
            )
        return by_tag


def wrong_label(gold: str) -> str:
    return OPTION_LABELS[(OPTION_LABELS.index(gold) + 1) % len(OPTION_LABELS)]


def _views(retriever, question: BenchmarkQuestion, gaps: Sequence[Optional[List[str]]],
           config: PipelineConfig) -> List[List[Document]]:
    """The documents the verifier is shown in each round, given the gap
    analysis (None for validated reasoning) returned in each round"""
    query = question.question
    shown = set()
    views = []
    for iteration, gap in enumerate(gaps):
        evidence = retriever.retrieve(query, config.depth, iteration=iteration)
        view = select_view(evidence.docs, shown, config.verifier_view)
        shown.update(d.doc_id for d in view)
        views.append(view)
        if gap is not None:
            query = augment_query(query, gap)
    return views


def generate_fixtures(seed: int = DEFAULT_SEED) -> FixtureBundle:
    """Builds the bundle for the given seed. The same seed always gives an
    equal bundle."""
    builder = _Builder(seed)
    pipeline = PipelineConfig()
    endpoints = fixture_endpoints()
    book = ScriptBook(endpoints)

    book.default('nli', [NliLabel.not_entail.value])
    book.default('primary_drafter', [NKA_SENTENCE])
    book.default('embedder', [UNRELATED])
    book.default('dense', [[]])

    bench = []
    bench_keywords = {}
    for idx in range(1, 11):
        question, keywords = builder.question(f'B{idx:02d}')
        bench.append(question)
        bench_keywords[question.q_id] = keywords
        for n in range(3):
            builder.doc(f'{question.q_id}/topic/{n}', keywords)

    gap_words = {}
    for q_id in ('B05', 'B06'):
        gap_words[q_id] = builder.words.many(2)
        for n, word in enumerate(gap_words[q_id]):
            builder.doc(f'{q_id}/gap/{n}', [word])
    for q_id in ('B07', 'B08', 'B09', 'B10'):
        gap_words[q_id] = builder.words.many(1)

    forge = []
    forge_keywords = {}
    for idx in range(1, 5):
        question, keywords = builder.question(f'F{idx}')
        forge.append(question)
        forge_keywords[question.q_id] = keywords
        for n in range(5):
            builder.doc(f'{question.q_id}/topic/{n}', keywords)
    for n in range(2):
        builder.doc(f'F4/near/{n}', forge_keywords['F4'][:1])

    by_tag = builder.finish_documents()
    documents = sorted(by_tag.values(), key=lambda d: d.doc_id)
    store = _MemoryStore(documents)
    sim = LazyIntegrations(
        store=store, index=build_index_from_documents(documents),
        gateway=Gateway(endpoints, mock=book.transport, backoff_ms=0)
    )

    expected_bench = _script_benchmark(builder, book, sim.retriever, bench, bench_keywords, gap_words, pipeline)
    expected_forge = _script_forge(builder, book, sim, forge, forge_keywords, by_tag)
    book.transport.reset()

    dpo_rng = random.Random(seed + 1)
    dpo_pairs = []
    for _ in range(8):
        ref_chosen = dpo_rng.uniform(-60.0, -5.0)
        ref_rejected = dpo_rng.uniform(-60.0, -5.0)
        dpo_pairs.append({
            'logp_policy_chosen': ref_chosen + dpo_rng.uniform(-3.0, 3.0),
            'logp_ref_chosen': ref_chosen,
            'logp_policy_rejected': ref_rejected + dpo_rng.uniform(-3.0, 3.0),
            'logp_ref_rejected': ref_rejected,
        })

    config = {
        'endpoints': {name: endpoint.dict() for name, endpoint in sorted(endpoints.items())},
        'retrieval': {'dense_endpoints': ['dense']},
        'gateway': {'backoff_ms': 0},
        'pipeline': pipeline.dict(),
        'medrank': {'k': 4},
        'forge': dict(FORGE_SETTINGS, seed=seed),
        'log_level': 'INFO',
    }

    return FixtureBundle(
        seed=seed,
        documents=documents,
        benchmark=bench,
        forge_questions=forge,
        scripts=book.records(),
        config=config,
        dpo_batch={'beta': 0.1, 'pairs': dpo_pairs},
        expected=dict(expected_bench, forge=expected_forge),
    )


def _script_benchmark(builder: _Builder, book: ScriptBook, retriever, bench, keywords, gap_words,
                      pipeline: PipelineConfig) -> dict:
    by_id = {q.q_id: q for q in bench}
    gaps_by_round = {
        'B01': [None], 'B02': [None], 'B03': [None], 'B04': [None],
        'B05': [gap_words['B05'][:1], gap_words['B05'][1:], None],
        'B06': [gap_words['B06'][:1], gap_words['B06'][1:], None],
        'B07': [gap_words['B07'], None],
        'B08': [gap_words['B08']] * 3,
        'B09': [gap_words['B09']] * 3,
        'B10': [gap_words['B10']] * 3,
    }
    correct = {'B01', 'B02', 'B03', 'B05', 'B06', 'B07', 'B08'}
    audit = {q_id: [] for q_id in by_id}

    for q_id, gaps in gaps_by_round.items():
        question = by_id[q_id]
        views = _views(retriever, question, gaps, pipeline)
        final_view = views[-1]
        answer = question.gold if q_id in correct else wrong_label(question.gold)

        if gaps[-1] is not None:
            book.verify(question, [refusal_text(gaps[0])])
            book.generate(question, None, answer)
            over_refusal = q_id == 'B08'
            book.nli(
                final_view, answer_hypothesis(question),
                NliLabel.entail if over_refusal else NliLabel.not_entail
            )
            if over_refusal:
                audit[q_id].append('over_refusal')
            continue

        reasoning = builder.reasoning(keywords[q_id][0])
        book.verify(question, [refusal_text(gap) for gap in gaps[:-1]] + [render_verdict(reasoning)])
        book.generate(question, reasoning, answer)

        for statement in reasoning.statements:
            cited = [final_view[c - 1] for c in statement.citations]
            planted = statement is reasoning.statements[0] and q_id in ('B02', 'B03')
            if not planted:
                book.nli(cited, statement.text, NliLabel.entail)
        if q_id == 'B02':
            audit[q_id].append('faulty_reasoning')
        if q_id == 'B03':
            book.nli(final_view[2], reasoning.statements[0].text, NliLabel.entail)
            audit[q_id].append('misattribution')
        if q_id == 'B04':
            audit[q_id].append('missing_answer')

    outcomes = {q_id: ('fallback' if gaps[-1] is not None else 'validated') for q_id, gaps in gaps_by_round.items()}
    return {
        'bench': {
            'dataset': 'bench',
            'n': len(bench),
            'em': len(correct) / len(bench),
            'correct': sorted(correct),
            'outcomes': outcomes,
            'rounds_used': {q_id: len(gaps) for q_id, gaps in gaps_by_round.items()},
        },
        'audit': {
            'categories': audit,
            'counts': {
                'faulty_reasoning': 1, 'misattribution': 1, 'missing_answer': 1, 'over_refusal': 1
            },
            'denominators': {
                'faulty_reasoning': 7, 'misattribution': 7, 'missing_answer': 7, 'over_refusal': 3
            },
        },
    }


def _script_forge(builder: _Builder, book: ScriptBook, sim, forge, keywords, by_tag) -> dict:
    by_id = {q.q_id: q for q in forge}

    for question in forge:
        hypothesis = answer_hypothesis(question)
        for n in range(5):
            book.nli(by_tag[f'{question.q_id}/topic/{n}'], hypothesis, NliLabel.entail)

    assessments = {
        'F1': lambda g, w: [g, w, g, g],
        'F2': lambda g, w: [g, g, g, g],
        'F3': lambda g, w: [w, g, g, g],
        'F4': lambda g, w: [w, w, w, w],
    }
    for q_id, pattern in assessments.items():
        question = by_id[q_id]
        book.assess(question, pattern(question.gold, wrong_label(question.gold)))

    docsets = {}
    for question in forge:
        candidates = sim.retriever.retrieve(question.question, FORGE_SETTINGS['candidate_depth'])
        sets = compose_document_sets(sim, question, candidates)
        full = next(s for s in sets if tuple(s.composition) == (5, 0))
        docsets[question.q_id] = {
            'all': [s.doc_ids for s in sets],
            'entailing': full.doc_ids,
            'docs': [sim.store.get_document(d) for d in full.doc_ids],
        }

    for question in forge:
        q_id = question.q_id
        gold = question.gold
        info = docsets[q_id]
        primary = builder.reasoning(keywords[q_id][0], (1, 2) if q_id != 'F4' else (1,))
        book.draft('primary_drafter', question, info['entailing'], primary)
        book.generate(question, primary, gold)

        if q_id == 'F1':
            alt = builder.reasoning(keywords[q_id][1])
            book.draft('alt_drafter', question, info['entailing'], alt)
            book.nli(info['docs'], render_verdict(alt), NliLabel.not_entail)
        elif q_id == 'F2':
            alt = builder.reasoning(keywords[q_id][1])
            book.draft('alt_drafter', question, info['entailing'], alt)
            book.nli(info['docs'], render_verdict(alt), NliLabel.entail)
            book.generate(question, None, gold)
            book.generate(question, alt, wrong_label(gold))
        elif q_id == 'F3':
            book.nli(info['docs'], render_verdict(primary), NliLabel.entail)
            book.generate(question, None, gold)
        else:
            for doc in info['docs']:
                book.embed(doc, SIMILAR)
            for n in range(2):
                book.embed(by_tag[f'F4/near/{n}'], NEAR)
            book.add('dense', 'dense_search', [distractor_query(info['docs'])], [[
                [by_tag[f'F4/near/{n}'].doc_id, 1.0 - n / 10] for n in range(2)
            ]])

    return {
        'stratification': {'stable': ['F2'], 'medium': ['F1', 'F3'], 'challenging': ['F4'], 'quarantined': []},
        'negatives': {
            'F1': ['faulty_reasoning'], 'F2': ['missing_answer'], 'F3': ['over_refusal'], 'F4': ['misattribution']
        },
        'docsets': {q_id: info['all'] for q_id, info in docsets.items()},
        'pairs_per_category': {
            'faulty_reasoning': 1, 'misattribution': 1, 'missing_answer': 1, 'over_refusal': 1
        },
        'positives': {'reasoning': 4, 'refusal': 2},
    }


def referenced_doc_ids(bundle: FixtureBundle) -> List[str]:
    """Every doc id the expected outputs mention"""
    found = set()
    for sets in bundle.expected['forge']['docsets'].values():
        for doc_ids in sets:
            found.update(doc_ids)
    return sorted(found)


def _write_lines(path: str, records):
    with open(path, 'w', encoding='utf-8') as outfile:
        for record in records:
            outfile.write(json.dumps(record, sort_keys=True))
            outfile.write('\n')


def write_bundle(bundle: FixtureBundle, directory: str) -> Dict[str, str]:
    """Writes the bundle into the directory. The config points at the store
    directory and mock script inside it, so `--config <dir>/config.json`
    runs everything offline once the corpus is ingested.

    Returns:
    - `paths (dict[str, str])`: What was written, by kind
    """
    os.makedirs(directory, exist_ok=True)
    paths = {
        'corpus': os.path.join(directory, CORPUS_FILE),
        'bench': os.path.join(directory, BENCH_FILE),
        'forge': os.path.join(directory, FORGE_FILE),
        'script': os.path.join(directory, SCRIPT_FILE),
        'config': os.path.join(directory, CONFIG_FILE),
        'expected': os.path.join(directory, EXPECTED_FILE),
        'dpo': os.path.join(directory, DPO_FILE),
        'store': os.path.join(directory, STORE_DIR),
    }
    _write_lines(paths['corpus'], (doc.dict() for doc in bundle.documents))
    _write_lines(paths['bench'], (json.loads(q.json()) for q in bundle.benchmark))
    _write_lines(paths['forge'], (json.loads(q.json()) for q in bundle.forge_questions))
    _write_lines(paths['script'], bundle.scripts)

    config = json.loads(json.dumps(bundle.config))
    config['store'] = {'directory': paths['store']}
    config['gateway']['mock_script'] = paths['script']
    for key, payload in (('config', config), ('expected', bundle.expected), ('dpo', bundle.dpo_batch)):
        with open(paths[key], 'w', encoding='utf-8') as outfile:
            json.dump(payload, outfile, sort_keys=True, indent=2)
            outfile.write('\n')
    return paths
