"""The single boundary to every external model service. Each typed
operation renders its prompt, builds the request envelope, sends it with
retries through the transport for the endpoint, logs the call, and parses
the response. Only GatewayError subclasses escape.
"""
from typing import Dict, List, Optional, Sequence, Tuple
from urllib.parse import urlparse
import re
import threading
import time

from loguru import logger as default_logger
from pydantic import ValidationError
import pytypeutils as tus

from corpus.models import BenchmarkQuestion, Document
from gateway.answers import extract_label
from gateway.errors import (
    BadLabel, DimensionMismatch, GatewayError, GatewayTimeout, MalformedResponse,
    TransportError, UnknownEndpoint, UnparseableVerdict
)
from gateway.models import AgentEndpoint, DecodingParams, GatewayCall, NliLabel, VerifierOutput
from gateway import prompts
from gateway.transport import (
    AmqpTransport, HttpTransport, Transport, fingerprint, make_request, request_hash
)
from retrieval.fusion import RankedList
from verdicts.format import VerdictError, parse_verdict, render_verdict
from verdicts.models import CiteReason, GapAnalysis, Verdict, is_nka_text


DEFAULT_BACKOFF_MS = 200

GAP_LINE_REGEX = re.compile(r'^[ \t]*GAP[ \t]*:(.*)$', re.MULTILINE | re.IGNORECASE)
"""The line a verifier uses to list missing evidence after a refusal"""


def parse_verifier_output(raw: str, num_docs: int) -> VerifierOutput:
    """Splits a verifier response into its verdict and gap analysis. GAP
    lines belong to refusals; in reasoning they are ordinary text.

    Raises:
    - `UnparseableVerdict`: If the verdict does not parse against `num_docs`
      documents, or a refusal carries no usable gap analysis
    """
    without_gap = GAP_LINE_REGEX.sub('', raw)
    verdict_text = without_gap if is_nka_text(without_gap) else raw

    try:
        verdict = parse_verdict(verdict_text, num_docs)
    except VerdictError as exc:
        raise UnparseableVerdict(raw, str(exc))

    if isinstance(verdict, CiteReason):
        return VerifierOutput(verdict=verdict, gap=None, raw=raw)

    gap_terms = []
    for match in GAP_LINE_REGEX.finditer(raw):
        gap_terms.extend(term for term in match.group(1).split(';'))
    try:
        gap = GapAnalysis(missing_aspects=gap_terms)
    except ValidationError:
        raise UnparseableVerdict(raw, 'refusal without a usable gap analysis')
    return VerifierOutput(verdict=verdict, gap=gap, raw=raw)


def parse_draft(raw: str, num_docs: int) -> Verdict:
    try:
        return parse_verdict(raw, num_docs)
    except VerdictError as exc:
        raise UnparseableVerdict(raw, str(exc))


def parse_nli_label(endpoint: str, content) -> NliLabel:
    if not isinstance(content, str):
        raise BadLabel(content)
    normalized = content.strip().lower().replace(' ', '_').replace('-', '_')
    try:
        return NliLabel(normalized)
    except ValueError:
        raise BadLabel(content)


class Gateway:
    """A shareable handle to the configured model services.

    Attributes:
    - `endpoints (dict[str, AgentEndpoint])`: The endpoints by name
    - `mock (Transport, None)`: The scripted transport, used for `mock://`
      endpoints, or for every endpoint if `force_mock`
    - `force_mock (bool)`: Route every call through `mock`
    - `cache (EmbeddingCache, None)`: Optional embedding cache
    - `backoff_ms (int)`: The delay before the first retry; doubled for each
      further retry
    - `calls (list[GatewayCall])`: Every call made, in completion order
    """
    def __init__(self, endpoints: Dict[str, AgentEndpoint], mock: Optional[Transport] = None,
                 force_mock: bool = False, cache=None, backoff_ms: int = DEFAULT_BACKOFF_MS,
                 logger=None, http: Optional[Transport] = None, amqp: Optional[Transport] = None):
        tus.check(endpoints=(endpoints, dict), force_mock=(force_mock, bool), backoff_ms=(backoff_ms, int))
        self.endpoints = dict(endpoints)
        self.mock = mock
        self.force_mock = force_mock
        self.cache = cache
        self.backoff_ms = backoff_ms
        self.logger = logger if logger is not None else default_logger
        self.http = http if http is not None else HttpTransport()
        self.amqp = amqp if amqp is not None else AmqpTransport()
        self.calls = []
        self.dimensions = {}
        self.lock = threading.Lock()
        self.semaphores = {
            name: threading.BoundedSemaphore(endpoint.max_concurrency)
            for name, endpoint in self.endpoints.items()
        }

    def endpoint(self, name: str) -> AgentEndpoint:
        try:
            return self.endpoints[name]
        except KeyError:
            raise UnknownEndpoint(name)

    def has_endpoint(self, name: str) -> bool:
        return name in self.endpoints

    def transport_for(self, endpoint: AgentEndpoint) -> Transport:
        scheme = urlparse(endpoint.base_url).scheme
        if self.force_mock or scheme == 'mock':
            if self.mock is None:
                raise TransportError(endpoint.base_url, 'no mock script is loaded')
            return self.mock
        if scheme in ('http', 'https'):
            return self.http
        if scheme == 'amqp':
            return self.amqp
        raise TransportError(endpoint.base_url, f'unsupported scheme {scheme!r}')

    def call_log(self) -> List[GatewayCall]:
        with self.lock:
            return list(self.calls)

    def write_call_log(self, path: str):
        with open(path, 'w', encoding='utf-8') as outfile:
            for call in self.call_log():
                outfile.write(call.json())
                outfile.write('\n')

    def request(self, name: str, task: str, parts: Sequence[str], payload: dict):
        """Sends one request to the named endpoint and returns the response
        content. Transport failures and timeouts are retried up to the
        endpoint's `max_retries` with exponential backoff.

        Arguments:
        - `name (str)`: The endpoint name
        - `task (str)`: The task within the role, e.g. verify or draft
        - `parts (list[str])`: The request content that identifies it, hashed
          after the model name and task into the fingerprint
        - `payload (dict)`: The task specific request body
        """
        endpoint = self.endpoint(name)
        fprint = fingerprint(endpoint.model_name, task, *parts)
        req = make_request(endpoint, task, fprint, payload)
        transport = self.transport_for(endpoint)

        started = time.monotonic()
        attempts = 0
        outcome = 'ok'
        try:
            with self.semaphores[name]:
                while True:
                    attempts += 1
                    try:
                        return transport.send(endpoint, req)['content']
                    except (TransportError, GatewayTimeout) as exc:
                        if attempts > endpoint.max_retries:
                            raise
                        self.logger.trace(
                            'Retrying {} {} after attempt {} failed: {}', name, task, attempts, exc
                        )
                        if self.backoff_ms > 0:
                            time.sleep(self.backoff_ms * (2 ** (attempts - 1)) / 1000.0)
        except GatewayError as exc:
            outcome = type(exc).__name__
            raise
        finally:
            call = GatewayCall(
                endpoint=name, role=endpoint.role, task=task, request_hash=request_hash(req),
                latency_ms=(time.monotonic() - started) * 1000.0, attempts=attempts,
                outcome=outcome, fingerprint=fprint
            )
            with self.lock:
                self.calls.append(call)
            self.logger.trace(
                '{} {} fingerprint={} attempts={} outcome={}', name, task, fprint, attempts, outcome
            )

    def _text(self, name: str, content) -> str:
        if not isinstance(content, str):
            raise MalformedResponse(self.endpoint(name).base_url, 'expected text content')
        return content

    def call_verifier(self, question: BenchmarkQuestion, docs: Sequence[Document],
                      endpoint: str = 'verifier') -> VerifierOutput:
        """Asks the verifier whether the documents support citation grounded
        reasoning for the question.

        Raises:
        - `UnparseableVerdict`: If the response is not a verdict over these
          documents
        """
        tus.check(question=(question, BenchmarkQuestion))
        if not docs:
            raise ValueError('the verifier needs at least one document')
        raw = self._text(endpoint, self.request(
            endpoint, 'verify', [question.q_id, question.question],
            {'prompt': prompts.verifier_prompt(question, docs), 'doc_ids': [d.doc_id for d in docs]}
        ))
        return parse_verifier_output(raw, len(docs))

    def call_generator(self, question: BenchmarkQuestion, reasoning: Optional[CiteReason] = None,
                       endpoint: str = 'generator') -> str:
        """Asks the generator for an answer label, from validated reasoning or
        from its own knowledge when `reasoning` is None.

        Raises:
        - `NoLabelFound`: If the response names no option
        """
        tus.check(question=(question, BenchmarkQuestion))
        if reasoning is not None and not isinstance(reasoning, CiteReason):
            raise ValueError('the generator only accepts CiteReason reasoning')
        reasoning_text = render_verdict(reasoning) if reasoning is not None else ''
        raw = self._text(endpoint, self.request(
            endpoint, 'generate', [question.question, reasoning_text],
            {'prompt': prompts.generator_prompt(question, reasoning_text)}
        ))
        return extract_label(raw, list(question.options.keys()))

    def self_assess(self, question: BenchmarkQuestion, decoding: DecodingParams,
                    criteria: List[str], endpoint: str = 'assessor') -> str:
        """One round of self assessment under the given decoding parameters.
        Repeated rounds for a question share a fingerprint, so scripted
        sessions answer them in sequence. The fingerprint carries the q_id,
        so questions with equal stems keep separate sequences."""
        raw = self._text(endpoint, self.request(
            endpoint, 'self_assess', [question.q_id, question.question],
            {'prompt': prompts.self_assess_prompt(question, criteria), 'decoding': decoding.dict()}
        ))
        return extract_label(raw, list(question.options.keys()))

    def draft(self, question: BenchmarkQuestion, docs: Sequence[Document],
              endpoint: str) -> Tuple[Verdict, str]:
        """Drafts reasoning over the documents.

        Returns:
        - `(verdict, raw)`: The parsed draft and the response it came from
        """
        if not docs:
            raise ValueError('drafting needs at least one document')
        raw = self._text(endpoint, self.request(
            endpoint, 'draft', [question.question, ','.join(d.doc_id for d in docs)],
            {'prompt': prompts.drafter_prompt(question, docs), 'doc_ids': [d.doc_id for d in docs]}
        ))
        return parse_draft(raw, len(docs)), raw

    def call_nli(self, premise, hypothesis: str, endpoint: str = 'nli') -> NliLabel:
        """Judges whether the premise entails the hypothesis. The premise may
        be a document, a statement, or a list of either, which is
        concatenated in order.

        Raises:
        - `BadLabel`: If the judge answers anything but entail or not_entail
        """
        premise_text = prompts.premise_text(premise)
        if not premise_text.strip():
            raise ValueError('the NLI premise must be non-empty')
        content = self.request(
            endpoint, 'nli', [premise_text, hypothesis],
            {'prompt': prompts.nli_prompt(premise_text, hypothesis)}
        )
        return parse_nli_label(endpoint, content)

    def embed(self, text: str, endpoint: str = 'embedder') -> List[float]:
        """Embeds the text. Vectors are returned as the service produced them;
        normalizing is up to the caller.

        Raises:
        - `DimensionMismatch`: If the vector length differs from the
          endpoint's dimension, or from the first vector it returned
        """
        ep = self.endpoint(endpoint)
        if self.cache is not None:
            cached = self.cache.get(ep.model_name, text)
            if cached is not None:
                return cached

        content = self.request(endpoint, 'embed', [text], {'text': text})
        if not isinstance(content, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in content):
            raise MalformedResponse(ep.base_url, 'expected a list of numbers')
        vector = [float(x) for x in content]

        with self.lock:
            expected = ep.dimension if ep.dimension is not None else self.dimensions.get(endpoint)
            if expected is None:
                self.dimensions[endpoint] = len(vector)
                expected = len(vector)
        if len(vector) != expected:
            raise DimensionMismatch(endpoint, expected, len(vector))

        if self.cache is not None:
            self.cache.set(ep.model_name, text, vector)
        return vector

    def dense_search(self, query: str, top_n: int, endpoint: str) -> RankedList:
        """Queries a dense retriever. The result is truncated to `top_n` and
        carries the endpoint's model name as its retriever id."""
        ep = self.endpoint(endpoint)
        content = self.request(endpoint, 'dense_search', [query], {'query': query, 'top_n': top_n})
        try:
            entries = [(str(doc_id), float(score)) for doc_id, score in content]
            return RankedList(retriever_id=ep.model_name, entries=entries[:max(top_n, 0)])
        except (TypeError, ValueError, ValidationError) as exc:
            raise MalformedResponse(ep.base_url, f'bad ranked list: {exc}')

    def dense_client(self, endpoint: str):
        """A callable suitable for HybridRetriever.register_dense"""
        self.endpoint(endpoint)

        def search(query: str, top_n: int) -> RankedList:
            return self.dense_search(query, top_n, endpoint)
        return search

    def describe(self) -> Dict[str, str]:
        """Endpoint name to model name, for manifests and reports"""
        return {name: ep.model_name for name, ep in sorted(self.endpoints.items())}


