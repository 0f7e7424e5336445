"""The wire protocol shared by every model service and the transports which
carry it. A request is a flat object `{role, task, payload}` and a response
is `{ok, content}`.
"""
from typing import Any, Dict
from urllib.parse import urlparse
import hashlib
import json
import time
import uuid

import pika
import pika.exceptions
import requests

from gateway.errors import GatewayTimeout, MalformedResponse, TransportError
from gateway.models import AgentEndpoint


FINGERPRINT_SEPARATOR = '\x1f'
FINGERPRINT_LENGTH = 16


def fingerprint(*parts: str) -> str:
    """A short stable digest of the given strings, used to key scripted
    responses. Callers pass the model name and task first."""
    joined = FINGERPRINT_SEPARATOR.join(parts)
    return hashlib.sha256(joined.encode('utf-8')).hexdigest()[:FINGERPRINT_LENGTH]


def request_hash(request: dict) -> str:
    """Digest of the complete request envelope, for the call log"""
    encoded = json.dumps(request, sort_keys=True, separators=(',', ':')).encode('utf-8')
    return hashlib.sha256(encoded).hexdigest()[:FINGERPRINT_LENGTH]


def make_request(endpoint: AgentEndpoint, task: str, fprint: str, payload: Dict[str, Any]) -> dict:
    body = dict(payload)
    body['model'] = endpoint.model_name
    body['fingerprint'] = fprint
    return {'role': endpoint.role, 'task': task, 'payload': body}


def check_response(endpoint: AgentEndpoint, response) -> dict:
    """Verifies the response envelope and returns it.

    Raises:
    - `MalformedResponse`: If it is not `{ok, content}`
    - `TransportError`: If the service reported a failure
    """
    if not isinstance(response, dict) or 'ok' not in response:
        raise MalformedResponse(endpoint.base_url, 'expected an object with ok and content')
    if not response['ok']:
        raise TransportError(endpoint.base_url, str(response.get('content', 'service reported failure')))
    if 'content' not in response:
        raise MalformedResponse(endpoint.base_url, 'missing content')
    return response


class Transport:
    """Delivers one request to an endpoint and returns the response envelope.
    Implementations must be safe to share between threads."""
    def send(self, endpoint: AgentEndpoint, request: dict) -> dict:
        raise NotImplementedError


class HttpTransport(Transport):
    """One JSON POST per call to the endpoint's base url"""
    def __init__(self, session=None):
        self.session = session

    def send(self, endpoint, request):
        poster = self.session if self.session is not None else requests
        try:
            resp = poster.post(endpoint.base_url, json=request, timeout=endpoint.timeout_ms / 1000.0)
        except requests.Timeout:
            raise GatewayTimeout(endpoint.base_url, endpoint.timeout_ms)
        except requests.RequestException as exc:
            raise TransportError(endpoint.base_url, str(exc))

        if resp.status_code != 200:
            raise TransportError(endpoint.base_url, f'status {resp.status_code}')

        try:
            body = resp.json()
        except ValueError:
            raise MalformedResponse(endpoint.base_url, 'body is not json')
        return check_response(endpoint, body)


class AmqpTransport(Transport):
    """Publishes the request to the queue named by an `amqp://host:port/queue`
    url and waits for the response with the same uuid on a private response
    queue. Each call uses its own connection since pika connections may not
    be shared between threads.
    """
    def send(self, endpoint, request):
        parsed = urlparse(endpoint.base_url)
        request_queue = parsed.path.lstrip('/')
        if not parsed.hostname or not request_queue:
            raise TransportError(endpoint.base_url, 'amqp urls must name a host and a queue')

        timeout_s = endpoint.timeout_ms / 1000.0
        try:
            connection = pika.BlockingConnection(
                pika.ConnectionParameters(
                    host=parsed.hostname, port=parsed.port or 5672,
                    blocked_connection_timeout=timeout_s
                )
            )
        except pika.exceptions.AMQPError as exc:
            raise TransportError(endpoint.base_url, str(exc))

        try:
            channel = connection.channel()
            channel.queue_declare(request_queue)
            response_queue = channel.queue_declare('', exclusive=True).method.queue
            msg_uuid = str(uuid.uuid4())
            channel.basic_publish(
                '',
                request_queue,
                json.dumps({
                    'uuid': msg_uuid,
                    'response_queue': response_queue,
                    'sent_at': time.time(),
                    'request': request
                })
            )

            deadline = time.monotonic() + timeout_s
            for method_frame, _, body_bytes in channel.consume(response_queue, inactivity_timeout=timeout_s):
                if method_frame is None or time.monotonic() > deadline:
                    raise GatewayTimeout(endpoint.base_url, endpoint.timeout_ms)

                try:
                    body = json.loads(body_bytes.decode('utf-8'))
                except ValueError:
                    channel.basic_nack(method_frame.delivery_tag, requeue=False)
                    raise MalformedResponse(endpoint.base_url, 'body is not json')

                if body.get('uuid') != msg_uuid:
                    channel.basic_nack(method_frame.delivery_tag, requeue=False)
                    continue

                channel.basic_ack(method_frame.delivery_tag)
                channel.cancel()
                return check_response(endpoint, body.get('response'))
        except pika.exceptions.AMQPError as exc:
            raise TransportError(endpoint.base_url, str(exc))
        finally:
            try:
                connection.close()
            except pika.exceptions.AMQPError:
                pass

        raise GatewayTimeout(endpoint.base_url, endpoint.timeout_ms)
