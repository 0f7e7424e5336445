"""A deterministic stand-in for every model service.

Responses are scripted per `(role, fingerprint)` as a sequence: the n-th call
with a given key gets the n-th response, and the last response repeats once
the sequence is exhausted. A script with the fingerprint `*` is the default
for its role; it is still advanced per fingerprint so that concurrent
questions never observe each other's calls.

A response entry of `{"error": "timeout"}` or `{"error": "transport"}`
simulates a failed call.
"""
from typing import Any, Dict, Iterable, List, Tuple
import copy
import json
import threading

from gateway.errors import GatewayTimeout, MockScriptMiss, TransportError
from gateway.transport import Transport


DEFAULT_FINGERPRINT = '*'


class ScriptedTransport(Transport):
    """Serves scripted responses.

    Attributes:
    - `scripts (dict[tuple[str, str], list])`: (role, fingerprint) to the
      response sequence
    - `positions (dict[tuple[str, str], int])`: How many calls each key has
      received
    """
    def __init__(self, scripts: Dict[Tuple[str, str], List[Any]] = None):
        self.scripts = {}
        self.positions = {}
        self.lock = threading.Lock()
        for (role, fprint), responses in (scripts or {}).items():
            self.add(role, fprint, responses)

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> 'ScriptedTransport':
        result = cls()
        for record in records:
            result.add(record['role'], record['fingerprint'], record['responses'])
        return result

    @classmethod
    def from_file(cls, path: str) -> 'ScriptedTransport':
        """Loads a line delimited script of `{role, fingerprint, responses}`
        records. Later records for the same key replace earlier ones."""
        records = []
        with open(path, 'r', encoding='utf-8') as infile:
            for line in infile:
                if line.strip():
                    records.append(json.loads(line))
        return cls.from_records(records)

    def add(self, role: str, fprint: str, responses: List[Any]):
        if not isinstance(responses, list) or not responses:
            raise ValueError(f'script for {role}/{fprint} needs at least one response')
        with self.lock:
            self.scripts[(role, fprint)] = list(responses)

    def records(self) -> List[dict]:
        return [
            {'role': role, 'fingerprint': fprint, 'responses': responses}
            for (role, fprint), responses in sorted(self.scripts.items())
        ]

    def write(self, path: str):
        with open(path, 'w', encoding='utf-8') as outfile:
            for record in self.records():
                outfile.write(json.dumps(record, sort_keys=True))
                outfile.write('\n')

    def reset(self):
        """Rewinds every sequence, so a session can be replayed"""
        with self.lock:
            self.positions = {}

    def calls_for(self, role: str, fprint: str) -> int:
        with self.lock:
            return self.positions.get((role, fprint), 0)

    def send(self, endpoint, request):
        role = request['role']
        fprint = request['payload']['fingerprint']
        key = (role, fprint)

        with self.lock:
            script = self.scripts.get(key)
            if script is None:
                script = self.scripts.get((role, DEFAULT_FINGERPRINT))
            if script is None:
                raise MockScriptMiss(endpoint.base_url, role, fprint)
            position = self.positions.get(key, 0)
            self.positions[key] = position + 1
            entry = script[min(position, len(script) - 1)]

        if isinstance(entry, dict) and 'error' in entry:
            if entry['error'] == 'timeout':
                raise GatewayTimeout(endpoint.base_url, endpoint.timeout_ms)
            raise TransportError(endpoint.base_url, f'scripted {entry["error"]} failure')

        return {'ok': True, 'content': copy.deepcopy(entry)}
