"""Errors which may cross the model gateway boundary. Nothing else does."""


class GatewayError(Exception):
    pass


class UnknownEndpoint(GatewayError):
    def __init__(self, name: str):
        super().__init__(f'no endpoint named {name} is configured')
        self.name = name


class TransportError(GatewayError):
    def __init__(self, endpoint: str, reason: str):
        super().__init__(f'transport failure talking to {endpoint}: {reason}')
        self.endpoint = endpoint
        self.reason = reason


class GatewayTimeout(GatewayError):
    def __init__(self, endpoint: str, timeout_ms: int):
        super().__init__(f'{endpoint} did not respond within {timeout_ms}ms')
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms


class MockScriptMiss(TransportError):
    def __init__(self, endpoint: str, role: str, fingerprint: str):
        super().__init__(endpoint, f'no scripted response for role={role} fingerprint={fingerprint}')
        self.role = role
        self.fingerprint = fingerprint


class UnparseableVerdict(GatewayError):
    def __init__(self, raw: str, reason: str):
        super().__init__(f'unparseable verdict ({reason}): {raw[:120]!r}')
        self.raw = raw
        self.reason = reason


class NoLabelFound(GatewayError):
    def __init__(self, raw: str):
        super().__init__(f'no option label in response: {raw[:120]!r}')
        self.raw = raw


class BadLabel(GatewayError):
    def __init__(self, raw):
        super().__init__(f'expected entail or not_entail, got {raw!r}')
        self.raw = raw


class DimensionMismatch(GatewayError):
    def __init__(self, endpoint: str, expected: int, got: int):
        super().__init__(f'{endpoint} returned a {got} dimensional vector, expected {expected}')
        self.endpoint = endpoint
        self.expected = expected
        self.got = got


class MalformedResponse(GatewayError):
    def __init__(self, endpoint: str, reason: str):
        super().__init__(f'malformed response from {endpoint}: {reason}')
        self.endpoint = endpoint
        self.reason = reason
