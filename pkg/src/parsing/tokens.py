"""Describes the general token framework, which is the token interface
and delegating implementations like the FallbackToken and RepeatedToken
"""
from typing import Any, Callable, Optional, Sequence, Tuple
import pytypeutils as tus
import re


Consumed = Tuple[Optional[int], Any]
"""(number of characters consumed or None on failure, value of the token)"""


class Token:
    """The base interface for all parsing tokens. A token encapsulates the
    ability to take a string and an offset and return how many characters
    were consumed and the parsed value of the token.
    """
    def consume(self, text: str, offset: int) -> Consumed:
        """Attempt to consume this token starting at the given offset within
        the specified text.

        Args:
            text (str): The complete text that is being parsed
            offset (int): Where this token should start its search from
        Returns:
            ((int, None), Any): If the consumption was successful, the first
                result is the number of characters consumed and the second
                result is the value of the token. Otherwise, this returns
                None, None.
        """
        raise NotImplementedError


class FallbackToken(Token):
    """Attempts the children in order, succeeding with the first child that
    succeeds.

    Attributes:
        children (list): The children in the order they should be attempted.
    """
    def __init__(self, children: Sequence[Token]):
        tus.check(children=(children, (tuple, list)))
        tus.check_listlike(children=(children, Token))
        self.children = children

    def consume(self, text, offset):
        for child in self.children:
            num_consumed, val = child.consume(text, offset)
            if num_consumed is not None:
                return (num_consumed, val)
        return None, None


class RegexToken(Token):
    """Matches a regex anchored at the offset and takes the value of a
    capture group. The regex MUST start with \\A.

    Attributes:
        pattern (re.Pattern): The compiled expression
        capture (int, None): The capture group to take as the value, or None
            to use the match object.
    """
    def __init__(self, regex: str, capture: Optional[int], flags: int = 0):
        tus.check(regex=(regex, str), capture=(capture, (int, type(None))), flags=(flags, int))
        if not regex.startswith(r'\A'):
            raise ValueError(f'regex tokens must be anchored with \\A: {regex}')
        self.pattern = re.compile(regex, flags)
        self.capture = capture

    def consume(self, text, offset):
        match = self.pattern.search(text[offset:])
        if match is None:
            return None, None
        return len(match.group()), (match if self.capture is None else match.group(self.capture))


class TransformedToken(Token):
    """Takes the value of the inner token and maps it through a transform. If
    the inner token fails, or the transform returns None, this fails.

    Attributes:
        child (Token): The main token
        transform (callable): Applied to the value of the inner token
    """
    def __init__(self, child: Token, transform: Callable[[Any], Any]):
        tus.check(child=(child, Token))
        tus.check_callable(transform=transform)
        self.child = child
        self.transform = transform

    def consume(self, text, offset):
        consumed, val = self.child.consume(text, offset)
        if consumed is None:
            return None, None
        new_val = self.transform(val)
        if new_val is None:
            return None, None
        return consumed, new_val


class RepeatedToken(Token):
    """Consumes the child as many times in a row as possible. Fails unless the
    child matches at least `minimum` times. The value is the list of child
    values in order.

    Attributes:
        child (Token): The repeated token
        minimum (int): The fewest repetitions for a successful match
    """
    def __init__(self, child: Token, minimum: int = 1):
        tus.check(child=(child, Token), minimum=(minimum, int))
        self.child = child
        self.minimum = minimum

    def consume(self, text, offset):
        values = []
        total = 0
        while offset + total < len(text):
            consumed, val = self.child.consume(text, offset + total)
            if consumed is None or consumed == 0:
                break
            values.append(val)
            total += consumed

        if len(values) < self.minimum:
            return None, None
        return total, values
