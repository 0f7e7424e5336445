"""Describes something which can take an anchor text followed by a series of
tokens and parse them out. Tokens may be optional and there may be fallbacks
within a single token.

This parser is always greedy; it will attempt to parse optional tokens before
moving on, and it will attempt to parse all fallbacks in order. When several
anchors are given, the earliest anchor occurrence whose tokens match wins,
which is what answer extraction relies on to find the *first* answer
pattern in a response.
"""
import pytypeutils as tus
import string
from parsing.tokens import Token


ASCII_LOWER = str.maketrans(string.ascii_uppercase, string.ascii_lowercase)
"""Lowercases ASCII letters only, so offsets in the lowered text line up
with the original text"""


class Parser:
    """A parser, which takes a collection of tokens and attempts to parse them
    in order.

    Attributes:
        anchors (tuple[str]): Plain-text anchors. Tokens are only looked for
            immediately after an occurrence of an anchor. May be specified as
            a single `str` in the constructor.
        tokens (list): A list of dicts with the keys:

            token (parsing.tokens.Token): The underlying parsable token.
            optional (bool): If true, a missing token yields None and parsing
                continues. Otherwise parsing of this anchor occurrence stops.
        ignore_case (bool): If true, anchors are located case-insensitively.
            Tokens still see the original text.
    """
    def __init__(self, anchors, tokens, ignore_case=False):
        if isinstance(anchors, str):
            anchors = (anchors,)

        tus.check(
            anchors=(anchors, (list, tuple)), tokens=(tokens, (list, tuple)),
            ignore_case=(ignore_case, bool)
        )
        tus.check_listlike(anchors=(anchors, str))
        if not anchors:
            raise ValueError('at least one anchor must be specified')
        for idx, token in enumerate(tokens):
            tus.check(**{f'tokens_{idx}': (token, dict)})
            tus.check(**{
                f'tokens_{idx}_token': (token['token'], Token),
                f'tokens_{idx}_optional': (token['optional'], bool)
            })
        self.anchors = tuple(a.translate(ASCII_LOWER) for a in anchors) if ignore_case else tuple(anchors)
        self.tokens = tokens
        self.ignore_case = ignore_case

    def parse(self, text):
        """Attempts to parse the given text according to the rules of this
        parser.

        Returns:
            (list, None): The value of each token in order, with omitted
                optional tokens assigned None, for the earliest anchor
                occurrence at which every required token matched. None if
                there is no such occurrence.
        """
        found = self.find(text)
        return None if found is None else found[1]

    def find(self, text):
        """Like parse, but also reports where the matching anchor occurrence
        starts.

        Returns:
            (tuple[int, list], None): The index of the anchor occurrence and
                the token values, or None
        """
        haystack = text.translate(ASCII_LOWER) if self.ignore_case else text
        start_index = -1
        while True:
            best_anchor = None
            best_start_index = None

            for anch in self.anchors:
                anchor_start_index = haystack.find(anch, start_index + 1)
                if anchor_start_index < 0:
                    continue

                if best_anchor is None or anchor_start_index < best_start_index:
                    best_anchor = anch
                    best_start_index = anchor_start_index

            if best_anchor is None:
                break

            start_index = best_start_index

            token_index = start_index + len(best_anchor)
            result = []
            for token in self.tokens:
                if token_index < len(text):
                    num_consumed, value = token['token'].consume(text, token_index)
                else:
                    num_consumed, value = (None, None)

                if num_consumed is None:
                    if not token['optional']:
                        break
                    result.append(None)
                else:
                    result.append(value)
                    token_index += num_consumed

            if len(result) == len(self.tokens):
                return start_index, result

        return None
