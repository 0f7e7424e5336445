"""The tokenizer shared by the sparse index and the corpus statistics."""
import re

TOKEN_SPLIT_REGEX = re.compile(r'[\W_]+')
"""Any run of characters which are not alphanumeric (underscore included)
separates tokens. Text is lowercased before splitting."""


def tokenize(text: str) -> list:
    """Lowercases the given text and splits it on every non-alphanumeric run,
    dropping empty tokens.

    Example: `'Heart Failure, acute!'` -> `['heart', 'failure', 'acute']`

    Arguments:
    - `text (str)`: The text to split

    Returns:
    - `tokens (list[str])`: The tokens in the order they appear
    """
    return [tok for tok in TOKEN_SPLIT_REGEX.split(text.lower()) if tok]
