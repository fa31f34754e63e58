"""Deterministic text normalization shared by answer extraction and ROUGE-L."""

import string

_PUNCT_TO_SPACE = str.maketrans({c: " " for c in string.punctuation})


def normalize_text(text: str) -> str:
    """Lowercase, replace punctuation with spaces, collapse whitespace.

    Idempotent: normalize_text(normalize_text(x)) == normalize_text(x).
    """
    return " ".join(text.lower().translate(_PUNCT_TO_SPACE).split())


def tokenize(text: str) -> list[str]:
    """Whitespace tokens of the normalized text."""
    return normalize_text(text).split()
