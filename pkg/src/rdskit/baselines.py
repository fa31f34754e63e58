"""Probability- and consistency-based baselines: NLL, ANLL, self-consistency.

NLL/ANLL score a single generation from its token log-probabilities;
self-consistency scores a prompt from the agreement of extracted answers
across sampled generations.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyGeneration, InvalidLikelihood
from .textnorm import normalize_text

# Token log-probs are non-positive up to float rounding.
LOGPROB_SLACK = 1e-9

_NUMBER_RE = re.compile(r"[-+]?(?:\d[\d,]*(?:\.\d+)?|\.\d+)")


def _validate_logprobs(values: Sequence[float]) -> list[float]:
    vals = [float(v) for v in values]
    if len(vals) == 0:
        raise EmptyGeneration("generation has no tokens")
    for v in vals:
        if not math.isfinite(v):
            raise InvalidLikelihood(f"non-finite token log-probability {v!r}")
        if v > LOGPROB_SLACK:
            raise InvalidLikelihood(f"positive token log-probability {v!r}")
    return vals


def nll(token_logprobs: Sequence[float]) -> float:
    """Negative log-likelihood: minus the sum of token log-probs."""
    return -sum(_validate_logprobs(token_logprobs))


def anll(token_logprobs: Sequence[float]) -> float:
    """Average negative log-likelihood: minus the mean token log-prob."""
    vals = _validate_logprobs(token_logprobs)
    return -sum(vals) / len(vals)


@dataclass(frozen=True)
class ExtractedAnswer:
    """A canonicalized answer string extracted from a generation.

    Unanswerable generations keep an empty canonical form and vote in their
    own bucket rather than being dropped (dropping would change N and
    silently inflate consistency).
    """

    canonical: str
    kind: str  # "numeric" | "text"
    answerable: bool = True

    @property
    def bucket(self) -> tuple[bool, str]:
        return (self.answerable, self.canonical if self.answerable else "")


def _canonical_number(token: str) -> str:
    s = token.replace(",", "").lstrip("+")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    if s.startswith("."):
        s = "0" + s
    elif s.startswith("-."):
        s = "-0" + s[1:]
    if s in ("", "-", "-0"):
        s = "0"
    return s


def extract_answer(text: str, mode: str = "last_number", pattern: str | None = None) -> ExtractedAnswer:
    """Pull a votable answer out of generated text.

    Modes:
      last_number     - final numeric token, canonicalized (commas stripped,
                        trailing zeros after the decimal point dropped,
                        leading '+' removed);
      normalized_full - the whole text lowercased, punctuation stripped,
                        whitespace collapsed;
      regex           - first capture group of the first match of `pattern`.

    A text with no extractable answer is flagged unanswerable.
    """
    if mode == "last_number":
        matches = _NUMBER_RE.findall(text)
        if not matches:
            return ExtractedAnswer("", "numeric", answerable=False)
        return ExtractedAnswer(_canonical_number(matches[-1]), "numeric")
    if mode == "normalized_full":
        norm = normalize_text(text)
        if not norm:
            return ExtractedAnswer("", "text", answerable=False)
        return ExtractedAnswer(norm, "text")
    if mode == "regex":
        if pattern is None:
            raise ValueError("regex mode requires a pattern")
        m = re.search(pattern, text)
        if m is None or m.lastindex is None:
            return ExtractedAnswer("", "text", answerable=False)
        return ExtractedAnswer(m.group(1).strip(), "text")
    raise ValueError(f"unknown extraction mode {mode!r}")


def _buckets(answers: Iterable[ExtractedAnswer | str]) -> Counter:
    keys = []
    for a in answers:
        if isinstance(a, ExtractedAnswer):
            keys.append(a.bucket)
        else:
            keys.append((True, str(a)))
    return Counter(keys)


def self_consistency(answers: Sequence[ExtractedAnswer | str]) -> float:
    """Uncertainty as 1 - (majority answer count) / N."""
    if len(answers) == 0:
        raise ValueError("self_consistency needs at least one answer")
    counts = _buckets(answers)
    return 1.0 - max(counts.values()) / len(answers)


def self_consistency_per_sample(answers: Sequence[ExtractedAnswer | str]) -> list[float]:
    """Per-sample uncertainty: 1 - (own answer-bucket count) / N.

    Majority-answer samples tie at the minimum; selection tie-breaks are the
    caller's concern.
    """
    if len(answers) == 0:
        raise ValueError("self_consistency_per_sample needs at least one answer")
    counts = _buckets(answers)
    n = len(answers)
    scores = []
    for a in answers:
        key = a.bucket if isinstance(a, ExtractedAnswer) else (True, str(a))
        scores.append(1.0 - counts[key] / n)
    return scores


# Baselines defined elsewhere that reports keep join keys for but never compute.
EXTERNAL_BASELINES = ("pro", "se", "deg", "sd", "es", "ce")
