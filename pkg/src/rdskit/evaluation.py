"""Correctness labeling, hallucination-detection AUROC, and best-of-N accuracy.

Class convention for AUROC: the "positive" class is the incorrect
(hallucinated) generation, so a perfect uncertainty score ranks every
incorrect generation above every correct one and scores 1.0. Ties get the
standard Mann-Whitney 0.5 credit. Single-class inputs yield None, never a
silent 0 or 0.5.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .baselines import EXTERNAL_BASELINES, extract_answer
from .textnorm import tokenize


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # Two-row dynamic program; full tables are never needed.
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_f1(candidate: str, reference: str) -> float:
    """LCS-based ROUGE-L F1 over normalized whitespace tokens."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    p = lcs / len(cand)
    r = lcs / len(ref)
    return 2 * p * r / (p + r)


def label_correct(
    candidate: str,
    references: Sequence[str],
    mode: str = "exact_match",
    *,
    threshold: float = 0.3,
    extraction: str = "last_number",
    inclusive: bool = False,
) -> bool:
    """Judge a generation against reference answers.

    exact_match compares answers extracted from both sides (mode set by
    `extraction`); rouge_gate takes the max ROUGE-L F1 over references and
    compares against `threshold` (strictly greater unless `inclusive`).
    """
    if not references:
        raise ValueError("need at least one reference")
    if mode == "exact_match":
        cand = extract_answer(candidate, extraction)
        if not cand.answerable:
            return False
        return any(extract_answer(r, extraction).bucket == cand.bucket for r in references)
    if mode == "rouge_gate":
        best = max(rouge_l_f1(candidate, r) for r in references)
        return best >= threshold if inclusive else best > threshold
    raise ValueError(f"unknown correctness mode {mode!r}")


@dataclass(frozen=True)
class LabeledScore:
    uncertainty: float
    correct: bool


def _average_ranks(values: np.ndarray) -> np.ndarray:
    # 1-based ranks with ties sharing the average of their positions.
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts
    avg = starts + (counts + 1) / 2.0
    return avg[inverse]


def auroc(items: Iterable[LabeledScore | tuple[float, bool]]) -> float | None:
    """Probability that a random incorrect item outranks a random correct one.

    Mann-Whitney form via average ranks; returns None when either class is
    empty (the caller must surface the sentinel, not replace it).
    """
    scores = []
    labels = []
    for it in items:
        if isinstance(it, LabeledScore):
            scores.append(it.uncertainty)
            labels.append(it.correct)
        else:
            scores.append(float(it[0]))
            labels.append(bool(it[1]))
    if not scores:
        return None
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("uncertainty scores must be finite")
    y = np.asarray(labels, dtype=bool)
    pos = ~y  # incorrect generations are the positives
    n_pos = int(pos.sum())
    n_neg = int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def best_of_n_select(scores: Sequence[float]) -> int:
    """Index of the minimum score; ties break to the lowest index."""
    if len(scores) == 0:
        raise ValueError("cannot select from an empty score list")
    arr = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("per-sample scores must be finite")
    return int(np.argmin(arr))


def best_of_n_accuracy(records: Sequence[tuple[Sequence[float], Sequence[bool]]]) -> float | None:
    """Fraction of records whose selected (min-score) sample is correct."""
    if len(records) == 0:
        return None
    hits = 0
    for scores, correct in records:
        if len(scores) != len(correct):
            raise ValueError("scores and correctness flags differ in length")
        hits += bool(correct[best_of_n_select(scores)])
    return hits / len(records)


@dataclass
class EvalReport:
    """AUROC / best-of-N tables plus per-prompt diagnostics."""

    n_prompts: int
    n_correct: int
    auroc_by_method: dict[str, float | None] = field(default_factory=dict)
    best_of_n_accuracy_by_method: dict[str, float | None] = field(default_factory=dict)
    method_n: dict[str, int] = field(default_factory=dict)
    by_dataset: dict[str, dict[str, float | None]] = field(default_factory=dict)
    by_dataset_n: dict[str, dict[str, int]] = field(default_factory=dict)
    per_prompt_rows: list[dict] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "n_prompts": self.n_prompts,
            "n_correct": self.n_correct,
            "auroc_by_method": dict(self.auroc_by_method),
            "best_of_n_accuracy_by_method": dict(self.best_of_n_accuracy_by_method),
            "method_n": dict(self.method_n),
            "by_dataset": {k: dict(v) for k, v in self.by_dataset.items()},
            # reserved join keys for scores computed outside this toolkit
            "external_baselines": {name: None for name in EXTERNAL_BASELINES},
            "per_prompt_rows": list(self.per_prompt_rows),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        """Flat table: method,metric,value,n; dataset slices as metric@tag."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "metric", "value", "n"])

        def fmt(v: float | None) -> str:
            return "NA" if v is None else repr(v)

        for method, value in self.auroc_by_method.items():
            w.writerow([method, "auroc", fmt(value), self.method_n.get(method, self.n_prompts)])
        for method, value in self.best_of_n_accuracy_by_method.items():
            w.writerow(
                [method, "best_of_n_accuracy", fmt(value), self.method_n.get(method, self.n_prompts)]
            )
        for tag in sorted(self.by_dataset):
            per_method = self.by_dataset[tag]
            ns = self.by_dataset_n.get(tag, {})
            metric = "best_of_n_accuracy" if self.best_of_n_accuracy_by_method else "auroc"
            for method, value in per_method.items():
                w.writerow([method, f"{metric}@{tag}", fmt(value), ns.get(method, "")])
        return buf.getvalue()
