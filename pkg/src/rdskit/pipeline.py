"""Record-level scoring and report assembly.

Turns validated PromptRecords into score rows (the JSONL the CLI writes) and
aggregates labeled scores into hallucination-detection and best-of-N reports.
All functions are pure given their inputs; records are independent, so
callers may parallelize per record and reduce afterwards.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from . import baselines, dispersion
from .dataio import PromptRecord
from .errors import EmptyGeneration, InvalidLikelihood, RdskitError
from .evaluation import EvalReport, auroc, best_of_n_select, label_correct

# Stable method-name join keys for reports.
PROMPT_METHODS = ("rds", "rds_l2", "rds_w", "eigen_embed", "anll", "nll", "sc")
SAMPLE_METHODS = ("rds_s", "rds_w_s", "anll", "nll", "sc")

_SCORE_FIELD = {
    "rds": "rds",
    "rds_l2": "rds_l2",
    "rds_w": "rds_w",
    "eigen_embed": "eigen_embed",
    "anll": "anll",
    "nll": "nll",
    "sc": "self_consistency",
}


class MissingEmbeddings(RdskitError):
    """A record needs embeddings but none are stored and no encoder is configured."""


def extraction_mode_for(record: PromptRecord) -> str:
    # math-style datasets vote on the final number; QA votes on normalized text
    return "last_number" if record.correctness_mode == "exact_match" else "normalized_full"


def sample_vectors(
    record: PromptRecord, embed_lookup: Callable[[str], np.ndarray] | None = None
) -> np.ndarray:
    """Stack the record's sample embeddings, filling gaps via `embed_lookup`."""
    rows = []
    for i, s in enumerate(record.samples):
        if s.embedding is not None:
            rows.append(np.asarray(s.embedding, dtype=np.float64))
        elif embed_lookup is not None:
            rows.append(np.asarray(embed_lookup(s.text), dtype=np.float64))
        else:
            raise MissingEmbeddings(
                f"record {record.id!r}: sample {i} has no embedding and no encoder is configured"
            )
    return np.vstack(rows)


def sample_weights(record: PromptRecord) -> dispersion.ProbabilityWeights | None:
    """ANLL-derived normalized likelihoods, or None when any sample lacks log-probs."""
    anlls = []
    for s in record.samples:
        if not s.token_logprobs:
            return None
        try:
            anlls.append(baselines.anll(s.token_logprobs))
        except (EmptyGeneration, InvalidLikelihood):
            return None
    return dispersion.probs_from_anll(anlls)


def score_record(
    record: PromptRecord, embed_lookup: Callable[[str], np.ndarray] | None = None
) -> dict:
    """All scores for one record as a JSON-ready row.

    Fields that cannot be computed (no token log-probs -> no weighted scores,
    no greedy log-probs -> no anll/nll) are null rather than dropped, so the
    output schema is stable.
    """
    es = dispersion.EmbeddingSet.from_vectors(sample_vectors(record, embed_lookup))
    weights = sample_weights(record)
    scores = dispersion.score_set(es, weights)

    row: dict = {"id": record.id}
    row["rds"] = scores.rds
    row["rds_l2"] = scores.rds_l2
    row["rds_w"] = scores.rds_w
    row["eigen_embed"] = scores.eigen_embed
    row["per_sample"] = [float(x) for x in scores.per_sample]
    row["per_sample_w"] = (
        None if scores.per_sample_w is None else [float(x) for x in scores.per_sample_w]
    )

    greedy_lp = record.greedy.token_logprobs
    if greedy_lp:
        try:
            row["anll"] = baselines.anll(greedy_lp)
            row["nll"] = baselines.nll(greedy_lp)
        except (EmptyGeneration, InvalidLikelihood):
            row["anll"] = None
            row["nll"] = None
    else:
        row["anll"] = None
        row["nll"] = None

    mode = extraction_mode_for(record)
    answers = [baselines.extract_answer(s.text, mode) for s in record.samples]
    row["self_consistency"] = baselines.self_consistency(answers)
    return row


def label_greedy(
    record: PromptRecord,
    *,
    mode_override: str | None = None,
    rouge_threshold: float = 0.3,
    inclusive: bool = False,
) -> bool:
    """Correctness of the greedy generation against the record's references."""
    mode = mode_override or record.correctness_mode
    return label_correct(
        record.greedy.text,
        record.references,
        mode,
        threshold=rouge_threshold,
        extraction=extraction_mode_for(record),
        inclusive=inclusive,
    )


def label_samples(
    record: PromptRecord,
    *,
    mode_override: str | None = None,
    rouge_threshold: float = 0.3,
    inclusive: bool = False,
) -> list[bool]:
    mode = mode_override or record.correctness_mode
    extraction = extraction_mode_for(record)
    return [
        label_correct(
            s.text,
            record.references,
            mode,
            threshold=rouge_threshold,
            extraction=extraction,
            inclusive=inclusive,
        )
        for s in record.samples
    ]


def per_sample_scores(record: PromptRecord, method: str, row: dict | None = None) -> list[float] | None:
    """Per-sample uncertainty scores for one best-of-N method, or None if
    the record lacks the inputs the method needs."""
    if method == "rds_s":
        if row is not None and row.get("per_sample") is not None:
            return list(row["per_sample"])
        return None
    if method == "rds_w_s":
        if row is not None and row.get("per_sample_w") is not None:
            return list(row["per_sample_w"])
        return None
    if method in ("anll", "nll"):
        fn = baselines.anll if method == "anll" else baselines.nll
        out = []
        for s in record.samples:
            if not s.token_logprobs:
                return None
            try:
                out.append(fn(s.token_logprobs))
            except (EmptyGeneration, InvalidLikelihood):
                return None
        return out
    if method == "sc":
        mode = extraction_mode_for(record)
        answers = [baselines.extract_answer(s.text, mode) for s in record.samples]
        return baselines.self_consistency_per_sample(answers)
    raise ValueError(f"unknown per-sample method {method!r}")


def build_detection_report(
    records: Sequence[PromptRecord],
    rows_by_id: dict[str, dict],
    methods: Iterable[str] = PROMPT_METHODS,
    *,
    mode_override: str | None = None,
    rouge_threshold: float = 0.3,
    inclusive: bool = False,
) -> EvalReport:
    """AUROC of each method's uncertainty against greedy correctness."""
    methods = list(methods)
    for m in methods:
        if m not in _SCORE_FIELD:
            raise ValueError(f"unknown method {m!r}; expected one of {PROMPT_METHODS}")
    labeled: dict[str, list[tuple[float, bool]]] = {m: [] for m in methods}
    by_tag: dict[str, dict[str, list[tuple[float, bool]]]] = {}
    per_prompt = []
    n_prompts = 0
    n_correct = 0
    for rec in records:
        row = rows_by_id.get(rec.id)
        if row is None:
            continue
        correct = label_greedy(
            rec,
            mode_override=mode_override,
            rouge_threshold=rouge_threshold,
            inclusive=inclusive,
        )
        n_prompts += 1
        n_correct += correct
        tag_bucket = by_tag.setdefault(rec.dataset_tag, {m: [] for m in methods})
        prow = {"id": rec.id, "dataset_tag": rec.dataset_tag, "correct": correct}
        for m in methods:
            value = row.get(_SCORE_FIELD[m])
            prow[m] = value
            if value is not None:
                labeled[m].append((float(value), correct))
                tag_bucket[m].append((float(value), correct))
        per_prompt.append(prow)
    return EvalReport(
        n_prompts=n_prompts,
        n_correct=n_correct,
        auroc_by_method={m: auroc(labeled[m]) for m in methods},
        method_n={m: len(labeled[m]) for m in methods},
        by_dataset={
            tag: {m: auroc(bucket[m]) for m in methods} for tag, bucket in by_tag.items()
        },
        by_dataset_n={
            tag: {m: len(bucket[m]) for m in methods} for tag, bucket in by_tag.items()
        },
        per_prompt_rows=per_prompt,
    )


def build_best_of_n_report(
    records: Sequence[PromptRecord],
    rows_by_id: dict[str, dict],
    methods: Iterable[str] = SAMPLE_METHODS,
    *,
    mode_override: str | None = None,
    rouge_threshold: float = 0.3,
    inclusive: bool = False,
) -> EvalReport:
    """Selection accuracy of each per-sample method against reference labels."""
    methods = list(methods)
    for m in methods:
        if m not in SAMPLE_METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {SAMPLE_METHODS}")
    hits: dict[str, int] = {m: 0 for m in methods}
    counts: dict[str, int] = {m: 0 for m in methods}
    by_tag_hits: dict[str, dict[str, int]] = {}
    by_tag_counts: dict[str, dict[str, int]] = {}
    per_prompt = []
    n_prompts = 0
    n_correct = 0
    for rec in records:
        flags = label_samples(
            rec,
            mode_override=mode_override,
            rouge_threshold=rouge_threshold,
            inclusive=inclusive,
        )
        n_prompts += 1
        n_correct += any(flags)
        row = rows_by_id.get(rec.id)
        tag_h = by_tag_hits.setdefault(rec.dataset_tag, {m: 0 for m in methods})
        tag_c = by_tag_counts.setdefault(rec.dataset_tag, {m: 0 for m in methods})
        prow = {"id": rec.id, "dataset_tag": rec.dataset_tag, "any_correct": any(flags)}
        for m in methods:
            scores = per_sample_scores(rec, m, row)
            if scores is None or len(scores) != len(flags):
                prow[m] = None
                continue
            picked = best_of_n_select(scores)
            hit = bool(flags[picked])
            prow[m] = {"picked": picked, "correct": hit}
            hits[m] += hit
            counts[m] += 1
            tag_h[m] += hit
            tag_c[m] += 1
        per_prompt.append(prow)

    def acc(h: int, c: int) -> float | None:
        return None if c == 0 else h / c

    return EvalReport(
        n_prompts=n_prompts,
        n_correct=n_correct,
        best_of_n_accuracy_by_method={m: acc(hits[m], counts[m]) for m in methods},
        method_n={m: counts[m] for m in methods},
        by_dataset={
            tag: {m: acc(by_tag_hits[tag][m], by_tag_counts[tag][m]) for m in methods}
            for tag in by_tag_hits
        },
        by_dataset_n=by_tag_counts,
        per_prompt_rows=per_prompt,
    )
