#!/usr/bin/env python3
"""Regenerate the bundled JSONL fixtures under tests/data/.

Three bundles:

* e2e_separable.jsonl - 10 records; the 5 with wrong greedy answers carry
  opposing-cluster sample embeddings, the 5 correct ones carry coherent
  embeddings, so every dispersion method separates the classes perfectly.
* e2e_inversion.jsonl - same construction, but one coherent-embedding record
  is labeled wrong on purpose; detection AUROC must then equal whatever the
  pair-counting oracle predicts from the actual scores.
* bestofn_hand.jsonl - 8 records with 3 samples each whose embeddings,
  log-probs, and answers were chosen so every selection method's pick and
  accuracy can be verified by hand (the expected pick table lives in the
  acceptance test).
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from rdskit.dataio import GenerationSample, PromptRecord, write_records
from rdskit.simulate import RegimeConfig, generate

DATA_DIR = Path(__file__).resolve().parents[1] / "tests" / "data"


def _sample(text, logprobs=None, embedding=None):
    return GenerationSample(text=text, token_logprobs=logprobs, embedding=embedding)


def _e2e_record(idx: int, correct: bool, inverted: bool = False) -> PromptRecord:
    regime = "coherent" if (correct or inverted) else "opposing"
    cfg = RegimeConfig(
        regime=regime,
        n=10,
        dim=4,
        noise=0.02 if regime == "coherent" else 0.01,
        clusters=2,
        seed=100 + idx,
    )
    vectors = generate(cfg).vectors
    samples = [
        _sample(
            f"Result: {j % 3 + 1}",
            logprobs=[-0.1 * (j % 3 + 1), -0.2],
            embedding=[float(x) for x in vectors[j]],
        )
        for j in range(10)
    ]
    answer = "42" if correct else "17"
    greedy = _sample(f"The answer is {answer}.", logprobs=[-0.3, -0.1])
    return PromptRecord(
        id=f"q{idx}",
        prompt=f"Question {idx}: what is the answer?",
        greedy=greedy,
        samples=samples,
        references=["42"],
        dataset_tag="synthetic",
        correctness_mode="exact_match",
    )


def make_separable() -> list[PromptRecord]:
    records = []
    for idx in range(10):
        records.append(_e2e_record(idx, correct=(idx % 2 == 0)))
    return records


def make_inversion() -> list[PromptRecord]:
    # q0..q4 opposing + wrong, q5 coherent but wrong (the inversion), q6..q9 coherent + right
    records = []
    for idx in range(5):
        records.append(_e2e_record(idx, correct=False))
    records.append(_e2e_record(5, correct=False, inverted=True))
    for idx in range(6, 10):
        records.append(_e2e_record(idx, correct=True))
    return records


def make_bestofn() -> list[PromptRecord]:
    # Per-record design (embeddings d=2, N=3, exact-match on the last number).
    # Selection methods disagree on purpose; see the acceptance test for the
    # hand-derived pick table.
    specs = [
        # (reference, [(answer_text, logprobs, embedding), ...])
        ("7", [("The answer is 7.", [-1.0], [1, 0]),
               ("The answer is 7.", [-1.0], [1, 0]),
               ("The answer is 9.", [-0.1], [0, 1])]),
        ("13", [("The answer is 13.", [-0.1], [0, 1]),
                ("The answer is 4.", [-1.5], [1, 0]),
                ("The answer is 4.", [-1.5], [1, 0])]),
        ("12", [("The answer is 5.", [-0.2], [1, 0]),
                ("The answer is 12.", [-0.06, -0.06, -0.06, -0.06], [0, 1]),
                ("The answer is 12.", [-2.0], [0, 1])]),
        ("100", [("The answer is 1.", [-0.5], [1, 0]),
                 ("The answer is 2.", [-0.7], [0, 1]),
                 ("The answer is 3.", [-0.9], [-1, 0])]),
        ("6", [("The answer is 6.", [-0.3, -0.3], [0.6, 0.8]),
               ("The answer is 6.", [-0.4], [0.6, 0.8]),
               ("The answer is 6.", [-0.2], [0.6, 0.8])]),
        ("2", [("The answer is 9.", [-1.0], [1, 0]),
               ("The answer is 9.", [-1.0], [-1, 0]),
               ("The answer is 2.", [-0.1], [0, 1])]),
        ("3", [("no idea honestly", [-2.0], [0, 1]),
               ("no clue at all", [-2.0], [0, 1]),
               ("The answer is 3.", [-0.05], [1, 0])]),
        ("21", [("The answer is 21.", [-0.3], [1, 0]),
                ("The answer is 12.", [-0.05] * 10, [0, -1]),
                ("The answer is 21.", [-1.0], [1, 0])]),
    ]
    records = []
    for i, (ref, samples) in enumerate(specs, start=1):
        records.append(
            PromptRecord(
                id=f"bon-{i}",
                prompt=f"Hand-built prompt {i}",
                greedy=_sample(f"The answer is {ref}.", logprobs=[-0.4]),
                samples=[
                    _sample(text, logprobs=lp, embedding=[float(x) for x in emb])
                    for text, lp, emb in samples
                ],
                references=[ref],
                dataset_tag="hand",
                correctness_mode="exact_match",
            )
        )
    return records


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    write_records(DATA_DIR / "e2e_separable.jsonl", make_separable())
    write_records(DATA_DIR / "e2e_inversion.jsonl", make_inversion())
    write_records(DATA_DIR / "bestofn_hand.jsonl", make_bestofn())
    print(f"wrote 3 bundles to {DATA_DIR}")


if __name__ == "__main__":
    main()
