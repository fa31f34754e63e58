import numpy as np
import pytest

from rdskit.evaluation import (
    EvalReport,
    LabeledScore,
    auroc,
    best_of_n_accuracy,
    best_of_n_select,
    label_correct,
    rouge_l_f1,
)
from oracles import auroc_pair_count, rouge_l_f1_reference
from rdskit.textnorm import tokenize


class TestRougeL:
    def test_identical(self):
        assert rouge_l_f1("the cat sat", "the cat sat") == 1.0

    def test_disjoint(self):
        assert rouge_l_f1("alpha beta", "gamma delta") == 0.0

    def test_partial_overlap(self):
        # LCS("the cat sat", "the cat ran") = 2, P = R = 2/3
        assert rouge_l_f1("the cat sat", "the cat ran") == pytest.approx(2 / 3, abs=1e-12)

    def test_empty_sides(self):
        assert rouge_l_f1("", "the cat") == 0.0
        assert rouge_l_f1("the cat", "") == 0.0
        assert rouge_l_f1("!!!", "the cat") == 0.0

    def test_case_and_punctuation_insensitive(self):
        assert rouge_l_f1("The CAT sat.", "the cat sat") == 1.0

    def test_symmetry_for_equal_lengths(self):
        assert rouge_l_f1("a b c", "a x c") == rouge_l_f1("a x c", "a b c")

    def test_matches_reference_oracle(self):
        rng = np.random.default_rng(0)
        vocab = [f"w{i}" for i in range(8)]
        for _ in range(100):
            cand = " ".join(rng.choice(vocab, size=rng.integers(0, 30)))
            ref = " ".join(rng.choice(vocab, size=rng.integers(0, 30)))
            expected = rouge_l_f1_reference(tokenize(cand), tokenize(ref))
            assert rouge_l_f1(cand, ref) == expected


class TestLabelCorrect:
    def test_exact_match(self):
        assert label_correct("42", ["42"], "exact_match")

    def test_exact_match_extracts_numbers(self):
        assert label_correct("So the total is 1,024.", ["1024"], "exact_match")

    def test_exact_match_text_mode(self):
        assert label_correct("Paris!", ["paris"], "exact_match", extraction="normalized_full")

    def test_exact_match_miss(self):
        assert not label_correct("41", ["42"], "exact_match")

    def test_unanswerable_never_correct(self):
        assert not label_correct("no number", ["42"], "exact_match")

    def test_rouge_gate_pass(self):
        assert label_correct("the cat sat", ["the cat ran"], "rouge_gate", threshold=0.3)

    def test_rouge_gate_fail(self):
        assert not label_correct("alpha", ["beta"], "rouge_gate", threshold=0.3)

    def test_rouge_gate_max_over_references(self):
        refs = ["totally unrelated", "the cat sat"]
        assert label_correct("the cat sat", refs, "rouge_gate")

    def test_threshold_monotone(self):
        cand, refs = "the cat sat", ["the cat ran"]
        flags = [
            label_correct(cand, refs, "rouge_gate", threshold=t)
            for t in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
        ]
        # once false, never true again as the threshold rises
        assert flags == sorted(flags, reverse=True)

    def test_strict_versus_inclusive_at_threshold(self):
        # score is exactly 2/3
        cand, refs = "the cat sat", ["the cat ran"]
        assert not label_correct(cand, refs, "rouge_gate", threshold=2 / 3)
        assert label_correct(cand, refs, "rouge_gate", threshold=2 / 3, inclusive=True)

    def test_requires_references(self):
        with pytest.raises(ValueError):
            label_correct("x", [], "exact_match")


class TestAuroc:
    def test_perfect_separation(self):
        items = [(0.9, False), (0.8, False), (0.1, True), (0.2, True)]
        assert auroc(items) == 1.0

    def test_three_of_four_pairs(self):
        items = [(0.9, False), (0.15, False), (0.1, True), (0.2, True)]
        assert auroc(items) == 0.75

    def test_all_tied(self):
        assert auroc([(0.5, False), (0.5, True)]) == 0.5

    def test_single_class_undefined(self):
        assert auroc([(0.5, True), (0.7, True)]) is None
        assert auroc([(0.5, False)]) is None
        assert auroc([]) is None

    def test_accepts_labeled_score_objects(self):
        items = [LabeledScore(0.9, False), LabeledScore(0.1, True)]
        assert auroc(items) == 1.0

    def test_matches_pair_counting_oracle(self):
        rng = np.random.default_rng(1)
        for trial in range(80):
            n = int(rng.integers(2, 60))
            # draw from a tiny grid half the time to force heavy ties
            if trial % 2 == 0:
                scores = rng.choice([0.1, 0.2, 0.3], size=n)
            else:
                scores = rng.standard_normal(n)
            labels = rng.random(n) < 0.5
            items = list(zip(scores.tolist(), labels.tolist()))
            fast = auroc(items)
            brute = auroc_pair_count(items)
            if brute is None:
                assert fast is None
            else:
                assert fast == pytest.approx(brute, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(2)
        scores = rng.standard_normal(40)
        labels = (rng.random(40) < 0.5).tolist()
        base = auroc(list(zip(scores.tolist(), labels)))
        warped = auroc(list(zip(np.exp(scores).tolist(), labels)))
        assert warped == pytest.approx(base, abs=1e-12)

    def test_negation_complement_without_ties(self):
        rng = np.random.default_rng(3)
        scores = rng.permutation(30).astype(float)
        labels = ([True] * 15) + ([False] * 15)
        a = auroc(list(zip(scores.tolist(), labels)))
        b = auroc(list(zip((-scores).tolist(), labels)))
        assert a + b == pytest.approx(1.0, abs=1e-12)


class TestBestOfN:
    def test_argmin(self):
        assert best_of_n_select([0.3, 0.1, 0.9]) == 1

    def test_tie_breaks_low_index(self):
        assert best_of_n_select([0.5, 0.5]) == 0

    def test_singleton(self):
        assert best_of_n_select([7.0]) == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            best_of_n_select([])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            scores = rng.standard_normal(8).tolist()
            assert best_of_n_select(scores) == best_of_n_select(np.exp(scores).tolist())

    def test_accuracy_all_hits(self):
        records = [([0.1, 0.9], [True, False]), ([0.8, 0.2], [False, True])]
        assert best_of_n_accuracy(records) == 1.0

    def test_accuracy_half(self):
        records = [([0.1, 0.9], [False, True]), ([0.2, 0.3], [True, False])]
        assert best_of_n_accuracy(records) == 0.5

    def test_empty_undefined(self):
        assert best_of_n_accuracy([]) is None

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            best_of_n_accuracy([([0.1], [True, False])])


class TestEvalReport:
    def test_json_shape(self):
        rep = EvalReport(
            n_prompts=3,
            n_correct=2,
            auroc_by_method={"rds": 1.0, "rds_w": None},
            method_n={"rds": 3, "rds_w": 0},
        )
        obj = rep.to_json_dict()
        assert obj["auroc_by_method"]["rds_w"] is None
        assert obj["n_correct"] <= obj["n_prompts"]
        assert set(obj["external_baselines"]) == {"pro", "se", "deg", "sd", "es", "ce"}

    def test_csv_undefined_as_na(self):
        rep = EvalReport(
            n_prompts=2,
            n_correct=2,
            auroc_by_method={"rds": None},
            method_n={"rds": 0},
        )
        lines = rep.to_csv().splitlines()
        assert lines[0] == "method,metric,value,n"
        assert lines[1] == "rds,auroc,NA,0"

    def test_csv_dataset_slices(self):
        rep = EvalReport(
            n_prompts=4,
            n_correct=2,
            auroc_by_method={"rds": 0.75},
            method_n={"rds": 4},
            by_dataset={"svamp": {"rds": 1.0}},
            by_dataset_n={"svamp": {"rds": 2}},
        )
        text = rep.to_csv()
        assert "rds,auroc@svamp,1.0,2" in text.splitlines()
