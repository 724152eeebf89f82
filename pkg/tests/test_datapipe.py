import json

import numpy as np
import pytest

from src import config, seeding
from src.config import DecodeConfig
from src.data import io, vocab
from src.data.cleaning import (
    Threshold, clean_dataset, cleaning_groups, corrupt_samples, normalize_by_group, resolve_threshold, task_samples,
)
from src.data.filtering import length_filter
from src.data.gold import gold_reward, judge_score
from src.data.pairs import build_pairs, label_by_judge, label_by_verifier
from src.data.tasks import Constraint, SyntheticTask, generate_tasks, gold_response
from src.data.verifiers import verify
from src.errors import DataError, OpError
from src.model.network import SequenceSample, reward_score
from src.reward.types import PreferencePair
from src.sampling import generate

A, E = vocab.ANSWER, vocab.EOS
W = vocab.WORDS


def arithmetic(a, b):
    return SyntheticTask("t", "arithmetic", (vocab.BOS, vocab.digit(a), vocab.PLUS, vocab.digit(b)),
                         gold_answer=(vocab.digit(a + b),))


def constraint(kind, value):
    return SyntheticTask("c", "instruction_constraint", (vocab.BOS, vocab.INSTR_LEN, vocab.digit(1)),
                         constraint=Constraint(kind, value))


def pair(chosen_len, rejected_len, pid="p"):
    return PreferencePair(pid, (vocab.BOS,), (W[0],) * chosen_len, (W[1],) * rejected_len)


# --- verifiers ---

def test_arithmetic_verifier_reads_the_answer_span():
    task = arithmetic(2, 3)
    assert verify(task, (W[0], W[1], A, vocab.digit(5), E))
    assert not verify(task, (A, vocab.digit(4), E))
    assert not verify(task, (vocab.digit(5), E))


def test_length_constraint_verifier():
    task = constraint("length", 4)
    assert verify(task, (W[0],) * 4 + (E,))
    assert not verify(task, (W[0],) * 5 + (E,))


def test_include_and_exclude_verifiers():
    assert verify(constraint("include", W[3]), (W[1], W[3], E))
    assert not verify(constraint("include", W[3]), (W[1], E))
    assert verify(constraint("exclude", W[3]), (W[1], E))
    assert not verify(constraint("exclude", W[3]), (W[3], E))
    assert not verify(constraint("exclude", W[3]), (E,))


def _reparse_answer(response):
    """Independent oracle: scan right-to-left for the delimiter before the first stop token."""
    cut = list(response)
    for i, t in enumerate(cut):
        if t == E:
            cut = cut[:i]
            break
    for i in range(len(cut) - 1, -1, -1):
        if cut[i] == A:
            return tuple(cut[i + 1:])
    return None


def test_verifier_matches_reparse_oracle():
    rng = np.random.default_rng(0)
    alphabet = [A, E, vocab.digit(3), vocab.digit(5), W[0]]
    task = arithmetic(1, 4)
    for _ in range(1000):
        response = tuple(int(t) for t in rng.choice(alphabet, size=int(rng.integers(1, 7))))
        expected = _reparse_answer(response) == (vocab.digit(5),)
        assert verify(task, response) == expected


def test_gold_responses_verify(tasks):
    for task in tasks:
        if task.kind != "freeform_gold":
            assert verify(task, gold_response(task)), task


def test_freeform_has_no_verifier(tasks):
    task = next(t for t in tasks if t.kind == "freeform_gold")
    with pytest.raises(DataError):
        verify(task, (W[0], E))


# --- tasks and gold reward ---

def test_task_generation_is_deterministic():
    weights = {"arithmetic": 1.0, "modal_count": 1.0}
    a = generate_tasks(weights, 20, 4, seed=3)
    assert a == generate_tasks(weights, 20, 4, seed=3)
    assert {t.kind for t in a} <= {"arithmetic", "modal_count"}
    with pytest.raises(DataError):
        generate_tasks({"poetry": 1.0}, 5, 4, seed=0)


def test_gold_reward_rewards_correctness():
    task = arithmetic(1, 1)
    right = gold_reward(task, (A, vocab.digit(2), E))
    wrong = gold_reward(task, (A, vocab.digit(3), E))
    assert 0.0 <= wrong < right <= 1.0


def test_judge_prefers_filler_when_biased(tasks):
    task = next(t for t in tasks if t.kind == "freeform_gold")
    plain = (W[0], E)
    padded = (W[0], vocab.FILLER, vocab.FILLER, E)
    assert judge_score(task, padded, 0.0) == judge_score(task, plain, 0.0)
    assert judge_score(task, padded, 0.1) > judge_score(task, plain, 0.1)


# --- pair construction ---

def test_verifier_labeling_rules():
    task = arithmetic(2, 3)
    right, wrong = (A, vocab.digit(5), E), (A, vocab.digit(1), E)
    assert label_by_verifier(task, [wrong, right, wrong]) == ((right, wrong), "ok")
    assert label_by_verifier(task, [right, right])[1] == "all_correct"
    assert label_by_verifier(task, [wrong, wrong]) == ((gold_response(task), wrong), "ok_gold_fallback")
    assert label_by_verifier(task, [wrong, wrong], gold_fallback=False) == (None, "none_correct")


def test_judge_labels_are_order_independent(tasks):
    task = next(t for t in tasks if t.kind == "freeform_gold")
    candidates = [(w, E) for w in W[:5]]
    forward, _ = label_by_judge(task, candidates, 0.0)
    backward, _ = label_by_judge(task, candidates[::-1], 0.0)
    assert forward == backward
    scores = [gold_reward(task, c) for c in candidates]
    assert forward == (candidates[int(np.argmax(scores))], candidates[int(np.argmin(scores))])


def test_verifier_mode_pairs_always_split_on_correctness(params):
    weights = {"arithmetic": 1.0, "instruction_constraint": 1.0}
    pool = generate_tasks(weights, 30, 4, seed=1)
    result = build_pairs(params, pool, 4, "verifier", seed=0, decode=DecodeConfig(max_len=5))
    by_prompt = {t.prompt_tokens: t for t in pool}
    assert result.pairs
    assert len(result.pairs) + sum(result.skipped.values()) == len(pool)
    for p in result.pairs:
        task = by_prompt[p.prompt_tokens]
        assert verify(task, p.chosen) and not verify(task, p.rejected)
        assert p.source_tag == "verifier"


def test_build_pairs_is_deterministic_across_workers(params, tasks):
    a = build_pairs(params, tasks, 3, "auto", seed=5, decode=DecodeConfig(max_len=4))
    b = build_pairs(params, tasks, 3, "auto", seed=5, decode=DecodeConfig(max_len=4), workers=3)
    assert a.pairs == b.pairs
    assert a.skipped == b.skipped


def test_build_pairs_needs_two_candidates(params, tasks):
    with pytest.raises(OpError):
        build_pairs(params, tasks, 1, "verifier", seed=0)


def test_gold_reward_pairs_take_the_extremes_of_the_gold_reward(params):
    pool = generate_tasks({"freeform_gold": 1.0}, 12, 4, seed=2)
    decode = DecodeConfig(max_len=4)
    result = build_pairs(params, pool, 4, "gold_reward", seed=3, decode=decode)
    by_id = {t.task_id: t for t in pool}
    assert result.pairs
    for p in result.pairs:
        task = by_id[p.pair_id.split("/")[0]]
        candidates = [generate(params, task.prompt(), decode, seeding.derive_seed(3, f"pairs/{task.task_id}/{j}"))
                      for j in range(4)]
        golds = [gold_reward(task, c) for c in candidates]
        assert gold_reward(task, p.chosen) == max(golds)
        assert gold_reward(task, p.rejected) == min(golds)
        assert p.source_tag == "synthetic_gold"


def test_filler_biased_judge_is_opt_in(params):
    pool = generate_tasks({"freeform_gold": 1.0}, 6, 4, seed=2)
    biased = build_pairs(params, pool, 4, "biased_judge", seed=3, decode=DecodeConfig(max_len=4))
    assert {p.source_tag for p in biased.pairs} == {"judge"}
    with pytest.raises(OpError):
        build_pairs(params, pool, 4, "llm", seed=3)


# --- length filter ---

def test_length_filter_examples():
    long_chosen, equal, long_rejected = pair(400, 100, "a"), pair(5, 5, "b"), pair(2, 9, "c")
    kept, removed = length_filter([long_chosen, equal, long_rejected], 2.0)
    assert removed == [long_chosen]
    assert kept == [equal, long_rejected]


def test_length_filter_is_an_idempotent_partition():
    pairs = [pair(c, r, f"{c}-{r}") for c in range(1, 6) for r in range(1, 6)]
    kept, removed = length_filter(pairs, 1.5)
    assert sorted(kept + removed, key=pairs.index) == pairs
    assert not set(p.pair_id for p in kept) & set(p.pair_id for p in removed)
    assert length_filter(kept, 1.5) == (kept, [])
    with pytest.raises(OpError):
        length_filter(pairs, 0.0)


# --- cleaning ---

def test_percentile_threshold_flags_exactly_p_percent(scoring_params, chat_samples):
    report = clean_dataset(scoring_params, chat_samples, Threshold.percentile(5.0))
    assert len(chat_samples) == 100
    assert len(report.flagged) == 5
    lowest = sorted(range(100), key=lambda i: report.scores[i])[:5]
    assert set(report.flagged) == {report.sample_ids[i] for i in lowest}
    assert report.summary["count"] == 100
    assert "5%" in report.summary and "median" in report.summary


def test_flags_are_exactly_the_scores_below_threshold(scoring_params, chat_samples):
    report = clean_dataset(scoring_params, chat_samples, Threshold.absolute(0.0))
    assert set(report.flagged) == {sid for sid, s in zip(report.sample_ids, report.scores) if s < 0.0}
    again = clean_dataset(scoring_params, chat_samples, Threshold.absolute(0.0))
    assert again.flagged == report.flagged


def test_threshold_edge_cases(scoring_params, chat_samples):
    assert clean_dataset(scoring_params, chat_samples, Threshold.absolute(float("-inf"))).flagged == []
    assert clean_dataset(scoring_params, chat_samples, Threshold.percentile(0.0)).flagged == []
    assert len(clean_dataset(scoring_params, chat_samples, Threshold.percentile(100.0)).flagged) == 100
    assert resolve_threshold([1.0, 1.0, 1.0, 2.0], Threshold.percentile(50.0)) == 1.0
    with pytest.raises(DataError):
        clean_dataset(scoring_params, [], Threshold.percentile(5.0))


def test_corrupt_samples_reports_what_it_changed(tasks):
    clean = task_samples(tasks)
    corrupted, kinds = corrupt_samples(clean, 0.25, seed=0)
    assert len(kinds) == 10
    assert set(kinds.values()) <= {"shuffled_answer", "empty_answer", "mismatched_modal"}
    for i, sample in enumerate(corrupted):
        assert (sample != clean[i]) == (i in kinds)
    assert corrupt_samples(clean, 0.25, seed=0) == (corrupted, kinds)


def test_cleaning_recall_by_kind(scoring_params, tasks):
    clean = task_samples(tasks)
    corrupted, kinds = corrupt_samples(clean, 0.25, seed=0)
    ids = [t.task_id for t in tasks]
    report = clean_dataset(scoring_params, corrupted, Threshold.percentile(25.0), ids,
                           {ids[i]: k for i, k in kinds.items()})
    assert 0.0 <= report.recall["overall"] <= 1.0
    assert set(report.recall) - {"overall"} == set(kinds.values())


def test_group_normalization_centres_each_group():
    ranking = normalize_by_group([1.0, 2.0, 3.0, 10.0, 10.0, 7.0], ["a", "a", "a", "b", "b", "c"])
    assert ranking[:3] == pytest.approx([-1.0, 0.0, 1.0])
    assert ranking[3:5] == [0.0, 0.0]
    assert ranking[5] == 0.0
    with pytest.raises(DataError):
        normalize_by_group([1.0, 2.0], ["a"])


def test_cleaning_groups_follow_the_normalization(tasks):
    assert cleaning_groups(tasks, "none") is None
    assert cleaning_groups(tasks, "kind") == [t.kind for t in tasks]
    labels = cleaning_groups(tasks, "prompt")
    for (a, la), (b, lb) in zip(zip(tasks, labels), zip(tasks[1:], labels[1:])):
        assert (la == lb) == (a.kind == b.kind and a.prompt_tokens == b.prompt_tokens)
    with pytest.raises(DataError):
        cleaning_groups(tasks, "task")


def test_prompt_groups_isolate_a_worse_answer(scoring_params):
    prompt = (vocab.BOS, vocab.CHAT, W[0])
    options = [(W[1], W[2], E), (W[3], E)]
    scores = [reward_score(scoring_params, SequenceSample.of(prompt, o)).item() for o in options]
    good, bad = (options[0], options[1]) if scores[0] > scores[1] else (options[1], options[0])
    samples = [SequenceSample.of(prompt, good)] * 19 + [SequenceSample.of(prompt, bad)]
    report = clean_dataset(scoring_params, samples, Threshold.percentile(5.0), groups=["chat"] * 20)
    assert report.flagged == [report.sample_ids[-1]]
    assert report.ranking[:19] == [0.0] * 19


def test_percentile_cut_ranks_within_groups(scoring_params, chat_samples):
    groups = ["even" if i % 2 == 0 else "odd" for i in range(len(chat_samples))]
    report = clean_dataset(scoring_params, chat_samples, Threshold.percentile(10.0), groups=groups)
    assert len(report.flagged) == 10
    lowest = sorted(range(100), key=lambda i: report.ranking[i])[:10]
    assert set(report.flagged) == {report.sample_ids[i] for i in lowest}
    assert report.to_dict()["normalized"]
    absolute = clean_dataset(scoring_params, chat_samples, Threshold.absolute(0.0), groups=groups)
    assert set(absolute.flagged) == {sid for sid, s in zip(absolute.sample_ids, absolute.scores) if s < 0.0}


# --- files ---

def test_pairs_file_round_trip(tmp_path, tasks):
    pairs = [
        PreferencePair("a", (vocab.BOS, vocab.COUNT), (A, vocab.digit(2), E), (A, vocab.digit(1), E),
                       "video_surrogate", "verifier", tasks[0].modal),
        pair(2, 3, "b"),
    ]
    meta = {"config_hash": "h", "seed": 1}
    path = io.save_pairs(tmp_path / "pairs.jsonl", pairs, meta)
    assert io.load_pairs(path) == pairs
    first = json.loads(path.read_text().splitlines()[0])
    assert first["format"] == config.PAIRS_FORMAT
    assert first["seed"] == 1
    assert set(first) >= {"id", "prompt_tokens", "chosen_tokens", "rejected_tokens", "domain_tag", "source_tag"}


def test_tasks_file_round_trip(tmp_path, tasks):
    path = io.save_tasks(tmp_path / "tasks.jsonl", tasks, {"config_hash": "h", "seed": 0})
    assert io.load_tasks(path) == tasks


def test_bad_files_raise_data_error(tmp_path):
    with pytest.raises(DataError):
        io.load_pairs(tmp_path / "missing.jsonl")
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    with pytest.raises(DataError):
        io.load_pairs(bad)
    wrong = tmp_path / "wrong.jsonl"
    wrong.write_text(json.dumps({"format": "other/1"}) + "\n")
    with pytest.raises(DataError):
        io.load_pairs(wrong)
    identical = tmp_path / "identical.jsonl"
    identical.write_text(json.dumps({"format": config.PAIRS_FORMAT, "id": "x", "prompt_tokens": [0],
                                     "chosen_tokens": [20], "rejected_tokens": [20]}) + "\n")
    with pytest.raises(DataError):
        io.load_pairs(identical)
