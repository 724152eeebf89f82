import json

import pytest

from src.report import log_frame, log_summary, render_table, save_chart, score_histogram, smoothed, training_curve

LOG = [
    {"update": 1, "mean_reward_rm": 0.1, "reward_rm_by_domain": {"reasoning": 0.2}},
    {"update": 2, "mean_reward_rm": 0.3, "reward_rm_by_domain": {"reasoning": 0.4}},
    {"update": 3, "mean_reward_rm": 0.5, "reward_rm_by_domain": {"reasoning": 0.9}},
]


def test_nested_fields_are_flattened():
    df = log_frame(LOG)
    assert "reward_rm_by_domain.reasoning" in df.columns
    assert log_frame([]).empty


def test_summary_keeps_first_and_last():
    summary = log_summary(LOG)
    assert summary["mean_reward_rm"] == {"first": 0.1, "last": 0.5}
    assert log_summary(LOG, ["update"]) == {"update": {"first": 1.0, "last": 3.0}}
    assert log_summary([]) == {}


def test_sparse_columns_skip_missing_values():
    log = [{"step": 1, "heldout_acc": None}, {"step": 2, "heldout_acc": 0.75}]
    assert log_summary(log)["heldout_acc"] == {"first": 0.75, "last": 0.75}


def test_render_table():
    text = render_table([{"metric": "loss", "first": 0.69314718, "last": 0.1}])
    assert "0.6931" in text and "loss" in text
    assert render_table([], ["metric"]) == "(empty)"


def test_trailing_mean():
    assert smoothed([1.0, 3.0, 5.0], 2).tolist() == [1.0, 2.0, 4.0]


def test_training_curve_spec(tmp_path):
    chart = training_curve(LOG, "update", ["mean_reward_rm", "missing"], "PPO", window=2)
    path = save_chart(chart, tmp_path / "curve.vl.json")
    spec = json.loads(path.read_text())
    assert spec["mark"]["type"] == "line" or spec["mark"] == "line"
    values = spec["datasets"][next(iter(spec["datasets"]))]
    assert [v["value"] for v in values] == pytest.approx([0.1, 0.2, 0.4])
    assert training_curve(LOG, "update", ["missing"], "PPO") is None
    assert save_chart(None, tmp_path / "none.vl.json") is None


def test_histogram_with_and_without_rule(tmp_path):
    with_rule = save_chart(score_histogram([0.1, 0.4, 0.2], 0.15, "scores"), tmp_path / "a.vl.json")
    assert "layer" in json.loads(with_rule.read_text())
    without = save_chart(score_histogram([0.1, 0.4], float("-inf"), "scores"), tmp_path / "b.vl.json")
    assert "layer" not in json.loads(without.read_text())
