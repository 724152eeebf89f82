"""
End-to-end training runs on the synthetic task suite: data cleaning recall,
best-of-N gains on the hidden gold reward, and PPO improvement on the reasoning mix.
"""
import numpy as np
import pytest

from src import seeding
from src.config import DecodeConfig, ModelConfig, PPOConfig, RMTrainConfig, SFTConfig
from src.data import vocab
from src.data.cleaning import Threshold, clean_dataset, cleaning_groups, corrupt_samples, task_samples
from src.data.gold import gold_reward
from src.data.pairs import build_pairs
from src.data.tasks import generate_tasks
from src.model.params import init_params
from src.report.tables import smoothed
from src.reward.training import train_reward_model
from src.rl.sft import supervised_finetune
from src.rl.trainer import ppo_train
from src.sampling import best_of_n, generate

pytestmark = pytest.mark.slow

MODAL_DIM = 4
MODEL = ModelConfig(vocab_size=vocab.VOCAB_SIZE, hidden_dim=64, modal_dim=MODAL_DIM, max_positions=24)
DECODE = DecodeConfig(max_len=8)
FULL_MIX = {"arithmetic": 1.0, "instruction_constraint": 1.0, "modal_count": 0.5, "freeform_gold": 0.5}
REASONING_MIX = {"arithmetic": 1.0, "instruction_constraint": 1.0}


def mean_gold(policy, tasks, seed):
    return float(np.mean([
        gold_reward(t, generate(policy, t.prompt(), DECODE, seeding.derive_seed(seed, f"eval/{i}")))
        for i, t in enumerate(tasks)
    ]))


@pytest.fixture(scope="module")
def policies():
    """Untrained, briefly warmed-up and fully fine-tuned policies."""
    untrained = init_params(MODEL, seed=0)
    warm, _ = supervised_finetune(untrained, generate_tasks(REASONING_MIX, 400, MODAL_DIM, seed=1),
                                  SFTConfig(lr=1e-2, steps=15, batch_size=32, log_every=100), seed=1)
    full, _ = supervised_finetune(untrained, generate_tasks(FULL_MIX, 1000, MODAL_DIM, seed=2),
                                  SFTConfig(lr=1e-2, steps=300, batch_size=32, log_every=100), seed=2)
    return {"untrained": untrained, "warm": warm, "full": full}


@pytest.fixture(scope="module")
def reward_model(policies):
    """Reward model trained on verifier and gold-reward labeled pairs sampled from all three policies."""
    pool = generate_tasks(FULL_MIX, 900, MODAL_DIM, seed=3)
    pairs = []
    for j, name in enumerate(("untrained", "warm", "full")):
        result = build_pairs(policies[name], pool[300 * j:300 * (j + 1)], 4, "auto", seed=10 + j, decode=DECODE)
        pairs.extend(result.pairs)
    cfg = RMTrainConfig(lr=5e-3, batch_size=32, max_steps=800, length_ratio_max=None, log_every=200)
    result = train_reward_model(pairs, cfg, seed=3, init=policies["full"])
    assert result.final_heldout_acc > 0.6
    return result.params


def test_cleaning_recovers_injected_corruptions(reward_model):
    tasks = generate_tasks(FULL_MIX, 2000, MODAL_DIM, seed=30)
    samples, injected = corrupt_samples(task_samples(tasks), 0.05, seed=30)
    ids = [t.task_id for t in tasks]
    report = clean_dataset(reward_model, samples, Threshold.percentile(5.0), ids,
                           {ids[i]: kind for i, kind in injected.items()},
                           groups=cleaning_groups(tasks, "prompt"))
    assert len(injected) == 100
    assert len(report.flagged) <= 100
    assert report.recall["overall"] >= 0.7


def test_best_of_eight_beats_a_single_sample_on_gold(policies):
    policy = policies["untrained"]
    pairs = build_pairs(policy, generate_tasks({"freeform_gold": 1.0}, 600, MODAL_DIM, seed=40), 4,
                        "gold_reward", seed=40, decode=DECODE).pairs
    cfg = RMTrainConfig(lr=5e-3, batch_size=32, max_steps=600, length_ratio_max=None, log_every=200)
    rm = train_reward_model(pairs, cfg, seed=40, model_cfg=MODEL).params

    prompts = generate_tasks({"freeform_gold": 1.0}, 500, MODAL_DIM, seed=41)
    gold_one, gold_eight = [], []
    for i, task in enumerate(prompts):
        seed = seeding.derive_seed(41, f"bon/{i}")
        result = best_of_n(policy, rm, task.prompt(), 8, DECODE, seed)
        assert result.winner.rm_score == max(c.rm_score for c in result.candidates)
        if i < 5:
            assert result.candidates[0].response == generate(policy, task.prompt(), DECODE, seed)
        gold_one.append(gold_reward(task, result.candidates[0].response))
        gold_eight.append(gold_reward(task, result.winner.response))

    gap = np.mean(gold_eight) - np.mean(gold_one)
    se = np.sqrt(np.var(gold_eight, ddof=1) / len(prompts) + np.var(gold_one, ddof=1) / len(prompts))
    assert gap > 2.0 * se


def test_ppo_raises_gold_reward_on_the_reasoning_mix(policies, reward_model):
    prompts = generate_tasks(REASONING_MIX, 400, MODAL_DIM, seed=50)
    held_out = generate_tasks(REASONING_MIX, 200, MODAL_DIM, seed=51)
    warm = policies["warm"]
    cfg = PPOConfig(lr=2e-3, critic_lr=2e-3, batch_size=64, updates=200, rollouts_per_update=64, log_every=50)
    result = ppo_train(warm, reward_model, warm, prompts, cfg, seed=50, decode=DECODE)

    assert mean_gold(result.policy, held_out, seed=51) - mean_gold(warm, held_out, seed=51) >= 0.2

    # Block means of 10 updates; nearly every block improves on the one before.
    rm_curve = [r["mean_reward_rm"] for r in result.log]
    blocks = smoothed(rm_curve, 10).iloc[9::10].to_numpy()
    assert len(blocks) == 20
    assert np.mean(np.diff(blocks) >= 0.0) >= 0.9
