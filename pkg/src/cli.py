"""
Command-line orchestration of every pipeline stage.
Each subcommand reads its inputs from the configured paths, writes its artifacts
(stamped with config hash, seed and format) and prints a one-line summary.
"""
import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from . import config, seeding
from .data import io
from .data.cleaning import Threshold, clean_dataset, cleaning_groups, corrupt_samples, task_samples
from .data.gold import gold_reward
from .data.pairs import build_pairs
from .data.tasks import generate_tasks
from .errors import CheckpointError, DataError, PrefRLError
from .evalbench.bench import BenchmarkSet, benchmark_from_pairs, evaluate_rm
from .evalbench.probe import length_bias_probe
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.params import ModelParams, init_params
from .report.charts import save_chart, score_histogram, training_curve
from .report.tables import log_summary, render_table
from .reward.training import train_reward_model
from .rl.sft import supervised_finetune
from .rl.trainer import ppo_train
from .sampling.best_of_n import best_of_n
from .sampling.decoding import generate

logger = logging.getLogger(__name__)

LOCK_NAME = ".lock"
CHECKPOINT_FORMAT = f"prefrl.checkpoint/{config.CHECKPOINT_VERSION}"
PPO_CURVE_WINDOW = 5


# --- RUN CONTEXT ---

class Run:
    """Resolved config plus the file locations every subcommand shares."""

    def __init__(self, cfg: config.RunConfig, args: argparse.Namespace):
        self.cfg = cfg
        self.args = args
        self.data_dir = cfg.resolve_path("data")
        self.ckpt_dir = cfg.resolve_path("checkpoints")
        self.report_dir = cfg.resolve_path("reports")
        self.workers = seeding.max_workers()

    @property
    def seed(self) -> int:
        return self.cfg.seed

    def meta(self, format_version: str, **extra) -> Dict[str, Any]:
        return {**config.run_metadata(self.cfg, format_version), **extra}

    def ckpt(self, name: str) -> Path:
        return self.ckpt_dir / f"{name}.ckpt"

    def load(self, explicit: Optional[str], default_name: str) -> ModelParams:
        params, _ = load_checkpoint(explicit or self.ckpt(default_name))
        return params

    def save(self, params: ModelParams, name: str, kind: str) -> Path:
        path = self.ckpt(name)
        save_checkpoint(params, path, self.meta(CHECKPOINT_FORMAT, kind=kind))
        return path

    def write_log(self, name: str, log: List[Dict[str, Any]], x: str, metrics: List[str], title: str,
                  window: int = 1) -> Path:
        """JSON-lines log, its chart, and a first/last table of every numeric column."""
        path = io.write_jsonl(self.report_dir / f"{name}.jsonl", log, self.meta(config.LOG_FORMAT))
        save_chart(training_curve(log, x, metrics, title, window), self.report_dir / f"{name}.vl.json")
        rows = [{"metric": k, **v} for k, v in log_summary(log).items() if k != x]
        table = render_table(rows, ["metric", "first", "last"])
        (self.report_dir / f"{name}.txt").write_text(table + "\n", encoding="utf-8")
        logger.debug(f"{title}\n{table}")
        return path

    def write_report(self, name: str, body: Dict[str, Any]) -> Path:
        return io.write_json(self.report_dir / f"{name}.json", {**body, **self.meta(config.REPORT_FORMAT)})


@contextlib.contextmanager
def checkpoint_lock(directory: Path):
    """Exclusive writer lock on a checkpoint directory."""
    lock = Path(directory) / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CheckpointError("checkpoint directory is locked by another writer", str(lock))
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield lock
    finally:
        with contextlib.suppress(FileNotFoundError):
            lock.unlink()


def _tasks(run: Run, explicit: Optional[str] = None):
    return io.load_tasks(explicit or run.data_dir / "tasks.jsonl")


def _prompt_tasks(run: Run, count: int):
    tasks = _tasks(run, run.args.tasks)[:count]
    if not tasks:
        raise DataError(f"no prompts selected (bon.prompts={count})")
    return tasks


def _prompt_seed(run: Run, task_id: str) -> int:
    return seeding.derive_seed(run.seed, f"prompt/{task_id}")


# --- SUBCOMMANDS ---

def cmd_gen_tasks(run: Run) -> str:
    tasks = generate_tasks(run.cfg.tasks.weights(), run.cfg.tasks.count, run.cfg.model.modal_dim, run.seed)
    path = io.save_tasks(run.data_dir / "tasks.jsonl", tasks, run.meta(config.TASKS_FORMAT))
    return f"gen-tasks: {len(tasks)} tasks -> {path}"


def cmd_train_sft(run: Run) -> str:
    tasks = _tasks(run, run.args.tasks)
    init = load_checkpoint(run.args.init)[0] if run.args.init else init_params(run.cfg.model, run.seed)
    params, log = supervised_finetune(init, tasks, run.cfg.sft, run.seed)
    with checkpoint_lock(run.ckpt_dir):
        path = run.save(params, "sft", "policy_sft")
    run.write_log("sft_log", log, "step", ["loss"], "Supervised warm start")
    return f"train-sft: nll {log[0]['loss']:.4f} -> {log[-1]['loss']:.4f} -> {path}" if log else f"train-sft: 0 steps -> {path}"


def cmd_build_prefs(run: Run) -> str:
    tasks = _tasks(run, run.args.tasks)
    policy = run.load(run.args.policy, "sft")
    pc = run.cfg.pairs
    result = build_pairs(policy, tasks, pc.k_candidates, pc.judge, run.seed, run.cfg.decode,
                         pc.gold_fallback, pc.judge_length_bias, run.workers)
    path = io.save_pairs(run.data_dir / "pairs.jsonl", result.pairs, run.meta(config.PAIRS_FORMAT))
    run.write_report("pairs_summary", result.summary())
    return (f"build-prefs: {len(result.pairs)} pairs from {result.tasks_seen} tasks "
            f"(yield {result.yield_fraction:.2f}), skipped {sum(result.skipped.values())} -> {path}")


def cmd_train_rm(run: Run) -> str:
    pairs = io.load_pairs(run.args.pairs or run.data_dir / "pairs.jsonl")
    init = load_checkpoint(run.args.init)[0] if run.args.init else None
    result = train_reward_model(pairs, run.cfg.rm, run.seed, init=init, model_cfg=run.cfg.model, workers=run.workers)
    name = run.args.name
    with checkpoint_lock(run.ckpt_dir):
        path = run.save(result.params, name, "reward_model")
    io.save_pairs(run.data_dir / f"{name}_heldout.jsonl", result.heldout_pairs, run.meta(config.PAIRS_FORMAT))
    run.write_log(f"{name}_log", result.log, "step", ["loss", "heldout_acc"], "Reward model training")
    acc = result.final_heldout_acc
    acc_text = f"{acc:.3f}" if acc is not None else "n/a"
    return f"train-rm: {len(result.train_pairs)} train pairs, {result.removed_by_filter} filtered, heldout_acc {acc_text} -> {path}"


def cmd_eval_rm(run: Run) -> str:
    rm = run.load(run.args.rm, "rm")
    if run.args.bench:
        bench = BenchmarkSet.load(run.args.bench)
    else:
        bench = benchmark_from_pairs(io.load_pairs(run.args.pairs or run.data_dir / "rm_heldout.jsonl"))
    report = evaluate_rm(rm, bench, run.cfg.rm.pooling, run.workers)
    path = run.write_report("bench_report", report.to_dict())
    (run.report_dir / "bench_report.txt").write_text(report.table() + "\n", encoding="utf-8")
    return f"eval-rm: overall {report.overall_acc:.3f}, macro {report.macro_acc:.3f} over {bench.n_pairs} pairs -> {path}"


def cmd_train_ppo(run: Run) -> str:
    policy = run.load(run.args.policy, "sft")
    rm = run.load(run.args.rm, "rm")
    ref = policy
    tasks = _tasks(run, run.args.tasks)
    result = ppo_train(policy, rm, ref, tasks, run.cfg.ppo, run.seed, run.cfg.decode,
                       pooling=run.cfg.rm.pooling, workers=run.workers)
    with checkpoint_lock(run.ckpt_dir):
        path = run.save(result.policy, "policy", "policy_ppo")
        run.save(result.critic, "critic", "critic")
    run.write_log("ppo_log", result.log, "update", ["mean_reward_rm", "mean_reward_gold", "mean_kl"], "PPO",
                  window=PPO_CURVE_WINDOW)
    if not result.log:
        return f"train-ppo: 0 updates -> {path}"
    last = result.log[-1]
    return f"train-ppo: {len(result.log)} updates, rm {last['mean_reward_rm']:.4f}, gold {last['mean_reward_gold']:.4f} -> {path}"


def cmd_sample(run: Run) -> str:
    policy = run.load(run.args.policy, "policy")
    records = []
    for task in _prompt_tasks(run, run.cfg.bon.prompts):
        response = generate(policy, task.prompt(), run.cfg.decode, _prompt_seed(run, task.task_id))
        records.append({"task_id": task.task_id, "response": list(response),
                        "gold_reward": gold_reward(task, response), "length": len(response)})
    path = io.write_jsonl(run.report_dir / "samples.jsonl", records, run.meta(config.REPORT_FORMAT))
    mean_gold = sum(r["gold_reward"] for r in records) / len(records)
    return f"sample: {len(records)} responses, mean gold {mean_gold:.4f} -> {path}"


def cmd_bon(run: Run) -> str:
    policy = run.load(run.args.policy, "policy")
    rm = run.load(run.args.rm, "rm")
    n = run.args.n if run.args.n is not None else run.cfg.bon.n
    records = []
    for task in _prompt_tasks(run, run.cfg.bon.prompts):
        result = best_of_n(policy, rm, task.prompt(), n, run.cfg.decode, _prompt_seed(run, task.task_id),
                           run.cfg.rm.pooling, run.workers)
        audit = result.to_dict()
        for candidate in audit["candidates"]:
            candidate["gold_reward"] = gold_reward(task, candidate["response"])
        audit["winner"]["gold_reward"] = audit["candidates"][result.winner.index]["gold_reward"]
        records.append({"task_id": task.task_id, "n": n, "gold_reward": audit["winner"]["gold_reward"], **audit})
    path = io.write_jsonl(run.report_dir / f"bon_n{n}.jsonl", records, run.meta(config.REPORT_FORMAT))
    mean_gold = sum(r["gold_reward"] for r in records) / len(records)
    return f"bon: n={n}, {len(records)} prompts, mean gold {mean_gold:.4f} -> {path}"


def cmd_clean_data(run: Run) -> str:
    rm = run.load(run.args.rm, "rm")
    tasks = _tasks(run, run.args.tasks)
    samples = task_samples(tasks)
    corrupted = None
    if run.args.corrupt > 0:
        samples, injected = corrupt_samples(samples, run.args.corrupt, run.seed)
        corrupted = {tasks[i].task_id: kind for i, kind in injected.items()}
    cc = run.cfg.clean
    threshold = Threshold.percentile(cc.value) if cc.threshold_mode == "percentile" else Threshold.absolute(cc.value)
    groups = cleaning_groups(tasks, cc.normalize)
    report = clean_dataset(
        rm, samples, threshold, [t.task_id for t in tasks], corrupted, run.cfg.rm.pooling, run.workers, groups
    )
    path = run.write_report("cleaning_report", report.to_dict())
    values, title = report.scores, "Reward scores"
    if report.ranking is not None and threshold.mode == "percentile":
        values, title = report.ranking, f"Reward scores, normalized per {cc.normalize}"
    save_chart(score_histogram(values, report.threshold, title), run.report_dir / "cleaning_report.vl.json")
    recall = f", recall {report.recall['overall']:.3f}" if report.recall else ""
    return f"clean-data: flagged {len(report.flagged)} of {len(samples)}{recall} -> {path}"


def cmd_probe_length(run: Run) -> str:
    rm = run.load(run.args.rm, "rm")
    pairs = io.load_pairs(run.args.pairs or run.data_dir / "pairs.jsonl")
    padding = run.args.padding if run.args.padding is not None else run.cfg.probe.padding
    report = length_bias_probe(rm, pairs, padding, pooling=run.cfg.rm.pooling, workers=run.workers)
    path = run.write_report(run.args.name, report.to_dict())
    return f"probe-length: +{padding} filler, mean delta {report.mean_delta:.4f}, flips {report.flip_fraction:.3f} -> {path}"


COMMANDS: Dict[str, Callable[[Run], str]] = {
    "gen-tasks": cmd_gen_tasks,
    "train-sft": cmd_train_sft,
    "build-prefs": cmd_build_prefs,
    "train-rm": cmd_train_rm,
    "eval-rm": cmd_eval_rm,
    "train-ppo": cmd_train_ppo,
    "sample": cmd_sample,
    "bon": cmd_bon,
    "clean-data": cmd_clean_data,
    "probe-length": cmd_probe_length,
}


# --- PARSER ---

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'section.key = value' config file")
    common.add_argument("--seed", type=int, help="run seed (overrides run.seed)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--out", help="root directory for data/, checkpoints/ and reports/")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="prefrl", description="Desk-scale preference optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-tasks", parents=[common], help="generate synthetic tasks")

    p = sub.add_parser("train-sft", parents=[common], help="supervised warm start on gold responses")
    p.add_argument("--tasks")
    p.add_argument("--init")

    p = sub.add_parser("build-prefs", parents=[common], help="sample candidates and label preference pairs")
    p.add_argument("--tasks")
    p.add_argument("--policy")

    p = sub.add_parser("train-rm", parents=[common], help="train the reward model")
    p.add_argument("--pairs")
    p.add_argument("--init")
    p.add_argument("--name", default="rm", help="checkpoint and log name")
    p.add_argument("--no-length-filter", action="store_true", help="train on all pairs (length ablation)")

    p = sub.add_parser("eval-rm", parents=[common], help="benchmark a reward model")
    p.add_argument("--rm")
    p.add_argument("--bench", help="benchmark JSON-lines file with a category per record")
    p.add_argument("--pairs", help="pairs grouped by domain when no --bench is given")

    p = sub.add_parser("train-ppo", parents=[common], help="optimize the policy against the reward model")
    p.add_argument("--policy")
    p.add_argument("--rm")
    p.add_argument("--tasks")

    p = sub.add_parser("sample", parents=[common], help="sample one response per prompt")
    p.add_argument("--policy")
    p.add_argument("--tasks")

    p = sub.add_parser("bon", parents=[common], help="best-of-N selection with the reward model")
    p.add_argument("--policy")
    p.add_argument("--rm")
    p.add_argument("--tasks")
    p.add_argument("--n", type=int)

    p = sub.add_parser("clean-data", parents=[common], help="flag low-scoring samples")
    p.add_argument("--rm")
    p.add_argument("--tasks")
    p.add_argument("--corrupt", type=float, default=0.0, help="fraction of samples to corrupt before cleaning")

    p = sub.add_parser("probe-length", parents=[common], help="measure reward shift from inert padding")
    p.add_argument("--rm")
    p.add_argument("--pairs")
    p.add_argument("--padding", type=int)
    p.add_argument("--name", default="length_probe", help="report name")
    return parser


def resolve_config(args: argparse.Namespace) -> config.RunConfig:
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if getattr(args, "no_length_filter", False):
        overrides.append("rm.length_ratio_max=none")
    if args.out:
        root = Path(args.out)
        overrides += [f"paths.{name}={root / name}" for name in ("data", "checkpoints", "reports")]
    return config.load_config(args.config, overrides)


def run_command(args: argparse.Namespace) -> int:
    try:
        run = Run(resolve_config(args), args)
        summary = COMMANDS[args.command](run)
    except PrefRLError as e:
        logger.error(f"{args.command} failed: {e}")
        print(json.dumps(e.to_dict(), sort_keys=True), file=sys.stderr)
        return 1
    print(summary)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    return run_command(build_parser().parse_args(argv))
