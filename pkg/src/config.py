"""
Configuration module for the preference-optimization toolkit.
Centralizes training defaults, model dimensions, and the flat run-config format.
"""
import dataclasses
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union, get_type_hints

from .errors import ConfigError

logger = logging.getLogger(__name__)

# --- TRAINING DEFAULTS ---
RM_LEARNING_RATE = 1e-5
POLICY_LEARNING_RATE = 5e-5
DEFAULT_BATCH_SIZE = 256
PPO_GAMMA = 0.99
PPO_GAE_BETA = 0.95
PPO_CLIP_EPSILON = 0.2

# --- OPTIMIZER ---
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# --- MODEL ---
DEFAULT_HIDDEN_DIM = 32
DEFAULT_MODAL_DIM = 8
DEFAULT_MAX_POSITIONS = 32
INIT_SCALE = 0.1

# --- DATA ---
LENGTH_RATIO_MAX = 2.0      # chosen/rejected token ratio above which a pair is dropped
JUDGE_LENGTH_BIAS = 0.1     # per-filler bonus of the opt-in biased_judge labeler
CLEAN_PERCENTILE = 5.0

# --- FILE FORMATS ---
CHECKPOINT_MAGIC = b"PRFL"
CHECKPOINT_VERSION = 1
PAIRS_FORMAT = "prefrl.pairs/1"
TASKS_FORMAT = "prefrl.tasks/1"
BENCH_FORMAT = "prefrl.bench/1"
REPORT_FORMAT = "prefrl.report/1"
LOG_FORMAT = "prefrl.log/1"

THREADS_ENV = "PREFRL_THREADS"

RATIO_DENOMINATORS = ("rollout_snapshot", "reference_model")
REWARD_MODES = ("terminal_only", "per_step")
POOLING_MODES = ("all", "response")
JUDGES = ("verifier", "gold_reward", "biased_judge", "auto")
THRESHOLD_MODES = ("percentile", "absolute")
CLEAN_NORMALIZATIONS = ("none", "kind", "prompt")


@dataclass
class ModelConfig:
    vocab_size: int = 32
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    modal_dim: int = DEFAULT_MODAL_DIM
    max_positions: int = DEFAULT_MAX_POSITIONS
    init_scale: float = INIT_SCALE

    def validate(self):
        if not 32 <= self.hidden_dim <= 128:
            raise ConfigError("model.hidden_dim must lie in [32, 128]", "model.hidden_dim")
        for name in ("vocab_size", "modal_dim", "max_positions"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be positive", f"model.{name}")


@dataclass
class RMTrainConfig:
    lr: float = RM_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    max_steps: int = 1000
    eval_fraction: float = 0.1
    length_ratio_max: Optional[float] = LENGTH_RATIO_MAX
    pooling: str = "all"
    grad_clip: Optional[float] = None
    log_every: int = 50

    def validate(self):
        if not 0.0 < self.eval_fraction < 1.0:
            raise ConfigError("rm.eval_fraction must lie in (0, 1)", "rm.eval_fraction")
        if self.length_ratio_max is not None and self.length_ratio_max <= 0:
            raise ConfigError("rm.length_ratio_max must be positive or none", "rm.length_ratio_max")
        if self.pooling not in POOLING_MODES:
            raise ConfigError(f"rm.pooling must be one of {POOLING_MODES}", "rm.pooling")
        if self.batch_size < 1 or self.max_steps < 0:
            raise ConfigError("rm.batch_size must be >= 1 and rm.max_steps >= 0", "rm.batch_size")


@dataclass
class PPOConfig:
    gamma: float = PPO_GAMMA
    gae_beta: float = PPO_GAE_BETA
    clip_epsilon: float = PPO_CLIP_EPSILON
    lr: float = POLICY_LEARNING_RATE
    critic_lr: float = POLICY_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    updates: int = 200
    rollouts_per_update: int = 32
    kl_penalty_coeff: float = 0.0
    ratio_denominator: str = "rollout_snapshot"
    reward_mode: str = "terminal_only"
    normalize_advantages: bool = True
    policy_epochs: int = 1
    log_every: int = 10

    def validate(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("ppo.gamma must lie in (0, 1]", "ppo.gamma")
        if not 0.0 <= self.gae_beta <= 1.0:
            raise ConfigError("ppo.gae_beta must lie in [0, 1]", "ppo.gae_beta")
        if self.clip_epsilon <= 0:
            raise ConfigError("ppo.clip_epsilon must be positive", "ppo.clip_epsilon")
        if self.ratio_denominator not in RATIO_DENOMINATORS:
            raise ConfigError(f"ppo.ratio_denominator must be one of {RATIO_DENOMINATORS}", "ppo.ratio_denominator")
        if self.reward_mode not in REWARD_MODES:
            raise ConfigError(f"ppo.reward_mode must be one of {REWARD_MODES}", "ppo.reward_mode")
        if self.rollouts_per_update < 1 or self.batch_size < 1 or self.policy_epochs < 1:
            raise ConfigError("ppo.rollouts_per_update, ppo.batch_size and ppo.policy_epochs must be >= 1", "ppo.batch_size")
        if self.kl_penalty_coeff < 0:
            raise ConfigError("ppo.kl_penalty_coeff must be >= 0", "ppo.kl_penalty_coeff")
        if self.lr <= 0 or self.critic_lr <= 0:
            raise ConfigError("ppo.lr and ppo.critic_lr must be positive", "ppo.lr")


@dataclass
class SFTConfig:
    lr: float = 1e-2
    steps: int = 200
    batch_size: int = 32
    log_every: int = 50


@dataclass
class DecodeConfig:
    temperature: float = 1.0
    max_len: int = 8
    stop_token: int = 1
    greedy: bool = False

    def validate(self):
        if not self.greedy and self.temperature < 0:
            raise ConfigError("decode.temperature must be positive", "decode.temperature")
        if self.max_len < 1:
            raise ConfigError("decode.max_len must be >= 1", "decode.max_len")

    @property
    def is_greedy(self) -> bool:
        return self.greedy or self.temperature == 0.0


@dataclass
class TaskMixConfig:
    count: int = 500
    arithmetic: float = 1.0
    instruction_constraint: float = 1.0
    modal_count: float = 0.5
    freeform_gold: float = 0.5

    def weights(self) -> Dict[str, float]:
        return {
            "arithmetic": self.arithmetic,
            "instruction_constraint": self.instruction_constraint,
            "modal_count": self.modal_count,
            "freeform_gold": self.freeform_gold,
        }

    def validate(self):
        w = self.weights()
        if any(v < 0 for v in w.values()) or sum(w.values()) <= 0:
            raise ConfigError("tasks.* weights must be non-negative with a positive sum", "tasks")


@dataclass
class PairConfig:
    k_candidates: int = 4
    judge: str = "auto"
    gold_fallback: bool = True
    judge_length_bias: float = JUDGE_LENGTH_BIAS

    def validate(self):
        if self.k_candidates < 2:
            raise ConfigError("pairs.k_candidates must be >= 2", "pairs.k_candidates")
        if self.judge not in JUDGES:
            raise ConfigError(f"pairs.judge must be one of {JUDGES}", "pairs.judge")


@dataclass
class CleanConfig:
    threshold_mode: str = "percentile"
    value: float = CLEAN_PERCENTILE
    normalize: str = "prompt"

    def validate(self):
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ConfigError(f"clean.threshold_mode must be one of {THRESHOLD_MODES}", "clean.threshold_mode")
        if self.threshold_mode == "percentile" and not 0.0 <= self.value <= 100.0:
            raise ConfigError("clean.value must lie in [0, 100] in percentile mode", "clean.value")
        if self.normalize not in CLEAN_NORMALIZATIONS:
            raise ConfigError(f"clean.normalize must be one of {CLEAN_NORMALIZATIONS}", "clean.normalize")


@dataclass
class BonConfig:
    n: int = 8
    prompts: int = 20


@dataclass
class ProbeConfig:
    padding: int = 4


@dataclass
class PathsConfig:
    data: str = "runs/data"
    checkpoints: str = "runs/checkpoints"
    reports: str = "runs/reports"


@dataclass
class RunSection:
    seed: int = 0


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    paths: PathsConfig = field(default_factory=PathsConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    rm: RMTrainConfig = field(default_factory=RMTrainConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    sft: SFTConfig = field(default_factory=SFTConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    tasks: TaskMixConfig = field(default_factory=TaskMixConfig)
    pairs: PairConfig = field(default_factory=PairConfig)
    clean: CleanConfig = field(default_factory=CleanConfig)
    bon: BonConfig = field(default_factory=BonConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)

    @property
    def seed(self) -> int:
        return self.run.seed

    def validate(self):
        for f in dataclasses.fields(self):
            section = getattr(self, f.name)
            if hasattr(section, "validate"):
                section.validate()

    def resolve_path(self, name: str) -> Path:
        """Returns a configured directory as an absolute path, creating it on demand."""
        p = Path(getattr(self.paths, name)).expanduser().resolve()
        if p.exists() and not p.is_dir():
            raise ConfigError(f"paths.{name} points at a file, not a directory: {p}", f"paths.{name}")
        p.mkdir(parents=True, exist_ok=True)
        return p


# --- FLAT FILE FORMAT ---

def _unwrap_optional(tp) -> Tuple[Any, bool]:
    args = getattr(tp, "__args__", None)
    if getattr(tp, "__origin__", None) is Union and args and type(None) in args:
        return next(a for a in args if a is not type(None)), True
    return tp, False


def _parse_value(key: str, raw: str, tp) -> Any:
    base, optional = _unwrap_optional(tp)
    text = raw.strip()
    if optional and text.lower() == "none":
        return None
    try:
        if base is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if base is int:
            return int(text)
        if base is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}", key)


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def apply_setting(cfg: RunConfig, key: str, raw: str):
    """Sets one `section.key` entry, rejecting anything the schema doesn't name."""
    if "." not in key:
        raise ConfigError(f"unknown config key: {key}", key)
    section_name, field_name = key.split(".", 1)
    section_names = {f.name for f in dataclasses.fields(cfg)}
    if section_name not in section_names:
        raise ConfigError(f"unknown config key: {key}", key)
    section = getattr(cfg, section_name)
    hints = get_type_hints(type(section))
    if field_name not in hints:
        raise ConfigError(f"unknown config key: {key}", key)
    setattr(section, field_name, _parse_value(key, raw, hints[field_name]))


def parse_config_text(text: str, overrides: Optional[List[str]] = None) -> RunConfig:
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'", None)
        key, raw = line.split("=", 1)
        apply_setting(cfg, key.strip(), raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value: {item!r}", None)
        key, raw = item.split("=", 1)
        apply_setting(cfg, key.strip(), raw)
    cfg.validate()
    return cfg


def load_config(path: Optional[str] = None, overrides: Optional[List[str]] = None) -> RunConfig:
    """Reads a flat config file (or the defaults) and applies `--set` overrides."""
    text = ""
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}", None)
        text = p.read_text(encoding="utf-8")
    cfg = parse_config_text(text, overrides)
    logger.debug(f"Loaded config from {path or '<defaults>'} with {len(overrides or [])} overrides")
    return cfg


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for section_field in sorted(dataclasses.fields(cfg), key=lambda f: f.name):
        section = getattr(cfg, section_field.name)
        for f in sorted(dataclasses.fields(section), key=lambda f: f.name):
            lines.append(f"{section_field.name}.{f.name} = {_format_value(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()[:16]


def run_metadata(cfg: RunConfig, format_version: str) -> Dict[str, Any]:
    """The reproducibility stamp embedded into every artifact."""
    return {"config_hash": config_hash(cfg), "seed": cfg.seed, "format": format_version}
