"""
Reward-score data cleaning: score every (prompt, answer, modal) sample and flag
the ones falling below a threshold as likely corrupt.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .. import seeding
from ..errors import DataError
from ..model.network import SequenceSample, reward_scores
from ..model.params import ModelParams
from . import vocab
from .tasks import SyntheticTask, gold_response

logger = logging.getLogger(__name__)

CORRUPTION_KINDS = ("shuffled_answer", "empty_answer", "mismatched_modal")


@dataclass(frozen=True)
class Threshold:
    mode: str = "percentile"
    value: float = 5.0

    @classmethod
    def absolute(cls, value: float) -> "Threshold":
        return cls("absolute", float(value))

    @classmethod
    def percentile(cls, p: float) -> "Threshold":
        if not 0.0 <= p <= 100.0:
            raise DataError(f"percentile must lie in [0, 100], got {p}")
        return cls("percentile", float(p))


@dataclass
class CleaningReport:
    sample_ids: List[str]
    scores: List[float]
    flagged: List[str]
    threshold: float
    spec: Threshold
    summary: Dict[str, Optional[float]]
    recall: Dict[str, float] = field(default_factory=dict)
    ranking: Optional[List[float]] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "threshold": self.threshold if math.isfinite(self.threshold) else repr(self.threshold),
            "threshold_mode": self.spec.mode,
            "threshold_value": self.spec.value,
            "normalized": self.ranking is not None,
            "flagged": list(self.flagged),
            "n_samples": len(self.scores),
            "n_flagged": len(self.flagged),
            "summary": dict(self.summary),
            "recall": dict(self.recall),
            "scores": {sid: s for sid, s in zip(self.sample_ids, self.scores)},
            "ranking_scores": (
                {sid: r for sid, r in zip(self.sample_ids, self.ranking)} if self.ranking is not None else None
            ),
        }


def resolve_threshold(scores: Sequence[float], spec: Threshold) -> float:
    """Absolute thresholds pass through; percentile p flags at most floor(p*n/100) samples."""
    if spec.mode == "absolute":
        return spec.value
    if spec.mode != "percentile":
        raise DataError(f"unknown threshold mode {spec.mode!r}")
    ordered = np.sort(np.asarray(scores, dtype=np.float64))
    k = int(math.floor(spec.value * len(ordered) / 100.0 + 1e-9))
    if k >= len(ordered):
        return float(np.nextafter(ordered[-1], np.inf))
    # Scores equal to the k-th smallest stay unflagged, so ties flag fewer.
    return float(ordered[k])


def score_summary(scores: Sequence[float]) -> Dict[str, Optional[float]]:
    desc = pd.Series(scores, dtype="float64").describe(percentiles=[0.05, 0.25, 0.5, 0.75, 0.95])
    desc = desc.rename({"50%": "median"})
    return {k: (None if pd.isna(v) else float(v)) for k, v in desc.items()}


def normalize_by_group(scores: Sequence[float], groups: Sequence[str]) -> List[float]:
    """Per-group z-score around the median: (score - group median) / group std; a zero or undefined std counts as 1."""
    if len(scores) != len(groups):
        raise DataError(f"{len(groups)} group labels for {len(scores)} scores")
    frame = pd.DataFrame({"score": np.asarray(scores, dtype=np.float64), "group": list(groups)})
    by_group = frame.groupby("group")["score"]
    centre = by_group.transform("median")
    spread = by_group.transform("std").fillna(0.0)
    spread = spread.where(spread > 0.0, 1.0)
    return [float(v) for v in (frame["score"] - centre) / spread]


def cleaning_groups(tasks: Sequence[SyntheticTask], normalize: str) -> Optional[List[str]]:
    """Group labels for `clean_dataset`: one per task kind, one per distinct prompt, or None."""
    if normalize == "none":
        return None
    if normalize == "kind":
        return [t.kind for t in tasks]
    if normalize == "prompt":
        return [f"{t.kind}:" + " ".join(str(tok) for tok in t.prompt_tokens) for t in tasks]
    raise DataError(f"unknown cleaning normalization {normalize!r}")


def clean_dataset(
    rm: ModelParams,
    samples: Sequence[SequenceSample],
    threshold: Threshold,
    sample_ids: Optional[Sequence[str]] = None,
    corrupted: Optional[Mapping[str, str]] = None,
    pooling: str = "all",
    workers: int = 1,
    groups: Optional[Sequence[str]] = None,
) -> CleaningReport:
    """
    Flags samples scoring below the threshold. With `groups` (e.g. task kinds) a percentile
    threshold ranks by the per-group normalized score; an absolute threshold always
    applies to raw scores.
    """
    if not samples:
        raise DataError("clean_dataset needs at least one sample")
    ids = list(sample_ids) if sample_ids is not None else [f"sample-{i:05d}" for i in range(len(samples))]
    if len(ids) != len(samples):
        raise DataError(f"{len(ids)} ids for {len(samples)} samples")

    # 1. Score with the reward model
    scores = reward_scores(rm, samples, pooling, workers)

    ranking = normalize_by_group(scores, groups) if groups is not None else None

    # 2. Threshold and flag
    ranked = ranking if ranking is not None and threshold.mode == "percentile" else scores
    cut = resolve_threshold(ranked, threshold)
    flagged = [sid for sid, s in zip(ids, ranked) if s < cut]

    # 3. Recovery of known corruptions, per kind
    recall: Dict[str, float] = {}
    if corrupted:
        flagged_set = set(flagged)
        frame = pd.DataFrame({"id": list(corrupted), "kind": list(corrupted.values())})
        frame["caught"] = frame["id"].isin(flagged_set)
        recall = {k: float(v) for k, v in frame.groupby("kind")["caught"].mean().items()}
        recall["overall"] = float(frame["caught"].mean())

    logger.info(f"Cleaning flagged {len(flagged)} of {len(samples)} samples below {cut:.4f}")
    return CleaningReport(
        ids, [float(s) for s in scores], flagged, cut, threshold, score_summary(scores), recall, ranking
    )


def task_samples(tasks: Sequence[SyntheticTask]) -> List[SequenceSample]:
    """A clean instruction-tuning style corpus: every task with its gold response."""
    return [t.sample(gold_response(t)) for t in tasks]


def corrupt_samples(
    samples: Sequence[SequenceSample], fraction: float, seed: int
) -> Tuple[List[SequenceSample], Dict[int, str]]:
    """Injects shuffled answers, empty answers and mismatched modal contexts into a copy of `samples`."""
    if not 0.0 <= fraction <= 1.0:
        raise DataError(f"corruption fraction must lie in [0, 1], got {fraction}")
    rng = seeding.substream(seed, "clean/corrupt")
    out = list(samples)
    n = int(round(fraction * len(out)))
    targets = sorted(int(i) for i in rng.permutation(len(out))[:n])
    modal_idx = [i for i, s in enumerate(out) if s.has_modal]
    corrupted: Dict[int, str] = {}

    for j, i in enumerate(targets):
        kind = CORRUPTION_KINDS[j % len(CORRUPTION_KINDS)]
        src = samples[i]
        if kind == "mismatched_modal":
            donors = [d for d in modal_idx if d != i and samples[d].modal != src.modal]
            if src.has_modal and donors:
                donor = samples[donors[int(rng.integers(0, len(donors)))]]
                out[i] = SequenceSample(src.prompt_tokens, src.response_tokens, donor.modal)
                corrupted[i] = kind
                continue
            kind = "shuffled_answer"
        if kind == "shuffled_answer":
            donors = [d for d in range(len(samples)) if samples[d].response_tokens != src.response_tokens]
            if donors:
                donor = samples[donors[int(rng.integers(0, len(donors)))]]
                out[i] = src.with_response(donor.response_tokens)
                corrupted[i] = kind
                continue
            kind = "empty_answer"
        out[i] = src.with_response((vocab.EOS,))
        corrupted[i] = kind

    logger.info(f"Corrupted {len(corrupted)} of {len(out)} samples")
    return out, corrupted
