"""
Benchmark-style reward-model evaluation: per-category pairwise accuracy,
overall (pooled) accuracy and macro (unweighted per-category mean) accuracy.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd

from ..data import io
from ..errors import DataError
from ..model.network import ParamsLike
from ..reward.training import pair_scores
from ..reward.types import PreferencePair

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchmarkSet:
    categories: Dict[str, Tuple[PreferencePair, ...]]

    def __post_init__(self):
        if not self.categories:
            raise DataError("benchmark has no categories")
        empty = [name for name, pairs in self.categories.items() if not pairs]
        if empty:
            raise DataError(f"benchmark categories without pairs: {empty}")
        object.__setattr__(self, "categories", {k: tuple(v) for k, v in self.categories.items()})

    @classmethod
    def load(cls, path) -> "BenchmarkSet":
        bench = cls(io.load_bench_records(path))
        logger.info(f"Loaded benchmark with {bench.n_pairs} pairs in {len(bench.categories)} categories")
        return bench

    def save(self, path, meta: Mapping[str, Any]):
        return io.save_bench(path, self.categories, meta)

    @property
    def n_pairs(self) -> int:
        return sum(len(v) for v in self.categories.values())


def benchmark_from_pairs(pairs: Sequence[PreferencePair]) -> BenchmarkSet:
    """One category per domain tag, in first-seen order."""
    grouped: Dict[str, List[PreferencePair]] = {}
    for p in pairs:
        grouped.setdefault(p.domain_tag, []).append(p)
    return BenchmarkSet(grouped)


def macro_accuracy(per_category: Mapping[str, float]) -> float:
    if not per_category:
        raise DataError("macro accuracy over zero categories")
    return float(np.mean(list(per_category.values())))


def overall_accuracy(correct: Mapping[str, int], totals: Mapping[str, int]) -> float:
    n = sum(totals.values())
    if n == 0:
        raise DataError("overall accuracy over zero pairs")
    return sum(correct.values()) / n


@dataclass
class BenchReport:
    category_acc: Dict[str, float]
    category_sizes: Dict[str, int]
    overall_acc: float
    macro_acc: float
    mean_chosen_len: float
    mean_rejected_len: float
    category_lengths: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        rows = [
            {
                "category": name,
                "pairs": self.category_sizes[name],
                "accuracy": acc,
                "chosen_len": self.category_lengths.get(name, (np.nan, np.nan))[0],
                "rejected_len": self.category_lengths.get(name, (np.nan, np.nan))[1],
            }
            for name, acc in self.category_acc.items()
        ]
        return pd.DataFrame(rows, columns=["category", "pairs", "accuracy", "chosen_len", "rejected_len"])

    def table(self) -> str:
        """Aligned plain-text table with overall and macro rows."""
        df = self.frame()
        totals = pd.DataFrame([
            {"category": "overall", "pairs": sum(self.category_sizes.values()), "accuracy": self.overall_acc,
             "chosen_len": self.mean_chosen_len, "rejected_len": self.mean_rejected_len},
            {"category": "macro", "pairs": len(self.category_sizes), "accuracy": self.macro_acc,
             "chosen_len": np.nan, "rejected_len": np.nan},
        ])
        return pd.concat([df, totals], ignore_index=True).to_string(index=False, float_format=lambda x: f"{x:.4f}", na_rep="-")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "category_acc": dict(self.category_acc),
            "category_sizes": dict(self.category_sizes),
            "overall_acc": self.overall_acc,
            "macro_acc": self.macro_acc,
            "mean_chosen_len": self.mean_chosen_len,
            "mean_rejected_len": self.mean_rejected_len,
        }


def evaluate_rm(rm: ParamsLike, bench: BenchmarkSet, pooling: str = "all", workers: int = 1) -> BenchReport:
    """A pair is correct when r(chosen) > r(rejected); ties are incorrect."""
    correct: Dict[str, int] = {}
    sizes: Dict[str, int] = {}
    lengths: Dict[str, Tuple[float, float]] = {}
    for name, pairs in bench.categories.items():
        chosen, rejected = pair_scores(rm, pairs, pooling, workers)
        correct[name] = sum(c > r for c, r in zip(chosen, rejected))
        sizes[name] = len(pairs)
        lengths[name] = (float(np.mean([len(p.chosen) for p in pairs])), float(np.mean([len(p.rejected) for p in pairs])))

    per_category = {name: correct[name] / sizes[name] for name in sizes}
    all_pairs = [p for pairs in bench.categories.values() for p in pairs]
    report = BenchReport(
        category_acc=per_category,
        category_sizes=sizes,
        overall_acc=overall_accuracy(correct, sizes),
        macro_acc=macro_accuracy(per_category),
        mean_chosen_len=float(np.mean([len(p.chosen) for p in all_pairs])),
        mean_rejected_len=float(np.mean([len(p.rejected) for p in all_pairs])),
        category_lengths=lengths,
    )
    logger.info(f"Evaluated {len(all_pairs)} pairs: overall={report.overall_acc:.3f} macro={report.macro_acc:.3f}")
    return report
