"""
Length-bias probe: how much does appending inert filler to the chosen response move its score?
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

import numpy as np

from ..data import vocab
from ..errors import DataError, OpError
from ..model.network import ParamsLike, reward_scores
from ..reward.types import PreferencePair

logger = logging.getLogger(__name__)


@dataclass
class LengthBiasReport:
    padding: int
    n_pairs: int
    mean_delta: float
    flip_fraction: float
    deltas: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "padding": self.padding,
            "n_pairs": self.n_pairs,
            "mean_delta": self.mean_delta,
            "flip_fraction": self.flip_fraction,
        }


def pad_response(response: Sequence[int], padding: int, filler: int = vocab.FILLER) -> tuple:
    """Appends filler after the response, past the stop token, so verifiable content is unchanged."""
    return tuple(response) + (filler,) * padding


def length_bias_probe(
    rm: ParamsLike,
    pairs: Sequence[PreferencePair],
    padding: int,
    filler: int = vocab.FILLER,
    pooling: str = "all",
    workers: int = 1,
) -> LengthBiasReport:
    if padding < 0:
        raise OpError("length_bias_probe", f"padding must be >= 0, got {padding}")
    if not pairs:
        raise DataError("length_bias_probe needs at least one pair")
    chosen = [p.chosen_sample() for p in pairs]
    original = np.array(reward_scores(rm, chosen, pooling, workers))
    padded = np.array(reward_scores(rm, [s.with_response(pad_response(s.response_tokens, padding, filler)) for s in chosen],
                                    pooling, workers)) if padding else original.copy()
    rejected = np.array(reward_scores(rm, [p.rejected_sample() for p in pairs], pooling, workers))

    deltas = padded - original
    flips = (original > rejected) != (padded > rejected)
    report = LengthBiasReport(padding, len(pairs), float(deltas.mean()), float(flips.mean()), deltas.tolist())
    logger.info(f"Length probe (+{padding} filler): mean delta={report.mean_delta:.4f}, flips={report.flip_fraction:.3f}")
    return report
