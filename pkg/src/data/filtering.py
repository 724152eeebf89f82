"""
Length-constraint filtering of preference pairs.
"""
import logging
from typing import List, Sequence, Tuple

from ..errors import OpError
from ..reward.types import PreferencePair

logger = logging.getLogger(__name__)


def length_ratio(pair: PreferencePair) -> float:
    return len(pair.chosen) / len(pair.rejected)


def length_filter(pairs: Sequence[PreferencePair], ratio_max: float) -> Tuple[List[PreferencePair], List[PreferencePair]]:
    """Drops pairs whose chosen response is more than `ratio_max` times longer than the rejected one."""
    if not ratio_max > 0:
        raise OpError("length_filter", f"ratio_max must be positive, got {ratio_max}")
    kept, removed = [], []
    for pair in pairs:
        (removed if length_ratio(pair) > ratio_max else kept).append(pair)
    if removed:
        logger.info(f"Length filter (ratio_max={ratio_max}) removed {len(removed)} of {len(pairs)} pairs")
    return kept, removed
