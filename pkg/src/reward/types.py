"""
Preference pairs: the unit of reward-model training.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

from ..errors import DataError
from ..model.network import ModalContext, SequenceSample

DOMAIN_TAGS = ("general", "text_rich", "reasoning", "instruction_following", "video_surrogate")
SOURCE_TAGS = ("judge", "verifier", "synthetic_gold")


@dataclass(frozen=True)
class PreferencePair:
    pair_id: str
    prompt_tokens: Tuple[int, ...]
    chosen: Tuple[int, ...]
    rejected: Tuple[int, ...]
    domain_tag: str = "general"
    source_tag: str = "synthetic_gold"
    modal: Optional[ModalContext] = None

    def __post_init__(self):
        if not self.chosen or not self.rejected:
            raise DataError(f"pair {self.pair_id}: chosen and rejected must be non-empty")
        if tuple(self.chosen) == tuple(self.rejected):
            raise DataError(f"pair {self.pair_id}: chosen and rejected are identical")
        if self.domain_tag not in DOMAIN_TAGS:
            raise DataError(f"pair {self.pair_id}: unknown domain_tag {self.domain_tag!r}")
        if self.source_tag not in SOURCE_TAGS:
            raise DataError(f"pair {self.pair_id}: unknown source_tag {self.source_tag!r}")

    def chosen_sample(self) -> SequenceSample:
        return SequenceSample(self.prompt_tokens, self.chosen, self.modal)

    def rejected_sample(self) -> SequenceSample:
        return SequenceSample(self.prompt_tokens, self.rejected, self.modal)
