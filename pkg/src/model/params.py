"""
Named parameter tensors with trainable masks, shared by policy, reference, critic and reward model.
"""
import logging
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from .. import config, seeding
from ..autodiff import Graph, Tensor
from ..errors import ModelError

logger = logging.getLogger(__name__)

# Frozen tensors stand in for the pre-trained vision encoder and projector.
FROZEN_PARAMS = ("modal_encoder", "modal_projector")


def param_shapes(vocab_size: int, hidden_dim: int, modal_dim: int, max_positions: int) -> Dict[str, Tuple[int, ...]]:
    """Canonical parameter order and shapes."""
    v, d, m, p = vocab_size, hidden_dim, modal_dim, max_positions
    return {
        "token_embedding": (v, d),
        "position_embedding": (p, d),
        "modal_encoder": (m, m),
        "modal_projector": (m, d),
        "mixer_in": (d, d),
        "mixer_ctx": (d, d),
        "mixer_bias": (1, d),
        "lm_head": (d, v),
        "value_head": (d, 1),
        "score_head": (d, 1),
    }


class ModelParams:
    """Ordered mapping of name -> read-only float64 array plus a trainable flag per tensor."""

    def __init__(self, tensors: Mapping[str, np.ndarray], trainable: Mapping[str, bool]):
        if set(tensors) != set(trainable):
            raise ModelError("tensor names and trainable mask disagree")
        self._tensors: Dict[str, np.ndarray] = {}
        for name, value in tensors.items():
            arr = np.array(value, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"parameter {name!r} has non-finite entries")
            arr.setflags(write=False)
            self._tensors[name] = arr
        self._trainable = {name: bool(trainable[name]) for name in self._tensors}

    # --- mapping protocol ---
    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> List[str]:
        return list(self._tensors)

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def trainable_names(self) -> List[str]:
        return [n for n in self._tensors if self._trainable[n]]

    # --- dimensions ---
    @property
    def vocab_size(self) -> int:
        return self._tensors["token_embedding"].shape[0]

    @property
    def hidden_dim(self) -> int:
        return self._tensors["token_embedding"].shape[1]

    @property
    def modal_dim(self) -> int:
        return self._tensors["modal_projector"].shape[0]

    @property
    def max_positions(self) -> int:
        return self._tensors["position_embedding"].shape[0]

    # --- derivation ---
    def replace(self, updates: Mapping[str, np.ndarray]) -> "ModelParams":
        unknown = set(updates) - set(self._tensors)
        if unknown:
            raise ModelError(f"unknown parameters {sorted(unknown)}")
        merged = {n: updates.get(n, self._tensors[n]) for n in self._tensors}
        for n, arr in updates.items():
            if np.shape(arr) != self._tensors[n].shape:
                raise ModelError(f"shape change for {n!r}: {self._tensors[n].shape} -> {np.shape(arr)}")
        return ModelParams(merged, self._trainable)

    def bind(self, graph: Optional[Graph] = None) -> Dict[str, Tensor]:
        """Wraps every tensor for a forward pass; with a graph, trainable ones become leaves."""
        if graph is None:
            return {n: Tensor(a) for n, a in self._tensors.items()}
        return {n: graph.param(n, a, self._trainable[n]) for n, a in self._tensors.items()}

    def identical(self, other: "ModelParams") -> bool:
        """Bit-for-bit equality of names, masks and values."""
        if self.names() != other.names() or self._trainable != other._trainable:
            return False
        return all(self._tensors[n].tobytes() == other._tensors[n].tobytes() for n in self._tensors)

    def __repr__(self):
        frozen = [n for n in self._tensors if not self._trainable[n]]
        return f"ModelParams(V={self.vocab_size}, d={self.hidden_dim}, m={self.modal_dim}, frozen={frozen})"


def init_params(model_cfg: config.ModelConfig, seed: int) -> ModelParams:
    """Deterministic scaled-normal initialization; heads start at zero except lm_head."""
    model_cfg.validate()
    rng = seeding.substream(seed, "model/init")
    shapes = param_shapes(model_cfg.vocab_size, model_cfg.hidden_dim, model_cfg.modal_dim, model_cfg.max_positions)
    tensors = {}
    for name, shape in shapes.items():
        if name in ("value_head", "score_head", "mixer_bias"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = shape[0]
            tensors[name] = rng.normal(0.0, model_cfg.init_scale / np.sqrt(max(fan_in, 1) / 8.0), size=shape)
    trainable = {n: n not in FROZEN_PARAMS for n in shapes}
    logger.info(f"Initialized model V={model_cfg.vocab_size} d={model_cfg.hidden_dim} m={model_cfg.modal_dim}")
    return ModelParams(tensors, trainable)
