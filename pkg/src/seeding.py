"""
Named random substreams and worker-count limits.
Every random draw in the toolkit comes from `substream(seed, name)`.
"""
import hashlib
import os
import logging

import numpy as np

from . import config

logger = logging.getLogger(__name__)

DEFAULT_WORKERS = 4


def derive_seed(seed: int, name: str) -> int:
    """Maps (run seed, stream name) to a stable 64-bit seed."""
    digest = hashlib.sha256(f"{int(seed)}/{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, name))


def max_workers(requested: int = DEFAULT_WORKERS) -> int:
    """Caps a worker count by the PREFRL_THREADS environment variable."""
    raw = os.environ.get(config.THREADS_ENV)
    if not raw:
        return max(1, requested)
    try:
        cap = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {config.THREADS_ENV}={raw!r}")
        return max(1, requested)
    return max(1, min(requested, cap))
