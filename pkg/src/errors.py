"""
Structured exceptions raised across the toolkit.
Library code raises these; the CLI is the only place that catches them.
"""
from typing import Optional, Sequence, Tuple


class PrefRLError(Exception):
    """Base class for every error the toolkit raises on purpose."""

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class ShapeError(PrefRLError):
    """An op received inputs whose shapes it cannot combine."""

    def __init__(self, op: str, shapes: Sequence[Tuple[int, ...]], detail: str = ""):
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        msg = f"{op}: incompatible shapes {self.shapes}"
        super().__init__(f"{msg} ({detail})" if detail else msg)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "op": self.op, "shapes": [list(s) for s in self.shapes]}


class NonFiniteError(PrefRLError):
    """An op produced NaN or infinite values from its inputs."""

    def __init__(self, op: str, detail: str = ""):
        self.op = op
        msg = f"{op}: non-finite output"
        super().__init__(f"{msg} ({detail})" if detail else msg)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "op": self.op}


class GraphError(PrefRLError):
    """Misuse of a recorded graph (non-scalar loss, second backward, ...)."""


class ModelError(PrefRLError):
    """Invalid model input: out-of-range token, empty response, vocab mismatch."""


class DataError(PrefRLError):
    """Dataset problems: empty inputs, zero pairs, malformed records."""


class ConfigError(PrefRLError):
    """Unknown or invalid configuration key."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(message)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "key": self.key}


class CheckpointError(PrefRLError):
    """Checkpoint file is missing, locked or malformed."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{message}: {path}" if path else message)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "path": self.path}


class OpError(PrefRLError):
    """An op was called with invalid non-shape arguments (e.g. clip with lo >= hi)."""

    def __init__(self, op: str, detail: str):
        self.op = op
        super().__init__(f"{op}: {detail}")

    def to_dict(self) -> dict:
        return {**super().to_dict(), "op": self.op}
