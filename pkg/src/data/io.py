"""
JSON-lines persistence for tasks, preference pairs and benchmark sets.
Every record carries a "format" field plus the run metadata it was produced under.
"""
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from .. import config
from ..errors import DataError
from ..model.network import ModalContext
from ..reward.types import PreferencePair
from .tasks import Constraint, SyntheticTask

logger = logging.getLogger(__name__)


def _modal_to_json(modal: Optional[ModalContext]) -> Optional[List[float]]:
    return list(modal.observation) if modal is not None and modal.present else None


def _modal_from_json(values) -> Optional[ModalContext]:
    return ModalContext.from_vector(values) if values is not None else None


def _tokens(record: Mapping[str, Any], key: str, where: str) -> Tuple[int, ...]:
    value = record.get(key)
    if not isinstance(value, list) or not all(isinstance(t, int) for t in value):
        raise DataError(f"{where}: field {key!r} must be a list of integer token ids")
    return tuple(value)


def pair_to_record(pair: PreferencePair) -> Dict[str, Any]:
    return {
        "id": pair.pair_id,
        "prompt_tokens": list(pair.prompt_tokens),
        "modal": _modal_to_json(pair.modal),
        "chosen_tokens": list(pair.chosen),
        "rejected_tokens": list(pair.rejected),
        "domain_tag": pair.domain_tag,
        "source_tag": pair.source_tag,
    }


def pair_from_record(record: Mapping[str, Any], where: str = "record") -> PreferencePair:
    try:
        return PreferencePair(
            pair_id=str(record["id"]),
            prompt_tokens=_tokens(record, "prompt_tokens", where),
            chosen=_tokens(record, "chosen_tokens", where),
            rejected=_tokens(record, "rejected_tokens", where),
            domain_tag=record.get("domain_tag", "general"),
            source_tag=record.get("source_tag", "synthetic_gold"),
            modal=_modal_from_json(record.get("modal")),
        )
    except KeyError as e:
        raise DataError(f"{where}: missing field {e.args[0]!r}")


def task_to_record(task: SyntheticTask) -> Dict[str, Any]:
    return {
        "id": task.task_id,
        "kind": task.kind,
        "prompt_tokens": list(task.prompt_tokens),
        "modal": _modal_to_json(task.modal),
        "gold_answer": list(task.gold_answer),
        "constraint": task.constraint.to_dict() if task.constraint else None,
        "gold_reward_fn": task.gold_reward_fn,
    }


def task_from_record(record: Mapping[str, Any], where: str = "record") -> SyntheticTask:
    try:
        c = record.get("constraint")
        return SyntheticTask(
            task_id=str(record["id"]),
            kind=str(record["kind"]),
            prompt_tokens=_tokens(record, "prompt_tokens", where),
            modal=_modal_from_json(record.get("modal")),
            gold_answer=tuple(record.get("gold_answer") or ()),
            constraint=Constraint(c["kind"], int(c["value"])) if c else None,
            gold_reward_fn=record.get("gold_reward_fn", "linear_v1"),
        )
    except KeyError as e:
        raise DataError(f"{where}: missing field {e.args[0]!r}")


# --- FILES ---

def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_jsonl(path, records: Sequence[Mapping[str, Any]], meta: Mapping[str, Any]) -> Path:
    """Writes one JSON object per line, each merged with `meta` (format, config hash, seed)."""
    path = Path(path)
    lines = [json.dumps({**r, **meta}, sort_keys=True, separators=(",", ":")) for r in records]
    _atomic_write(path, "".join(line + "\n" for line in lines))
    logger.info(f"Wrote {len(lines)} records to {path}")
    return path


def iter_jsonl(path, expected_format: Optional[str] = None) -> Iterator[Tuple[str, Dict[str, Any]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{where}: malformed JSON ({e.msg})")
            if expected_format and record.get("format") != expected_format:
                raise DataError(f"{where}: expected format {expected_format!r}, got {record.get('format')!r}")
            yield where, record


def write_json(path, document: Mapping[str, Any]) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(document, sort_keys=True, indent=2) + "\n")
    logger.info(f"Wrote {path}")
    return path


def read_json(path) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: malformed JSON ({e.msg})")


def save_pairs(path, pairs: Sequence[PreferencePair], meta: Mapping[str, Any]) -> Path:
    return write_jsonl(path, [pair_to_record(p) for p in pairs], {**meta, "format": config.PAIRS_FORMAT})


def load_pairs(path) -> List[PreferencePair]:
    pairs = [pair_from_record(r, where) for where, r in iter_jsonl(path, config.PAIRS_FORMAT)]
    logger.info(f"Loaded {len(pairs)} preference pairs from {path}")
    return pairs


def save_tasks(path, tasks: Sequence[SyntheticTask], meta: Mapping[str, Any]) -> Path:
    return write_jsonl(path, [task_to_record(t) for t in tasks], {**meta, "format": config.TASKS_FORMAT})


def load_tasks(path) -> List[SyntheticTask]:
    tasks = [task_from_record(r, where) for where, r in iter_jsonl(path, config.TASKS_FORMAT)]
    logger.info(f"Loaded {len(tasks)} tasks from {path}")
    return tasks


def save_bench(path, categories: Mapping[str, Sequence[PreferencePair]], meta: Mapping[str, Any]) -> Path:
    records = [{**pair_to_record(p), "category": name} for name, pairs in categories.items() for p in pairs]
    return write_jsonl(path, records, {**meta, "format": config.BENCH_FORMAT})


def load_bench_records(path) -> Dict[str, List[PreferencePair]]:
    """Category name -> pairs, in file order."""
    categories: Dict[str, List[PreferencePair]] = {}
    for where, record in iter_jsonl(path, config.BENCH_FORMAT):
        if "category" not in record:
            raise DataError(f"{where}: missing field 'category'")
        categories.setdefault(str(record["category"]), []).append(pair_from_record(record, where))
    return categories
