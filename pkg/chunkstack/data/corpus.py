import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

logger = logging.getLogger(__name__)


class Record(BaseModel):
    """One labeled document. ``text`` may be empty."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    text: str
    label: int = Field(..., ge=0)


def load_corpus(path: Union[str, Path], n_class: Optional[int] = None) -> List[Record]:
    """
    Read newline-delimited JSON records ("id", "text", "label") in file order.

    Blank lines are skipped.

    Raises:
        ValueError: On a malformed line (message names the 1-based line number) or a
            label outside [0, n_class)
    """
    records: List[Record] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
                if not isinstance(payload, dict):
                    raise ValueError("expected a JSON object")
                if isinstance(payload.get("label"), bool) or not isinstance(payload.get("label"), int):
                    raise ValueError(f"label must be an integer, got {payload.get('label')!r}")
                record = Record(**payload)
            except (ValueError, TypeError, ValidationError) as exc:
                raise ValueError(f"{path}: malformed record on line {line_no}: {exc}") from None
            if n_class is not None and record.label >= n_class:
                raise ValueError(
                    f"{path}: line {line_no}: label {record.label} outside [0, {n_class})"
                )
            records.append(record)
    logger.info(f"Loaded {len(records)} records from {path}")
    return records


def load_texts(path: Union[str, Path]) -> List[Tuple[str, str]]:
    """Read (id, text) pairs from JSON lines; a "label" field is allowed and ignored."""
    pairs: List[Tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except ValueError as exc:
                raise ValueError(f"{path}: malformed record on line {line_no}: {exc}") from None
            if not isinstance(payload, dict) or not isinstance(payload.get("id"), str) or not isinstance(
                payload.get("text"), str
            ):
                raise ValueError(f"{path}: line {line_no}: expected string fields 'id' and 'text'")
            pairs.append((payload["id"], payload["text"]))
    return pairs


def write_corpus(path: Union[str, Path], records: Iterable[Record]) -> int:
    """Write records as UTF-8 JSON lines; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {"id": record.id, "text": record.text, "label": record.label},
                    ensure_ascii=False,
                )
                + "\n"
            )
            count += 1
    logger.debug(f"Wrote {count} records to {path}")
    return count


def label_count(records: Iterable[Record]) -> int:
    """Number of classes implied by the labels (largest label + 1, at least 2)."""
    return max([2] + [r.label + 1 for r in records])
