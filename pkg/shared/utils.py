# ============================================================================
# shared/utils.py - Basic utilities
# ============================================================================

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Sequence, Tuple

import numpy as np

from shared.errors import CorpusFormatError

logger = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; every random draw in the package goes through one of these"""
    return np.random.default_rng(seed)


def iter_jsonl(path: str) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """Yield (line_number, record) for every non-blank line of a JSON-lines file"""
    with open(path, "r", encoding="utf-8") as f:
        for line_num, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"invalid JSON: {e.msg}", line=line_num)
            yield line_num, record


def write_jsonl(path: str, records: Iterable[Dict[str, Any]]) -> int:
    """Write records atomically, one compact JSON object per line"""
    lines = [json.dumps(record, ensure_ascii=False, separators=(",", ":")) for record in records]
    atomic_write_text(path, "".join(line + "\n" for line in lines))
    return len(lines)


def atomic_write_text(path: str, content: str) -> None:
    atomic_write_bytes(path, content.encode("utf-8"))


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write to a temp file next to the target, then rename over it"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp_path, target)
    except Exception as e:
        logger.error(f"Failed to write {path}: {e}")
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def format_table(headers: Sequence[str], rows: Sequence[Sequence[Any]], float_fmt: str = "{:.4f}") -> str:
    """Render rows as an aligned plain-text table"""
    def cell(value: Any) -> str:
        if isinstance(value, float):
            return float_fmt.format(value)
        return str(value)

    text_rows: List[List[str]] = [[cell(v) for v in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in text_rows:
        for i, value in enumerate(row):
            widths[i] = max(widths[i], len(value))

    def line(values: Sequence[str]) -> str:
        return "  ".join(v.ljust(widths[i]) if i == 0 else v.rjust(widths[i]) for i, v in enumerate(values))

    out = [line(list(headers)), "  ".join("-" * w for w in widths)]
    out.extend(line(row) for row in text_rows)
    return "\n".join(out)
