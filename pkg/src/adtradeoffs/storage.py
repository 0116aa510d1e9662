"""Line-delimited record files and flat CSV mirrors.

Every dataset and report in the package is a text file with one JSON
object per line, streamable and diff-friendly, plus CSV mirrors for the
reports so plotting tools need no JSON parsing.  Non-finite floats are
written as nulls: NaN is not valid JSON and an undefined value should
stay visibly undefined after a round trip.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import ParseError


def jsonable(value: Any) -> Any:
    """Recursively convert a value to something json.dump accepts."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()  # numpy scalar
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dumps(obj: Any) -> str:
    """One deterministic JSON line; reruns must be byte-identical."""
    return json.dumps(jsonable(obj), sort_keys=True, allow_nan=False,
                      separators=(",", ":"))


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps(record))
            fh.write("\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) pairs; blank lines are skipped.

    Raises:
        ParseError: On a line that is not a JSON object, naming the file
            and 1-based line number.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ParseError(f"{path}:{lineno}: expected an object")
            yield lineno, obj


def write_json(path: str | Path, obj: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(jsonable(obj), sort_keys=True, allow_nan=False, indent=2) + "\n",
        encoding="utf-8",
    )


def write_csv(path: str | Path, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in (jsonable(x) for x in row)])
