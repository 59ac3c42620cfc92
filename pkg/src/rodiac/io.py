"""Artifact files: CSV sheets and line-delimited JSON records.

Every artifact written by the pipeline starts with one ``#`` comment line
naming the tool version and the manifest digest; the readers here skip it.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional

from . import __version__


def header_line(digest: Optional[str]) -> str:
    return f"# rodiac {__version__} manifest={digest or '-'}"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: "str | os.PathLike", header: List[str], rows: Iterable[list],
              digest: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header_line(digest) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(path: "str | os.PathLike") -> List[Dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def write_jsonl(path: "str | os.PathLike", lines: Iterable[str],
                digest: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if digest is not None:
            fh.write(header_line(digest) + "\n")
        for line in lines:
            fh.write(line + "\n")
    return path


def read_jsonl(path: "str | os.PathLike") -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            yield json.loads(line)
