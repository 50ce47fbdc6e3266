"""Deterministic JSON reading and writing.

All artifacts are written with sorted keys, compact separators and a trailing
newline so identical inputs produce byte-identical files. Floats go through
Python's repr (shortest round-trip), so values survive a write/read cycle
exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .errors import DocumentError


def dumps(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def write(path: str | Path, doc: Any) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def read(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"{path}: {exc.strerror or exc}") from exc
    return parse(text, str(path))


def parse(text: str, source: str = "<string>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{source}: invalid JSON: {exc}") from exc
