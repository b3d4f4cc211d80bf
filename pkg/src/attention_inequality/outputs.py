"""Atomic, reproducible file output."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from typing import Any, Iterable, Sequence


def fmt_num(v: Any) -> str:
    """Round-trip-safe decimal: integers as-is, floats to 17 significant digits."""
    if isinstance(v, (bool,)):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if hasattr(v, "item"):
        return fmt_num(v.item())
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt_num(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def json_text(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def read_input(path: str | os.PathLike) -> tuple[str, str]:
    """Read a UTF-8 file, returning ``(text, sha256 of the exact bytes)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    return data.decode("utf-8"), hashlib.sha256(data).hexdigest()


class OutputSet:
    """Files staged in memory and published together.

    :meth:`commit` writes every file to a temporary name in the target
    directory first and only then renames them into place, so an exception
    while staging or writing never leaves a partially written output.
    """

    def __init__(self, out_dir: str | os.PathLike):
        self.out_dir = os.fspath(out_dir)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def names(self) -> list[str]:
        return list(self.files)

    def commit(self) -> list[str]:
        os.makedirs(self.out_dir, exist_ok=True)
        staged = []
        try:
            for name, text in self.files.items():
                fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=self.out_dir)
                staged.append((tmp, os.path.join(self.out_dir, name)))
                with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
        except BaseException:
            for tmp, _ in staged:
                _unlink(tmp)
            raise
        for tmp, final in staged:
            os.replace(tmp, final)
        return [final for _, final in staged]


def write_atomic(path: str | os.PathLike, text: str) -> None:
    out = OutputSet(os.path.dirname(os.fspath(path)) or ".")
    out.add(os.path.basename(os.fspath(path)), text)
    out.commit()


def _unlink(path: str) -> None:
    try:
        os.unlink(path)
    except FileNotFoundError:
        pass
