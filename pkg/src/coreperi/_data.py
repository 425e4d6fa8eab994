"""Loaders for the plain-text tables bundled under ``coreperi/data``."""
from __future__ import annotations

from functools import cache
from importlib import resources
from pathlib import Path


def data_path(name: str) -> Path:
    return Path(str(resources.files("coreperi") / "data" / name))


def read_lines(path: str | Path) -> list[str]:
    """Non-empty lines of a text file with ``#`` comment lines removed."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.strip() and not line.startswith("#"):
                out.append(line)
    return out


@cache
def bundled_lines(name: str) -> tuple[str, ...]:
    return tuple(read_lines(data_path(name)))
