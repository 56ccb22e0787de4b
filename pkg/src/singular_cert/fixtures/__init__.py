"""Benchmark systems shipped with the package."""

from __future__ import annotations

from importlib import resources

from ..parsing import SystemFile, parse_system


def names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files(__name__).iterdir() if p.name.endswith(".sys"))


def text(name: str) -> str:
    path = resources.files(__name__) / f"{name}.sys"
    if not path.is_file():
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(names())}")
    return path.read_text(encoding="utf-8")


def load(name: str) -> SystemFile:
    return parse_system(text(name))
