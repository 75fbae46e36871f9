"""Locating grammar files: explicit paths first, then the bundled corpus."""

from __future__ import annotations

import os
from importlib import resources
from typing import List

BUNDLED = ("expr", "json", "css-subset", "html-subset")


def bundled_dir() -> str:
    return str(resources.files("fastgram") / "grammars")


def grammar_path(name: str) -> str:
    """``name`` if it exists (file or pipe), else the bundled grammar of that name."""
    if os.path.exists(name) and not os.path.isdir(name):
        return name
    stem = os.path.basename(name)
    stem = stem[:-5] if stem.endswith(".json") else stem
    candidate = os.path.join(bundled_dir(), stem + ".json")
    if os.path.isfile(candidate):
        return candidate
    raise FileNotFoundError(f"no grammar file {name!r} (bundled: {', '.join(BUNDLED)})")


def bundled_grammars() -> List[str]:
    return [grammar_path(n) for n in BUNDLED]
