from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass
class ProductionConfig:
    max_depth: int = 8
    inputs: int = 1
    separator: bytes = b"\n"
    start_key: Optional[str] = None

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.inputs < 1:
            raise ValueError("inputs must be at least 1")


@dataclass
class RunReport:
    engine: str = ""
    grammar: str = ""
    depth: int = 0
    seed: int = 0
    inputs: int = 0
    bytes: int = 0
    production_seconds: float = 0.0
    max_stack: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def kib_per_second(self) -> float:
        if self.production_seconds <= 0:
            return float("inf")
        return self.bytes / 1024 / self.production_seconds
