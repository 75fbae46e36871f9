"""Integer-table forms of literals and pools, consumed by the compiled core.

Every table is an ``array('i')`` so the core can take typed memoryviews of
it.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass
from typing import Dict, List

from .analysis import AnalyzedGrammar


class Literals:
    """Interned byte strings packed into one arena."""

    def __init__(self):
        self.ids: Dict[bytes, int] = {}
        self.items: List[bytes] = []

    def intern(self, data: bytes) -> int:
        i = self.ids.get(data)
        if i is None:
            i = self.ids[data] = len(self.items)
            self.items.append(data)
        return i

    def pack(self):
        off, length, pos = array("i"), array("i"), 0
        for item in self.items:
            off.append(pos)
            length.append(len(item))
            pos += len(item)
        return b"".join(self.items), off, length


@dataclass
class PoolArena:
    """Pool strings of every key, copied in enumeration order."""

    arena: bytes
    entry_off: array
    entry_len: array
    key_base: array
    key_count: array  # -1 marks an overflowed (or unreachable) key

    @classmethod
    def build(cls, ag: AnalyzedGrammar) -> "PoolArena":
        chunks = []
        entry_off, entry_len = array("i"), array("i")
        key_base, key_count = array("i"), array("i")
        pos = 0
        reachable = set(ag.reachable)
        for key in ag.index.key_order:
            pool = ag.pools.pool(key) if key in reachable else None
            key_base.append(len(entry_off))
            if pool is None:
                key_count.append(-1)
                continue
            key_count.append(len(pool))
            for s in pool:
                entry_off.append(pos)
                entry_len.append(len(s))
                chunks.append(s)
                pos += len(s)
        return cls(b"".join(chunks), entry_off, entry_len, key_base, key_count)
