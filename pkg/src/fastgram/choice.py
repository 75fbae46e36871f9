"""Seeded randomness and the bounded-choice stream shared by every engine.

The stream is a byte pool filled from xoshiro256** (each 64-bit output
split into eight bytes, lowest byte first). A choice among ``n`` options
takes one byte ``b`` and maps it with ``(b * n) >> 8``; more than 256
options take eight bytes. A choice among one option consumes nothing, which
is what lets optimized producers drop single-alternative choices without
changing the output.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, List, Sequence, Tuple

MASK64 = (1 << 64) - 1
DEFAULT_BUFFER = 65536
POLICIES = ("refill", "reuse")


def splitmix64(state: int) -> Tuple[int, int]:
    """One splitmix64 step: returns (output, next_state)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31), state


def seed_rng(seed: int) -> Tuple[int, int, int, int]:
    x = seed & MASK64
    words = []
    for _ in range(4):
        out, x = splitmix64(x)
        words.append(out)
    if not any(words):  # unreachable for splitmix64, kept as a guard
        words[0] = 1
    return tuple(words)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def next_u64(state: Sequence[int]) -> Tuple[int, Tuple[int, int, int, int]]:
    s0, s1, s2, s3 = state
    result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
    t = (s1 << 17) & MASK64
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    return result, (s0, s1, s2, s3)


def map_range(b: int, n: int) -> int:
    return (b * n) >> 8


class ChoiceStream:
    """Pure-Python choice stream (see the compiled ``CoreStream`` twin)."""

    def __init__(self, seed: int = 0, buffer_size: int = DEFAULT_BUFFER, policy: str = "refill"):
        if policy not in POLICIES:
            raise ValueError(f"unknown random policy {policy!r}")
        if buffer_size < 8 or buffer_size % 8:
            raise ValueError("buffer size must be a positive multiple of 8")
        self.state = seed_rng(seed)
        self.policy = policy
        self.words_drawn = 0
        self.consumed = 0
        self._words = buffer_size // 8
        self._fmt = struct.Struct(f"<{self._words}Q")
        self._fill()

    def _fill(self):
        s0, s1, s2, s3 = self.state
        words = []
        append = words.append
        for _ in range(self._words):
            x = (s1 * 5) & MASK64
            append((((x << 7) | (x >> 57)) & MASK64) * 9 & MASK64)
            t = (s1 << 17) & MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self.state = (s0, s1, s2, s3)
        self.words_drawn += self._words
        self.buffer = self._fmt.pack(*words)
        self.cursor = 0

    @property
    def words_consumed(self) -> int:
        """PRNG outputs whose bytes have been handed out (refill policy)."""
        return -(-self.consumed // 8)

    def next_byte(self) -> int:
        if self.cursor == len(self.buffer):
            if self.policy == "reuse":
                self.cursor = 0
            else:
                self._fill()
        b = self.buffer[self.cursor]
        self.cursor += 1
        self.consumed += 1
        return b

    def next_u64_le(self) -> int:
        x = 0
        for i in range(8):
            x |= self.next_byte() << (8 * i)
        return x

    def next_choice(self, n: int) -> int:
        if n <= 1:
            if n < 1:
                raise ValueError("choice among zero options")
            return 0
        if n <= 256:
            if self.cursor == len(self.buffer):
                if self.policy == "reuse":
                    self.cursor = 0
                else:
                    self._fill()
            b = self.buffer[self.cursor]
            self.cursor += 1
            self.consumed += 1
            return (b * n) >> 8
        return (self.next_u64_le() * n) >> 64


class TraceMismatch(RuntimeError):
    def __init__(self, position: int, expected: int, actual: int):
        super().__init__(
            f"choice trace mismatch at position {position}: recorded bound {expected}, requested {actual}"
        )
        self.position = position
        self.expected = expected
        self.actual = actual


class TraceExhausted(TraceMismatch):
    def __init__(self, position: int, actual: int):
        RuntimeError.__init__(self, f"choice trace exhausted at position {position} (requested bound {actual})")
        self.position = position
        self.expected = None
        self.actual = actual


@dataclass
class ChoiceTrace:
    recorded: List[Tuple[int, int]]

    def __len__(self):
        return len(self.recorded)


class RecordingStream:
    """Wraps a stream and records every consuming (bound, chosen) pair."""

    def __init__(self, inner):
        self.inner = inner
        self.trace = ChoiceTrace([])

    def next_choice(self, n: int) -> int:
        c = self.inner.next_choice(n)
        if n > 1:
            self.trace.recorded.append((n, c))
        return c


class ReplayStream:
    """Serves a fixed trace; a bound mismatch means engines disagree."""

    def __init__(self, trace):
        self.recorded = trace.recorded if isinstance(trace, ChoiceTrace) else list(trace)
        self.position = 0

    def next_choice(self, n: int) -> int:
        if n <= 1:
            return 0
        if self.position >= len(self.recorded):
            raise TraceExhausted(self.position, n)
        bound, chosen = self.recorded[self.position]
        if bound != n:
            raise TraceMismatch(self.position, bound, n)
        self.position += 1
        return chosen


def _write_varint(out: bytearray, v: int):
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def encode_trace(trace: ChoiceTrace) -> bytes:
    out = bytearray()
    for bound, chosen in trace.recorded:
        _write_varint(out, bound)
        _write_varint(out, chosen)
    return bytes(out)


def decode_trace(data: bytes) -> ChoiceTrace:
    values = []
    v = shift = 0
    for b in data:
        v |= (b & 0x7F) << shift
        if b & 0x80:
            shift += 7
        else:
            values.append(v)
            v = shift = 0
    if shift or len(values) % 2:
        raise ValueError("truncated choice trace")
    pairs = list(zip(values[::2], values[1::2]))
    for bound, chosen in pairs:
        if not 0 <= chosen < bound:
            raise ValueError(f"invalid trace entry ({bound}, {chosen})")
    return ChoiceTrace(pairs)


def write_trace(f: BinaryIO, trace: ChoiceTrace):
    f.write(encode_trace(trace))


def read_trace(f: BinaryIO) -> ChoiceTrace:
    return decode_trace(f.read())


def make_stream(seed: int = 0, buffer_size: int = DEFAULT_BUFFER, policy: str = "refill", pure: bool = False):
    """Fastest available stream: the compiled one unless ``pure`` or unavailable."""
    from ._backend import core

    if core is not None and not pure:
        return core.CoreStream(seed, buffer_size, policy)
    return ChoiceStream(seed, buffer_size, policy)
