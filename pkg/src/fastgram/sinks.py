"""Output backends: buffered file, stdout, memory, null and memory-mapped file.

Every sink counts the bytes it accepted, so throughput accounting is the
same whichever backend receives the output.
"""

from __future__ import annotations

import logging
import mmap
import os
import sys
from dataclasses import dataclass

log = logging.getLogger(__name__)

FILE_BUFFER = 1 << 20
MMAP_RESERVE = 1 << 30


class SinkError(OSError):
    pass


@dataclass(frozen=True)
class FinalStats:
    bytes_written: int


class Sink:
    kind = "abstract"

    def __init__(self):
        self.bytes_written = 0
        self._final = None

    def write(self, data) -> None:
        raise NotImplementedError

    def _close(self) -> None:
        pass

    def finish(self) -> FinalStats:
        if self._final is None:
            try:
                self._close()
            except OSError as e:
                raise SinkError(f"{self.kind} sink failed on finish after {self.bytes_written} bytes: {e}") from e
            self._final = FinalStats(self.bytes_written)
        return self._final

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.finish()


class NullSink(Sink):
    """Accepts and counts writes without storing them."""

    kind = "null"

    def write(self, data) -> None:
        self.bytes_written += len(data)


class MemorySink(Sink):
    kind = "memory"

    def __init__(self):
        super().__init__()
        self.buffer = bytearray()

    def write(self, data) -> None:
        self.buffer += data
        self.bytes_written += len(data)

    def getvalue(self) -> bytes:
        return bytes(self.buffer)


class FileSink(Sink):
    kind = "file"

    def __init__(self, path, buffer_size: int = FILE_BUFFER):
        super().__init__()
        self.path = path
        self._f = open(path, "wb", buffering=buffer_size)

    def write(self, data) -> None:
        try:
            self._f.write(data)
        except OSError as e:
            raise SinkError(f"write to {self.path} failed after {self.bytes_written} bytes: {e}") from e
        self.bytes_written += len(data)

    def _close(self) -> None:
        self._f.close()


class StdoutSink(Sink):
    kind = "stdout"

    def __init__(self, stream=None):
        super().__init__()
        self._f = stream if stream is not None else sys.stdout.buffer

    def write(self, data) -> None:
        try:
            self._f.write(data)
        except OSError as e:
            raise SinkError(f"write to stdout failed after {self.bytes_written} bytes: {e}") from e
        self.bytes_written += len(data)

    def _close(self) -> None:
        self._f.flush()


class MmapSink(Sink):
    """Maps a sparse file of ``reserve`` bytes, writes into it, then truncates.

    If the output outgrows the reservation the mapping is doubled.
    """

    kind = "mmap"

    def __init__(self, path, reserve: int = MMAP_RESERVE):
        super().__init__()
        self.path = path
        self._fd = os.open(path, os.O_RDWR | os.O_CREAT | os.O_TRUNC, 0o644)
        try:
            self._map(reserve)
        except (OSError, ValueError):
            os.close(self._fd)
            raise

    def _map(self, size: int):
        os.ftruncate(self._fd, size)
        self._mm = mmap.mmap(self._fd, size)
        self._size = size

    def write(self, data) -> None:
        n = len(data)
        end = self.bytes_written + n
        if end > self._size:
            self._mm.close()
            size = self._size
            while size < end:
                size *= 2
            try:
                self._map(size)
            except (OSError, ValueError) as e:
                raise SinkError(f"cannot grow mapping of {self.path} to {size} bytes: {e}") from e
        self._mm[self.bytes_written:end] = data
        self.bytes_written = end

    def _close(self) -> None:
        self._mm.close()
        os.ftruncate(self._fd, self.bytes_written)
        os.close(self._fd)


def open_sink(spec: str, mmap_reserve: int = MMAP_RESERVE) -> Sink:
    """Parse an ``--out`` value: FILE, ``-``, ``null:``, ``mem:`` or ``mmap:FILE``."""
    if spec == "-":
        return StdoutSink()
    if spec in ("null", "null:"):
        return NullSink()
    if spec == "mem:":
        return MemorySink()
    if spec.startswith("mmap:"):
        path = spec[len("mmap:"):]
        try:
            return MmapSink(path, mmap_reserve)
        except (OSError, ValueError) as e:
            log.warning("mmap output unavailable (%s); falling back to buffered file", e)
            return FileSink(path)
    return FileSink(spec)
