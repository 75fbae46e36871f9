"""Producer source emission: Python (the toolkit's own language) and C.

Emitted programs are standalone. Each embeds the same seeded choice stream
as the toolkit, takes ``SEED MAX_DEPTH COUNT OUTPATH`` on the command line
and writes COUNT newline-terminated inputs, byte-identical to the toolkit
engines for the same arguments.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Dict, List

from ..report import ProductionConfig, RunReport
from .ir import CallUnit, Choose, DepthCheck, EmitLit, PoolEmit, ProducerIR, walk

TARGETS = ("self", "c")


class UnsupportedTarget(ValueError):
    pass


@dataclass(frozen=True)
class SourceUnit:
    language: str
    file_name: str
    text: str


def _pool_keys(ir: ProducerIR) -> List[str]:
    seen: Dict[str, None] = {}
    for body in [ir.entry] + [u.body for u in ir.units.values()]:
        for step in walk(body):
            if isinstance(step, PoolEmit):
                seen.setdefault(step.key)
    return list(seen)


def _uses_choice(ir: ProducerIR) -> bool:
    return any(isinstance(s, (Choose, PoolEmit))
               for body in [ir.entry] + [u.body for u in ir.units.values()] for s in walk(body))


def _header(ir: ProducerIR, name: str) -> List[str]:
    return [f"Producer for grammar {name} (start {ir.analyzed.start}), optimization level {ir.opt}.",
            "Generated by fastgram; do not edit."]


# ---- Python -------------------------------------------------------------

_PY_RUNTIME = '''
import struct
import sys

MASK = 0xFFFFFFFFFFFFFFFF


def make_stream(seed, buffer_size=65536):
    """Bounded choices from xoshiro256** seeded by splitmix64."""
    x = seed & MASK
    s = []
    for _ in range(4):
        x = (x + 0x9E3779B97F4A7C15) & MASK
        z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        s.append(z ^ (z >> 31))
    if not any(s):
        s[0] = 1
    words = buffer_size // 8
    fmt = struct.Struct("<%dQ" % words)
    st = {"s": s, "buf": b"", "pos": 0}

    def fill():
        s0, s1, s2, s3 = st["s"]
        out = []
        for _ in range(words):
            r = (s1 * 5) & MASK
            out.append((((r << 7) | (r >> 57)) & MASK) * 9 & MASK)
            t = (s1 << 17) & MASK
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & MASK
        st["s"] = [s0, s1, s2, s3]
        st["buf"] = fmt.pack(*out)
        st["pos"] = 0

    def byte():
        if st["pos"] == len(st["buf"]):
            fill()
        b = st["buf"][st["pos"]]
        st["pos"] += 1
        return b

    def choice(n):
        if n <= 1:
            return 0
        if n <= 256:
            return (byte() * n) >> 8
        x = 0
        for i in range(8):
            x |= byte() << (8 * i)
        return (x * n) >> 64

    return choice
'''

_PY_MAIN = '''

def main(argv):
    if len(argv) != 5:
        sys.stderr.write("usage: %s SEED MAX_DEPTH COUNT OUTPATH\\n" % argv[0])
        return 1
    seed, max_depth, count = int(argv[1]), int(argv[2]), int(argv[3])
    if max_depth < 1 or count < 0:
        sys.stderr.write("MAX_DEPTH must be >= 1 and COUNT >= 0\\n")
        return 1
    produce = make_producer(make_stream(seed), max_depth)
    out = sys.stdout.buffer if argv[4] == "-" else open(argv[4], "wb")
    try:
        for _ in range(count):
            out.write(produce() + b"\\n")
    finally:
        if out is not sys.stdout.buffer:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
'''


class _PyWriter:
    def __init__(self, ir: ProducerIR):
        self.ir = ir
        self.lines: List[str] = []
        self.pool_names = {k: f"POOL_{i}" for i, k in enumerate(_pool_keys(ir))}
        self.threshold = "0" if ir.rebased else "max_depth"

    def line(self, indent: int, text: str):
        self.lines.append("    " * indent + text)

    def body(self, body, indent: int):
        if not body:
            self.line(indent, "pass")
        for step in body:
            self.step(step, indent)

    def step(self, step, indent: int):
        if isinstance(step, EmitLit):
            self.line(indent, f"o({step.data!r})")
        elif isinstance(step, PoolEmit):
            pool = self.ir.pool(step.key)
            self.line(indent, f"o({self.pool_names[step.key]}[ch({len(pool)})])")
        elif isinstance(step, CallUnit):
            arg = "b" if step.offset == 0 else f"b {'+' if step.offset > 0 else '-'} {abs(step.offset)}"
            self.line(indent, f"u_{step.name}({arg})")
        elif isinstance(step, DepthCheck):
            self.line(indent, f"if b + {step.offset} >= {self.threshold}:" if step.offset
                      else f"if b >= {self.threshold}:")
            self.body(step.over, indent + 1)
            self.line(indent, "else:")
            self.body(step.under, indent + 1)
        else:
            self.line(indent, f"c = ch({len(step.arms)})")
            for i, arm in enumerate(step.arms):
                if i == 0:
                    self.line(indent, "if c == 0:")
                elif i == len(step.arms) - 1:
                    self.line(indent, "else:")
                else:
                    self.line(indent, f"elif c == {i}:")
                self.body(arm, indent + 1)


def emit_python(ir: ProducerIR, name: str = "grammar") -> SourceUnit:
    w = _PyWriter(ir)
    w.lines.append("#!/usr/bin/env python3")
    w.lines.append('"""' + "\n".join(_header(ir, name)) + '\n"""')
    w.lines.extend(_PY_RUNTIME.rstrip("\n").split("\n"))
    w.lines.append("")
    for key, var in w.pool_names.items():
        w.lines.append(f"{var} = {ir.pool(key)!r}  # {key}")
    w.lines.append("")
    w.lines.append("")
    w.line(0, "def make_producer(ch, max_depth):")
    w.line(1, '"""Returns a function producing one input per call."""')
    w.line(1, f"base = {'-max_depth' if ir.rebased else '0'}")
    w.line(1, "sys.setrecursionlimit(max(sys.getrecursionlimit(), 4 * max_depth + 1000))")
    w.line(1, "out = []")
    w.line(1, "o = out.append")
    for unit in ir.units.values():
        w.lines.append("")
        w.line(1, f"def u_{unit.name}(b):")
        w.body(unit.body, 2)
    w.lines.append("")
    w.line(1, "def produce():")
    w.line(2, "out.clear()")
    w.line(2, "b = base")
    w.body(ir.entry, 2)
    w.line(2, 'return b"".join(out)')
    w.lines.append("")
    w.line(1, "return produce")
    w.lines.extend(_PY_MAIN.rstrip("\n").split("\n"))
    return SourceUnit("python", f"{name}_producer.py", "\n".join(w.lines) + "\n")


# ---- C ------------------------------------------------------------------

def c_string(data: bytes) -> str:
    """A C string literal for ``data``; escapes are fixed-width octal."""
    parts = []
    for b in data:
        ch = chr(b)
        if 0x20 <= b < 0x7F and ch not in '\\"?':
            parts.append(ch)
        else:
            parts.append(f"\\{b:03o}")
    return '"' + "".join(parts) + '"'


_C_RUNTIME = r'''#include <errno.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

struct lit {
    const char *text;
    size_t len;
};

static uint64_t rng[4];
static uint8_t rbuf[65536];
static size_t rpos = sizeof rbuf;

static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

static void seed_rng(uint64_t x) {
    for (int i = 0; i < 4; i++) {
        uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        rng[i] = z ^ (z >> 31);
    }
    if (!(rng[0] | rng[1] | rng[2] | rng[3])) rng[0] = 1;
}

static void fill(void) {
    for (size_t i = 0; i < sizeof rbuf; i += 8) {
        uint64_t r = rotl(rng[1] * 5, 7) * 9;
        uint64_t t = rng[1] << 17;
        rng[2] ^= rng[0];
        rng[3] ^= rng[1];
        rng[1] ^= rng[2];
        rng[0] ^= rng[3];
        rng[2] ^= t;
        rng[3] = rotl(rng[3], 45);
        for (int b = 0; b < 8; b++) rbuf[i + (size_t)b] = (uint8_t)(r >> (8 * b));
    }
    rpos = 0;
}

static uint32_t next_byte(void) {
    if (rpos == sizeof rbuf) fill();
    return rbuf[rpos++];
}

static uint32_t choice(uint32_t n) {
    if (n <= 1) return 0;
    if (n <= 256) return (next_byte() * n) >> 8;
    uint64_t x = 0;
    for (int i = 0; i < 8; i++) x |= (uint64_t)next_byte() << (8 * i);
    return (uint32_t)(((x >> 32) * n + (((x & 0xFFFFFFFFULL) * n) >> 32)) >> 32);
}

static uint8_t *obuf;
static size_t olen, ocap;

static void put(const char *text, size_t n) {
    if (olen + n > ocap) {
        size_t cap = ocap ? ocap : 4096;
        while (cap < olen + n) cap *= 2;
        uint8_t *p = realloc(obuf, cap);
        if (!p) {
            fputs("out of memory\n", stderr);
            exit(3);
        }
        obuf = p;
        ocap = cap;
    }
    memcpy(obuf + olen, text, n);
    olen += n;
}

static int max_depth;
'''

_C_MAIN = r'''
static int parse(const char *text, long long lo, long long *out) {
    char *end;
    errno = 0;
    long long v = strtoll(text, &end, 10);
    if (errno || *end || end == text || v < lo) return 0;
    *out = v;
    return 1;
}

int main(int argc, char **argv) {
    long long seed, depth, count;
    if (argc != 5 || !parse(argv[1], 0, &seed) || !parse(argv[2], 1, &depth) || !parse(argv[3], 0, &count) ||
        depth > 1000000) {
        fprintf(stderr, "usage: %s SEED MAX_DEPTH COUNT OUTPATH\n", argc ? argv[0] : "producer");
        return 1;
    }
    FILE *f = strcmp(argv[4], "-") ? fopen(argv[4], "wb") : stdout;
    if (!f) {
        perror(argv[4]);
        return 3;
    }
    seed_rng((uint64_t)seed);
    max_depth = (int)depth;
    (void)choice;
    for (long long i = 0; i < count; i++) {
        olen = 0;
        produce();
        put("\n", 1);
        if (fwrite(obuf, 1, olen, f) != olen) {
            perror(argv[4]);
            return 3;
        }
    }
    if (f != stdout ? fclose(f) : fflush(f)) {
        perror(argv[4]);
        return 3;
    }
    free(obuf);
    return 0;
}
'''


class _CWriter:
    def __init__(self, ir: ProducerIR):
        self.ir = ir
        self.lines: List[str] = []
        self.pool_names = {k: f"pool_{i}" for i, k in enumerate(_pool_keys(ir))}
        self.threshold = "0" if ir.rebased else "max_depth"

    def line(self, indent: int, text: str):
        self.lines.append("    " * indent + text)

    def body(self, body, indent: int):
        for step in body:
            self.step(step, indent)

    def step(self, step, indent: int):
        if isinstance(step, EmitLit):
            self.line(indent, f"put({c_string(step.data)}, {len(step.data)});")
        elif isinstance(step, PoolEmit):
            n = len(self.ir.pool(step.key))
            var = self.pool_names[step.key]
            self.line(indent, f"{{ const struct lit *e = &{var}[choice({n}u)]; put(e->text, e->len); }}")
        elif isinstance(step, CallUnit):
            arg = "b" if step.offset == 0 else f"b {'+' if step.offset > 0 else '-'} {abs(step.offset)}"
            self.line(indent, f"u_{step.name}({arg});")
        elif isinstance(step, DepthCheck):
            cond = f"b + {step.offset} >= {self.threshold}" if step.offset else f"b >= {self.threshold}"
            self.line(indent, f"if ({cond}) {{")
            self.body(step.over, indent + 1)
            self.line(indent, "} else {")
            self.body(step.under, indent + 1)
            self.line(indent, "}")
        else:
            self.line(indent, f"switch (choice({len(step.arms)}u)) {{")
            for i, arm in enumerate(step.arms):
                label = "default:" if i == len(step.arms) - 1 else f"case {i}:"
                self.line(indent, f"{label} {{")
                self.body(arm, indent + 1)
                self.line(indent + 1, "break;")
                self.line(indent, "}")
            self.line(indent, "}")


def emit_c(ir: ProducerIR, name: str = "grammar") -> SourceUnit:
    w = _CWriter(ir)
    w.lines.append("/* " + "\n * ".join(_header(ir, name)) + " */")
    w.lines.extend(_C_RUNTIME.rstrip("\n").split("\n"))
    for key, var in w.pool_names.items():
        w.lines.append("")
        w.lines.append(f"/* {key} */")
        w.lines.append(f"static const struct lit {var}[] = {{")
        for s in ir.pool(key):
            w.line(1, f"{{{c_string(s)}, {len(s)}}},")
        w.lines.append("};")
    w.lines.append("")
    for unit in ir.units.values():
        w.lines.append(f"static void u_{unit.name}(int b);")
    for unit in ir.units.values():
        w.lines.append("")
        w.lines.append(f"static void u_{unit.name}(int b) {{")
        w.line(1, "(void)b;")
        w.body(unit.body, 1)
        w.lines.append("}")
    w.lines.append("")
    w.lines.append("static void produce(void) {")
    w.line(1, f"int b = {'-max_depth' if ir.rebased else '0'};")
    w.line(1, "(void)b;")
    w.body(ir.entry, 1)
    w.lines.append("}")
    w.lines.extend(_C_MAIN.rstrip("\n").split("\n"))
    return SourceUnit("c", f"{name}_producer.c", "\n".join(w.lines) + "\n")


def emit(ir: ProducerIR, target: str, name: str = "grammar") -> SourceUnit:
    if target == "self":
        return emit_python(ir, name)
    if target == "c":
        return emit_c(ir, name)
    raise UnsupportedTarget(f"unsupported emission target {target!r} (choose from {', '.join(TARGETS)})")


def load_producer(ir: ProducerIR) -> Callable:
    """Compile the Python emission in-process; returns ``make_producer``."""
    unit = emit_python(ir)
    namespace: dict = {"__name__": "fastgram_producer"}
    exec(compile(unit.text, unit.file_name, "exec"), namespace)
    return namespace["make_producer"]


def run_compiled(ir: ProducerIR, cfg: ProductionConfig, cs, sink, make_producer=None) -> RunReport:
    """The ``compiled`` engine: emitted Python driven by the toolkit stream."""
    make_producer = make_producer or load_producer(ir)
    produce = make_producer(cs.next_choice, cfg.max_depth)
    sep = cfg.separator
    write = sink.write
    total = 0
    began = time.perf_counter()
    for _ in range(cfg.inputs):
        data = produce() + sep
        write(data)
        total += len(data)
    return RunReport(engine="compiled", depth=cfg.max_depth, inputs=cfg.inputs, bytes=total,
                     production_seconds=time.perf_counter() - began)
