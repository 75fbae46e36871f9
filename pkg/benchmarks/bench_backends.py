"""Compiled core vs pure-Python kernels for the VM and the IR interpreter.

    python3 benchmarks/bench_backends.py [--count N] [--depth D] [--repeat R]

Both backends consume the same choice stream and must produce the same
bytes; the script checks that before reporting the speedup.
"""

import argparse
import statistics
import sys

from fastgram import _backend
from fastgram.analysis import analyze
from fastgram.choice import make_stream
from fastgram.engines import prepare
from fastgram.grammar import load_grammar_file
from fastgram.report import ProductionConfig
from fastgram.resources import BUNDLED, grammar_path
from fastgram.sinks import MemorySink

ENGINES = ("vm-switch", "vm-threaded", "ir-none", "ir-super")


def measure(run, cfg, pure, repeat):
    rates, data = [], None
    for _ in range(repeat):
        sink = MemorySink()
        report = run(cfg, make_stream(0, pure=pure), sink)
        rates.append(report.kib_per_second)
        data = sink.getvalue()
    return statistics.median(rates), data


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=300)
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _backend.core is None:
        print("compiled core not built; nothing to compare", file=sys.stderr)
        return 1
    cfg = ProductionConfig(max_depth=args.depth, inputs=args.count)
    print(f"{'grammar':<12} {'engine':<12} {'python KiB/s':>13} {'core KiB/s':>12} {'speedup':>8}")
    for name in BUNDLED:
        ag = analyze(load_grammar_file(grammar_path(name)))
        for engine in ENGINES:
            slow, a = measure(prepare(ag, engine, pure=True), cfg, True, args.repeat)
            fast, b = measure(prepare(ag, engine, pure=False), cfg, False, args.repeat)
            if a != b:
                print(f"{name} {engine}: backends disagree", file=sys.stderr)
                return 3
            print(f"{name:<12} {engine:<12} {slow:>13.1f} {fast:>12.1f} {fast / slow:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
