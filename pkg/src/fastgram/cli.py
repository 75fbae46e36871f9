"""``fastgram`` command line: analyze, fuzz, compile, disasm, bench.

Exit codes: 0 success, 1 usage error or unsupported feature, 2 grammar
error, 3 runtime or I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import List, Optional

from . import __version__
from ._backend import NAME as BACKEND
from .analysis import DEFAULT_POOL_BYTES, DEFAULT_POOL_CAP, analyze, describe
from .bench import DEFAULT_ENGINES, SINKS, BenchPlan, bench, grammar_label
from .choice import (POLICIES, RecordingStream, ReplayStream, TraceMismatch, make_stream, read_trace,
                     write_trace)
from .codegen.emit import TARGETS, UnsupportedTarget, emit
from .codegen.ir import DEFAULT_INLINE_DEPTH
from .engines import ENGINES, OPT_LEVELS, build_ir, prepare
from .grammar import GrammarError, load_grammar_file
from .interp import derive
from .report import ProductionConfig
from .resources import BUNDLED, grammar_path
from .sinks import SinkError, open_sink
from .vm import UnsupportedEngine, VMError, assemble, disassemble

EXIT_OK, EXIT_USAGE, EXIT_GRAMMAR, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def parse_int_list(text: str) -> List[int]:
    """``"0..9"`` (inclusive range) or ``"8,32,128"``."""
    values: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            values.extend(range(int(lo), int(hi) + 1))
        elif part:
            values.append(int(part))
    if not values:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    return values


def _grammar_arg(p):
    p.add_argument("-g", "--grammar", required=True,
                   help=f"grammar JSON file or bundled name ({', '.join(BUNDLED)})")
    p.add_argument("--start", help="start key (default <start>)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fastgram", description="Fast grammar-based input producers.")
    parser.add_argument("--version", action="version", version=f"fastgram {__version__} ({BACKEND} core)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="μ-depths, minimum-cost rules and pool sizes")
    _grammar_arg(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--pool-cap", type=_positive, default=DEFAULT_POOL_CAP)
    p.add_argument("--pool-bytes", type=_positive, default=DEFAULT_POOL_BYTES)

    p = sub.add_parser("fuzz", help="produce inputs")
    _grammar_arg(p)
    p.add_argument("--engine", default="vm-switch", help=f"one of {', '.join(ENGINES)}")
    p.add_argument("--depth", type=_positive, default=8, help="free-stack budget (max_depth)")
    p.add_argument("--count", type=_positive, default=1)
    p.add_argument("--out", default="-", help="FILE, -, null:, mem: or mmap:FILE")
    p.add_argument("--seed", type=_non_negative, default=0)
    p.add_argument("--rand-policy", choices=POLICIES, default="refill")
    p.add_argument("--rand-buffer", type=_positive, default=65536, help="random byte buffer size")
    p.add_argument("--separator", default="\\n", help="separator after each input (escapes allowed)")
    p.add_argument("--opt", choices=OPT_LEVELS, default="super", help="IR level for the compiled engine")
    p.add_argument("--inline-depth", type=_non_negative, default=DEFAULT_INLINE_DEPTH)
    p.add_argument("--measure", choices=("production", "wall"), default="production")
    p.add_argument("--backend", choices=("auto", "python"), default="auto",
                   help="python forces the pure-Python kernels")
    p.add_argument("--trace-out", metavar="FILE", help="record the consumed choices")
    p.add_argument("--trace-in", metavar="FILE", help="replay recorded choices instead of a seed")
    p.add_argument("--trace-derivations", metavar="FILE",
                   help="test mode: write one JSON derivation tree per input")
    p.add_argument("-q", "--quiet", action="store_true", help="no statistics on stderr")

    p = sub.add_parser("compile", help="emit a standalone producer program")
    _grammar_arg(p)
    p.add_argument("--target", default="c", help=f"one of {', '.join(TARGETS)}")
    p.add_argument("--opt", choices=OPT_LEVELS, default="super")
    p.add_argument("--inline-depth", type=_non_negative, default=DEFAULT_INLINE_DEPTH)
    p.add_argument("--out", default=".", metavar="DIR")

    p = sub.add_parser("disasm", help="print the production machine listing")
    _grammar_arg(p)

    p = sub.add_parser("bench", help="throughput benchmark")
    p.add_argument("-g", "--grammar", action="append", dest="grammars",
                   help="grammar (repeatable; default: all bundled)")
    p.add_argument("--engines", default=",".join(DEFAULT_ENGINES))
    p.add_argument("--depths", type=parse_int_list, default=[8, 32, 128])
    p.add_argument("--seeds", type=parse_int_list, default=list(range(10)))
    p.add_argument("--count", type=_positive, default=1000)
    p.add_argument("--warmup", type=_non_negative, default=100)
    p.add_argument("--sinks", default="mem", help=f"comma list of {', '.join(SINKS)}")
    p.add_argument("--opt", choices=OPT_LEVELS, default="super")
    p.add_argument("--backend", choices=("auto", "python"), default="auto")
    p.add_argument("--csv", metavar="FILE", help="write the CSV here (default: stdout)")
    p.add_argument("--parallel", type=_positive, default=1,
                   help="worker processes; cells then compete for CPU, so timings are less comparable")
    return parser


def _load(args):
    g = load_grammar_file(grammar_path(args.grammar))
    if args.start:
        g = g.with_start(args.start)
    return g


def cmd_analyze(args) -> int:
    ag = analyze(_load(args), args.pool_cap, args.pool_bytes)
    rows = describe(ag)
    if args.format == "json":
        print(json.dumps({"start": ag.start, "keys": rows}, indent=2, ensure_ascii=False))
        return EXIT_OK
    width = max(len(r["key"]) for r in rows)
    print(f"{'key'.ljust(width)}  mu  min-rules  pool")
    for r in rows:
        pool = "overflow" if r["overflow"] else ("-" if r["pool_size"] is None else str(r["pool_size"]))
        mu = "inf" if r["mu_depth"] is None else str(r["mu_depth"])
        mins = ",".join(map(str, r["min_rules"]))
        flag = "" if r["reachable"] else "  (unreachable)"
        print(f"{r['key'].ljust(width)}  {mu.rjust(2)}  {mins.ljust(9)}  {pool}{flag}")
    return EXIT_OK


def _separator(text: str) -> bytes:
    return text.encode("utf-8").decode("unicode_escape").encode("latin-1")


def cmd_fuzz(args) -> int:
    ag = analyze(_load(args))
    cfg = ProductionConfig(max_depth=args.depth, inputs=args.count, separator=_separator(args.separator))
    pure = args.backend == "python"
    if args.trace_in:
        with open(args.trace_in, "rb") as f:
            stream = ReplayStream(read_trace(f))
    else:
        stream = make_stream(args.seed, args.rand_buffer, args.rand_policy, pure=pure)
    if args.trace_out:
        stream = RecordingStream(stream)
    run = None if args.trace_derivations else prepare(ag, args.engine, args.opt, args.inline_depth, pure)
    began = time.perf_counter()
    sink = open_sink(args.out)
    try:
        if run is None:
            report_bytes = _fuzz_traced(ag, cfg, stream, sink, args)
            seconds = time.perf_counter() - began
        else:
            report = run(cfg, stream, sink)
            report_bytes, seconds = report.bytes, report.production_seconds
    finally:
        sink.finish()
    if args.measure == "wall":
        seconds = time.perf_counter() - began
    if args.trace_out:
        with open(args.trace_out, "wb") as f:
            write_trace(f, stream.trace)
    if not args.quiet:
        kib = report_bytes / 1024 / seconds if seconds > 0 else float("inf")
        print(f"{args.engine}: {cfg.inputs} inputs, {report_bytes} bytes, {seconds:.6f} s "
              f"({args.measure}), {kib:.1f} KiB/s", file=sys.stderr)
    return EXIT_OK


def _fuzz_traced(ag, cfg, stream, sink, args) -> int:
    # every engine but limit produces the pooled interpreter's output
    if args.engine not in ENGINES:
        raise UnsupportedEngine(f"unknown engine {args.engine!r}")
    if args.engine == "vm-ct":
        prepare(ag, args.engine)
    pooled = args.engine != "limit"
    total = 0
    with open(args.trace_derivations, "w", encoding="utf-8") as trace:
        for _ in range(cfg.inputs):
            tree = derive(ag, cfg.max_depth, stream, pooled=pooled)
            data = tree.leaves() + cfg.separator
            sink.write(data)
            total += len(data)
            trace.write(json.dumps(tree.to_json(), ensure_ascii=False) + "\n")
    return total


def cmd_compile(args) -> int:
    ag = analyze(_load(args))
    ir = build_ir(ag, args.opt, args.inline_depth)
    unit = emit(ir, args.target, grammar_label(args.grammar).replace("-", "_"))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, unit.file_name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(unit.text)
    print(path)
    return EXIT_OK


def cmd_disasm(args) -> int:
    sys.stdout.write(disassemble(assemble(analyze(_load(args)))))
    return EXIT_OK


def cmd_bench(args) -> int:
    from .resources import bundled_grammars

    engines = [e.strip() for e in args.engines.split(",") if e.strip()]
    for e in engines:
        if e not in ENGINES:
            raise UsageError(f"unknown engine {e!r}")
    plan = BenchPlan(grammars=[grammar_path(g) for g in args.grammars] if args.grammars else bundled_grammars(),
                     engines=engines, depths=args.depths, seeds=args.seeds, inputs_per_run=args.count,
                     warmup_iterations=args.warmup, sinks=[s.strip() for s in args.sinks.split(",")],
                     pure=args.backend == "python", opt=args.opt)
    summary, text, _ = bench(plan, args.parallel)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    sys.stderr.write(summary.text())
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "fuzz": cmd_fuzz, "compile": cmd_compile, "disasm": cmd_disasm,
            "bench": cmd_bench}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"fastgram: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (UnsupportedEngine, UnsupportedTarget) as e:
        print(f"fastgram: {e}", file=sys.stderr)
        return EXIT_USAGE
    except GrammarError as e:
        print(f"fastgram: grammar error: {e}", file=sys.stderr)
        return EXIT_GRAMMAR
    except (OSError, SinkError, TraceMismatch, VMError, MemoryError, RecursionError) as e:
        print(f"fastgram: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as e:
        print(f"fastgram: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
