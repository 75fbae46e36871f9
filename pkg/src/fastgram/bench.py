"""Benchmark harness: engines x grammars x depths x seeds, CSV plus summary.

Every cell runs a warmup on its own stream (excluded from timing and from
the recorded bytes), then produces ``count`` inputs from a fresh stream for
its seed. Cells are interleaved seed-major so slow drift in machine speed
hits every engine alike.
"""

from __future__ import annotations

import csv
import io
import math
import os
import statistics
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from scipy import stats

from .analysis import analyze
from .choice import make_stream
from .engines import prepare
from .grammar import load_grammar_file
from .report import ProductionConfig, RunReport
from .resources import grammar_path
from .sinks import FileSink, MemorySink, MmapSink, NullSink

CSV_HEADER = ("engine", "grammar", "depth", "seed", "inputs", "bytes", "seconds", "kibps")
CSV_COMMENT = "# seconds: monotonic wall clock (time.perf_counter) around production, sink writes and the final flush"
SINKS = ("mem", "null", "file", "mmap")
DEFAULT_ENGINES = ("limit", "pooled", "vm-switch", "vm-threaded")


@dataclass
class BenchPlan:
    grammars: Sequence[str]
    engines: Sequence[str] = DEFAULT_ENGINES
    depths: Sequence[int] = (8, 32, 128)
    seeds: Sequence[int] = tuple(range(10))
    inputs_per_run: int = 1000
    warmup_iterations: int = 100
    sinks: Sequence[str] = ("mem",)
    pure: bool = False
    opt: str = "super"

    def __post_init__(self):
        for name in ("grammars", "engines", "depths", "seeds", "sinks"):
            if not getattr(self, name):
                raise ValueError(f"bench plan needs at least one entry in {name}")
        for s in self.sinks:
            if s not in SINKS:
                raise ValueError(f"unknown bench sink {s!r} (choose from {', '.join(SINKS)})")
        if self.inputs_per_run < 1 or self.warmup_iterations < 0:
            raise ValueError("count must be >= 1 and warmup >= 0")

    def label(self, engine: str, sink: str) -> str:
        return engine if len(self.sinks) == 1 else f"{engine}@{sink}"

    def cells(self) -> List[Tuple[str, int, int, str, str]]:
        return [(g, d, seed, e, s) for g in self.grammars for d in self.depths for seed in self.seeds
                for e in self.engines for s in self.sinks]


@dataclass
class CellResult:
    engine: str
    grammar: str
    depth: int
    seed: int
    inputs: int
    report: Optional[RunReport] = None
    error: Optional[str] = None

    def row(self) -> List[str]:
        head = [self.engine, self.grammar, str(self.depth), str(self.seed), str(self.inputs)]
        if self.report is None:
            return head + ["ERROR", "", ""]
        r = self.report
        return head + [str(r.bytes), f"{r.production_seconds:.6f}", f"{r.kib_per_second:.3f}"]


@dataclass
class SummaryRow:
    engine: str
    grammar: str
    depth: int
    mean_kibps: float
    half_width: float
    n: int


@dataclass
class BenchSummary:
    rows: List[SummaryRow]
    warnings: List[str] = field(default_factory=list)

    def get(self, engine: str, grammar: str, depth: int) -> SummaryRow:
        for row in self.rows:
            if (row.engine, row.grammar, row.depth) == (engine, grammar, depth):
                return row
        raise KeyError((engine, grammar, depth))

    def text(self) -> str:
        table = [("engine", "grammar", "depth", "KiB/s", "±95%", "n")]
        for r in self.rows:
            table.append((r.engine, r.grammar, str(r.depth), f"{r.mean_kibps:.1f}", f"{r.half_width:.1f}", str(r.n)))
        widths = [max(len(row[i]) for row in table) for i in range(6)]
        lines = ["  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
                 for row in table]
        lines.extend(f"WARNING: {w}" for w in self.warnings)
        return "\n".join(lines) + "\n"


def grammar_label(path: str) -> str:
    base = os.path.basename(path)
    return base[:-5] if base.endswith(".json") else base


def t_interval(values: Sequence[float], confidence: float = 0.95) -> Tuple[float, float]:
    """Mean and Student-t half-width; half-width is nan below two samples."""
    mean = statistics.fmean(values)
    if len(values) < 2:
        return mean, math.nan
    sem = statistics.stdev(values) / math.sqrt(len(values))
    return mean, float(stats.t.ppf((1 + confidence) / 2, len(values) - 1)) * sem


def _open_bench_sink(kind: str, tmpdir: str):
    if kind == "mem":
        return MemorySink()
    if kind == "null":
        return NullSink()
    path = os.path.join(tmpdir, "bench.out")
    return FileSink(path) if kind == "file" else MmapSink(path)


class _Runners:
    """Per-process cache of analyzed grammars and prepared engines."""

    def __init__(self, plan: BenchPlan):
        self.plan = plan
        self.grammars: Dict[str, object] = {}
        self.runners: Dict[Tuple[str, str], object] = {}

    def get(self, grammar: str, engine: str):
        key = (grammar, engine)
        if key not in self.runners:
            if grammar not in self.grammars:
                self.grammars[grammar] = analyze(load_grammar_file(grammar_path(grammar)))
            self.runners[key] = prepare(self.grammars[grammar], engine, opt=self.plan.opt, pure=self.plan.pure)
        return self.runners[key]


def _run_cell(runners: _Runners, cell, tmpdir: str) -> CellResult:
    grammar, depth, seed, engine, sink_kind = cell
    plan = runners.plan
    result = CellResult(plan.label(engine, sink_kind), grammar_label(grammar), depth, seed, plan.inputs_per_run)
    try:
        run = runners.get(grammar, engine)
        if plan.warmup_iterations:
            run(ProductionConfig(max_depth=depth, inputs=plan.warmup_iterations),
                make_stream(seed, pure=plan.pure), NullSink())
        sink = _open_bench_sink(sink_kind, tmpdir)
        try:
            report = run(ProductionConfig(max_depth=depth, inputs=plan.inputs_per_run),
                         make_stream(seed, pure=plan.pure), sink)
            # buffered bytes still owed to the file are part of writing it
            flush_began = time.perf_counter()
            sink.finish()
            report.production_seconds += time.perf_counter() - flush_began
        finally:
            sink.finish()
        report.grammar, report.seed = result.grammar, seed
        result.report = report
    except Exception as e:  # recorded as an ERROR row; the harness continues
        result.error = f"{type(e).__name__}: {e}"
    return result


_worker_runners: Optional[_Runners] = None


def _worker(plan: BenchPlan, cell) -> CellResult:
    global _worker_runners
    if _worker_runners is None or _worker_runners.plan is not plan:
        _worker_runners = _Runners(plan)
    with tempfile.TemporaryDirectory(prefix="fastgram-bench-") as tmp:
        return _run_cell(_worker_runners, cell, tmp)


def run_bench(plan: BenchPlan, parallel: int = 1, progress=None) -> List[CellResult]:
    """Run every cell; ``parallel`` > 1 spreads cells over worker processes."""
    cells = plan.cells()
    if parallel > 1:
        with ProcessPoolExecutor(parallel) as pool:
            return list(pool.map(_worker, [plan] * len(cells), cells))
    runners = _Runners(plan)
    results = []
    with tempfile.TemporaryDirectory(prefix="fastgram-bench-") as tmp:
        for cell in cells:
            results.append(_run_cell(runners, cell, tmp))
            if progress:
                progress(results[-1])
    return results


def summarize(results: Iterable[CellResult]) -> BenchSummary:
    groups: Dict[Tuple[str, str, int], List[float]] = {}
    warnings = []
    for r in results:
        if r.report is None:
            warnings.append(f"{r.engine} on {r.grammar} depth {r.depth} seed {r.seed} failed: {r.error}")
            continue
        groups.setdefault((r.engine, r.grammar, r.depth), []).append(r.report.kib_per_second)
    rows = []
    for (engine, grammar, depth), values in groups.items():
        mean, hw = t_interval(values)
        rows.append(SummaryRow(engine, grammar, depth, mean, hw, len(values)))
    summary = BenchSummary(rows, warnings)
    for row in rows:
        if row.engine.startswith("vm-switch") and row.grammar == "expr" and row.depth == 32:
            pooled_label = "pooled" + row.engine[len("vm-switch"):]
            try:
                pooled = summary.get(pooled_label, "expr", 32)
            except KeyError:
                continue
            if row.mean_kibps < pooled.mean_kibps:
                warnings.append(f"expected ordering violated on expr depth 32: {row.engine} "
                                f"{row.mean_kibps:.1f} KiB/s < {pooled_label} {pooled.mean_kibps:.1f} KiB/s")
    return summary


def to_csv(results: Iterable[CellResult]) -> str:
    buf = io.StringIO()
    buf.write(CSV_COMMENT + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


def bench(plan: BenchPlan, parallel: int = 1, progress=None) -> Tuple[BenchSummary, str, List[CellResult]]:
    results = run_bench(plan, parallel, progress)
    return summarize(results), to_csv(results), results
