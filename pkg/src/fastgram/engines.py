"""Engine registry: name -> prepared runner.

Preparation (assembly, IR passes, code generation) happens in ``prepare``
so that a runner's timing covers production and sink writes only.
"""

from __future__ import annotations

from typing import Callable

from .analysis import AnalyzedGrammar
from .codegen.emit import load_producer, run_compiled
from .codegen.ir import DEFAULT_INLINE_DEPTH, lower, partial_eval, supercompile
from .codegen.run import run_ir
from .interp import produce_limit, produce_pooled
from .report import ProductionConfig, RunReport
from .vm import UnsupportedEngine, assemble, run_context_threaded, run_switch, run_threaded

ENGINES = ("limit", "pooled", "vm-switch", "vm-threaded", "vm-ct", "compiled", "ir-none", "ir-pe", "ir-super")
OPT_LEVELS = ("none", "pe", "super")

Runner = Callable[[ProductionConfig, object, object], RunReport]


def build_ir(ag: AnalyzedGrammar, opt: str = "super", inline_depth: int = DEFAULT_INLINE_DEPTH):
    if opt not in OPT_LEVELS:
        raise ValueError(f"unknown optimization level {opt!r}")
    ir = lower(ag)
    if opt == "pe":
        return partial_eval(ir)
    if opt == "super":
        return supercompile(ir, inline_depth)
    return ir


def prepare(ag: AnalyzedGrammar, engine: str, opt: str = "super", inline_depth: int = DEFAULT_INLINE_DEPTH,
            pure: bool = False) -> Runner:
    """A runner ``(cfg, stream, sink) -> RunReport`` for ``engine``.

    ``pure`` forces the pure-Python paths of engines that have a compiled
    kernel (the VM loops and the IR interpreter).
    """
    if engine == "limit":
        return lambda cfg, cs, sink: produce_limit(ag, cfg, cs, sink)
    if engine == "pooled":
        return lambda cfg, cs, sink: produce_pooled(ag, cfg, cs, sink)
    if engine in ("vm-switch", "vm-threaded", "vm-ct"):
        program = assemble(ag)
        run = {"vm-switch": run_switch, "vm-threaded": run_threaded, "vm-ct": run_context_threaded}[engine]
        if engine == "vm-ct":
            run(program, None, None, None)  # raises UnsupportedEngine up front
        return lambda cfg, cs, sink: run(program, cfg, cs, sink, pure=pure)
    if engine == "compiled":
        ir = build_ir(ag, opt, inline_depth)
        make = load_producer(ir)
        return lambda cfg, cs, sink: run_compiled(ir, cfg, cs, sink, make)
    if engine.startswith("ir-"):
        ir = build_ir(ag, engine[3:], inline_depth)
        return lambda cfg, cs, sink: run_ir(ir, cfg, cs, sink, pure=pure)
    raise UnsupportedEngine(f"unknown engine {engine!r} (choose from {', '.join(ENGINES)})")
