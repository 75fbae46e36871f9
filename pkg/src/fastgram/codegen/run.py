"""Executing producer IR without generating code.

``run_ir`` interprets the IR directly with an explicit work stack. The
compiled core runs the same IR from the integer tables built by
``flatten``.
"""

from __future__ import annotations

import time
from array import array
from dataclasses import dataclass

from .._backend import core
from ..flat import Literals, PoolArena
from ..report import ProductionConfig, RunReport
from .ir import CallUnit, Choose, DepthCheck, EmitLit, PoolEmit, ProducerIR

K_EMIT, K_CHOOSE, K_CALL, K_POOL, K_CHECK = range(5)


@dataclass
class FlatIR:
    body_start: array  # per body: first slot in body_steps
    body_len: array
    body_steps: array  # step ids
    kind: array  # per step
    a: array
    b: array
    c: array
    arms: array  # body ids of choice arms
    entry: int
    unit_body: dict
    lit_arena: bytes
    lit_off: array
    lit_len: array
    pools: PoolArena
    rebased: bool


def flatten(ir: ProducerIR) -> FlatIR:
    lits = Literals()
    key_ids = ir.analyzed.index.key_ids
    body_start, body_len, body_steps = array("i"), array("i"), array("i")
    kind, a, b, c, arms = array("i"), array("i"), array("i"), array("i"), array("i")
    unit_body = {}
    fixups = []

    def add_body(body) -> int:
        ids = [add_step(s) for s in body]
        bid = len(body_start)
        body_start.append(len(body_steps))
        body_len.append(len(ids))
        body_steps.extend(ids)
        return bid

    def emit(k, x=0, y=0, z=0) -> int:
        kind.append(k)
        a.append(x)
        b.append(y)
        c.append(z)
        return len(kind) - 1

    def add_step(step) -> int:
        if isinstance(step, EmitLit):
            return emit(K_EMIT, lits.intern(step.data))
        if isinstance(step, PoolEmit):
            return emit(K_POOL, key_ids[step.key])
        if isinstance(step, CallUnit):
            sid = emit(K_CALL, -1, step.offset)
            fixups.append((sid, step.name))
            return sid
        if isinstance(step, Choose):
            ids = [add_body(arm) for arm in step.arms]
            base = len(arms)
            arms.extend(ids)
            return emit(K_CHOOSE, base, len(ids))
        if isinstance(step, DepthCheck):
            under = add_body(step.under)
            over = add_body(step.over)
            return emit(K_CHECK, step.offset, under, over)
        raise TypeError(step)

    entry = add_body(ir.entry)
    for name, unit in ir.units.items():
        unit_body[name] = add_body(unit.body)
    for sid, name in fixups:
        a[sid] = unit_body[name]
    arena, off, length = lits.pack()
    return FlatIR(body_start, body_len, body_steps, kind, a, b, c, arms, entry, unit_body,
                  arena, off, length, PoolArena.build(ir.analyzed), ir.rebased)


def _run_python(ir: ProducerIR, cfg: ProductionConfig, cs, sink):
    units = {n: u.body for n, u in ir.units.items()}
    threshold = 0 if ir.rebased else cfg.max_depth
    base0 = -cfg.max_depth if ir.rebased else 0
    pools = {}
    choose = cs.next_choice
    sep = cfg.separator
    total = 0
    for _ in range(cfg.inputs):
        out = bytearray()
        stack = [(s, base0) for s in reversed(ir.entry)]
        pop, push = stack.pop, stack.append
        while stack:
            step, base = pop()
            t = step.__class__
            if t is EmitLit:
                out += step.data
            elif t is CallUnit:
                nb = base + step.offset
                for s in reversed(units[step.name]):
                    push((s, nb))
            elif t is DepthCheck:
                branch = step.over if base + step.offset >= threshold else step.under
                for s in reversed(branch):
                    push((s, base))
            elif t is Choose:
                arm = step.arms[choose(len(step.arms))]
                for s in reversed(arm):
                    push((s, base))
            else:
                pool = pools.get(step.key)
                if pool is None:
                    pool = pools[step.key] = ir.pool(step.key)
                out += pool[choose(len(pool))]
        out += sep
        sink.write(out)
        total += len(out)
    return total, 0


def run_ir(ir: ProducerIR, cfg: ProductionConfig, cs, sink, pure: bool = False) -> RunReport:
    """Run ``cfg.inputs`` productions of ``ir`` into ``sink``."""
    compiled = core is not None and not pure and isinstance(cs, core.CoreStream)
    flat = flatten(ir) if compiled else None
    began = time.perf_counter()
    if compiled:
        total, high = core.run_ir(flat, cfg.max_depth, cfg.inputs, cfg.separator, cs, sink)
    else:
        total, high = _run_python(ir, cfg, cs, sink)
    elapsed = time.perf_counter() - began
    return RunReport(engine=f"ir-{ir.opt}", depth=cfg.max_depth, inputs=cfg.inputs, bytes=total,
                     production_seconds=elapsed, max_stack=high)
