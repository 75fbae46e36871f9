"""The production machine: grammar bytecode driven by the random stream.

Each rule assembles to a straight run of ``EMIT lit`` / ``INVOKE key``
instructions closed by ``RET``. ``INVOKE k`` is where the random stream
acts as the opcode stream: below the depth budget it draws one choice among
k's rules and jumps to that rule's entry; at the budget it draws one choice
among k's pool strings and copies it out (or, for an overflowed pool, jumps
to one of k's minimum-cost rules). The depth is the return-stack height.
"""

from __future__ import annotations

import ast
import re
import time
from array import array
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from ._backend import core
from .analysis import AnalyzedGrammar
from .flat import Literals
from .report import ProductionConfig, RunReport

EMIT, INVOKE, RET, HALT = range(4)
MNEMONICS = ("EMIT", "INVOKE", "RET", "HALT")


class VMError(RuntimeError):
    pass


class UnsupportedEngine(RuntimeError):
    pass


@dataclass
class Program:
    ops: List[int]
    args: List[int]
    literals: Tuple[bytes, ...]
    keys: Tuple[str, ...]
    rule_entries: Tuple[Tuple[int, ...], ...]  # per key id; empty for keys not assembled
    min_entries: Tuple[Tuple[int, ...], ...]
    pools: Tuple[Optional[Tuple[bytes, ...]], ...]  # None = overflowed / not assembled
    start: int
    max_mu: int
    _flat: object = field(default=None, repr=False, compare=False)

    @property
    def code(self) -> List[Tuple[int, int]]:
        return list(zip(self.ops, self.args))

    def key_meta(self, k: int) -> Tuple[int, int, bool]:
        pool = self.pools[k]
        return len(self.rule_entries[k]), (-1 if pool is None else len(pool)), pool is None

    def stack_limit(self, max_depth: int) -> int:
        return max_depth + self.max_mu + 1

    def flat(self):
        if self._flat is None:
            self._flat = _flatten(self)
        return self._flat


def assemble(source) -> Program:
    """Assemble an analyzed grammar (or the grammar behind a producer IR)."""
    ag: AnalyzedGrammar = getattr(source, "analyzed", source)
    ids = ag.index.key_ids
    lits = Literals()
    ops, args = [], []
    nkeys = len(ag.index.key_order)
    rule_entries: List[Tuple[int, ...]] = [()] * nkeys
    min_entries: List[Tuple[int, ...]] = [()] * nkeys
    pools: List[Optional[Tuple[bytes, ...]]] = [None] * nkeys
    for key in ag.reachable:
        k = ids[key]
        entries = []
        for rule in ag.rules(key):
            entries.append(len(ops))
            pending = b""
            for sym in rule:
                if isinstance(sym, bytes):
                    pending += sym
                    continue
                if pending:
                    ops.append(EMIT)
                    args.append(lits.intern(pending))
                    pending = b""
                ops.append(INVOKE)
                args.append(ids[sym])
            if pending:
                ops.append(EMIT)
                args.append(lits.intern(pending))
            ops.append(RET)
            args.append(0)
        rule_entries[k] = tuple(entries)
        min_entries[k] = tuple(entries[i] for i in ag.pools.min_rules[key])
        pools[k] = ag.pools.pool(key)
    return Program(ops, args, tuple(lits.items), tuple(ag.index.key_order), tuple(rule_entries),
                   tuple(min_entries), tuple(pools), ids[ag.start], ag.max_mu)


def _lit_repr(data: bytes) -> str:
    # str repr when the bytes are UTF-8, bytes repr otherwise; both invert via literal_eval
    try:
        return repr(data.decode("utf-8"))
    except UnicodeDecodeError:
        return repr(data)


def _lit_parse(text: str) -> bytes:
    value = ast.literal_eval(text)
    return value if isinstance(value, bytes) else value.encode("utf-8")


def disassemble(p: Program) -> str:
    """Stable listing: code, per-key rule tables, pools. ``reassemble`` inverts it."""
    lines = []
    for pc, (op, arg) in enumerate(zip(p.ops, p.args)):
        if op == EMIT:
            lines.append(f"{pc:04d} EMIT {_lit_repr(p.literals[arg])}")
        elif op == INVOKE:
            lines.append(f"{pc:04d} INVOKE {p.keys[arg]}")
        else:
            lines.append(f"{pc:04d} {MNEMONICS[op]}")
    lines.append("")
    lines.append("rules:")
    for k, key in enumerate(p.keys):
        entries = " ".join(f"{e:04d}" for e in p.rule_entries[k])
        mins = " ".join(f"{e:04d}" for e in p.min_entries[k])
        lines.append(f"  {key} [{entries}] min [{mins}]")
    lines.append("pools:")
    for k, key in enumerate(p.keys):
        pool = p.pools[k]
        if not p.rule_entries[k]:
            lines.append(f"  {key} -")
        elif pool is None:
            lines.append(f"  {key} OVERFLOW")
        else:
            lines.append(f"  {key} {len(pool)} strings, {sum(map(len, pool))} bytes")
            lines.extend(f"    {i} {_lit_repr(s)}" for i, s in enumerate(pool))
    lines.append(f"start: {p.keys[p.start]}")
    lines.append(f"max-mu: {p.max_mu}")
    return "\n".join(lines) + "\n"


_RULE_LINE = re.compile(r"^  (.+) \[([0-9 ]*)\] min \[([0-9 ]*)\]$")
_POOL_HEAD = re.compile(r"^  (.+) (?:(-)|(OVERFLOW)|(\d+) strings, \d+ bytes)$")


def reassemble(listing: str) -> Program:
    """Rebuild the Program a ``disassemble`` listing was printed from."""
    lines = listing.splitlines()
    ops, args, code_args, i = [], [], [], 0
    while lines[i]:
        _, mnemonic, *rest = lines[i].split(" ", 2)
        ops.append(MNEMONICS.index(mnemonic))
        code_args.append(rest[0] if rest else None)
        i += 1
    i += 2  # blank line, "rules:"
    keys, rule_entries, min_entries = [], [], []
    while lines[i] != "pools:":
        m = _RULE_LINE.match(lines[i])
        if m is None:
            raise VMError(f"bad rule line {lines[i]!r}")
        keys.append(m.group(1))
        rule_entries.append(tuple(int(x) for x in m.group(2).split()))
        min_entries.append(tuple(int(x) for x in m.group(3).split()))
        i += 1
    i += 1
    pools: List[Optional[Tuple[bytes, ...]]] = []
    while not lines[i].startswith("start: "):
        m = _POOL_HEAD.match(lines[i])
        if m is None:
            raise VMError(f"bad pool line {lines[i]!r}")
        i += 1
        if m.group(4) is None:
            pools.append(None)
            continue
        entries = []
        for _ in range(int(m.group(4))):
            entries.append(_lit_parse(lines[i].split(" ", 5)[5]))
            i += 1
        pools.append(tuple(entries))
    start = keys.index(lines[i][len("start: "):])
    max_mu = int(lines[i + 1][len("max-mu: "):])
    key_ids = {k: n for n, k in enumerate(keys)}
    lits = Literals()
    for op, text in zip(ops, code_args):
        if op == EMIT:
            args.append(lits.intern(_lit_parse(text)))
        elif op == INVOKE:
            args.append(key_ids[text])
        else:
            args.append(0)
    return Program(ops, args, tuple(lits.items), tuple(keys), tuple(rule_entries), tuple(min_entries),
                   tuple(pools), start, max_mu)


PAD = 16  # matches FG_PAD in the core


@dataclass
class FlatProgram:
    ops: array
    args: array
    key_meta: array  # per key: rule_off, rule_n, min_off, min_n, pool_base, pool_n (-1 = overflowed)
    entries: array
    lit_arena: bytes  # padded by PAD bytes
    lit_off: array
    lit_len: array
    pool_arena: bytes  # padded by PAD bytes
    pool_off: array
    pool_len: array


def _flatten(p: Program) -> FlatProgram:
    key_meta, entries = array("i"), array("i")
    pool_off, pool_len, chunks = array("i"), array("i"), []
    pos = 0
    for k in range(len(p.keys)):
        rule_off = len(entries)
        entries.extend(p.rule_entries[k])
        min_off = len(entries)
        entries.extend(p.min_entries[k])
        pool = p.pools[k]
        key_meta.extend((rule_off, len(p.rule_entries[k]), min_off, len(p.min_entries[k]),
                         len(pool_off), -1 if pool is None else len(pool)))
        for s in pool or ():
            pool_off.append(pos)
            pool_len.append(len(s))
            chunks.append(s)
            pos += len(s)
    lits = Literals()
    for item in p.literals:
        lits.intern(item)
    arena, off, length = lits.pack()
    pad = bytes(PAD)
    return FlatProgram(array("i", p.ops), array("i", p.args), key_meta, entries, arena + pad, off, length,
                       b"".join(chunks) + pad, pool_off, pool_len)


def _switch_python(p: Program, cfg: ProductionConfig, cs, sink):
    ops, args, lits = p.ops, p.args, p.literals
    rule_entries, min_entries, pools = p.rule_entries, p.min_entries, p.pools
    max_depth = cfg.max_depth
    limit = p.stack_limit(max_depth)
    choose = cs.next_choice
    sep = cfg.separator
    start_entries = rule_entries[p.start]
    total = high = 0
    for _ in range(cfg.inputs):
        out = bytearray()
        stack = [-1]
        pc = start_entries[choose(len(start_entries))]
        while True:
            op = ops[pc]
            if op == EMIT:
                out += lits[args[pc]]
                pc += 1
            elif op == INVOKE:
                k = args[pc]
                if len(stack) >= max_depth:
                    pool = pools[k]
                    if pool is not None:
                        out += pool[choose(len(pool))]
                        pc += 1
                        continue
                    entries = min_entries[k]
                else:
                    entries = rule_entries[k]
                stack.append(pc + 1)
                if len(stack) > high:
                    high = len(stack)
                    if high > limit:
                        raise VMError(f"return stack overflow ({high} > {limit})")
                pc = entries[choose(len(entries))]
            elif op == RET:
                pc = stack.pop()
                if pc < 0:
                    break
            else:
                break
        out += sep
        sink.write(out)
        total += len(out)
    return total, max(high, 1)


def _threaded_python(p: Program, cfg: ProductionConfig, cs, sink):
    """Direct threading: each handler returns its successor's handler.

    The continuation table ``thread`` maps every code offset to the handler
    for the instruction there; no opcode is decoded at run time. Python has
    no tail calls, so handlers hand back their successor to a trampoline.
    """
    max_depth = cfg.max_depth
    limit = p.stack_limit(max_depth)
    choose = cs.next_choice
    out = bytearray()
    put = out.extend
    stack: list = []
    push, pop = stack.append, stack.pop
    high = [0]
    thread: list = [None] * (len(p.ops) + 1)

    def make(pc, op, arg):
        if op == EMIT:
            lit = p.literals[arg]

            def emit():
                put(lit)
                return thread[pc + 1]
            return emit
        if op == INVOKE:
            pool = p.pools[arg]
            entries = p.rule_entries[arg]
            cheap = p.min_entries[arg]
            n_pool = len(pool) if pool is not None else 0

            def invoke():
                if len(stack) >= max_depth:
                    if pool is not None:
                        put(pool[choose(n_pool)])
                        return thread[pc + 1]
                    target = cheap[choose(len(cheap))]
                else:
                    target = entries[choose(len(entries))]
                push(thread[pc + 1])
                if len(stack) > high[0]:
                    high[0] = len(stack)
                    if high[0] > limit:
                        raise VMError(f"return stack overflow ({high[0]} > {limit})")
                return thread[target]
            return invoke
        if op == RET:
            return pop
        return lambda: None

    for pc, (op, arg) in enumerate(zip(p.ops, p.args)):
        thread[pc] = make(pc, op, arg)
    start_entries = p.rule_entries[p.start]
    sep = cfg.separator
    total = 0
    for _ in range(cfg.inputs):
        del out[:]
        push(None)
        handler = thread[start_entries[choose(len(start_entries))]]
        while handler is not None:
            handler = handler()
        stack.clear()
        put(sep)
        sink.write(bytes(out))
        total += len(out)
    return total, max(high[0], 1)


def _use_core(cs, pure: bool) -> bool:
    return core is not None and not pure and isinstance(cs, core.CoreStream)


def _report(engine, cfg, total, high, began) -> RunReport:
    return RunReport(engine=engine, depth=cfg.max_depth, inputs=cfg.inputs, bytes=total,
                     production_seconds=time.perf_counter() - began, max_stack=high)


def run_switch(p: Program, cfg: ProductionConfig, cs, sink, pure: bool = False) -> RunReport:
    if _use_core(cs, pure):
        flat = p.flat()
        began = time.perf_counter()
        total, high = core.run_vm(flat, p.start, p.stack_limit(cfg.max_depth), cfg.max_depth,
                                  cfg.inputs, cfg.separator, cs, sink, False)
    else:
        began = time.perf_counter()
        total, high = _switch_python(p, cfg, cs, sink)
    return _report("vm-switch", cfg, total, high, began)


def run_threaded(p: Program, cfg: ProductionConfig, cs, sink, pure: bool = False) -> RunReport:
    if _use_core(cs, pure):
        flat = p.flat()
        began = time.perf_counter()
        total, high = core.run_vm(flat, p.start, p.stack_limit(cfg.max_depth), cfg.max_depth,
                                  cfg.inputs, cfg.separator, cs, sink, True)
    else:
        began = time.perf_counter()
        total, high = _threaded_python(p, cfg, cs, sink)
    return _report("vm-threaded", cfg, total, high, began)


def run_context_threaded(p: Program, cfg: ProductionConfig, cs, sink, pure: bool = False) -> RunReport:
    raise UnsupportedEngine("engine vm-ct is unsupported on this build: context threading needs "
                            "call/return-paired native transfers that neither Python nor the C core guarantee")


def threaded_native() -> bool:
    """Whether the compiled core dispatches with computed gotos."""
    return core is not None and core.threaded_native()
