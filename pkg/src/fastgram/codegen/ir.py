"""Producer IR: one unit per nonterminal, bodies of steps.

Every depth in the IR is an offset relative to the depth handed to the
enclosing unit. A ``DepthCheck(o, under, over)`` runs ``over`` when
``base + o`` has reached the budget; ``CallUnit(name, o)`` runs the named
unit with base ``base + o``. In a rebased IR the entry starts at
``-max_depth`` and the budget is 0, so checks compare against a constant.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple, Union

from ..analysis import AnalyzedGrammar


@dataclass(frozen=True)
class EmitLit:
    data: bytes


@dataclass(frozen=True)
class Choose:
    arms: Tuple["Body", ...]


@dataclass(frozen=True)
class CallUnit:
    name: str
    offset: int = 1


@dataclass(frozen=True)
class PoolEmit:
    key: str


@dataclass(frozen=True)
class DepthCheck:
    offset: int
    under: "Body"
    over: "Body"


Step = Union[EmitLit, Choose, CallUnit, PoolEmit, DepthCheck]
Body = Tuple[Step, ...]


@dataclass(frozen=True)
class Unit:
    name: str
    body: Body
    key: Optional[str] = None
    rule: Optional[int] = None


@dataclass(frozen=True)
class ProducerIR:
    units: Dict[str, Unit]
    entry: Body
    analyzed: AnalyzedGrammar
    rebased: bool = False
    opt: str = "none"

    def __len__(self):
        return len(self.units)

    def pool(self, key: str) -> Tuple[bytes, ...]:
        pool = self.analyzed.pools.pool(key)
        if pool is None:
            raise ValueError(f"no pool for overflowed key {key}")
        return pool


class IRError(ValueError):
    pass


def walk(body: Body) -> Iterator[Step]:
    """Every step in ``body``, nested ones included."""
    todo = list(reversed(body))
    while todo:
        step = todo.pop()
        yield step
        if isinstance(step, Choose):
            for arm in reversed(step.arms):
                todo.extend(reversed(arm))
        elif isinstance(step, DepthCheck):
            todo.extend(reversed(step.over))
            todo.extend(reversed(step.under))


def body_size(body: Body) -> int:
    return sum(1 for _ in walk(body))


def calls(body: Body) -> Iterator[str]:
    for step in walk(body):
        if isinstance(step, CallUnit):
            yield step.name


def validate_ir(ir: ProducerIR) -> None:
    for name, unit in [("<entry>", None)] + list(ir.units.items()):
        body = ir.entry if unit is None else unit.body
        for step in walk(body):
            if isinstance(step, Choose) and len(step.arms) < 2:
                raise IRError(f"{name}: choice with fewer than two arms")
            if isinstance(step, CallUnit) and step.name not in ir.units:
                raise IRError(f"{name}: call to undefined unit {step.name}")
            if isinstance(step, PoolEmit):
                ir.pool(step.key)


def unit_names(keys) -> Dict[str, str]:
    names, used = {}, set()
    for key in keys:
        base = re.sub(r"\W", "_", key.strip("<>")) or "k"
        if base[0].isdigit():
            base = "k" + base
        name, n = base, 1
        while name in used:
            n += 1
            name = f"{base}{n}"
        used.add(name)
        names[key] = name
    return names


def _rule_body(rule, names) -> Body:
    return tuple(EmitLit(s) if isinstance(s, bytes) else CallUnit(names[s], 1) for s in rule)


def _alternatives(bodies) -> Body:
    return (Choose(tuple(bodies)),) if len(bodies) > 1 else bodies[0]


def lower(ag: AnalyzedGrammar) -> ProducerIR:
    """One unit per reachable key: depth check, then a choice over rules."""
    names = unit_names(ag.reachable)
    units = {}
    for key in ag.reachable:
        rules = ag.rules(key)
        under = _alternatives([_rule_body(r, names) for r in rules])
        if key in ag.pools.overflowed:
            over = _alternatives([_rule_body(r, names) for r in ag.min_rule_list(key)])
        else:
            over = (PoolEmit(key),)
        units[names[key]] = Unit(names[key], (DepthCheck(0, under, over),), key)
    return ProducerIR(units, (CallUnit(names[ag.start], 0),), ag)


def shift(body: Body, delta: int) -> Body:
    if delta == 0:
        return body
    out = []
    for step in body:
        if isinstance(step, CallUnit):
            step = CallUnit(step.name, step.offset + delta)
        elif isinstance(step, DepthCheck):
            step = DepthCheck(step.offset + delta, shift(step.under, delta), shift(step.over, delta))
        elif isinstance(step, Choose):
            step = Choose(tuple(shift(a, delta) for a in step.arms))
        out.append(step)
    return tuple(out)


def coalesce(body: Body) -> Body:
    """Merge adjacent literals and drop empty ones."""
    out = []
    for step in body:
        if isinstance(step, EmitLit):
            if not step.data:
                continue
            if out and isinstance(out[-1], EmitLit):
                out[-1] = EmitLit(out[-1].data + step.data)
                continue
        out.append(step)
    return tuple(out)


def recursive_units(units: Dict[str, Unit]) -> set:
    """Names of units that can reach themselves through calls."""
    graph = {n: set(calls(u.body)) for n, u in units.items()}
    found = set()
    for start in graph:
        seen, todo = set(), list(graph[start])
        while todo:
            n = todo.pop()
            if n == start:
                found.add(start)
                break
            if n not in seen:
                seen.add(n)
                todo.extend(graph.get(n, ()))
    return found


def reachable_units(entry: Body, units: Dict[str, Unit]) -> Dict[str, Unit]:
    seen = {}
    todo = list(calls(entry))
    while todo:
        n = todo.pop()
        if n not in seen:
            seen[n] = units[n]
            todo.extend(calls(units[n].body))
    return {n: u for n, u in units.items() if n in seen}


def _has_choose(body: Body) -> bool:
    return any(isinstance(s, Choose) for s in walk(body))


def _fold_entry(body: Body) -> Body:
    # the entry runs at depth 0 and the budget is at least 1
    out = []
    for step in body:
        if isinstance(step, DepthCheck) and step.offset <= 0:
            out.extend(_fold_entry(step.under))
        elif isinstance(step, Choose):
            out.append(Choose(tuple(_fold_entry(a) for a in step.arms)))
        else:
            out.append(step)
    return coalesce(out)


class _Simplifier:
    def __init__(self, ir: ProducerIR, inline: bool = True):
        self.ir = ir
        self.inline = inline
        self.recursive = recursive_units(ir.units)
        self.memo: Dict[str, Body] = {}

    def unit(self, name: str) -> Body:
        if name not in self.memo:
            self.memo[name] = self.body(self.ir.units[name].body)
        return self.memo[name]

    def inlinable(self, name: str) -> bool:
        return self.inline and name not in self.recursive and not _has_choose(self.unit(name))

    def body(self, body: Body) -> Body:
        out = []
        for step in body:
            if isinstance(step, PoolEmit):
                pool = self.ir.pool(step.key)
                out.append(EmitLit(pool[0]) if len(pool) == 1 else step)
            elif isinstance(step, CallUnit):
                if self.inlinable(step.name):
                    out.extend(shift(self.unit(step.name), step.offset))
                else:
                    out.append(step)
            elif isinstance(step, Choose):
                out.append(Choose(tuple(self.body(a) for a in step.arms)))
            elif isinstance(step, DepthCheck):
                under, over = self.body(step.under), self.body(step.over)
                if under == over:
                    out.extend(under)
                else:
                    out.append(DepthCheck(step.offset, under, over))
            else:
                out.append(step)
        return coalesce(out)


def partial_eval(ir: ProducerIR) -> ProducerIR:
    """Inline non-recursive units that make no rule choice; fold constants.

    Single-entry pools become literals, depth checks whose branches agree
    disappear, adjacent literals merge, and checks at the entry that cannot
    fire (the budget is at least 1) are dropped.
    """
    s = _Simplifier(ir)
    entry = _fold_entry(s.body(ir.entry))
    units = {n: Unit(n, s.unit(n), u.key, u.rule) for n, u in ir.units.items()}
    units = reachable_units(entry, units)
    return ProducerIR(units, entry, ir.analyzed, ir.rebased, "pe")


DEFAULT_INLINE_DEPTH = 4
DEFAULT_UNIT_STEPS = 512


def _dispatch_shape(body: Body):
    if len(body) == 1 and isinstance(body[0], DepthCheck) and body[0].offset == 0:
        under = body[0].under
        if len(under) == 1 and isinstance(under[0], Choose):
            return under[0].arms, body[0].over
    return None


class _Driver:
    def __init__(self, ir: ProducerIR, inline_depth: int, max_steps: int):
        self.ir = ir
        self.inline_depth = inline_depth
        self.max_steps = max_steps
        recursive = recursive_units(ir.units)
        self.split = {}
        for name in recursive:
            shape = _dispatch_shape(ir.units[name].body)
            if shape is not None:
                self.split[name] = shape
        self.out: Dict[str, Unit] = {}
        self.origin: Dict[str, str] = {}
        self.pending = []

    def rule_unit(self, name: str, i: int) -> str:
        return f"{name}_{i}"

    def want(self, name: str, rule: Optional[int] = None):
        target = name if rule is None else self.rule_unit(name, rule)
        if target not in self.origin:
            self.origin[target] = name
            self.pending.append((name, rule))
        return target

    def residual(self, name: str, offset: int, budget) -> Body:
        if name in self.split:
            arms, over = self.split[name]
            calls_ = tuple((CallUnit(self.want(name, i), offset),) for i in range(len(arms)))
            over = self.drive(over, offset, self.inline_depth, frozenset(), budget)
            return (DepthCheck(offset, (Choose(calls_),), over),)
        return (CallUnit(self.want(name), offset),)

    def drive(self, body: Body, offset: int, level: int, stack: frozenset, budget) -> Body:
        out = []
        for step in body:
            if isinstance(step, CallUnit):
                off = step.offset + offset
                if step.name in stack or level >= self.inline_depth or budget[0] > self.max_steps:
                    out.extend(self.residual(step.name, off, budget))
                else:
                    inner = self.drive(self.ir.units[step.name].body, off, level + 1,
                                       stack | {step.name}, budget)
                    budget[0] += body_size(inner)
                    out.extend(inner)
            elif isinstance(step, DepthCheck):
                out.append(DepthCheck(step.offset + offset,
                                      self.drive(step.under, offset, level, stack, budget),
                                      self.drive(step.over, offset, level, stack, budget)))
            elif isinstance(step, Choose):
                out.append(Choose(tuple(self.drive(a, offset, level, stack, budget) for a in step.arms)))
            else:
                out.append(step)
        return coalesce(out)

    def run(self) -> ProducerIR:
        entry = self.drive(self.ir.entry, 0, 0, frozenset(), [0])
        while self.pending:
            name, rule = self.pending.pop(0)
            unit = self.ir.units[name]
            if rule is None:
                body = self.drive(unit.body, 0, 0, frozenset({name}), [0])
                self.out[name] = Unit(name, body, unit.key)
            else:
                arm = self.split[name][0][rule]
                target = self.rule_unit(name, rule)
                self.out[target] = Unit(target, self.drive(arm, 0, 0, frozenset({name}), [0]), unit.key, rule)
        order = {n: i for i, n in enumerate(self.ir.units)}
        units = dict(sorted(self.out.items(), key=lambda kv: (order[self.origin[kv[0]]], kv[1].rule or -1)))
        return ProducerIR(units, entry, self.ir.analyzed, True, "super")


def supercompile(ir: ProducerIR, inline_depth: int = DEFAULT_INLINE_DEPTH,
                 max_steps: int = DEFAULT_UNIT_STEPS) -> ProducerIR:
    """Drive the producer: inline calls, split recursive units into rule units.

    Each recursive unit whose body is a depth-checked choice is replaced by
    one unit per rule; callers dispatch to those rule units directly. Calls
    are inlined up to ``inline_depth`` levels, or until a residual unit
    grows past ``max_steps`` steps; a call to a unit already being driven
    becomes a residual call (folding). The result is rebased.
    """
    pe = partial_eval(ir)
    if inline_depth <= 0:
        return pe
    return _Driver(pe, inline_depth, max_steps).run()
