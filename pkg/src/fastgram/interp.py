"""Reference grammar interpreters: depth-limited and pooled.

Both expand the start key with an explicit work stack. They are plain
Python on purpose: they are the oracles the compiled engines are checked
against, so they share no code with the compiled core. The start key sits
at depth 0 and every expansion hands depth + 1 to the symbols of the chosen
rule. Below ``max_depth`` any rule may be chosen; at or beyond it the
limited interpreter only picks minimum-cost rules, while the pooled one
emits a precomputed pool string in one step (walking minimum-cost rules
only for keys whose pool overflowed).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Union

from .analysis import AnalyzedGrammar
from .report import ProductionConfig, RunReport


@dataclass
class DerivationNode:
    symbol: Union[str, bytes]
    children: List["DerivationNode"] = field(default_factory=list)
    rule_index: Optional[int] = None
    pool_index: Optional[int] = None
    depth: int = 0

    @property
    def is_terminal(self) -> bool:
        return isinstance(self.symbol, bytes)

    def leaves(self) -> bytes:
        out = bytearray()
        todo = [self]
        while todo:
            node = todo.pop()
            if node.is_terminal:
                out += node.symbol
            else:
                todo.extend(reversed(node.children))
        return bytes(out)

    def height(self, ag: AnalyzedGrammar) -> int:
        """Derivation height; a pool emission counts as its key's μ-depth."""
        if self.is_terminal:
            return 0
        if self.pool_index is not None:
            return ag.depths[self.symbol]
        return 1 + max((c.height(ag) for c in self.children), default=0)

    def to_json(self):
        if self.is_terminal:
            return self.symbol.decode("utf-8", "replace")
        d = {"key": self.symbol, "children": [c.to_json() for c in self.children]}
        if self.pool_index is not None:
            d["pool"] = self.pool_index
        else:
            d["rule"] = self.rule_index
        return d


def _tables(ag: AnalyzedGrammar):
    rules = {k: ag.rules(k) for k in ag.reachable}
    cheap = {k: ag.min_rule_list(k) for k in ag.reachable}
    pools = {k: ag.pools.pool(k) for k in ag.reachable}
    return rules, cheap, pools


def _run(ag, cfg, cs, sink, pooled: bool) -> RunReport:
    start = cfg.start_key or ag.start
    began = time.perf_counter()
    total = _run_python(ag, cfg, cs, sink, pooled, start)
    elapsed = time.perf_counter() - began
    return RunReport(engine="pooled" if pooled else "limit", depth=cfg.max_depth, inputs=cfg.inputs,
                     bytes=total, production_seconds=elapsed)


def _run_python(ag, cfg, cs, sink, pooled, start) -> int:
    rules, cheap, pools = _tables(ag)
    if not pooled:
        pools = dict.fromkeys(pools)
    max_depth = cfg.max_depth
    sep = cfg.separator
    choose = cs.next_choice
    total = 0
    for _ in range(cfg.inputs):
        out = bytearray()
        stack = [(start, 0)]
        pop = stack.pop
        push = stack.append
        while stack:
            sym, depth = pop()
            if sym.__class__ is bytes:
                out += sym
                continue
            if depth >= max_depth:
                pool = pools[sym]
                if pool is not None:
                    out += pool[choose(len(pool))]
                    continue
                alts = cheap[sym]
            else:
                alts = rules[sym]
            rule = alts[choose(len(alts))]
            depth += 1
            for s in reversed(rule):
                push((s, depth))
        out += sep
        sink.write(out)
        total += len(out)
    return total


def produce_limit(ag: AnalyzedGrammar, cfg: ProductionConfig, cs, sink) -> RunReport:
    return _run(ag, cfg, cs, sink, pooled=False)


def produce_pooled(ag: AnalyzedGrammar, cfg: ProductionConfig, cs, sink) -> RunReport:
    return _run(ag, cfg, cs, sink, pooled=True)


def derive(ag: AnalyzedGrammar, max_depth: int, cs, pooled: bool = True, start: Optional[str] = None) -> DerivationNode:
    """Produce one input as a derivation tree (the slow, test-mode path).

    Draws exactly the same choices as ``produce_pooled`` (or
    ``produce_limit`` when ``pooled`` is false).
    """
    rules, cheap, pools = _tables(ag)
    root = DerivationNode(start or ag.start)
    stack = [root]
    while stack:
        node = stack.pop()
        key = node.symbol
        if node.depth >= max_depth:
            pool = pools[key] if pooled else None
            if pool is not None:
                node.pool_index = choice = cs.next_choice(len(pool))
                node.children = [DerivationNode(pool[choice], depth=node.depth + 1)]
                continue
            alts, indices = cheap[key], ag.pools.min_rules[key]
        else:
            alts, indices = rules[key], range(len(rules[key]))
        c = cs.next_choice(len(alts))
        node.rule_index = indices[c]
        node.children = [DerivationNode(s, depth=node.depth + 1) for s in alts[c]]
        stack.extend(n for n in reversed(node.children) if not n.is_terminal)
    return root


def check_derivation(
    ag: AnalyzedGrammar,
    node: DerivationNode,
    output: Optional[bytes] = None,
    max_depth: Optional[int] = None,
) -> bool:
    """True iff the tree only uses grammar rules and pool strings.

    With ``max_depth`` given, nodes at or past the budget must use a pool
    string or a minimum-cost rule. With ``output`` given, the leaves must
    concatenate to it.
    """
    g = ag.grammar
    pool_sets = {}
    todo = [(node, 0)]
    while todo:
        n, depth = todo.pop()
        if n.is_terminal:
            continue
        key = n.symbol
        if key not in g:
            return False
        if n.pool_index is not None:
            pool = ag.pools.pool(key)
            if pool is None or len(n.children) != 1 or not n.children[0].is_terminal:
                return False
            if key not in pool_sets:
                pool_sets[key] = set(pool)
            if n.children[0].symbol not in pool_sets[key]:
                return False
            continue
        rules = g[key]
        if n.rule_index is None or not 0 <= n.rule_index < len(rules):
            return False
        if max_depth is not None and depth >= max_depth and n.rule_index not in ag.pools.min_rules[key]:
            return False
        rule = rules[n.rule_index]
        if len(rule) != len(n.children):
            return False
        for sym, child in zip(rule, n.children):
            if child.symbol != sym:
                return False
            todo.append((child, depth + 1))
    if output is not None and node.leaves() != output:
        return False
    return True
