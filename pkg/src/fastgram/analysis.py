"""Minimum expansion depth (μ-depth), minimum-cost rules and string pools."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

from .grammar import Grammar, GrammarError, KeyIndex, Rule, errors, validate

INF = math.inf
DEFAULT_POOL_CAP = 65536
DEFAULT_POOL_BYTES = 1 << 20


@dataclass(frozen=True)
class DepthTable:
    mu_depth: Dict[str, float]
    rule_depth: Dict[Tuple[str, int], float]

    def __getitem__(self, key: str) -> float:
        return self.mu_depth[key]

    def min_rules(self, key: str) -> Tuple[int, ...]:
        best = self.mu_depth[key]
        if best == INF:
            return ()
        n = 0
        while (key, n) in self.rule_depth:
            n += 1
        return tuple(i for i in range(n) if self.rule_depth[key, i] == best)


def _rule_cost(rule: Rule, mu: Mapping[str, float]) -> float:
    # terminals cost 0; an empty rule still takes one rewrite step
    return 1 + max((mu[s] for s in rule if isinstance(s, str)), default=0)


def mu_depth(g: Grammar) -> DepthTable:
    """Least fixed point of: mu(k) = min over rules of 1 + max child mu."""
    mu: Dict[str, float] = {k: INF for k in g.definitions}
    changed = True
    while changed:
        changed = False
        for key, rules in g.definitions.items():
            best = min((_rule_cost(r, mu) for r in rules), default=INF)
            if best < mu[key]:
                mu[key] = best
                changed = True
    rule_depth = {
        (key, i): _rule_cost(r, mu) for key, rules in g.definitions.items() for i, r in enumerate(rules)
    }
    return DepthTable({k: (int(v) if v != INF else INF) for k, v in mu.items()}, rule_depth)


@dataclass(frozen=True)
class PoolTable:
    pools: Dict[str, Tuple[bytes, ...]]
    min_rules: Dict[str, Tuple[int, ...]]
    overflowed: FrozenSet[str]

    def pool(self, key: str) -> Optional[Tuple[bytes, ...]]:
        """The pool for ``key``, or None if it overflowed."""
        if key in self.overflowed:
            return None
        return self.pools[key]


def compute_pools(
    g: Grammar,
    d: DepthTable,
    cap: int = DEFAULT_POOL_CAP,
    byte_cap: int = DEFAULT_POOL_BYTES,
) -> PoolTable:
    """Enumerate every string of the min-rule subgrammar, per key.

    Order is depth-first: min rules by ascending index, leftmost symbol
    varying slowest. Duplicates keep their first position. Keys whose pool
    would exceed ``cap`` strings or ``byte_cap`` bytes are marked overflowed.
    """
    min_rules = {k: d.min_rules(k) for k in g.definitions}
    pools: Dict[str, Tuple[bytes, ...]] = {}
    overflowed = set()
    finite = sorted((k for k in g.definitions if d[k] != INF), key=lambda k: d[k])
    for key in finite:
        rules = [g[key][i] for i in min_rules[key]]
        if any(isinstance(s, str) and s in overflowed for r in rules for s in r):
            overflowed.add(key)
            continue
        seen: Dict[bytes, None] = {}
        size = 0
        for rule in rules:
            parts = [pools[s] if isinstance(s, str) else (s,) for s in rule]
            for combo in itertools.product(*parts):
                text = b"".join(combo)
                if text not in seen:
                    seen[text] = None
                    size += len(text)
                    if len(seen) > cap or size > byte_cap:
                        break
            if len(seen) > cap or size > byte_cap:
                overflowed.add(key)
                break
        if key not in overflowed:
            pools[key] = tuple(seen)
    return PoolTable(pools, min_rules, frozenset(overflowed))


@dataclass(frozen=True)
class AnalyzedGrammar:
    grammar: Grammar
    index: KeyIndex
    depths: DepthTable
    pools: PoolTable
    reachable: Tuple[str, ...]

    @property
    def start(self) -> str:
        return self.grammar.start

    def rules(self, key: str) -> Tuple[Rule, ...]:
        return self.grammar[key]

    def min_rule_list(self, key: str) -> Tuple[Rule, ...]:
        return tuple(self.grammar[key][i] for i in self.pools.min_rules[key])

    @property
    def max_mu(self) -> int:
        return max(self.depths[k] for k in self.reachable)


def analyze(
    g: Grammar, cap: int = DEFAULT_POOL_CAP, byte_cap: int = DEFAULT_POOL_BYTES
) -> AnalyzedGrammar:
    problems = errors(validate(g))
    if problems:
        raise GrammarError("; ".join(i.message for i in problems))
    depths = mu_depth(g)
    reachable = g.reachable()
    for key in reachable:
        if depths[key] == INF:
            raise GrammarError(f"key {key} has infinite μ-depth")
    pools = compute_pools(g, depths, cap, byte_cap)
    return AnalyzedGrammar(g, KeyIndex.build(g), depths, pools, tuple(reachable))


def describe(ag: AnalyzedGrammar) -> List[dict]:
    """Per-key rows for the ``analyze`` command."""
    rows = []
    for key in ag.grammar.definitions:
        mu = ag.depths[key]
        rows.append(
            {
                "key": key,
                "mu_depth": None if mu == INF else mu,
                "min_rules": list(ag.pools.min_rules[key]),
                "pool_size": None if key in ag.pools.overflowed else len(ag.pools.pools.get(key, ())),
                "overflow": key in ag.pools.overflowed,
                "reachable": key in ag.reachable,
            }
        )
    return rows
