"""Independent reference implementations used only by the tests.

None of these import the analysis, production or code-generation modules
they check; they work from the raw grammar definitions.
"""

from __future__ import annotations

import random
from typing import Dict, List, Optional, Set, Tuple

INF = float("inf")


def nonterminals(rule):
    return [s for s in rule if isinstance(s, str)]


# --- μ-depth: breadth-first over derivation heights -------------------------

def mu_bfs(defs) -> Dict[str, float]:
    """Height h admits key k iff some rule has every child admitted at h-1."""
    mu = {k: INF for k in defs}
    admitted: Set[str] = set()
    height = 0
    while True:
        height += 1
        new = {k for k, rules in defs.items() if k not in admitted
               and any(all(c in admitted for c in nonterminals(r)) for r in rules)}
        if not new:
            return mu
        for k in new:
            mu[k] = height
        admitted |= new


def min_rules_oracle(defs, mu) -> Dict[str, Tuple[int, ...]]:
    out = {}
    for k, rules in defs.items():
        if mu[k] == INF:
            out[k] = ()
            continue
        out[k] = tuple(i for i, r in enumerate(rules)
                       if 1 + max((mu[c] for c in nonterminals(r)), default=0) == mu[k])
    return out


# --- pools: exhaustive leftmost rewriting of sentential forms ---------------

class TooLarge(Exception):
    pass


def _normalize(form):
    out = []
    for s in form:
        if isinstance(s, bytes):
            if out and isinstance(out[-1], bytes):
                out[-1] += s
            elif s:
                out.append(s)
        else:
            out.append(s)
    return tuple(out)


def pool_bruteforce(defs, key, min_rules, limit=200_000) -> Set[bytes]:
    """All terminal strings of ``key`` in the min-rule subgrammar."""
    done: Set[bytes] = set()
    seen = set()
    todo = [_normalize((key,))]
    while todo:
        form = todo.pop()
        at = next((i for i, s in enumerate(form) if isinstance(s, str)), None)
        if at is None:
            done.add(form[0] if form else b"")
            continue
        for i in min_rules[form[at]]:
            new = _normalize(form[:at] + tuple(defs[form[at]][i]) + form[at + 1:])
            if new not in seen:
                seen.add(new)
                if len(seen) > limit:
                    raise TooLarge(key)
                todo.append(new)
    return done


# --- random small grammars ---------------------------------------------------

TERMINALS = ("a", "b", "ab", "")


def random_grammar_dict(rng: random.Random, max_keys=8, max_alts=4, max_syms=4, p_nt=0.4) -> dict:
    n = rng.randint(1, max_keys)
    keys = ["<start>"] + [f"<k{i}>" for i in range(1, n)]
    doc = {}
    for k in keys:
        alts = []
        for _ in range(rng.randint(1, max_alts)):
            alts.append([rng.choice(keys) if rng.random() < p_nt else rng.choice(TERMINALS)
                         for _ in range(rng.randint(0, max_syms))])
        doc[k] = alts
    return doc


def parsed_defs(doc) -> dict:
    """The document with terminals as bytes, mirroring the file format."""
    def sym(s):
        return s if len(s) >= 2 and s[0] == "<" and s[-1] == ">" else s.encode()
    return {k: [tuple(sym(s) for s in r) for r in rules] for k, rules in doc.items()}


# --- recognizers -------------------------------------------------------------

_ADD, _MUL = set(b"+-"), set(b"*/")


class ExprRecognizer:
    """Hand-written recursive descent for the arithmetic expression grammar."""

    def __init__(self, text: bytes):
        self.t = text
        self.i = 0

    @classmethod
    def accepts(cls, text: bytes) -> bool:
        r = cls(text)
        try:
            r.expr()
        except SyntaxError:
            return False
        return r.i == len(text)

    def peek(self) -> int:
        return self.t[self.i] if self.i < len(self.t) else -1

    def eat(self, ch: bytes):
        if self.peek() != ch[0]:
            raise SyntaxError(self.i)
        self.i += 1

    def expr(self):
        self.term()
        if self.peek() in _ADD:
            self.i += 1
            self.expr()

    def term(self):
        self.factor()
        if self.peek() in _MUL:
            self.i += 1
            self.term()

    def factor(self):
        c = self.peek()
        if c in _ADD:
            self.i += 1
            self.factor()
        elif c == ord("("):
            self.i += 1
            self.expr()
            self.eat(b")")
        else:
            self.integer()
            if self.peek() == ord("."):
                self.i += 1
                self.integer()

    def integer(self):
        if not (0x30 <= self.peek() <= 0x39):
            raise SyntaxError(self.i)
        while 0x30 <= self.peek() <= 0x39:
            self.i += 1


class Earley:
    """Byte-level Earley recognizer with nullable-aware prediction."""

    def __init__(self, defs, start: str):
        self.start = start
        # terminals become runs of single bytes
        self.rules = {k: [tuple(t for s in r for t in ((s,) if isinstance(s, str) else tuple(s))) for r in rules]
                      for k, rules in defs.items()}
        self.nullable = set()
        changed = True
        while changed:
            changed = False
            for k, rules in self.rules.items():
                if k not in self.nullable and any(all(isinstance(s, str) and s in self.nullable for s in r)
                                                  for r in rules):
                    self.nullable.add(k)
                    changed = True

    def accepts(self, text: bytes) -> bool:
        rules = self.rules
        charts: List[dict] = [dict() for _ in range(len(text) + 1)]

        def add(i, item, work):
            if item not in charts[i]:
                charts[i][item] = None
                work.append(item)

        for i in range(len(text) + 1):
            work = list(charts[i])
            if i == 0:
                for r in range(len(rules[self.start])):
                    add(0, (self.start, r, 0, 0), work)
            while work:
                key, r, dot, origin = work.pop()
                body = rules[key][r]
                if dot < len(body):
                    s = body[dot]
                    if isinstance(s, str):
                        for rr in range(len(rules[s])):
                            add(i, (s, rr, 0, i), work)
                        if s in self.nullable:
                            add(i, (key, r, dot + 1, origin), work)
                    elif i < len(text) and text[i] == s:
                        charts[i + 1][(key, r, dot + 1, origin)] = None
                else:
                    for pk, pr, pdot, porigin in list(charts[origin]):
                        pbody = rules[pk][pr]
                        if pdot < len(pbody) and pbody[pdot] == key:
                            add(i, (pk, pr, pdot + 1, porigin), work)
        return any(k == self.start and d == len(rules[k][r]) and o == 0 for k, r, d, o in charts[-1])


# --- pooled production with derivation heights -------------------------------

def pooled_with_heights(defs, start, mu, pools, min_rules, max_depth, choose, count, sep=b"\n"):
    """Pooled production re-derived from the definitions; returns (bytes, heights).

    ``pools`` maps key to the pool tuple or None. A key expanded at depth e
    makes the tree at least e + 1 high; a pool string at depth e adds mu(k).
    """
    out = bytearray()
    heights = []
    for _ in range(count):
        height = 0
        stack = [(start, 0)]
        while stack:
            sym, e = stack.pop()
            if isinstance(sym, bytes):
                out += sym
                continue
            pool: Optional[tuple] = pools[sym] if e >= max_depth else None
            if pool is not None:
                out += pool[choose(len(pool))]
                height = max(height, e + mu[sym])
                continue
            alts = [defs[sym][i] for i in min_rules[sym]] if e >= max_depth else defs[sym]
            rule = alts[choose(len(alts))]
            height = max(height, e + 1)
            stack.extend((s, e + 1) for s in reversed(rule))
        out += sep
        heights.append(height)
    return bytes(out), heights
