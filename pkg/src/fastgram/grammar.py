"""Grammar loading, validation, indexing and one-level unrolling.

A grammar maps nonterminal names (``"<key>"``) to an ordered tuple of rules.
A rule is a tuple of symbols; a nonterminal symbol is kept as ``str`` and a
terminal as ``bytes`` (the UTF-8 encoding of the source string), so engines
can tell them apart with a type check and never re-encode.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

Symbol = Union[str, bytes]
Rule = Tuple[Symbol, ...]

DEFAULT_START = "<start>"
DEFAULT_UNROLL_CAP = 4096


class GrammarError(ValueError):
    """Raised for malformed or unusable grammars."""


def is_nonterminal(token: str) -> bool:
    return len(token) >= 2 and token[0] == "<" and token[-1] == ">"


@dataclass(frozen=True)
class Grammar:
    definitions: Mapping[str, Tuple[Rule, ...]]
    start: str = DEFAULT_START

    def __post_init__(self):
        if self.start not in self.definitions:
            raise GrammarError(f"missing start key {self.start}")

    @property
    def keys(self) -> List[str]:
        return list(self.definitions)

    def __getitem__(self, key: str) -> Tuple[Rule, ...]:
        return self.definitions[key]

    def __contains__(self, key: object) -> bool:
        return key in self.definitions

    def __len__(self) -> int:
        return len(self.definitions)

    def with_start(self, start: str) -> "Grammar":
        return Grammar(self.definitions, start)

    def referenced(self) -> Dict[str, List[str]]:
        """Nonterminals referenced by each key, in first-use order."""
        refs = {}
        for key, rules in self.definitions.items():
            seen = dict.fromkeys(s for r in rules for s in r if isinstance(s, str))
            refs[key] = list(seen)
        return refs

    def reachable(self) -> List[str]:
        """Keys reachable from the start key, in definition order."""
        refs = self.referenced()
        found = {self.start}
        todo = [self.start]
        while todo:
            for child in refs.get(todo.pop(), ()):
                if child not in found:
                    found.add(child)
                    todo.append(child)
        return [k for k in self.definitions if k in found]


@dataclass(frozen=True)
class KeyIndex:
    key_order: Tuple[str, ...]
    rule_counts: Tuple[int, ...]
    key_ids: Dict[str, int] = field(compare=False, repr=False)

    @classmethod
    def build(cls, g: Grammar) -> "KeyIndex":
        order = tuple(g.definitions)
        return cls(order, tuple(len(g[k]) for k in order), {k: i for i, k in enumerate(order)})

    def __getitem__(self, key: str) -> int:
        return self.key_ids[key]


@dataclass(frozen=True)
class Issue:
    level: str  # "error" or "warning"
    key: str
    message: str

    def __str__(self):
        return f"{self.level}: {self.message}"


def _parse_rule(key: str, raw) -> Rule:
    if not isinstance(raw, list):
        raise GrammarError(f"rule of {key} must be an array of strings")
    rule = []
    for tok in raw:
        if not isinstance(tok, str):
            raise GrammarError(f"rule of {key} contains non-string token {tok!r}")
        rule.append(tok if is_nonterminal(tok) else tok.encode("utf-8"))
    return tuple(rule)


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise GrammarError(f"duplicate key definition {k}")
        out[k] = v
    return out


def load_grammar(text: Union[str, bytes], start: str = DEFAULT_START) -> Grammar:
    """Parse a grammar document: ``{"<key>": [["sym", ...], ...], ...}``."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as e:
        raise GrammarError(f"syntax error: {e}") from None
    if not isinstance(doc, dict):
        raise GrammarError("syntax error: grammar must be a JSON object")
    defs = {}
    for key, rules in doc.items():
        if not is_nonterminal(key):
            raise GrammarError(f"key {key!r} is not a nonterminal name")
        if not isinstance(rules, list):
            raise GrammarError(f"definition of {key} must be an array of rules")
        defs[key] = tuple(_parse_rule(key, r) for r in rules)
    return Grammar(defs, start)


def load_grammar_file(path, start: str = DEFAULT_START) -> Grammar:
    with open(path, "rb") as f:
        return load_grammar(f.read(), start)


def to_document(g: Grammar) -> Dict[str, List[List[str]]]:
    return {
        k: [[s if isinstance(s, str) else s.decode("utf-8") for s in r] for r in rules]
        for k, rules in g.definitions.items()
    }


def dump_grammar(g: Grammar, indent: int = 1) -> str:
    return json.dumps(to_document(g), indent=indent, ensure_ascii=False)


def from_dict(d: Mapping[str, Iterable[Sequence[str]]], start: str = DEFAULT_START) -> Grammar:
    """Build a grammar from a Python dict in the file-format shape."""
    return load_grammar(json.dumps({k: [list(r) for r in v] for k, v in d.items()}), start)


def validate(g: Grammar) -> List[Issue]:
    """Report problems; an empty list means the grammar is usable."""
    from .analysis import mu_depth

    issues = []
    undefined = []
    for key, rules in g.definitions.items():
        if not rules:
            issues.append(Issue("error", key, f"key {key} has no rules"))
        for rule in rules:
            for s in rule:
                if isinstance(s, str) and s not in g.definitions and s not in undefined:
                    undefined.append(s)
                    issues.append(Issue("error", s, f"undefined nonterminal {s}"))
    reachable = set(g.reachable())
    for key in g.definitions:
        if key not in reachable:
            issues.append(Issue("warning", key, f"unreachable key {key}"))
    if not undefined:
        depths = mu_depth(g)
        for key, d in depths.mu_depth.items():
            if d == float("inf"):
                level = "error" if key in reachable else "warning"
                issues.append(Issue(level, key, f"key {key} has infinite μ-depth"))
    return issues


def errors(issues: Iterable[Issue]) -> List[Issue]:
    return [i for i in issues if i.level == "error"]


def _unroll_rule(g: Grammar, rule: Rule) -> Iterable[Rule]:
    options = [g[s] if isinstance(s, str) else ((s,),) for s in rule]
    for combo in itertools.product(*options):
        yield tuple(sym for part in combo for sym in part)


def unroll(g: Grammar, cap: int = DEFAULT_UNROLL_CAP) -> Grammar:
    """Substitute every nonterminal in every rule by each of its alternatives.

    Rules of a key are deduplicated keeping first occurrence. Raises
    ``GrammarError`` if a key would end up with more than ``cap`` rules.
    """
    defs = {}
    for key, rules in g.definitions.items():
        out = {}
        for rule in rules:
            for new in _unroll_rule(g, rule):
                out.setdefault(new, None)
                if len(out) > cap:
                    raise GrammarError(f"unrolling {key} exceeds {cap} rules")
        defs[key] = tuple(out)
    return Grammar(defs, g.start)
