import functools
import random
import re

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from fastgram.analysis import analyze
from fastgram.grammar import from_dict, load_grammar_file
from fastgram.resources import BUNDLED, grammar_path

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CORPUS = BUNDLED


@functools.lru_cache(maxsize=None)
def corpus(name):
    return analyze(load_grammar_file(grammar_path(name)))


@pytest.fixture(scope="session")
def expr():
    return corpus("expr")


def small_grammar(doc):
    return analyze(from_dict(doc))


@st.composite
def grammars(draw, max_keys=5, max_alts=3, max_syms=3):
    """Random grammars whose every key has finite μ-depth."""
    n = draw(st.integers(1, max_keys))
    keys = ["<start>"] + [f"<k{i}>" for i in range(1, n)]
    terminal = st.sampled_from(["a", "b", "cd", ""])
    doc = {}
    for i, k in enumerate(keys):
        # one terminal-only rule guarantees finite μ-depth for every key
        rules = [draw(st.lists(terminal, max_size=max_syms))]
        sym = st.one_of(terminal, st.sampled_from(keys))
        rules += draw(st.lists(st.lists(sym, max_size=max_syms), max_size=max_alts - 1))
        doc[k] = draw(st.permutations(rules))
    return doc


def random_corpus(count, seed=20240611):
    from oracles import random_grammar_dict

    rng = random.Random(seed)
    return [random_grammar_dict(rng) for _ in range(count)]


_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    lines = {}
    for outcome in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m or getattr(rep, "when", "call") not in ("call", "setup"):
                continue
            if rep.when == "setup" and outcome == "passed":
                continue
            detail = "; ".join(str(v) for k, v in getattr(rep, "user_properties", []) if k == "measured")
            lines[int(m.group(1))] = f"criterion {m.group(1)}: {'PASS' if outcome == 'passed' else 'FAIL'}" + (
                f"  ({detail})" if detail else "")
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
