import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import corpus, grammars, small_grammar
from fastgram import _backend
from fastgram.analysis import analyze
from fastgram.choice import ChoiceStream, RecordingStream, make_stream
from fastgram.codegen.ir import (CallUnit, Choose, DepthCheck, EmitLit, IRError, PoolEmit, ProducerIR, Unit,
                                 lower, partial_eval, supercompile, unit_names, validate_ir, walk)
from fastgram.codegen.run import run_ir
from fastgram.grammar import from_dict
from fastgram.interp import produce_pooled
from fastgram.report import ProductionConfig
from fastgram.sinks import MemorySink


def produce(ir_or_ag, cs, depth, inputs=20, pure=True):
    sink = MemorySink()
    cfg = ProductionConfig(max_depth=depth, inputs=inputs)
    if isinstance(ir_or_ag, ProducerIR):
        run_ir(ir_or_ag, cfg, cs, sink, pure=pure)
    else:
        produce_pooled(ir_or_ag, cfg, cs, sink)
    return sink.getvalue()


def all_steps(ir):
    yield from walk(ir.entry)
    for unit in ir.units.values():
        yield from walk(unit.body)


def test_lower_digit(expr):
    body = lower(expr).units["digit"].body
    (check,) = body
    assert isinstance(check, DepthCheck) and check.over == (PoolEmit("<digit>"),)
    (choose,) = check.under
    assert choose.arms == tuple((EmitLit(str(d).encode()),) for d in range(10))


def test_lower_single_rule_has_no_choice():
    ir = lower(small_grammar({"<start>": [["a"]]}))
    assert ir.units["start"].body == (DepthCheck(0, (EmitLit(b"a"),), (PoolEmit("<start>"),)),)


def test_lower_expr_three_arms(expr):
    (check,) = lower(expr).units["expr"].body
    (choose,) = check.under
    assert choose.arms == (
        (CallUnit("term"), EmitLit(b"+"), CallUnit("expr")),
        (CallUnit("term"), EmitLit(b"-"), CallUnit("expr")),
        (CallUnit("term"),),
    )


def test_lower_one_unit_per_reachable_key(expr):
    ir = lower(expr)
    assert [u.key for u in ir.units.values()] == list(expr.reachable)
    assert ir.entry == (CallUnit("start", 0),)


def test_unit_names_are_identifiers():
    names = unit_names(["<a-b>", "<a_b>", "<1x>", "<>"])
    assert names == {"<a-b>": "a_b", "<a_b>": "a_b2", "<1x>": "k1x", "<>": "k"}


def test_partial_eval_inlines_and_coalesces():
    pe = partial_eval(lower(small_grammar({"<start>": [["<a>"]], "<a>": [["x", "y"]]})))
    assert pe.entry == (EmitLit(b"xy"),)
    assert pe.units == {}


def test_partial_eval_start_inlined(expr):
    ir = lower(expr)
    pe = partial_eval(ir)
    assert len(pe.units) == len(ir.units) - 1
    assert "start" not in pe.units
    assert pe.opt == "pe"


def test_partial_eval_leaves_choice_only_ir_alone():
    ir = lower(small_grammar({"<start>": [["a"], ["c"], ["<start>", "b"]]}))
    assert partial_eval(ir).units == ir.units


def test_supercompile_rule_units(expr):
    sc = supercompile(lower(expr), 1)
    assert {"expr_0", "expr_1", "expr_2"} <= set(sc.units)
    assert "expr" not in sc.units
    assert sc.rebased and sc.opt == "super"
    assert sc.units["expr_1"].key == "<expr>" and sc.units["expr_1"].rule == 1


def test_supercompile_depth_zero_is_partial_eval(expr):
    ir = lower(expr)
    assert supercompile(ir, 0) == partial_eval(ir)


def test_validate_ir_rejects_bad_shapes(expr):
    ir = lower(expr)
    bad = ProducerIR({**ir.units, "x": Unit("x", (Choose(((EmitLit(b"a"),),)),))}, ir.entry, ir.analyzed)
    with pytest.raises(IRError, match="fewer than two"):
        validate_ir(bad)
    bad = ProducerIR(ir.units, (CallUnit("nope"),), ir.analyzed)
    with pytest.raises(IRError, match="undefined unit"):
        validate_ir(bad)


@pytest.mark.parametrize("name", ["expr", "json", "css-subset", "html-subset"])
@pytest.mark.parametrize("inline", [0, 1, 2, 4, 8])
def test_corpus_passes_are_valid_and_bounded(name, inline):
    ag = corpus(name)
    ir = lower(ag)
    sc = supercompile(ir, inline)
    for x in (ir, partial_eval(ir), sc):
        validate_ir(x)
        assert all(len(s.arms) >= 2 for s in all_steps(x) if isinstance(s, Choose))
    max_alts = max(len(ag.rules(k)) for k in ag.reachable)
    assert len(sc.units) <= len(ir.units) * (1 + max_alts) * max(inline, 1)


def _levels(ag, inline):
    ir = lower(ag)
    return [ir, partial_eval(ir), supercompile(ir, inline)]


@pytest.mark.parametrize("name", ["expr", "json", "css-subset", "html-subset"])
def test_corpus_levels_agree(name):
    ag = corpus(name)
    for depth in (1, 3, 8):
        expected = produce(ag, ChoiceStream(depth), depth, 200)
        for ir in _levels(ag, 4):
            assert produce(ir, ChoiceStream(depth), depth, 200) == expected


@settings(max_examples=200)
@given(grammars(), st.integers(0, 2 ** 64 - 1), st.integers(1, 7), st.integers(0, 5))
def test_property_semantic_preservation(doc, seed, depth, inline):
    ag = analyze(from_dict(doc))
    expected = produce(ag, ChoiceStream(seed, 64), depth)
    for ir in _levels(ag, inline):
        validate_ir(ir)
        assert produce(ir, ChoiceStream(seed, 64), depth) == expected


@given(grammars(), st.integers(0, 2 ** 32), st.integers(1, 6))
def test_property_choice_conservation(doc, seed, depth):
    ag = analyze(from_dict(doc))
    traces = []
    for ir in _levels(ag, 3):
        rec = RecordingStream(ChoiceStream(seed, 64))
        produce(ir, rec, depth)
        traces.append(rec.trace.recorded)
    assert traces[0] == traces[1] == traces[2]


@given(grammars(max_keys=6, max_alts=4, max_syms=4), st.integers(0, 10))
def test_property_supercompile_terminates_within_bound(doc, inline):
    ag = analyze(from_dict(doc))
    ir = lower(ag)
    sc = supercompile(ir, inline)
    validate_ir(sc)
    max_alts = max(len(ag.rules(k)) for k in ag.reachable)
    assert len(sc.units) <= len(ir.units) * (1 + max_alts) * max(inline, 1)


@pytest.mark.skipif(_backend.core is None, reason="compiled core not built")
@given(grammars(), st.integers(0, 2 ** 32), st.integers(1, 6))
def test_property_core_matches_python(doc, seed, depth):
    ag = analyze(from_dict(doc))
    for ir in _levels(ag, 2):
        assert (produce(ir, make_stream(seed, 64), depth, pure=False)
                == produce(ir, make_stream(seed, 64, pure=True), depth, pure=True))
