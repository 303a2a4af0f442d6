import glob
import json
import os

import pytest
from hypothesis import given, settings

import memro
from memro.arch import get_arch
from memro.explorer import check_condition, explore
from memro.litmus import (
    ParseError,
    Report,
    desugar,
    format_expr,
    load_test,
    parse_test,
    render_report,
    render_source,
    report_dict,
)
from memro.syntax import (
    FENCE_L,
    FENCE_S,
    SKIP,
    Atomic,
    Bin,
    Choice,
    Glob,
    Guard,
    Lit,
    Prefix,
    Reg,
    Sym,
    Update,
    While,
)

from oracles import outcome_key
from strategies import litmus_sources

CORPUS = sorted(glob.glob(os.path.join(os.path.dirname(memro.__file__), "corpus", "*.wmm")))

SB = """\
# store buffering
test SB
arch arm
init { x = 0; y = 0; }
thread 1 { reg r1; x := 1; r1 := y; }
thread 2 { reg r2; y := 1; r2 := x; }
exists 1:r1 = 0 and 2:r2 = 0
expect ALLOWED;
"""


def test_parse_store_buffering():
    tc = parse_test(SB)
    assert tc.name == "SB" and tc.arch == "arm" and tc.storage is None
    assert [t.pid for t in tc.threads] == [1, 2]
    assert tc.threads[0].regs == (("r1", 0),)
    assert tc.quantifier == "exists" and tc.expect == "ALLOWED"
    assert tc.commands()[1] == Prefix(Update(Glob("x"), Lit(1)), Prefix(Update(Reg("r1"), Glob("y")), SKIP))


def test_names_with_punctuation():
    tc = parse_test(SB.replace("test SB", "test MP+fence+ctrl.arm"))
    assert tc.name == "MP+fence+ctrl.arm"


def test_init_forms():
    src = """
test init
arch sc
init { x = 3; a = [1, 2]; b[0] = 5; b[1] = 6; q = seq [1, 2]; s = none; }
thread 1 { reg r = 4, t = _; }
exists x = 3
"""
    tc = parse_test(src)
    mem = {str(k): v for k, v in tc.memory}
    assert mem["x"] == 3 and mem["a[1]"] == 2 and mem["b[1]"] == 6
    assert mem["q"] == (1, 2) and mem["s"] == Sym("none")
    assert tc.arrays == frozenset({"a", "b"})
    assert dict(tc.threads[0].regs) == {"r": 4, "t": Sym("_")}


def test_cas_desugars_to_atomic_choice():
    src = """
test cas
arch arm
init { l = 0; }
thread 1 { reg ok; if CAS(l, 0, 1) { ok := 1; } }
exists 1:ok = 1
"""
    c = parse_test(src).commands()[1]
    assert isinstance(c, Choice)
    ok = c.left
    assert ok.action == Atomic((Guard(Bin("=", Glob("l"), Lit(0))), Update(Glob("l"), Lit(1))))
    assert ok.rest == Prefix(Update(Reg("ok"), Lit(1)), SKIP)
    assert c.right == Prefix(Guard(Bin("!=", Glob("l"), Lit(0))), SKIP)


def test_negated_cas_swaps_branches():
    src = """
test cas
arch arm
init { l = 0; }
thread 1 { reg ok; if !CAS(l, 0, 1) { ok := 1; } }
exists 1:ok = 1
"""
    c = parse_test(src).commands()[1]
    assert c.left.rest == SKIP
    assert c.right.rest == Prefix(Update(Reg("ok"), Lit(1)), SKIP)


def test_if_and_while_desugar():
    src = """
test ctl
arch arm
init { x = 0; }
thread 1 { reg r; while r = 0 { r := x; } if r = 1 { x := 2; } else { x := 3; } }
exists x = 2
"""
    c = parse_test(src).commands()[1]
    assert isinstance(c, While) and c.budget is None
    assert isinstance(c.then, Choice)
    assert c.then.left.action == Guard(Bin("=", Reg("r"), Lit(1)))


def test_lwfence_becomes_two_gates():
    src = """
test lw
arch power
init { x = 0; }
thread 1 { x := 1; lwfence; x := 2; }
exists x = 2
"""
    c = parse_test(src).commands()[1]
    assert [c.rest.action, c.rest.rest.action] == [FENCE_L, FENCE_S]


@pytest.mark.parametrize(
    "src, line, fragment",
    [
        ("test t\narch arm\ninit { x = 0; }\nthread 1 { x := 1; lwfence; }\nexists x = 1\n", 4, "lwfence"),
        ("test t\narch vax\n", 2, "unknown architecture"),
        ("test t\narch arm\ninit { x = 0; }\nthread 1 { y := 1; }\nexists x = 1\n", 4, "undeclared"),
        ("test t\narch arm\ninit { x = 0; }\nthread 1 { reg x; }\nexists x = 1\n", 4, "clashes"),
        ("test t\narch arm\ninit { a = [0, 0]; }\nthread 1 { a[2] := 1; }\nexists a[0] = 1\n", 4, "out of bounds"),
        ("test t\narch arm\ninit { x = 0; }\nthread 1 { x[1] := 1; }\nexists x = 1\n", 4, "address shift"),
        ("test t\narch arm\ninit { x = 0; }\nthread 1 { x := 1 }\nexists x = 1\n", 4, "expected"),
        ("test t\narch arm\ninit { x = 0; }\nthread 1 { x := 1; }\nexists 2:r = 1\n", 5, "no thread"),
        ("test t\narch arm\ninit { x = 0; }\nthread 1 { x := 1; }\nexists x = 1 = 1\n", 5, "chain"),
        ("test t\narch arm\ninit { x = 0; y = 0; }\nthread 1 { atomic { fence; } }\nexists x = 1\n", 4, "atomic"),
        ("test t\narch arm\ninit { x = 0; }\nthread 1 { x := 1 $ }\nexists x = 1\n", 4, "unexpected character"),
    ],
)
def test_errors_carry_positions(src, line, fragment):
    with pytest.raises(ParseError) as info:
        parse_test(src)
    assert info.value.line == line
    assert info.value.col > 0
    assert fragment in str(info.value)


def test_ambiguous_bare_register():
    src = SB.replace("exists 1:r1 = 0 and 2:r2 = 0", "exists r = 0").replace("r1", "r").replace("r2", "r")
    with pytest.raises(ParseError, match="several threads"):
        parse_test(src)


def test_memory_functions_only_in_conditions():
    src = """
test w
arch sc
init { a = [1, 2]; }
thread 1 { reg r; r := window(a, 0, 1); }
exists a[0] = 1
"""
    with pytest.raises(ParseError, match="final-state"):
        parse_test(src)


def test_precedence_printing():
    tc = parse_test(SB.replace("exists 1:r1 = 0 and 2:r2 = 0", "exists (1:r1 + 1) * 2 = 2 or not x = 1 and y = 1"))
    text = format_expr(tc.cond)
    assert parse_test(SB.replace("exists 1:r1 = 0 and 2:r2 = 0", "exists " + text)).cond == tc.cond


@pytest.mark.parametrize("path", CORPUS, ids=os.path.basename)
def test_corpus_round_trips(path):
    tc = load_test(path)
    again = parse_test(render_source(tc))
    assert again == tc


@settings(max_examples=100, deadline=None)
@given(litmus_sources())
def test_random_sources_round_trip(src):
    tc = parse_test(src)
    assert parse_test(render_source(tc)) == tc


def _report(src, arch=None):
    tc = parse_test(src)
    model = get_arch(arch or tc.arch)
    ex = explore(model, tc.system(), tc.storage)
    v = check_condition(ex, tc.quantifier, tc.cond)
    return Report(tc.name, model.name, ex.storage, v, f"{tc.quantifier} {format_expr(tc.cond)}", tc.expect)


def test_text_report():
    text = render_report(_report(SB))
    assert "Verdict: ALLOWED" in text
    assert "Expected: ALLOWED  PASS" in text
    assert "  * 1:r1=0 2:r2=0 x=1 y=1" in text
    assert "Witness:" in text
    assert "Witness:" not in render_report(_report(SB), witness=False)


def test_json_report_is_stable():
    r = _report(SB, "sc")
    d = json.loads(render_report(r, "json"))
    assert d["verdict"] == "FORBIDDEN" and d["pass"] is False
    assert d["stats"]["seconds"] is None
    assert d["outcomes"][0] == {"1:r1": 0, "2:r2": 1, "x": 1, "y": 1}
    assert render_report(_report(SB, "sc"), "json") == render_report(r, "json")
    assert report_dict(r)["matching"] == []


def test_outcome_order_matches_json():
    r = _report(SB)
    assert [outcome_key(o) for o in r.verdict.outcomes] == [outcome_key(o) for o in sorted(r.verdict.outcomes, key=str)]


def test_desugar_is_compositional():
    tc = parse_test(SB)
    body = tc.threads[0].body
    assert desugar(body) == desugar(body[:1], desugar(body[1:]))
