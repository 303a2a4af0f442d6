import pytest
from hypothesis import assume, given, settings

from memro.arch import ARM, POWER, SC, TSO, forward, reorderable
from memro.semantics import (
    AtomicReq,
    FenceReq,
    GuardReq,
    IllFormedProcess,
    LoadReq,
    LocalSet,
    StoreReq,
    command_steps,
    local_promote,
    unfold,
)
from memro.syntax import (
    CFENCE,
    SKIP,
    Atomic,
    Bin,
    Choice,
    Glob,
    Guard,
    Lit,
    Loc,
    LoopExhausted,
    Prefix,
    Reg,
    StrictPrefix,
    Update,
    While,
    if_then_else,
    prefix_all,
)

from oracles import par_traces, then_traces, traces
from strategies import actions, commands

x, y, r1, r2 = Glob("x"), Glob("y"), Reg("r1"), Reg("r2")
ARCHS = [SC, TSO, ARM, POWER]


def firsts(arch, c):
    return {a for a, _ in command_steps(arch, c)}


def test_head_always_executes():
    c = prefix_all([Update(x, Lit(1)), Update(y, Lit(1))])
    for arch in ARCHS:
        assert Update(x, Lit(1)) in firsts(arch, c)


def test_later_action_overtakes_on_arm_only():
    c = prefix_all([Update(x, Lit(1)), Update(y, Lit(1))])
    assert firsts(SC, c) == {Update(x, Lit(1))}
    assert firsts(ARM, c) == {Update(x, Lit(1)), Update(y, Lit(1))}
    steps = dict(command_steps(ARM, c))
    assert steps[Update(y, Lit(1))] == Prefix(Update(x, Lit(1)), SKIP)


def test_strict_prefix_blocks_reordering():
    c = StrictPrefix(Update(x, Lit(1)), Prefix(Update(y, Lit(1)), SKIP))
    assert firsts(ARM, c) == {Update(x, Lit(1))}


def test_overtaking_action_is_forwarded():
    c = prefix_all([Update(x, Lit(1)), Update(r1, x)])
    assert Update(r1, Lit(1)) in firsts(TSO, c)


def test_reordering_reaches_past_several_actions():
    c = prefix_all([Update(x, Lit(1)), Update(y, Lit(1)), Update(r1, Glob("z"))])
    assert Update(r1, Glob("z")) in firsts(ARM, c)
    assert Update(r1, Glob("z")) in firsts(TSO, c)


def test_choice_is_resolved_silently_inside_steps():
    c = if_then_else(Bin("=", r1, Lit(0)), Prefix(Update(r2, y), SKIP), SKIP)
    acts = firsts(ARM, c)
    assert Guard(Bin("=", r1, Lit(0))) in acts
    assert Guard(Bin("!=", r1, Lit(0))) in acts
    assert None not in acts


def test_empty_branch_can_finish_silently():
    c = Choice(Prefix(Update(x, Lit(1)), SKIP), SKIP)
    assert (None, SKIP) in command_steps(ARM, c)


def test_speculated_load_through_branch():
    inner = Update(r2, y)
    prog = Prefix(Update(r1, x), if_then_else(Bin("=", r1, Lit(0)), Prefix(inner, SKIP), SKIP))
    assert inner in firsts(ARM, prog)
    assert inner not in firsts(TSO, prog)
    fenced = Prefix(Update(r1, x), if_then_else(Bin("=", r1, Lit(0)), prefix_all([CFENCE, inner]), SKIP))
    assert inner not in firsts(ARM, fenced)
    _, done = traces(ARM, fenced)
    assert all(t.index(inner) > t.index(Update(r1, x)) for t in done if inner in t)


def test_load_speculated_past_unresolved_address():
    a = Update(r1, Glob("a", r2))
    prog = prefix_all([Update(r2, x), a, Update(Reg("r3"), Glob("a", Lit(0)))])
    steps = dict(command_steps(ARM, prog))
    b = Update(Reg("r3"), Glob("a", Lit(0)))
    assert b in steps
    # the residual re-checks that both loads agreed
    assert Guard(Bin("=", r1, Reg("r3"))) in {s for s in _actions(steps[b])}


def _actions(c):
    out = []
    while isinstance(c, (Prefix, StrictPrefix)):
        out.append(c.action)
        c = c.rest
    return out


def test_loops_need_a_budget():
    w = While(Bin("=", r1, Lit(0)), Prefix(Update(r1, x), SKIP), SKIP)
    with pytest.raises(ValueError):
        command_steps(ARM, w)


def test_unfold_respects_budget():
    w = While(Bin("=", r1, Lit(0)), Prefix(Update(r1, x), SKIP), SKIP, 0)
    u = unfold(w)
    assert isinstance(u, Choice)
    assert isinstance(u.right.action, LoopExhausted)
    w1 = While(w.cond, w.body, SKIP, 1)
    assert unfold(w1).left.rest.rest.budget == 0


def test_local_promotion():
    sigma = {"r1": 2, "r2": 0}
    assert local_promote(sigma, Update(r2, Bin("+", r1, Lit(1)))) == LocalSet("r2", 3)
    assert local_promote(sigma, Update(r2, Glob("a", r1))) == LoadReq("r2", Glob("a", Lit(2)))
    assert local_promote(sigma, Update(Glob("a", r1), r1)) == StoreReq(Loc("a", 2), Lit(2))
    assert local_promote(sigma, Guard(Bin("=", r1, x))) == GuardReq(Bin("=", Lit(2), x))
    assert local_promote(sigma, CFENCE) == FenceReq(CFENCE)
    blk = Atomic((Guard(Bin("=", x, Lit(0))), Update(x, Lit(1))))
    assert local_promote(sigma, blk) == AtomicReq(blk.seq)


def test_local_promotion_rejects_unknown_registers():
    with pytest.raises(IllFormedProcess):
        local_promote({}, Update(r1, Lit(1)))
    with pytest.raises(IllFormedProcess):
        local_promote({"r1": 0}, Update(x, r2))


# ---------------------------------------------------------------------------
# algebraic laws as trace inclusions: c [= d  iff  traces(d) <= traces(c)


def included(small, big):
    return small[0] <= big[0] and small[1] <= big[1]


def keep_order(arch, a, c):
    lhs = traces(arch, Prefix(a, c))
    rhs = traces(arch, StrictPrefix(a, c))
    return included(rhs, lhs)


def swap_order(arch, a, b, c):
    fb = forward(a, b)
    if not reorderable(arch, a, fb):
        return None
    lhs = traces(arch, Prefix(a, StrictPrefix(b, c)))
    rhs = traces(arch, StrictPrefix(fb, Prefix(a, c)))
    return included(rhs, lhs)


def fix_interleaving(arch, a, c, d):
    lhs = par_traces(arch, StrictPrefix(a, c), d)
    rhs = then_traces(a, par_traces(arch, c, d))
    return included(rhs, lhs)


@settings(max_examples=200, deadline=None)
@given(actions(gates=True), commands(max_actions=3, gates=True))
def test_keep_order_law(a, c):
    for arch in (SC, TSO, POWER):
        assert keep_order(arch, a, c)


@settings(max_examples=200, deadline=None)
@given(actions(gates=True), actions(gates=True), commands(max_actions=2, gates=True))
def test_swap_order_law(a, b, c):
    checked = [swap_order(arch, a, b, c) for arch in (TSO, POWER)]
    assume(any(v is not None for v in checked))
    assert all(v is not False for v in checked)


@settings(max_examples=200, deadline=None)
@given(actions(gates=True), commands(max_actions=2, gates=True), commands(max_actions=1, gates=True))
def test_fix_interleaving_law(a, c, d):
    for arch in (SC, POWER):
        assert fix_interleaving(arch, a, c, d)


def test_swap_order_example_is_strict():
    # the reordered trace exists on the left but the right fixes the new order
    a, b = Update(x, Lit(1)), Update(r1, y)
    lhs = traces(ARM, Prefix(a, StrictPrefix(b, SKIP)))[1]
    rhs = traces(ARM, StrictPrefix(b, Prefix(a, SKIP)))[1]
    assert rhs < lhs


@given(actions(), actions())
def test_prefix_has_both_orders_exactly_when_reorderable(a, b):
    for arch in (TSO, ARM):
        _, done = traces(arch, prefix_all([a, b]))
        fb = forward(a, b)
        assert ((a, b) in done)
        assert ((fb, a) in done) == reorderable(arch, a, fb) or (fb, a) == (a, b)
