import itertools

import pytest
from hypothesis import given

from memro.arch import ARM, POWER, SC, TSO, forward, get_arch, reorderable
from memro.syntax import (
    CFENCE,
    FENCE,
    FENCE_L,
    FENCE_S,
    Atomic,
    Bin,
    Glob,
    Guard,
    Lit,
    Reg,
    RegKey,
    Update,
    is_load,
    is_store,
    prefix_all,
)

from oracles import traces
from strategies import actions

x, y, r1, r2 = Glob("x"), Glob("y"), Reg("r1"), Reg("r2")
st_x = Update(x, Lit(1))
st_y = Update(y, Lit(1))
ld_x = Update(r1, x)
ld_y = Update(r2, y)
g_r1 = Guard(Bin("=", r1, Lit(0)))


def test_lookup():
    assert get_arch("ARM") is ARM
    with pytest.raises(ValueError):
        get_arch("x86")
    assert POWER.default_storage == "writelist" and ARM.default_storage == "map"


@given(actions(), actions())
def test_sc_never_reorders(a, b):
    assert not reorderable(SC, a, b)


def test_tso_only_lets_loads_pass_stores():
    assert reorderable(TSO, st_x, ld_y)
    assert not reorderable(TSO, st_x, st_y)
    assert not reorderable(TSO, ld_x, ld_y)
    assert not reorderable(TSO, ld_x, st_y)
    assert not reorderable(TSO, st_x, Update(r1, x))  # same location
    assert not reorderable(TSO, st_x, FENCE) and not reorderable(TSO, FENCE, ld_y)


def test_tso_bypass_by_forwarding():
    b = forward(st_x, Update(r1, x))
    assert b == Update(r1, Lit(1))
    assert reorderable(TSO, st_x, b)


@pytest.mark.parametrize(
    "a, b, ok",
    [
        (st_x, st_y, True),
        (st_x, ld_y, True),
        (ld_x, ld_y, True),
        (ld_x, st_y, True),
        (st_x, Update(x, Lit(2)), False),
        (ld_x, Update(r2, x), False),  # loads of one location keep their order
        (ld_x, Update(x, Lit(2)), False),
        (ld_x, Update(y, r1), False),  # data dependency
        (ld_x, Update(r1, y), False),  # same register written twice
        (g_r1, ld_y, True),  # loads are speculated past branches
        (g_r1, st_y, False),  # stores are not
        (g_r1, Update(r1, y), False),
        (ld_x, g_r1, False),  # the branch reads r1
        (ld_y, g_r1, True),
        (g_r1, Guard(Bin("=", r2, Lit(1))), True),
        (g_r1, CFENCE, False),
        # guards reading memory keep same-location reads in order
        (ld_x, Guard(Bin("=", x, Lit(0))), False),
        (Guard(Bin("=", x, Lit(0))), Update(r2, x), False),
        (Guard(Bin("=", x, Lit(0))), Guard(Bin("=", x, Lit(1))), False),
        (ld_y, Guard(Bin("=", x, Lit(0))), True),
        (CFENCE, ld_y, False),
        (CFENCE, st_y, True),
        (st_x, CFENCE, True),
        (FENCE, ld_y, False),
        (ld_x, FENCE, False),
    ],
)
def test_arm_table(a, b, ok):
    assert reorderable(ARM, a, b) is ok
    assert reorderable(POWER, a, b) is ok


def test_atomic_blocks_reorder_only_when_every_element_does():
    cas = Atomic((Guard(Bin("=", x, Lit(0))), Update(x, Lit(1))))
    assert reorderable(ARM, cas, ld_y)
    assert not reorderable(ARM, cas, Update(r1, x))
    assert not reorderable(TSO, st_y, cas)


def test_gates_are_power_only():
    with pytest.raises(ValueError):
        reorderable(ARM, FENCE_L, ld_x)
    with pytest.raises(ValueError):
        reorderable(ARM, st_x, FENCE_S)


def test_gate_table():
    # fence_L holds back loads, fence_S holds back stores
    assert not reorderable(POWER, FENCE_L, ld_x)
    assert reorderable(POWER, FENCE_L, st_x)
    assert not reorderable(POWER, FENCE_S, st_x)
    assert reorderable(POWER, FENCE_S, ld_x)
    assert not reorderable(POWER, ld_x, FENCE_L)
    assert reorderable(POWER, st_x, FENCE_L)
    assert not reorderable(POWER, st_x, FENCE_S)
    assert reorderable(POWER, ld_x, FENCE_S)
    assert not reorderable(POWER, FENCE_L, FENCE_S)
    assert not reorderable(POWER, FENCE_S, FENCE_L)


LOADS = [Update(r1, x), Update(r2, y), Update(r1, Bin("+", x, Lit(1)))]
STORES = [Update(x, Lit(1)), Update(y, r2), Update(x, Bin("+", r2, Lit(1)))]


def _overtakes(a, b):
    """Does some complete trace of ``a ; lwfence ; b`` run ``b`` before ``a``?"""
    _, done = traces(POWER, prefix_all([a, FENCE_L, FENCE_S, b]))
    return any(t.index(b) < t.index(a) for t in done if b in t and a in t)


@pytest.mark.parametrize("a, b", list(itertools.product(LOADS + STORES, LOADS + STORES)))
def test_lwfence_orders_all_but_store_load(a, b):
    if not reorderable(POWER, a, b):
        return  # ordered anyway
    wanted = is_store(a) and is_load(b) and not is_store(b)
    assert _overtakes(a, b) is wanted


def test_address_dependencies_need_pending_writes():
    a = Update(r2, Glob("arr", r1))  # address computed from r1
    b = Update(Glob("z"), Lit(5))
    assert reorderable(ARM, a, b)
    assert reorderable(ARM, a, Update(Reg("r3"), y), frozenset({RegKey("r1")}))
    # with r1 still to be written by an earlier instruction, the address is unknown
    assert not reorderable(ARM, a, b, frozenset({RegKey("r1")}))
    assert not reorderable(ARM, a, Guard(Bin("=", r2, Lit(0))), frozenset({RegKey("r1")}))


def test_forward_substitutes_register_and_cell():
    assert forward(Update(r1, Lit(3)), Update(y, Bin("+", r1, Lit(1)))) == Update(y, Bin("+", Lit(3), Lit(1)))
    assert forward(st_x, Guard(Bin("=", x, Lit(1)))) == Guard(Bin("=", Lit(1), Lit(1)))
    assert forward(st_x, st_y) == st_y
    assert forward(FENCE, ld_x) == ld_x


def test_forward_skips_expressions_with_globals():
    a = Update(x, y)
    assert forward(a, Update(r1, x)) == Update(r1, x)


def test_forward_stops_inside_atomic_after_overwrite():
    blk = Atomic((Update(r2, x), Update(x, Lit(5)), Update(r1, x)))
    out = forward(st_x, blk)
    assert out.seq[0] == Update(r2, Lit(1))
    assert out.seq[2] == Update(r1, x)
