"""Per-architecture reordering relation and forwarding function.

``reorderable(arch, a, b)`` answers: may ``b``, which follows ``a`` in program
order, take effect before ``a``?  ``forward(a, b)`` is ``b`` with the effect of
the earlier update ``a`` substituted in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .syntax import (
    Action,
    Atomic,
    CFence,
    Fence,
    FenceL,
    FenceS,
    Glob,
    Guard,
    Loc,
    Reg,
    RegKey,
    Update,
    action_reads,
    action_writes,
    address_registers,
    free_vars,
    globals_of,
    is_load,
    is_store,
    load_distinct,
    mentions,
    substitute,
    target_key,
    update_reads,
)

ARCH_NAMES = ("sc", "tso", "arm", "power")


@dataclass(frozen=True)
class ArchModel:
    name: str
    reorder: Callable[[Action, Action, frozenset], bool]
    default_storage: str  # "map" | "writelist"
    gate_fences: bool = False

    def __str__(self) -> str:
        return self.name


def forward(a: Action, b: Action) -> Action:
    """Forward the earlier update ``a`` into ``b``.

    Only fires when the forwarded expression reads no shared variable, so
    forwarding never introduces new loads.
    """
    if not isinstance(a, Update):
        return b
    if globals_of(a.expr):
        return b
    key = target_key(a)
    if isinstance(key, Loc) and key.index is None:
        return b
    return _fwd(key, a.expr, b)


def _fwd(key, f, b: Action) -> Action:
    if isinstance(b, Update):
        target = b.target
        if isinstance(target, Glob) and target.index is not None:
            target = Glob(target.name, substitute(target.index, key, f))
        return Update(target, substitute(b.expr, key, f))
    if isinstance(b, Guard):
        return type(b)(substitute(b.expr, key, f))
    if isinstance(b, Atomic):
        out = []
        live = True
        for c in b.seq:
            out.append(_fwd(key, f, c) if live else c)
            if live and mentions(action_writes(c), key):
                live = False
        return Atomic(tuple(out))
    return b


def reorderable(arch: ArchModel, a: Action, b: Action, pending: frozenset = frozenset()) -> bool:
    """May ``b`` be reordered before ``a`` on ``arch``?

    ``pending`` holds the registers still to be written by instructions that
    precede ``a``; it decides whether an address dependency is resolved.
    """
    return arch.reorder(a, b, pending)


# --------------------------------------------------------------------------
# shared pieces


def _updates_commute(a: Update, b: Update) -> bool:
    """The four provisos for two assignments ``x := e`` then ``y := f``."""
    x, y = target_key(a), target_key(b)
    if _alias(x, y):
        return False
    ra, rb = update_reads(a), update_reads(b)
    if mentions(rb, x) or mentions(ra, y):
        return False
    ga = [v for v in ra if isinstance(v, Loc)]
    gb = [v for v in rb if isinstance(v, Loc)]
    return not any(p.may_alias(q) for p in ga for q in gb)


def _alias(x, y) -> bool:
    if isinstance(x, Loc) and isinstance(y, Loc):
        return x.may_alias(y)
    return x == y


def _shares_variable(a: Action, b: Action) -> bool:
    va = action_reads(a) | action_writes(a)
    vb = action_reads(b) | action_writes(b)
    return any(_alias(p, q) for p in va for q in vb if type(p) is type(q))


def _written_registers(a: Action) -> frozenset:
    return frozenset(k for k in action_writes(a) if isinstance(k, RegKey))


# --------------------------------------------------------------------------
# SC


def _sc(a: Action, b: Action, pending: frozenset) -> bool:
    return False


# --------------------------------------------------------------------------
# TSO: only register-target updates (loads, local ops) overtake earlier stores


def _tso(a: Action, b: Action, pending: frozenset) -> bool:
    if isinstance(a, (Atomic, Fence)) or isinstance(b, (Atomic, Fence)):
        return False
    if isinstance(a, Update) and isinstance(b, Update):
        return is_store(a) and isinstance(b.target, Reg) and _updates_commute(a, b)
    if isinstance(a, Update) and isinstance(b, Guard):
        # register-only branch may be decided before a pending store completes
        return is_store(a) and not globals_of(b.expr) and not mentions(free_vars(b.expr), target_key(a))
    if isinstance(a, Guard) and isinstance(b, Update):
        return (
            isinstance(b.target, Reg)
            and not globals_of(a.expr)
            and RegKey(b.target.name) not in free_vars(a.expr)
        )
    return False


# --------------------------------------------------------------------------
# ARM / POWER


def _arm_like(power: bool) -> Callable[[Action, Action, frozenset], bool]:
    def rel(a: Action, b: Action, pending: frozenset) -> bool:
        if isinstance(a, Atomic):
            return all(rel(x, b, pending) for x in a.seq)
        if isinstance(b, Atomic):
            return all(rel(a, y, pending) for y in b.seq)
        if isinstance(a, Fence) or isinstance(b, Fence):
            return False

        gates = (FenceL, FenceS)
        if isinstance(a, gates) or isinstance(b, gates):
            if not power:
                raise ValueError("lightweight fence gates exist only on POWER")
            if isinstance(a, gates) and isinstance(b, gates):
                return False
            if isinstance(a, FenceL):
                return not is_load(b)
            if isinstance(b, FenceL):
                return not is_load(a)
            if isinstance(a, FenceS):
                return not is_store(b)
            return not is_store(a)

        # address dependencies that are not yet resolved
        a_dep = bool(address_registers(a) & pending)
        b_dep = bool(address_registers(b) & (pending | _written_registers(a)))
        if a_dep:
            if isinstance(b, Guard) or is_store(b):
                return False
            if _shares_variable(a, b):
                return False
        if b_dep and _shares_variable(a, b):
            return False

        if isinstance(a, Guard) and isinstance(b, CFence):
            return False
        if isinstance(a, CFence) and is_load(b):
            return False
        # guards also keep two reads of one location in order (coherence)
        if isinstance(a, Guard) and isinstance(b, Guard):
            return load_distinct(a.expr, b.expr)
        if isinstance(a, Guard) and isinstance(b, Update):
            if is_store(b):
                return False
            return RegKey(b.target.name) not in free_vars(a.expr) and load_distinct(a.expr, b.expr)
        if isinstance(a, Update) and isinstance(b, Guard):
            return not mentions(free_vars(b.expr), target_key(a)) and load_distinct(a.expr, b.expr)
        if isinstance(a, Update) and isinstance(b, Update):
            return _updates_commute(a, b)
        return True

    return rel


SC = ArchModel("sc", _sc, "map")
TSO = ArchModel("tso", _tso, "map")
ARM = ArchModel("arm", _arm_like(False), "map")
POWER = ArchModel("power", _arm_like(True), "writelist", gate_fences=True)

_BY_NAME = {m.name: m for m in (SC, TSO, ARM, POWER)}


def get_arch(name: str) -> ArchModel:
    try:
        return _BY_NAME[name.lower()]
    except KeyError:
        raise ValueError(f"unknown architecture {name!r}; expected one of {', '.join(ARCH_NAMES)}") from None
