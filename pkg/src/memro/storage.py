"""The two storage subsystems.

``MapStorage`` is a single shared state seen instantaneously by everybody.
``WriteListStorage`` keeps an ordered list of writes (oldest first) with the
set of processes that have seen each one; different processes may therefore
observe different values for the same variable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .syntax import (
    Action,
    CFence,
    EvalError,
    Fence,
    FenceL,
    FenceS,
    Loc,
    Value,
)

INIT_AUTHOR = -1


class StorageError(Exception):
    pass


# --------------------------------------------------------------------------
# multi-copy atomic map


MapStore = tuple  # sorted tuple of (Loc, Value)


def map_store(memory: Mapping[Loc, Value] | Iterable[tuple[Loc, Value]]) -> MapStore:
    items = memory.items() if isinstance(memory, Mapping) else memory
    return tuple(sorted(items))


def map_read(sigma: MapStore, loc: Loc) -> Value:
    for k, v in sigma:
        if k == loc:
            return v
    raise EvalError(f"no such memory cell {loc}")


def map_write(sigma: MapStore, loc: Loc, value: Value) -> MapStore:
    out = []
    found = False
    for k, v in sigma:
        if k == loc:
            out.append((k, value))
            found = True
        else:
            out.append((k, v))
    if not found:
        raise EvalError(f"no such memory cell {loc}")
    return tuple(out)


class MapStorage:
    name = "map"

    def __init__(self, memory, pids):
        self.pids = frozenset(pids)
        self.initial = map_store(memory)

    def read(self, state: MapStore, pid: int, loc: Loc):
        return [(map_read(state, loc), state, None)]

    def write(self, state: MapStore, pid: int, loc: Loc, value: Value, rmw_source=None):
        return [(map_write(state, loc, value), None)]

    def fence(self, state: MapStore, pid: int, kind: Action) -> MapStore:
        return state

    def final_memory(self, state: MapStore) -> MapStore:
        return state


# --------------------------------------------------------------------------
# non-multi-copy atomic write list


@dataclass(frozen=True)
class Write:
    author: int
    loc: Loc
    value: Value
    seen: frozenset
    lwtags: frozenset = frozenset()
    rmw: bool = False  # produced by an atomic read-modify-write

    def __post_init__(self):
        if self.author != INIT_AUTHOR and self.author not in self.seen:
            raise ValueError("the author of a write has always seen it")

    def __str__(self) -> str:
        seen = ",".join(str(p) for p in sorted(self.seen))
        tags = "".join(f" lw{p}" for p in sorted(self.lwtags))
        who = "init" if self.author == INIT_AUTHOR else f"P{self.author}"
        return f"<{who} {self.loc}={self.value} seen{{{seen}}}{tags}>"


WriteList = tuple  # tuple[Write, ...], oldest first


def initial_writelist(memory, pids) -> WriteList:
    everyone = frozenset(pids)
    return tuple(Write(INIT_AUTHOR, loc, v, everyone) for loc, v in map_store(memory))


def wl_visible(W: WriteList, n: int, loc: Loc) -> list[tuple[Value, WriteList, int]]:
    """Writes to ``loc`` that process ``n`` may read, with the updated list.

    A write is readable unless a later write to the same cell has already
    been seen by ``n``.  Reading marks the write (and, for lightweight-fence
    cumulativity, every earlier write its author had fenced) as seen by ``n``.
    """
    out = []
    later_seen = False
    for i in range(len(W) - 1, -1, -1):
        w = W[i]
        if w.loc != loc:
            continue
        if not later_seen:
            out.append((w.value, _see(W, n, i), i))
        if n in w.seen:
            later_seen = True
    if not any(w.loc == loc for w in W):
        raise EvalError(f"no such memory cell {loc}")
    out.reverse()
    return out


def _see(W: WriteList, n: int, i: int) -> WriteList:
    w = W[i]
    new = list(W)
    if n not in w.seen:
        new[i] = replace(w, seen=w.seen | {n})
    a = w.author
    if a != INIT_AUTHOR and a != n:
        for j in range(i):
            v = new[j]
            if a in v.lwtags and n not in v.seen:
                new[j] = replace(v, seen=v.seen | {n})
    return tuple(new)


def wl_insert(
    W: WriteList, n: int, loc: Loc, value: Value, rmw_source: int | None = None
) -> list[tuple[WriteList, int]]:
    """All lists obtained by inserting ``n``'s write of ``value`` to ``loc``.

    The new write may be placed before a suffix of existing writes provided
    none of them is by ``n``, none is a write to ``loc`` that ``n`` has seen,
    and none has been lightweight-fenced by ``n``.  Writes produced by an
    atomic read-modify-write keep their read source immediately before them.
    ``rmw_source`` makes the new write such a write.
    """
    out = []
    for p in range(len(W), -1, -1):
        if p < len(W):
            w = W[p]
            if w.author == n or (w.loc == loc and n in w.seen) or n in w.lwtags:
                break
        nxt = next((w for w in W[p:] if w.loc == loc), None)
        if nxt is not None and nxt.rmw:
            continue
        if rmw_source is not None:
            if p <= rmw_source or any(w.loc == loc for w in W[rmw_source + 1 : p]):
                continue
        new = Write(n, loc, value, frozenset([n]), rmw=rmw_source is not None)
        out.append((W[:p] + (new,) + W[p:], p))
    out.reverse()
    return out


def wl_flush(W: WriteList, n: int, universe: frozenset) -> WriteList:
    """Make every write ``n`` has seen visible to all processes."""
    return tuple(replace(w, seen=universe) if n in w.seen and w.seen != universe else w for w in W)


def wl_lwflush(W: WriteList, n: int) -> WriteList:
    """Tag every write ``n`` has seen as lightweight-fenced by ``n``."""
    return tuple(replace(w, lwtags=w.lwtags | {n}) if n in w.seen and n not in w.lwtags else w for w in W)


def wl_final(W: WriteList) -> MapStore:
    """Memory after flushing every process: the last write to each cell."""
    last: dict[Loc, Value] = {}
    for w in W:
        last[w.loc] = w.value
    return map_store(last)


class WriteListStorage:
    name = "writelist"

    def __init__(self, memory, pids):
        self.pids = frozenset(pids)
        self.initial = initial_writelist(memory, pids)

    def read(self, state: WriteList, pid: int, loc: Loc):
        return wl_visible(state, pid, loc)

    def write(self, state: WriteList, pid: int, loc: Loc, value: Value, rmw_source=None):
        return wl_insert(state, pid, loc, value, rmw_source=rmw_source)

    def fence(self, state: WriteList, pid: int, kind: Action) -> WriteList:
        if isinstance(kind, Fence):
            return wl_flush(state, pid, self.pids)
        if isinstance(kind, FenceS):
            return wl_lwflush(state, pid)
        if isinstance(kind, (FenceL, CFence)):
            return state
        raise StorageError(f"not a fence: {kind}")

    def final_memory(self, state: WriteList) -> MapStore:
        return wl_final(state)


def make_storage(kind: str, memory, pids):
    if kind == "map":
        return MapStorage(memory, pids)
    if kind == "writelist":
        return WriteListStorage(memory, pids)
    raise ValueError(f"unknown storage {kind!r}; expected 'map' or 'writelist'")
