"""Exhaustive exploration of a system: thread steps composed with storage."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .arch import ArchModel
from .semantics import (
    Act,
    AtomicReq,
    FenceReq,
    GuardReq,
    Label,
    LoadReq,
    LocalSet,
    Read,
    StoreReq,
    Tau,
    command_steps,
    local_promote,
)
from .storage import make_storage
from .syntax import (
    EvalError,
    Expr,
    Glob,
    Loc,
    Reg,
    Skip,
    System,
    Value,
    evaluate,
    format_value,
    globals_of,
    set_budgets,
)

DEFAULT_LOOP_BOUND = 2
DEFAULT_MAX_STATES = 5_000_000


class StateBudgetExceeded(Exception):
    """The exploration visited more configurations than allowed."""


class ConditionError(Exception):
    """A final-state condition names something the test does not declare."""


@dataclass(frozen=True)
class Bounds:
    loop: int = DEFAULT_LOOP_BOUND
    max_states: int = DEFAULT_MAX_STATES

    def __post_init__(self):
        if self.loop < 0 or self.max_states <= 0:
            raise ValueError("bounds must be positive")


# --------------------------------------------------------------------------
# outcomes


@dataclass(frozen=True)
class Outcome:
    """Final registers per process and final memory (after every process flushed)."""

    regs: tuple[tuple[tuple[int, str], Value], ...]
    mem: tuple[tuple[Loc, Value], ...]

    def as_dict(self) -> dict[str, Value]:
        out: dict[str, Value] = {}
        for (pid, name), v in self.regs:
            out[f"{pid}:{name}"] = v
        multi = {loc.name for loc, _ in self.mem if loc.index != 0}
        for loc, v in self.mem:
            out[f"{loc.name}[{loc.index}]" if loc.name in multi else str(loc)] = v
        return out

    def __str__(self) -> str:
        return " ".join(f"{k}={format_value(v)}" for k, v in self.as_dict().items())

    def sort_key(self) -> str:
        return str(self)

    def register(self, r: Reg) -> Value:
        if r.pid is not None:
            for (pid, name), v in self.regs:
                if pid == r.pid and name == r.name:
                    return v
            raise ConditionError(f"no register {r}")
        hits = [v for (pid, name), v in self.regs if name == r.name]
        if len(hits) != 1:
            what = "ambiguous" if hits else "unknown"
            raise ConditionError(f"{what} register {r.name}; qualify it as <pid>:{r.name}")
        return hits[0]

    def cell(self, loc: Loc) -> Value:
        for k, v in self.mem:
            if k == loc:
                return v
        raise ConditionError(f"no memory cell {loc}")

    def family(self, name: str) -> list[Value]:
        cells = sorted((k.index, v) for k, v in self.mem if k.name == name)
        if not cells:
            raise ConditionError(f"no array {name}")
        return [v for _, v in cells]

    def evaluate(self, e: Expr) -> Value:
        return evaluate(e, self.register, self.cell, self._memory_fn)

    def _memory_fn(self, fn: str, args: tuple) -> Value:
        def arr(a):
            if not isinstance(a, Glob) or a.index is not None:
                raise ConditionError(f"{fn}: expected an array name, got {a}")
            return self.family(a.name)

        if fn == "window":
            cells, lo, hi = arr(args[0]), self.evaluate(args[1]), self.evaluate(args[2])
            return tuple(cells[i % len(cells)] for i in range(lo, hi))
        if fn == "chain":
            vals, nxt, ptr = arr(args[0]), arr(args[1]), self.evaluate(args[2])
            out = []
            while ptr != 0 and len(out) <= len(vals):
                out.append(vals[ptr])
                ptr = nxt[ptr]
            return tuple(out)
        raise ConditionError(f"unknown function {fn}")


def satisfies(o: Outcome, cond: Expr) -> bool:
    v = o.evaluate(cond)
    if not isinstance(v, bool):
        raise ConditionError(f"condition {cond} is not boolean")
    return v


# --------------------------------------------------------------------------
# exploration


@dataclass
class Exploration:
    """Everything found by one run: outcomes with their terminal configurations."""

    arch: str
    storage: str
    outcomes: dict[Outcome, tuple]  # outcome -> first terminal configuration
    parents: dict
    states: int
    stuck: int
    truncated: bool
    seconds: float

    def outcome_set(self) -> frozenset[Outcome]:
        return frozenset(self.outcomes)

    def sorted_outcomes(self) -> list[Outcome]:
        return sorted(self.outcomes, key=Outcome.sort_key)

    def trace(self, o: Outcome) -> list[Label]:
        """All labels (silent ones included) on the recorded path to ``o``."""
        cfg = self.outcomes[o]
        labels = []
        while self.parents[cfg] is not None:
            cfg, lab = self.parents[cfg]
            labels.append(lab)
        labels.reverse()
        return labels

    def witness(self, o: Outcome) -> list[Label]:
        """The path to ``o`` without structural silent steps."""
        return [lab for lab in self.trace(o) if not (isinstance(lab, Tau) and not lab.what)]

    def first_matching(self, cond: Expr) -> Outcome | None:
        for o in self.outcomes:  # insertion order = discovery order
            if satisfies(o, cond):
                return o
        return None


class Explorer:
    def __init__(
        self,
        arch: ArchModel,
        system: System,
        storage: str | None = None,
        bounds: Bounds = Bounds(),
        order: str = "bfs",
    ):
        self.arch = arch
        self.bounds = bounds
        self.order = order
        self.pids = tuple(p.pid for p in system.procs)
        self.storage = make_storage(storage or arch.default_storage, system.memory, self.pids)
        threads = tuple(
            (tuple(sorted(p.locals)), set_budgets(p.cmd, bounds.loop)) for p in system.procs
        )
        self.start = (self.storage.initial, threads)

    def run(self) -> Exploration:
        t0 = time.perf_counter()
        parents: dict = {self.start: None}
        outcomes: dict[Outcome, tuple] = {}
        frontier = deque([self.start])
        pop = frontier.popleft if self.order == "bfs" else frontier.pop
        truncated = False
        stuck = 0
        limit = self.bounds.max_states
        while frontier:
            cfg = pop()
            st, threads = cfg
            if all(isinstance(cmd, Skip) for _, cmd in threads):
                o = self._outcome(cfg)
                outcomes.setdefault(o, cfg)
                continue
            moved = False
            for succ, label, cut in self._successors(cfg):
                if cut:
                    truncated = True
                    continue
                moved = True
                if succ not in parents:
                    parents[succ] = (cfg, label)
                    if len(parents) > limit:
                        raise StateBudgetExceeded(
                            f"more than {limit} states explored; raise --max-states"
                        )
                    frontier.append(succ)
            if not moved:
                stuck += 1
        return Exploration(
            arch=self.arch.name,
            storage=self.storage.name,
            outcomes=outcomes,
            parents=parents,
            states=len(parents),
            stuck=stuck,
            truncated=truncated,
            seconds=time.perf_counter() - t0,
        )

    # ----------------------------------------------------------------------

    def _outcome(self, cfg) -> Outcome:
        st, threads = cfg
        regs = tuple(
            ((pid, name), v) for pid, (loc, _) in zip(self.pids, threads) for name, v in loc
        )
        return Outcome(regs, tuple(self.storage.final_memory(st)))

    def _successors(self, cfg) -> Iterable[tuple[tuple, Label, bool]]:
        st, threads = cfg
        for i, (loc, cmd) in enumerate(threads):
            pid = self.pids[i]
            sigma = dict(loc)
            for a, rest in command_steps(self.arch, cmd):
                if a is None:
                    yield self._replace(st, threads, i, loc, rest), Tau(pid), False
                    continue
                req = local_promote(sigma, a)
                exhausted = isinstance(req, GuardReq) and req.exhausted
                for sigma2, st2, val, _ in self._execute(st, pid, sigma, req):
                    if exhausted:
                        yield None, None, True
                        continue
                    if isinstance(req, LocalSet):
                        label: Label = Tau(pid, str(a))
                    elif isinstance(req, LoadReq):
                        label = Read(pid, a, val)
                    else:
                        label = Act(pid, a)
                    new_loc = loc if sigma2 is sigma else tuple(sorted(sigma2.items()))
                    yield self._replace(st2, threads, i, new_loc, rest), label, False

    @staticmethod
    def _replace(st, threads, i, loc, cmd):
        t = list(threads)
        t[i] = (loc, cmd)
        return (st, tuple(t))

    def _read_all(self, st, pid, e: Expr, track):
        """Resolve every shared variable in ``e`` one at a time, then evaluate."""
        locs = sorted(globals_of(e))
        for loc in locs:
            if loc.index is None:
                raise EvalError(f"unresolved address in {e}")
        branches = [({}, st, track)]
        for loc in locs:
            nxt = []
            for env, s, tr in branches:
                for v, s2, pos in self.storage.read(s, pid, loc):
                    tr2 = tr
                    if tr is not None and pos is not None:
                        tr2 = {**tr, loc: pos}
                    nxt.append(({**env, loc: v}, s2, tr2))
            branches = nxt
        for env, s, tr in branches:
            yield evaluate(e, _no_regs, env.__getitem__), s, tr

    def _execute(self, st, pid, sigma, req, track=None):
        """Apply a promoted action: one ``(sigma', state', value, track')`` per outcome.

        ``track`` maps cells read so far inside an atomic block to the
        position of the write they read, so a later write to the same cell
        in the block is placed as a read-modify-write.
        """
        if isinstance(req, LocalSet):
            return [({**sigma, req.reg: req.value}, st, req.value, track)]
        if isinstance(req, LoadReq):
            return [({**sigma, req.reg: v}, s, v, tr) for v, s, tr in self._read_all(st, pid, req.expr, track)]
        if isinstance(req, StoreReq):
            out = []
            for v, s, tr in self._read_all(st, pid, req.expr, track):
                src = None if tr is None else tr.get(req.loc)
                for s2, p in self.storage.write(s, pid, req.loc, v, rmw_source=src):
                    if tr is not None and p is not None:
                        tr = {k: (j + 1 if j >= p else j) for k, j in tr.items()}
                    out.append((sigma, s2, None, tr))
            return out
        if isinstance(req, GuardReq):
            out = []
            for v, s, tr in self._read_all(st, pid, req.expr, track):
                if not isinstance(v, bool):
                    raise EvalError(f"guard [{req.expr}] is not boolean")
                if v:
                    out.append((sigma, s, None, tr))
            return out
        if isinstance(req, FenceReq):
            return [(sigma, self.storage.fence(st, pid, req.kind), None, track)]
        if isinstance(req, AtomicReq):
            if track is not None:
                raise EvalError("nested atomic blocks")
            branches = [(sigma, st, {})]
            for a in req.seq:
                nxt = []
                for sg, s, tr in branches:
                    for sg2, s2, _, tr2 in self._execute(s, pid, sg, local_promote(sg, a), tr):
                        nxt.append((sg2, s2, tr2))
                branches = nxt
            return [(sg, s, None, None) for sg, s, _ in branches]
        raise TypeError(f"unknown request {req!r}")


def _no_regs(r: Reg) -> Value:
    raise EvalError(f"register {r} reached the storage unevaluated")


def explore(arch: ArchModel, system: System, storage: str | None = None, bounds: Bounds = Bounds(), order: str = "bfs") -> Exploration:
    return Explorer(arch, system, storage, bounds, order).run()


# --------------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    kind: str  # ALLOWED | FORBIDDEN | REFINES | REFINES-WITHIN-BOUNDS | VIOLATES
    witness: list[str] | None = None
    states: int = 0
    outcomes: list[Outcome] = field(default_factory=list)
    matching: list[Outcome] = field(default_factory=list)
    truncated: bool = False
    seconds: float = 0.0
    notes: list[str] = field(default_factory=list)


def check_condition(ex: Exploration, quantifier: str, cond: Expr) -> Verdict:
    """``exists``: ALLOWED iff some outcome satisfies ``cond``.

    ``forall``: ALLOWED iff every outcome satisfies it; otherwise FORBIDDEN
    with a counterexample as witness.
    """
    ordered = ex.sorted_outcomes()
    matching = [o for o in ordered if satisfies(o, cond)]
    base = dict(states=ex.states, outcomes=ordered, matching=matching, truncated=ex.truncated, seconds=ex.seconds)
    if ex.truncated:
        base["notes"] = ["loop budget exhausted on some path; verdict holds within bounds only"]
    if quantifier == "exists":
        if matching:
            first = ex.first_matching(cond)
            return Verdict("ALLOWED", [str(x) for x in ex.witness(first)], **base)
        return Verdict("FORBIDDEN", None, **base)
    if quantifier == "forall":
        failing = next((o for o in ordered if not satisfies(o, cond)), None)
        if failing is None:
            some = next(iter(ordered), None)
            wit = [str(x) for x in ex.witness(some)] if some is not None else []
            return Verdict("ALLOWED", wit, **base)
        return Verdict("FORBIDDEN", [str(x) for x in ex.witness(failing)], **base)
    raise ValueError(f"unknown quantifier {quantifier!r}")


def witness_trace(
    arch: ArchModel, system: System, cond: Expr, storage: str | None = None, bounds: Bounds = Bounds()
) -> list[Label] | None:
    """One shortest trace reaching an outcome that satisfies ``cond``, else None."""
    ex = explore(arch, system, storage, bounds)
    o = ex.first_matching(cond)
    return None if o is None else ex.witness(o)
