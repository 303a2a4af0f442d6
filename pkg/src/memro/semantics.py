"""Labelled transitions of commands and processes.

Command level: the prefix rules (an action executes, or a later action
overtakes it when the architecture permits), choice, and loop unfolding.
Process level: actions are promoted through the local register state.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Union

from .arch import ArchModel, forward, reorderable
from .syntax import (
    SKIP,
    Action,
    Atomic,
    Bin,
    CFence,
    Choice,
    Command,
    Expr,
    Fence,
    FenceL,
    FenceS,
    Glob,
    Guard,
    Lit,
    Loc,
    LoopExhausted,
    Prefix,
    Process,
    Reg,
    RegKey,
    Skip,
    StrictPrefix,
    Update,
    Value,
    While,
    action_writes,
    address_registers,
    free_vars,
    glob_loc,
    negate,
    partial_eval,
    registers_of,
    seq,
)


class IllFormedProcess(Exception):
    """A process referenced a register outside its local state."""


# --------------------------------------------------------------------------
# labels


@dataclass(frozen=True)
class Tau:
    """A silent step: choice resolution, loop unfolding or a register-only update."""

    pid: int | None = None
    what: str = ""

    def __str__(self) -> str:
        if not self.what:
            return "tau"
        return self.what + "  (local)" if self.pid is None else f"P{self.pid}: {self.what}  (local)"


@dataclass(frozen=True)
class Act:
    """An action that reached the storage (store, guard, fence, atomic block)."""

    pid: int | None
    action: Action

    def __str__(self) -> str:
        return f"{self.action}" if self.pid is None else f"P{self.pid}: {self.action}"


@dataclass(frozen=True)
class Read:
    """A load: ``action`` read shared memory and obtained ``value``."""

    pid: int | None
    action: Action
    value: Value

    def __str__(self) -> str:
        from .syntax import format_value

        who = "" if self.pid is None else f"P{self.pid}: "
        return f"{who}{self.action}  (read {format_value(self.value)})"


Label = Union[Tau, Act, Read]
TAU = Tau()


# --------------------------------------------------------------------------
# command steps


def _written_regs(a: Action) -> frozenset:
    return frozenset(k.name for k in action_writes(a) if isinstance(k, RegKey))


@lru_cache(maxsize=200_000)
def command_steps(
    arch: ArchModel, c: Command, pending: frozenset = frozenset()
) -> tuple[tuple[Action | None, Command], ...]:
    """Visible one-step successors of ``c`` as ``(action, residual)`` pairs.

    Choices and loop unfoldings are silent; they are resolved as part of
    the step that needs them, wherever they sit (also under a prefix, when
    an action is reordered out of them).  ``(None, SKIP)`` means ``c`` can
    finish silently.  Loops must carry a finite budget.

    ``pending`` is the set of register names written by enclosing (not yet
    executed) actions; it is only consulted for address dependencies.
    """
    if isinstance(c, Skip):
        return ()
    if isinstance(c, StrictPrefix):
        return ((c.action, c.rest),)
    if isinstance(c, Prefix):
        a = c.action
        out: list[tuple[Action | None, Command]] = [(a, c.rest)]
        pend = frozenset(RegKey(r) for r in pending)
        inner = pending | _written_regs(a)
        for b, rest in command_steps(arch, c.rest, inner):
            if b is None:
                continue
            fb = forward(a, b)
            if reorderable(arch, a, fb, pend):
                out.append((fb, Prefix(a, rest)))
            elif arch.name in ("arm", "power"):
                spec = _speculate_past_shifted_load(a, fb, rest, pend)
                if spec is not None:
                    out.append(spec)
        return _dedup(out)
    if isinstance(c, Choice):
        out = []
        for branch in (c.left, c.right):
            if isinstance(branch, Skip):
                out.append((None, SKIP))
            else:
                out += command_steps(arch, branch, pending)
        return _dedup(out)
    if isinstance(c, While):
        if c.budget is None:
            raise ValueError("loops need an unfolding budget before exploration")
        return command_steps(arch, unfold(c), pending)
    raise TypeError(f"not a command: {c!r}")


def _dedup(steps) -> tuple:
    return tuple(dict.fromkeys(steps))


def unfold(w: While) -> Command:
    """``(guard b ; body ; while) |~| (guard !b ; then)``, respecting the budget.

    Once the budget is spent the continue branch is replaced by a
    ``LoopExhausted`` guard that leads nowhere.
    """
    exit_branch = Prefix(Guard(negate(w.cond)), w.then)
    if w.budget is not None and w.budget <= 0:
        return Choice(exit_branch, Prefix(LoopExhausted(w.cond), SKIP))
    budget = None if w.budget is None else w.budget - 1
    again = While(w.cond, w.body, w.then, budget)
    return Choice(Prefix(Guard(w.cond), seq(w.body, again)), exit_branch)


def _speculate_past_shifted_load(a: Action, b: Action, rest: Command, pending: frozenset):
    """``r1 := x[e] ; p`` may let a plain load ``r2 := x`` of ``p`` go first.

    Only while the address ``e`` is unresolved; the residual re-checks that
    both loads agree with ``[r1 = r2]`` once ``r1`` is loaded.
    """
    if not (isinstance(a, Update) and isinstance(a.target, Reg)):
        return None
    src = a.expr
    if not (isinstance(src, Glob) and src.index is not None and not isinstance(src.index, Lit)):
        return None
    if not (address_registers(a) & pending):
        return None
    if not (isinstance(b, Update) and isinstance(b.target, Reg) and isinstance(b.expr, Glob)):
        return None
    if b.expr.name != src.name or glob_loc(b.expr).index is None:
        return None
    r1, r2 = a.target.name, b.target.name
    if r1 == r2 or RegKey(r1) in free_vars(b.expr) or RegKey(r2) in free_vars(src):
        return None
    check = Guard(Bin("=", Reg(r1), Reg(r2)))
    return (b, Prefix(a, Prefix(check, rest)))


# --------------------------------------------------------------------------
# local state


@dataclass(frozen=True)
class LocalSet:
    reg: str
    value: Value


@dataclass(frozen=True)
class LoadReq:
    reg: str
    expr: Expr  # reads globals only


@dataclass(frozen=True)
class StoreReq:
    loc: Loc
    expr: Expr  # a value, or an expression over globals


@dataclass(frozen=True)
class GuardReq:
    expr: Expr
    exhausted: bool = False


@dataclass(frozen=True)
class FenceReq:
    kind: Action


@dataclass(frozen=True)
class AtomicReq:
    seq: tuple[Action, ...]


Promoted = Union[LocalSet, LoadReq, StoreReq, GuardReq, FenceReq, AtomicReq]


def local_promote(sigma: Mapping[str, Value], a: Action) -> Promoted:
    """Evaluate ``a`` against the local registers.

    Register-only updates become local; loads and stores keep their shared
    reads symbolic for the storage to resolve; guards are partially
    evaluated.  Atomic blocks are promoted element by element later, since
    a load inside the block can feed a later element.
    """
    if isinstance(a, Update):
        e = _close(partial_eval(a.expr, sigma), a)
        if isinstance(a.target, Reg):
            if a.target.name not in sigma:
                raise IllFormedProcess(f"register {a.target.name} is not declared")
            if isinstance(e, Lit):
                return LocalSet(a.target.name, e.value)
            return LoadReq(a.target.name, e)
        idx = a.target.index
        if idx is None:
            return StoreReq(Loc(a.target.name, 0), e)
        i = partial_eval(idx, sigma)
        if not isinstance(i, Lit):
            raise IllFormedProcess(f"address of {a.target} depends on shared memory")
        return StoreReq(Loc(a.target.name, i.value), e)
    if isinstance(a, Guard):
        return GuardReq(_close(partial_eval(a.expr, sigma), a), isinstance(a, LoopExhausted))
    if isinstance(a, (Fence, CFence, FenceL, FenceS)):
        return FenceReq(a)
    if isinstance(a, Atomic):
        return AtomicReq(a.seq)
    raise TypeError(f"not an action: {a!r}")


def _close(e: Expr, a: Action) -> Expr:
    left = registers_of(e)
    if left:
        names = ", ".join(sorted(k.name for k in left))
        raise IllFormedProcess(f"{a}: undeclared register(s) {names}")
    return e


# --------------------------------------------------------------------------
# processes


def process_steps(arch: ArchModel, p: Process) -> list[tuple[Label, Promoted | None, Command]]:
    """Command steps of ``p`` promoted through its local state and tagged with its pid.

    Loads come back as ``LoadReq`` for the storage to resolve; the label's
    value is filled in by the explorer.
    """
    sigma = dict(p.locals)
    out: list[tuple[Label, Promoted | None, Command]] = []
    for a, rest in command_steps(arch, p.cmd):
        if a is None:
            out.append((Tau(p.pid), None, rest))
            continue
        out.append((Act(p.pid, a), local_promote(sigma, a), rest))
    return out


def parallel_steps(arch: ArchModel, procs: tuple[Process, ...]):
    """Interleaving: the union of every component's steps, indexed by component."""
    return [(i, step) for i, p in enumerate(procs) for step in process_steps(arch, p)]
