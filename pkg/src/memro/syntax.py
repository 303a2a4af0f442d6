"""Expressions, actions and commands of the wide-spectrum language.

Everything here is an immutable value.  Commands cache their hash because
the explorer hashes residual programs constantly.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Union


class EvalError(Exception):
    """Raised when an expression cannot be folded (type mismatch, bad cell)."""


# --------------------------------------------------------------------------
# values


@dataclass(frozen=True, order=True)
class Sym:
    """A named constant such as ``empty``, ``fail`` or the irrelevant ``_``."""

    name: str

    def __repr__(self) -> str:
        return self.name


IRRELEVANT = Sym("_")
RESERVED_SYMBOLS = {"_", "empty", "fail", "none"}

# int | bool | Sym | tuple of values
Value = Union[int, bool, Sym, tuple]


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    return str(v)


# --------------------------------------------------------------------------
# expressions


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Lit(Expr):
    value: Value

    def __str__(self) -> str:
        return format_value(self.value)


@dataclass(frozen=True)
class Reg(Expr):
    """A thread-local register.  ``pid`` is only set inside final-state conditions."""

    name: str
    pid: int | None = None

    def __str__(self) -> str:
        return self.name if self.pid is None else f"{self.pid}:{self.name}"


@dataclass(frozen=True)
class Glob(Expr):
    """A shared variable.  ``a[e]`` is a cell of array ``a``; a bare ``x`` is cell 0."""

    name: str
    index: Expr | None = None

    def __str__(self) -> str:
        return self.name if self.index is None else f"{self.name}[{self.index}]"


@dataclass(frozen=True)
class Un(Expr):
    op: str  # "not" | "neg"
    arg: Expr

    def __str__(self) -> str:
        if self.op == "not":
            return f"!({self.arg})"
        return f"-({self.arg})"


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class SeqLit(Expr):
    items: tuple[Expr, ...]

    def __str__(self) -> str:
        return "[" + ", ".join(str(i) for i in self.items) + "]"


@dataclass(frozen=True)
class Call(Expr):
    """Builtin function application; array-valued arguments are bare names."""

    fn: str
    args: tuple[Expr, ...]

    def __str__(self) -> str:
        return f"{self.fn}(" + ", ".join(str(a) for a in self.args) + ")"


@dataclass(frozen=True, order=True)
class Loc:
    """A shared memory cell.  ``index=None`` stands for an unknown cell of the family."""

    name: str
    index: Value | None = 0

    def __str__(self) -> str:
        if self.index is None:
            return f"{self.name}[·]"
        if self.index == 0 and not isinstance(self.index, bool):
            return self.name
        return f"{self.name}[{self.index}]"

    def may_alias(self, other: "Loc") -> bool:
        return self.name == other.name and (
            self.index is None or other.index is None or self.index == other.index
        )


VarKey = Union["RegKey", Loc]


@dataclass(frozen=True, order=True)
class RegKey:
    name: str

    def __str__(self) -> str:
        return self.name


def _and(a, b):
    _need(bool, a, b)
    return a and b


def _or(a, b):
    _need(bool, a, b)
    return a or b


def _need(kind, *vals):
    for v in vals:
        if kind is int:
            if not isinstance(v, int) or isinstance(v, bool):
                raise EvalError(f"expected integer, got {format_value(v)}")
        elif kind is bool:
            if not isinstance(v, bool):
                raise EvalError(f"expected boolean, got {format_value(v)}")
        elif kind is tuple and not isinstance(v, tuple):
            raise EvalError(f"expected sequence, got {format_value(v)}")


def _arith(fn):
    def go(a, b):
        _need(int, a, b)
        return fn(a, b)

    return go


def _mod(a, b):
    _need(int, a, b)
    if b == 0:
        raise EvalError("mod by zero")
    return a % b


def _concat(a, b):
    _need(tuple, a, b)
    return a + b


BINOPS: dict[str, Callable[[Value, Value], Value]] = {
    "+": _arith(operator.add),
    "-": _arith(operator.sub),
    "*": _arith(operator.mul),
    "xor": _arith(operator.xor),
    "mod": _mod,
    "=": lambda a, b: _same(a, b),
    "!=": lambda a, b: not _same(a, b),
    "<": _arith(operator.lt),
    "<=": _arith(operator.le),
    ">": _arith(operator.gt),
    ">=": _arith(operator.ge),
    "and": _and,
    "or": _or,
    "++": _concat,
}

# precedence used by the pretty printer and the parser (higher binds tighter)
PRECEDENCE = {
    "or": 1,
    "and": 2,
    "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "xor": 5, "++": 5,
    "*": 6, "mod": 6,
}


def _same(a: Value, b: Value) -> bool:
    # keep booleans apart from integers and symbols apart from everything else
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return type(a) is type(b) and a == b


def _seq_fn(fn):
    def go(q):
        _need(tuple, q)
        if not q and fn.__name__ != "len_":
            raise EvalError("sequence function applied to empty sequence")
        return fn(q)

    return go


def _last(q):
    return q[-1]


def _front(q):
    return q[:-1]


def _hd(q):
    return q[0]


def _tl(q):
    return q[1:]


def _rev(q):
    return tuple(reversed(q))


def len_(q):
    return len(q)


SEQ_FUNCS: dict[str, Callable[[tuple], Value]] = {
    "last": _seq_fn(_last),
    "front": _seq_fn(_front),
    "hd": _seq_fn(_hd),
    "tl": _seq_fn(_tl),
    "rev": _seq_fn(_rev),
    "len": _seq_fn(len_),
}
# functions over final memory; their first argument names an array family
MEMORY_FUNCS = {"window", "chain"}


# --------------------------------------------------------------------------
# syntactic predicates


def free_vars(e: Expr) -> frozenset:
    """Registers (as ``RegKey``) and cells (as ``Loc``) occurring in ``e``.

    An array access whose index is not a literal contributes the whole family
    ``Loc(a, None)`` plus the index's own variables.
    """
    out: set = set()
    _fv(e, out)
    return frozenset(out)


def _fv(e: Expr, out: set) -> None:
    if isinstance(e, Lit):
        return
    if isinstance(e, Reg):
        out.add(RegKey(e.name))
    elif isinstance(e, Glob):
        out.add(glob_loc(e))
        if e.index is not None:
            _fv(e.index, out)
    elif isinstance(e, Un):
        _fv(e.arg, out)
    elif isinstance(e, Bin):
        _fv(e.left, out)
        _fv(e.right, out)
    elif isinstance(e, SeqLit):
        for i in e.items:
            _fv(i, out)
    elif isinstance(e, Call):
        for a in e.args:
            _fv(a, out)
    else:
        raise TypeError(f"not an expression: {e!r}")


def glob_loc(g: Glob) -> Loc:
    """The cell a global access denotes, or the family if the index is unresolved."""
    if g.index is None:
        return Loc(g.name, 0)
    if isinstance(g.index, Lit):
        return Loc(g.name, g.index.value)
    return Loc(g.name, None)


def globals_of(e: Expr) -> frozenset[Loc]:
    return frozenset(v for v in free_vars(e) if isinstance(v, Loc))


def registers_of(e: Expr) -> frozenset[RegKey]:
    return frozenset(v for v in free_vars(e) if isinstance(v, RegKey))


def mentions(fv: Iterable, key: VarKey) -> bool:
    """Does a free-variable set mention ``key`` (with array aliasing)?"""
    for v in fv:
        if isinstance(key, Loc):
            if isinstance(v, Loc) and v.may_alias(key):
                return True
        elif v == key:
            return True
    return False


def load_distinct(e: Expr, f: Expr) -> bool:
    """True iff ``e`` and ``f`` reference no common (possibly aliasing) global."""
    ge, gf = globals_of(e), globals_of(f)
    return not any(a.may_alias(b) for a in ge for b in gf)


def substitute(e: Expr, x: VarKey, f: Expr) -> Expr:
    """Replace every occurrence of ``x`` in ``e`` by ``f``.

    ``x`` must be a register or a concrete cell.  Accesses that only *may*
    alias ``x`` are left alone.
    """
    if isinstance(x, Loc) and x.index is None:
        raise ValueError("cannot substitute for an unresolved array cell")
    return _subst(e, x, f)


def _subst(e: Expr, x: VarKey, f: Expr) -> Expr:
    if isinstance(e, Lit):
        return e
    if isinstance(e, Reg):
        return f if isinstance(x, RegKey) and e.name == x.name and e.pid is None else e
    if isinstance(e, Glob):
        idx = None if e.index is None else _subst(e.index, x, f)
        g = Glob(e.name, idx)
        if isinstance(x, Loc) and glob_loc(g) == x:
            return f
        return g
    if isinstance(e, Un):
        return Un(e.op, _subst(e.arg, x, f))
    if isinstance(e, Bin):
        return Bin(e.op, _subst(e.left, x, f), _subst(e.right, x, f))
    if isinstance(e, SeqLit):
        return SeqLit(tuple(_subst(i, x, f) for i in e.items))
    if isinstance(e, Call):
        return Call(e.fn, tuple(_subst(a, x, f) for a in e.args))
    raise TypeError(f"not an expression: {e!r}")


def partial_eval(e: Expr, sigma: Mapping[str, Value]) -> Expr:
    """Replace registers bound in ``sigma`` by their values and fold constants."""
    if isinstance(e, Lit):
        return e
    if isinstance(e, Reg):
        if e.pid is None and e.name in sigma:
            return Lit(sigma[e.name])
        return e
    if isinstance(e, Glob):
        if e.index is None:
            return e
        return Glob(e.name, partial_eval(e.index, sigma))
    if isinstance(e, Un):
        a = partial_eval(e.arg, sigma)
        if isinstance(a, Lit):
            return Lit(_apply_un(e.op, a.value))
        return Un(e.op, a)
    if isinstance(e, Bin):
        a, b = partial_eval(e.left, sigma), partial_eval(e.right, sigma)
        if isinstance(a, Lit) and isinstance(b, Lit):
            return Lit(BINOPS[e.op](a.value, b.value))
        return Bin(e.op, a, b)
    if isinstance(e, SeqLit):
        items = tuple(partial_eval(i, sigma) for i in e.items)
        if all(isinstance(i, Lit) for i in items):
            return Lit(tuple(i.value for i in items))
        return SeqLit(items)
    if isinstance(e, Call):
        args = tuple(partial_eval(a, sigma) for a in e.args)
        if e.fn in SEQ_FUNCS and all(isinstance(a, Lit) for a in args):
            return Lit(SEQ_FUNCS[e.fn](*(a.value for a in args)))
        return Call(e.fn, args)
    raise TypeError(f"not an expression: {e!r}")


def _apply_un(op: str, v: Value) -> Value:
    if op == "not":
        _need(bool, v)
        return not v
    _need(int, v)
    return -v


def evaluate(
    e: Expr,
    regs: Callable[[Reg], Value],
    cells: Callable[[Loc], Value],
    memory_fn: Callable[[str, tuple], Value] | None = None,
) -> Value:
    """Fully evaluate ``e`` given lookups for registers and cells."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Reg):
        return regs(e)
    if isinstance(e, Glob):
        if e.index is None:
            return cells(Loc(e.name, 0))
        idx = evaluate(e.index, regs, cells, memory_fn)
        return cells(Loc(e.name, idx))
    if isinstance(e, Un):
        return _apply_un(e.op, evaluate(e.arg, regs, cells, memory_fn))
    if isinstance(e, Bin):
        a = evaluate(e.left, regs, cells, memory_fn)
        # short-circuit so guards like ``h < t and tasks[h] = 1`` stay total
        if e.op == "and" and a is False:
            return False
        if e.op == "or" and a is True:
            return True
        return BINOPS[e.op](a, evaluate(e.right, regs, cells, memory_fn))
    if isinstance(e, SeqLit):
        return tuple(evaluate(i, regs, cells, memory_fn) for i in e.items)
    if isinstance(e, Call):
        if e.fn in SEQ_FUNCS:
            (arg,) = e.args
            return SEQ_FUNCS[e.fn](evaluate(arg, regs, cells, memory_fn))
        if e.fn in MEMORY_FUNCS and memory_fn is not None:
            return memory_fn(e.fn, e.args)
        raise EvalError(f"function {e.fn} unavailable here")
    raise TypeError(f"not an expression: {e!r}")


def is_closed(e: Expr) -> bool:
    return isinstance(e, Lit)


def negate(b: Expr) -> Expr:
    if isinstance(b, Un) and b.op == "not":
        return b.arg
    if isinstance(b, Bin) and b.op == "=":
        return Bin("!=", b.left, b.right)
    if isinstance(b, Bin) and b.op == "!=":
        return Bin("=", b.left, b.right)
    return Un("not", b)


# --------------------------------------------------------------------------
# actions


class Action:
    __slots__ = ()


@dataclass(frozen=True)
class Update(Action):
    """``target := expr``; the target is a register or a (possibly indexed) global."""

    target: Reg | Glob
    expr: Expr

    def __str__(self) -> str:
        return f"{self.target} := {self.expr}"


@dataclass(frozen=True)
class Guard(Action):
    expr: Expr

    def __str__(self) -> str:
        return f"[{self.expr}]"


@dataclass(frozen=True)
class LoopExhausted(Guard):
    """The continue-guard of a loop whose unfolding budget ran out.

    Behaves exactly like a guard; if it ever passes, the explorer records that
    behaviours were cut off.
    """

    def __str__(self) -> str:
        return f"[{self.expr}]<budget exhausted>"


@dataclass(frozen=True)
class Fence(Action):
    def __str__(self) -> str:
        return "fence"


@dataclass(frozen=True)
class CFence(Action):
    def __str__(self) -> str:
        return "cfence"


@dataclass(frozen=True)
class FenceL(Action):
    def __str__(self) -> str:
        return "fence_L"


@dataclass(frozen=True)
class FenceS(Action):
    def __str__(self) -> str:
        return "fence_S"


@dataclass(frozen=True)
class Atomic(Action):
    seq: tuple[Action, ...]

    def __post_init__(self):
        if not self.seq:
            raise ValueError("atomic block must be non-empty")
        flat: list[Action] = []
        for a in self.seq:
            flat.extend(a.seq if isinstance(a, Atomic) else (a,))
        object.__setattr__(self, "seq", tuple(flat))

    def __str__(self) -> str:
        return "<" + ", ".join(str(a) for a in self.seq) + ">"


FENCE, CFENCE, FENCE_L, FENCE_S = Fence(), CFence(), FenceL(), FenceS()


def target_key(u: Update) -> VarKey:
    t = u.target
    if isinstance(t, Reg):
        return RegKey(t.name)
    return glob_loc(t)


def update_reads(u: Update) -> frozenset:
    """Variables an update reads: its expression plus the target's index."""
    fv = free_vars(u.expr)
    if isinstance(u.target, Glob) and u.target.index is not None:
        fv = fv | free_vars(u.target.index)
    return fv


def action_reads(a: Action) -> frozenset:
    if isinstance(a, Update):
        return update_reads(a)
    if isinstance(a, Guard):
        return free_vars(a.expr)
    if isinstance(a, Atomic):
        out: frozenset = frozenset()
        for b in a.seq:
            out |= action_reads(b)
        return out
    return frozenset()


def action_writes(a: Action) -> frozenset:
    if isinstance(a, Update):
        return frozenset([target_key(a)])
    if isinstance(a, Atomic):
        out: frozenset = frozenset()
        for b in a.seq:
            out |= action_writes(b)
        return out
    return frozenset()


def is_load(a: Action) -> bool:
    """An update whose expression (or target index) reads shared memory."""
    return isinstance(a, Update) and any(isinstance(v, Loc) for v in update_reads(a))


def is_store(a: Action) -> bool:
    return isinstance(a, Update) and isinstance(a.target, Glob)


def address_registers(a: Action) -> frozenset[RegKey]:
    """Registers used to compute a shared address in ``a``."""
    out: set[RegKey] = set()

    def walk(e: Expr, in_index: bool) -> None:
        if isinstance(e, Reg):
            if in_index:
                out.add(RegKey(e.name))
        elif isinstance(e, Glob):
            if e.index is not None:
                walk(e.index, True)
        elif isinstance(e, Un):
            walk(e.arg, in_index)
        elif isinstance(e, Bin):
            walk(e.left, in_index)
            walk(e.right, in_index)
        elif isinstance(e, SeqLit):
            for i in e.items:
                walk(i, in_index)
        elif isinstance(e, Call):
            for x in e.args:
                walk(x, in_index)

    if isinstance(a, Update):
        walk(a.expr, False)
        walk(a.target, False)
    elif isinstance(a, Guard):
        walk(a.expr, False)
    elif isinstance(a, Atomic):
        for b in a.seq:
            out |= address_registers(b)
    return frozenset(out)


# --------------------------------------------------------------------------
# commands


class Command:
    __slots__ = ()


def _cached_hash(cls):
    """Give a frozen dataclass a hash computed once at construction."""
    init = cls.__init__

    def __init__(self, *args, **kwargs):
        init(self, *args, **kwargs)
        object.__setattr__(
            self, "_hash", hash((cls.__name__,) + tuple(getattr(self, f) for f in cls._hash_fields))
        )

    def __hash__(self):
        return self._hash

    cls.__init__ = __init__
    cls.__hash__ = __hash__
    return cls


@_cached_hash
@dataclass(frozen=True, eq=True)
class Skip(Command):
    _hash_fields = ()
    _hash: int = field(default=0, init=False, compare=False, repr=False)

    def __str__(self) -> str:
        return "skip"


@_cached_hash
@dataclass(frozen=True, eq=True)
class Prefix(Command):
    """``action ; rest`` - the rest may overtake the action if the architecture allows."""

    action: Action
    rest: Command
    _hash_fields = ("action", "rest")
    _hash: int = field(default=0, init=False, compare=False, repr=False)

    def __str__(self) -> str:
        return f"{self.action} ; {self.rest}"


@_cached_hash
@dataclass(frozen=True, eq=True)
class StrictPrefix(Command):
    """``action . rest`` - true prefixing, nothing overtakes the action."""

    action: Action
    rest: Command
    _hash_fields = ("action", "rest")
    _hash: int = field(default=0, init=False, compare=False, repr=False)

    def __str__(self) -> str:
        return f"{self.action} . {self.rest}"


@_cached_hash
@dataclass(frozen=True, eq=True)
class Choice(Command):
    left: Command
    right: Command
    _hash_fields = ("left", "right")
    _hash: int = field(default=0, init=False, compare=False, repr=False)

    def __str__(self) -> str:
        return f"({self.left}) |~| ({self.right})"


@_cached_hash
@dataclass(frozen=True, eq=True)
class While(Command):
    """``while cond do body`` followed by ``then``; ``budget`` counts remaining unfoldings."""

    cond: Expr
    body: Command
    then: Command
    budget: int | None = None
    _hash_fields = ("cond", "body", "then", "budget")
    _hash: int = field(default=0, init=False, compare=False, repr=False)

    def __str__(self) -> str:
        return f"while {self.cond} do ({self.body}) ; {self.then}"


SKIP = Skip()


def seq(c1: Command, c2: Command) -> Command:
    """Sequential composition, pushed inside by induction on ``c1``."""
    if isinstance(c2, Skip):
        return c1
    if isinstance(c1, Skip):
        return c2
    if isinstance(c1, Prefix):
        return Prefix(c1.action, seq(c1.rest, c2))
    if isinstance(c1, StrictPrefix):
        return StrictPrefix(c1.action, seq(c1.rest, c2))
    if isinstance(c1, Choice):
        return Choice(seq(c1.left, c2), seq(c1.right, c2))
    if isinstance(c1, While):
        return While(c1.cond, c1.body, seq(c1.then, c2), c1.budget)
    raise TypeError(f"not a command: {c1!r}")


def prefix_all(actions: Iterable[Action], rest: Command = SKIP) -> Command:
    out = rest
    for a in reversed(list(actions)):
        out = Prefix(a, out)
    return out


def if_then_else(b: Expr, c1: Command, c2: Command) -> Command:
    """``(guard b ; c1) |~| (guard !b ; c2)``."""
    return Choice(Prefix(Guard(b), c1), Prefix(Guard(negate(b)), c2))


def set_budgets(c: Command, budget: int) -> Command:
    """Give every loop in ``c`` (that has none yet) the unfolding budget ``budget``."""
    if isinstance(c, Skip):
        return c
    if isinstance(c, (Prefix, StrictPrefix)):
        return type(c)(c.action, set_budgets(c.rest, budget))
    if isinstance(c, Choice):
        return Choice(set_budgets(c.left, budget), set_budgets(c.right, budget))
    if isinstance(c, While):
        b = budget if c.budget is None else c.budget
        return While(c.cond, set_budgets(c.body, budget), set_budgets(c.then, budget), b)
    raise TypeError(f"not a command: {c!r}")


@dataclass(frozen=True)
class Process:
    pid: int
    locals: tuple[tuple[str, Value], ...]
    cmd: Command

    def __post_init__(self):
        declared = {n for n, _ in self.locals}
        missing = _command_registers(self.cmd) - declared
        if missing:
            raise ValueError(f"process {self.pid} uses undeclared registers {sorted(missing)}")


def _command_registers(c: Command) -> set[str]:
    out: set[str] = set()
    stack = [c]
    while stack:
        c = stack.pop()
        if isinstance(c, (Prefix, StrictPrefix)):
            out |= {k.name for k in action_reads(c.action) | action_writes(c.action) if isinstance(k, RegKey)}
            stack.append(c.rest)
        elif isinstance(c, Choice):
            stack += [c.left, c.right]
        elif isinstance(c, While):
            out |= {k.name for k in registers_of(c.cond)}
            stack += [c.body, c.then]
    return out


@dataclass(frozen=True)
class System:
    """Initial memory (cell -> value) plus the processes running over it."""

    memory: tuple[tuple[Loc, Value], ...]
    procs: tuple[Process, ...]

    def __post_init__(self):
        if not self.procs:
            raise ValueError("a system needs at least one process")
        pids = [p.pid for p in self.procs]
        if len(set(pids)) != len(pids):
            raise ValueError(f"duplicate process ids: {pids}")
