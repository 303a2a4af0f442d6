"""The ``.wmm`` test language: parsing, desugaring to commands, printing, reports.

A test looks like::

    test SB
    arch arm
    init { x = 0; y = 0; }
    thread 1 { reg r1; x := 1; r1 := y; }
    thread 2 { reg r2; y := 1; r2 := x; }
    exists 1:r1 = 0 and 2:r2 = 0
    expect ALLOWED;
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Union

from .arch import ARCH_NAMES
from .syntax import (
    CFENCE,
    FENCE,
    FENCE_L,
    FENCE_S,
    MEMORY_FUNCS,
    PRECEDENCE,
    RESERVED_SYMBOLS,
    SEQ_FUNCS,
    SKIP,
    Action,
    Atomic,
    Bin,
    Call,
    Choice,
    Command,
    Expr,
    Glob,
    Guard,
    Lit,
    Loc,
    Prefix,
    Process,
    Reg,
    SeqLit,
    Sym,
    System,
    Un,
    Update,
    Value,
    While,
    format_value,
    globals_of,
    if_then_else,
    seq,
)


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.msg, self.line, self.col = msg, line, col
        super().__init__(f"line {line}, col {col}: {msg}" if line else msg)


# --------------------------------------------------------------------------
# tokens

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>(\#|//)[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|\+\+|!=|<=|>=|&&|\|\||[-+*<>=!:;,(){}\[\]~/.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | op | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    line, start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, pos - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


class TokenStream:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text in texts

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def number(self) -> int:
        neg = self.accept("-")
        if self.tok.kind != "num":
            raise self.error(f"expected a number, found {self.tok.text!r}")
        n = int(self.tok.text)
        self.i += 1
        return -n if neg else n


KEYWORDS = {
    "test", "arch", "storage", "init", "thread", "reg", "guard", "fence", "cfence",
    "lwfence", "atomic", "if", "else", "while", "skip", "choice", "or", "and", "not",
    "exists", "forall", "expect", "xor", "mod", "true", "false", "CAS", "seq",
}


# --------------------------------------------------------------------------
# surface statements (kept so tests can be printed back)


@dataclass(frozen=True)
class SAssign:
    target: Reg | Glob
    expr: Expr


@dataclass(frozen=True)
class SGuard:
    expr: Expr


@dataclass(frozen=True)
class SFence:
    kind: str  # fence | cfence | lwfence


@dataclass(frozen=True)
class SSkip:
    pass


@dataclass(frozen=True)
class SAtomic:
    body: tuple


@dataclass(frozen=True)
class CasCond:
    """``CAS(x, r, e)``: true (and ``x := e``) iff ``x = r``, atomically."""

    var: Glob
    expected: Expr
    new: Expr
    negated: bool = False


@dataclass(frozen=True)
class SIf:
    cond: Union[Expr, CasCond]
    then: tuple
    orelse: tuple | None = None


@dataclass(frozen=True)
class SWhile:
    cond: Expr
    body: tuple


@dataclass(frozen=True)
class SChoice:
    left: tuple
    right: tuple


Stmt = Union[SAssign, SGuard, SFence, SSkip, SAtomic, SIf, SWhile, SChoice]


@dataclass(frozen=True)
class ThreadDecl:
    pid: int
    regs: tuple[tuple[str, Value], ...]
    body: tuple


@dataclass(frozen=True)
class TestCase:
    name: str
    arch: str
    storage: str | None
    memory: tuple[tuple[Loc, Value], ...]
    arrays: frozenset
    threads: tuple[ThreadDecl, ...]
    quantifier: str = "exists"
    cond: Expr = Lit(True)
    expect: str | None = None

    __test__ = False  # keep pytest from collecting this class

    def commands(self) -> dict[int, Command]:
        return {t.pid: desugar(t.body) for t in self.threads}

    def system(self) -> System:
        procs = tuple(Process(t.pid, t.regs, desugar(t.body)) for t in self.threads)
        return System(self.memory, procs)


# --------------------------------------------------------------------------
# parser


class _Scope:
    def __init__(self, globals_: set[str], arrays: set[str], sizes: dict[str, int]):
        self.globals = globals_
        self.arrays = arrays
        self.sizes = sizes
        self.regs: dict[str, int | None] = {}  # name -> pid (None: thread-local)
        self.ambiguous: set[str] = set()


class Parser:
    def __init__(self, text: str):
        self.ts = TokenStream(text)

    # -- top level ---------------------------------------------------------

    def parse_test(self) -> TestCase:
        ts = self.ts
        name = ""
        if ts.at("test"):
            line = ts.tok.line
            ts.i += 1
            parts = []
            while ts.tok.kind != "eof" and ts.tok.line == line:
                parts.append(ts.tok.text)
                ts.i += 1
            if not parts:
                raise ts.error("expected a test name")
            name = "".join(parts)
        ts.expect("arch")
        arch_tok = ts.ident("architecture")
        arch = arch_tok.text.lower()
        if arch not in ARCH_NAMES:
            raise ts.error(f"unknown architecture {arch_tok.text!r}", arch_tok)
        storage = None
        if ts.accept("storage"):
            st = ts.ident("storage kind")
            if st.text not in ("map", "writelist"):
                raise ts.error(f"unknown storage {st.text!r}", st)
            storage = st.text
        memory, arrays = self.parse_init()
        sizes: dict[str, int] = {}
        for loc, _ in memory:
            sizes[loc.name] = max(sizes.get(loc.name, 0), loc.index + 1)
        gnames = {loc.name for loc, _ in memory}
        threads = []
        seen_pids = set()
        while ts.at("thread"):
            th = self.parse_thread(_Scope(gnames, arrays, sizes), arch)
            if th.pid in seen_pids:
                raise ts.error(f"duplicate thread {th.pid}")
            seen_pids.add(th.pid)
            threads.append(th)
        if not threads:
            raise ts.error("a test needs at least one thread")
        quant, cond = "exists", Lit(True)
        if ts.at("exists", "forall"):
            quant = ts.tok.text
            ts.i += 1
            cond = self.parse_condition(memory, arrays, threads)
        expect = None
        if ts.accept("expect"):
            e = ts.ident("ALLOWED or FORBIDDEN")
            if e.text not in ("ALLOWED", "FORBIDDEN"):
                raise ts.error(f"unknown expectation {e.text!r}", e)
            expect = e.text
            ts.accept(";")
        if ts.tok.kind != "eof":
            raise ts.error(f"unexpected {ts.tok.text!r}")
        return TestCase(name, arch, storage, tuple(sorted(memory)), frozenset(arrays), tuple(threads), quant, cond, expect)

    def parse_condition(self, memory, arrays, threads) -> Expr:
        """An expression over final state: pid-qualified registers and globals."""
        sizes: dict[str, int] = {}
        for loc, _ in memory:
            sizes[loc.name] = max(sizes.get(loc.name, 0), loc.index + 1)
        scope = _Scope({loc.name for loc, _ in memory}, set(arrays), sizes)
        owners: dict[str, list[int]] = {}
        for th in threads:
            for r, _ in th.regs:
                owners.setdefault(r, []).append(th.pid)
        scope.regs = {r: pids[0] for r, pids in owners.items() if len(pids) == 1}
        scope.ambiguous = {r for r, pids in owners.items() if len(pids) > 1}
        self.cond_pids = {th.pid: {r for r, _ in th.regs} for th in threads}
        return self.parse_expr(scope, in_cond=True)

    def parse_condition_of(self, tc: "TestCase") -> Expr:
        return self.parse_condition(tc.memory, tc.arrays, tc.threads)

    def parse_init(self) -> tuple[list[tuple[Loc, Value]], set[str]]:
        ts = self.ts
        ts.expect("init")
        ts.expect("{")
        cells: dict[Loc, Value] = {}
        arrays: set[str] = set()
        scalars: set[str] = set()
        while not ts.accept("}"):
            nt = ts.ident("global name")
            name = nt.text
            if name in KEYWORDS or name in RESERVED_SYMBOLS:
                raise ts.error(f"{name!r} is reserved", nt)
            if ts.accept("["):
                idx = ts.number()
                ts.expect("]")
                ts.expect("=")
                keys = [(Loc(name, idx), self.parse_value())]
                arrays.add(name)
            else:
                ts.expect("=")
                if ts.at("["):
                    ts.expect("[")
                    vals = []
                    while not ts.accept("]"):
                        vals.append(self.parse_value())
                        if not ts.accept(","):
                            ts.expect("]")
                            break
                    if not vals:
                        raise ts.error(f"array {name} needs at least one cell", nt)
                    keys = [(Loc(name, i), v) for i, v in enumerate(vals)]
                    arrays.add(name)
                else:
                    keys = [(Loc(name, 0), self.parse_value())]
                    scalars.add(name)
            for loc, v in keys:
                if loc in cells:
                    raise ts.error(f"{loc} initialised twice", nt)
                if loc.index < 0:
                    raise ts.error("negative array index", nt)
                cells[loc] = v
            ts.expect(";")
        both = arrays & scalars
        if both:
            raise ts.error(f"{sorted(both)[0]} declared both as scalar and array")
        for a in arrays:
            n = max(l.index for l in cells if l.name == a) + 1
            if any(Loc(a, i) not in cells for i in range(n)):
                raise ts.error(f"array {a} has gaps; initialise every cell from 0")
        return list(cells.items()), arrays

    def parse_value(self) -> Value:
        ts = self.ts
        if ts.accept("seq"):
            ts.expect("[")
            items = []
            while not ts.accept("]"):
                items.append(self.parse_value())
                if not ts.accept(","):
                    ts.expect("]")
                    break
            return tuple(items)
        if ts.tok.kind == "num" or ts.at("-"):
            return ts.number()
        if ts.accept("true"):
            return True
        if ts.accept("false"):
            return False
        t = ts.tok
        if t.kind == "ident" and t.text in RESERVED_SYMBOLS:
            ts.i += 1
            return Sym(t.text)
        raise ts.error(f"expected a value, found {t.text!r}")

    def parse_thread(self, scope: _Scope, arch: str) -> ThreadDecl:
        ts = self.ts
        ts.expect("thread")
        if ts.tok.kind != "num":
            raise ts.error("expected a thread number")
        pid = ts.number()
        ts.expect("{")
        regs: list[tuple[str, Value]] = []
        while ts.accept("reg"):
            while True:
                rt = ts.ident("register name")
                r = rt.text
                if r in KEYWORDS or r in RESERVED_SYMBOLS:
                    raise ts.error(f"{r!r} is reserved", rt)
                if r in scope.globals:
                    raise ts.error(f"register {r} clashes with a global of the same name", rt)
                if r in scope.regs:
                    raise ts.error(f"register {r} declared twice", rt)
                v: Value = 0
                if ts.accept("="):
                    v = self.parse_value()
                scope.regs[r] = None
                regs.append((r, v))
                if not ts.accept(","):
                    break
            ts.expect(";")
        self.arch = arch
        body = self.parse_block_body(scope)
        return ThreadDecl(pid, tuple(regs), body)

    def parse_block_body(self, scope: _Scope) -> tuple:
        ts = self.ts
        out = []
        while not ts.accept("}"):
            if ts.tok.kind == "eof":
                raise ts.error("unterminated block")
            out.append(self.parse_stmt(scope))
        return tuple(out)

    def parse_block(self, scope: _Scope) -> tuple:
        self.ts.expect("{")
        return self.parse_block_body(scope)

    # -- statements --------------------------------------------------------

    def parse_stmt(self, scope: _Scope) -> Stmt:
        ts = self.ts
        t = ts.tok
        if ts.accept("skip"):
            ts.expect(";")
            return SSkip()
        if ts.accept("guard"):
            e = self.parse_expr(scope)
            ts.expect(";")
            return SGuard(e)
        if ts.at("fence", "cfence", "lwfence"):
            ts.i += 1
            if t.text == "lwfence" and self.arch == "arm":
                raise ts.error("lwfence is a POWER instruction; ARM has no lightweight fence", t)
            ts.expect(";")
            return SFence(t.text)
        if ts.accept("atomic"):
            body = self.parse_block(scope)
            if not body:
                raise ts.error("empty atomic block", t)
            for s in body:
                if not isinstance(s, (SAssign, SGuard)):
                    raise ts.error("atomic blocks contain only assignments and guards", t)
            return SAtomic(body)
        if ts.accept("if"):
            cond = self.parse_if_cond(scope)
            then = self.parse_block(scope)
            orelse = None
            if ts.accept("else"):
                if ts.at("if"):
                    orelse = (self.parse_stmt(scope),)
                else:
                    orelse = self.parse_block(scope)
            return SIf(cond, then, orelse)
        if ts.accept("while"):
            cond = self.parse_expr(scope)
            return SWhile(cond, self.parse_block(scope))
        if ts.accept("choice"):
            left = self.parse_block(scope)
            ts.expect("or")
            return SChoice(left, self.parse_block(scope))
        if t.kind == "ident" and t.text not in KEYWORDS:
            target = self.parse_lvalue(scope)
            ts.expect(":=")
            e = self.parse_expr(scope)
            ts.expect(";")
            return SAssign(target, e)
        raise ts.error(f"expected a statement, found {t.text or 'end of input'!r}")

    def parse_if_cond(self, scope: _Scope) -> Union[Expr, CasCond]:
        ts = self.ts
        neg = False
        if ts.at("!", "not") and ts.peek().text == "CAS":
            ts.i += 1
            neg = True
        if ts.accept("CAS"):
            ts.expect("(")
            var = self.parse_lvalue(scope)
            if not isinstance(var, Glob):
                raise ts.error("the first argument of CAS must be a shared variable")
            ts.expect(",")
            expected = self.parse_expr(scope)
            ts.expect(",")
            new = self.parse_expr(scope)
            ts.expect(")")
            return CasCond(var, expected, new, neg)
        return self.parse_expr(scope)

    def parse_lvalue(self, scope: _Scope) -> Reg | Glob:
        ts = self.ts
        t = ts.ident("variable")
        if t.text in scope.regs:
            if ts.at("["):
                raise ts.error(f"register {t.text} cannot be indexed", t)
            return Reg(t.text)
        if t.text in scope.globals:
            return self._glob(t, scope, in_cond=False)
        raise ts.error(f"undeclared variable {t.text}", t)

    def _glob(self, t: Token, scope: _Scope, in_cond: bool) -> Glob:
        ts = self.ts
        name = t.text
        if not ts.accept("["):
            if name in scope.arrays:
                raise ts.error(f"array {name} needs an index", t)
            return Glob(name)
        idx = self.parse_expr(scope, in_cond)
        ts.expect("]")
        if not in_cond and globals_of(idx):
            raise ts.error(f"index of {name} reads shared memory; load it into a register first", t)
        if isinstance(idx, Lit):
            v = idx.value
            if not isinstance(v, int) or isinstance(v, bool):
                raise ts.error(f"index of {name} must be an integer", t)
            if name not in scope.arrays and v != 0:
                raise ts.error(f"non-zero address shift on {name} is not supported", t)
            if not 0 <= v < scope.sizes[name]:
                raise ts.error(f"index {v} out of bounds for {name}", t)
            if v == 0 and name not in scope.arrays:
                return Glob(name)
        return Glob(name, idx)

    # -- expressions -------------------------------------------------------

    def parse_expr(self, scope: _Scope, in_cond: bool = False) -> Expr:
        return self._binary(scope, in_cond, 1)

    def _binary(self, scope, in_cond, level) -> Expr:
        if level > 6:
            return self._unary(scope, in_cond)
        if level == 3:  # prefix ``not`` sits between ``and`` and comparisons
            ts = self.ts
            if ts.at("not", "!") and not (ts.peek().text == "CAS"):
                ts.i += 1
                return Un("not", self._binary(scope, in_cond, 3))
            return self._binary(scope, in_cond, 4)
        left = self._binary(scope, in_cond, level + 1)
        while True:
            op = self._binop_here()
            if op is None or PRECEDENCE[op] != level:
                return left
            self.ts.i += 1
            right = self._binary(scope, in_cond, level + 1)
            left = Bin(op, left, right)
            if level == 4:  # comparisons do not chain
                if (nxt := self._binop_here()) is not None and PRECEDENCE[nxt] == 4:
                    raise self.ts.error("comparisons do not chain; add parentheses")
                return left

    def _binop_here(self) -> str | None:
        t = self.ts.tok
        if t.kind not in ("op", "ident"):
            return None
        text = {"&&": "and", "||": "or"}.get(t.text, t.text)
        return text if text in PRECEDENCE else None

    def _unary(self, scope, in_cond) -> Expr:
        ts = self.ts
        if ts.accept("-"):
            arg = self._unary(scope, in_cond)
            if isinstance(arg, Lit) and isinstance(arg.value, int) and not isinstance(arg.value, bool):
                return Lit(-arg.value)
            return Un("neg", arg)
        if ts.at("!"):
            ts.i += 1
            return Un("not", self._unary(scope, in_cond))
        return self._primary(scope, in_cond)

    def _primary(self, scope: _Scope, in_cond: bool) -> Expr:
        ts = self.ts
        t = ts.tok
        if t.kind == "num":
            if in_cond and ts.peek().text == ":":
                return self._qualified(scope)
            ts.i += 1
            return Lit(int(t.text))
        if ts.accept("("):
            e = self.parse_expr(scope, in_cond)
            ts.expect(")")
            return e
        if ts.accept("["):
            items = []
            while not ts.accept("]"):
                items.append(self.parse_expr(scope, in_cond))
                if not ts.accept(","):
                    ts.expect("]")
                    break
            if all(isinstance(i, Lit) for i in items):
                return Lit(tuple(i.value for i in items))
            return SeqLit(tuple(items))
        if ts.accept("true"):
            return Lit(True)
        if ts.accept("false"):
            return Lit(False)
        if t.kind == "ident":
            if t.text in RESERVED_SYMBOLS:
                ts.i += 1
                return Lit(Sym(t.text))
            if t.text in KEYWORDS:
                raise ts.error(f"unexpected {t.text!r} in expression")
            ts.i += 1
            if ts.at("(") and (t.text in SEQ_FUNCS or t.text in MEMORY_FUNCS):
                return self._call(t, scope, in_cond)
            if t.text in scope.regs:
                pid = scope.regs[t.text]
                return Reg(t.text, pid)
            if t.text in scope.ambiguous:
                raise ts.error(f"register {t.text} exists in several threads; write <pid>:{t.text}", t)
            if t.text in scope.globals:
                return self._glob(t, scope, in_cond)
            raise ts.error(f"undeclared variable {t.text}", t)
        raise ts.error(f"unexpected {t.text or 'end of input'!r} in expression")

    def _qualified(self, scope: _Scope) -> Reg:
        ts = self.ts
        pt = ts.tok
        pid = ts.number()
        ts.expect(":")
        rt = ts.ident("register name")
        regs = self.cond_pids.get(pid)
        if regs is None:
            raise ts.error(f"no thread {pid}", pt)
        if rt.text not in regs:
            raise ts.error(f"thread {pid} has no register {rt.text}", rt)
        return Reg(rt.text, pid)

    def _call(self, t: Token, scope: _Scope, in_cond: bool) -> Expr:
        ts = self.ts
        fn = t.text
        if fn in MEMORY_FUNCS and not in_cond:
            raise ts.error(f"{fn} is only available in final-state conditions", t)
        ts.expect("(")
        args: list[Expr] = []
        while not ts.accept(")"):
            if fn in MEMORY_FUNCS and len(args) < (2 if fn == "chain" else 1):
                at = ts.ident("array name")
                if at.text not in scope.arrays:
                    raise ts.error(f"{at.text} is not an array", at)
                args.append(Glob(at.text))
            else:
                args.append(self.parse_expr(scope, in_cond))
            if not ts.accept(","):
                ts.expect(")")
                break
        want = 1 if fn in SEQ_FUNCS else 3
        if len(args) != want:
            raise ts.error(f"{fn} takes {want} argument(s)", t)
        return Call(fn, tuple(args))


def parse_test(text: str) -> TestCase:
    return Parser(text).parse_test()


def load_test(path) -> TestCase:
    with open(path, encoding="utf-8") as fh:
        return parse_test(fh.read())


# --------------------------------------------------------------------------
# desugaring


_FENCES = {"fence": (FENCE,), "cfence": (CFENCE,), "lwfence": (FENCE_L, FENCE_S)}


def _atomic_action(s) -> Action:
    if isinstance(s, SAssign):
        return Update(s.target, s.expr)
    return Guard(s.expr)


def desugar(stmts: tuple, rest: Command = SKIP) -> Command:
    """Turn surface statements into a command, continuing with ``rest``."""
    cmd = rest
    for s in reversed(stmts):
        cmd = _desugar_one(s, cmd)
    return cmd


def _desugar_one(s: Stmt, rest: Command) -> Command:
    if isinstance(s, SSkip):
        return rest
    if isinstance(s, SAssign):
        return Prefix(Update(s.target, s.expr), rest)
    if isinstance(s, SGuard):
        return Prefix(Guard(s.expr), rest)
    if isinstance(s, SFence):
        cmd = rest
        for a in reversed(_FENCES[s.kind]):
            cmd = Prefix(a, cmd)
        return cmd
    if isinstance(s, SAtomic):
        return Prefix(Atomic(tuple(_atomic_action(x) for x in s.body)), rest)
    if isinstance(s, SIf):
        then = desugar(s.then)
        orelse = desugar(s.orelse) if s.orelse is not None else SKIP
        if isinstance(s.cond, CasCond):
            c = s.cond
            if c.negated:
                then, orelse = orelse, then
            success = Atomic((Guard(Bin("=", c.var, c.expected)), Update(c.var, c.new)))
            branch = Choice(Prefix(success, then), Prefix(Guard(Bin("!=", c.var, c.expected)), orelse))
        else:
            branch = if_then_else(s.cond, then, orelse)
        return seq(branch, rest)
    if isinstance(s, SWhile):
        return While(s.cond, desugar(s.body), rest)
    if isinstance(s, SChoice):
        return seq(Choice(desugar(s.left), desugar(s.right)), rest)
    raise TypeError(f"not a statement: {s!r}")


# --------------------------------------------------------------------------
# printing


def format_expr(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Lit):
        v = e.value
        if isinstance(v, int) and not isinstance(v, bool) and v < 0:
            return f"({v})" if parent else str(v)
        return format_value(v)
    if isinstance(e, Reg):
        return str(e)
    if isinstance(e, Glob):
        return e.name if e.index is None else f"{e.name}[{format_expr(e.index)}]"
    if isinstance(e, Un):
        sym = "!" if e.op == "not" else "-"
        return f"{sym}{format_expr(e.arg, 99)}"
    if isinstance(e, Bin):
        p = PRECEDENCE[e.op]
        # left-assoc: the right operand needs parentheses at equal precedence
        s = f"{format_expr(e.left, p)} {e.op} {format_expr(e.right, p + 1)}"
        return f"({s})" if p < parent or (p == 4 and parent == 4) else s
    if isinstance(e, SeqLit):
        return "[" + ", ".join(format_expr(i) for i in e.items) + "]"
    if isinstance(e, Call):
        return f"{e.fn}(" + ", ".join(format_expr(a) for a in e.args) + ")"
    raise TypeError(f"not an expression: {e!r}")


def _format_init_value(v: Value) -> str:
    if isinstance(v, tuple):
        return "seq [" + ", ".join(_format_init_value(x) for x in v) + "]"
    return format_value(v)


def format_stmts(stmts: tuple, indent: int) -> list[str]:
    pad = "  " * indent
    out = []
    for s in stmts:
        if isinstance(s, SSkip):
            out.append(f"{pad}skip;")
        elif isinstance(s, SAssign):
            out.append(f"{pad}{format_expr(s.target)} := {format_expr(s.expr)};")
        elif isinstance(s, SGuard):
            out.append(f"{pad}guard {format_expr(s.expr)};")
        elif isinstance(s, SFence):
            out.append(f"{pad}{s.kind};")
        elif isinstance(s, SAtomic):
            out.append(f"{pad}atomic {{")
            out += format_stmts(s.body, indent + 1)
            out.append(f"{pad}}}")
        elif isinstance(s, SIf):
            if isinstance(s.cond, CasCond):
                c = s.cond
                cond = f"{'!' if c.negated else ''}CAS({format_expr(c.var)}, {format_expr(c.expected)}, {format_expr(c.new)})"
            else:
                cond = format_expr(s.cond)
            out.append(f"{pad}if {cond} {{")
            out += format_stmts(s.then, indent + 1)
            if s.orelse is not None:
                out.append(f"{pad}}} else {{")
                out += format_stmts(s.orelse, indent + 1)
            out.append(f"{pad}}}")
        elif isinstance(s, SWhile):
            out.append(f"{pad}while {format_expr(s.cond)} {{")
            out += format_stmts(s.body, indent + 1)
            out.append(f"{pad}}}")
        elif isinstance(s, SChoice):
            out.append(f"{pad}choice {{")
            out += format_stmts(s.left, indent + 1)
            out.append(f"{pad}}} or {{")
            out += format_stmts(s.right, indent + 1)
            out.append(f"{pad}}}")
        else:
            raise TypeError(f"not a statement: {s!r}")
    return out


def render_source(tc: TestCase) -> str:
    """Print ``tc`` back as ``.wmm`` text that parses to an equal test."""
    lines = []
    if tc.name:
        lines.append(f"test {tc.name}")
    lines.append(f"arch {tc.arch}" + (f" storage {tc.storage}" if tc.storage else ""))
    lines.append("init {")
    by_name: dict[str, list[Value]] = {}
    for loc, v in tc.memory:
        by_name.setdefault(loc.name, []).append(v)
    for name, vals in by_name.items():
        if name in tc.arrays:
            lines.append(f"  {name} = [" + ", ".join(_format_init_value(v) for v in vals) + "];")
        else:
            lines.append(f"  {name} = {_format_init_value(vals[0])};")
    lines.append("}")
    for th in tc.threads:
        lines.append(f"thread {th.pid} {{")
        if th.regs:
            decls = ", ".join(r if v == 0 and type(v) is int else f"{r} = {_format_init_value(v)}" for r, v in th.regs)
            lines.append(f"  reg {decls};")
        lines += format_stmts(th.body, 1)
        lines.append("}")
    lines.append(f"{tc.quantifier} {format_expr(tc.cond)}")
    if tc.expect:
        lines.append(f"expect {tc.expect};")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# reports


def json_value(v: Value):
    if isinstance(v, (bool, int)):
        return v
    if isinstance(v, tuple):
        return [json_value(x) for x in v]
    return str(v)


def outcome_json(o) -> dict:
    return {k: json_value(v) for k, v in o.as_dict().items()}


@dataclass
class Report:
    """A verdict plus the context needed to print it."""

    test: str
    arch: str
    storage: str
    verdict: object  # explorer.Verdict
    condition: str = ""
    expect: str | None = None
    timing: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool | None:
        if self.expect is None:
            return None
        return _matches(self.verdict.kind, self.expect)


def _matches(kind: str, expect: str) -> bool:
    if expect == "REFINES":
        return kind in ("REFINES", "REFINES-WITHIN-BOUNDS")
    return kind == expect


def report_dict(r: Report) -> dict:
    v = r.verdict
    d = {
        "test": r.test,
        "arch": r.arch,
        "storage": r.storage,
        "verdict": v.kind,
        "outcomes": [outcome_json(o) for o in v.outcomes],
        "witness": list(v.witness) if v.witness is not None else [],
        "stats": {
            "states": v.states,
            "outcomes": len(v.outcomes),
            "seconds": round(v.seconds, 3) if r.timing else None,
        },
        "truncated": v.truncated,
    }
    if r.condition:
        d["condition"] = r.condition
    d["matching"] = [outcome_json(o) for o in v.matching]
    if r.expect is not None:
        d["expect"] = r.expect
        d["pass"] = r.passed
    if v.notes:
        d["notes"] = list(v.notes)
    d.update(r.extra)
    return d


def render_report(r: Report, fmt: str = "text", witness: bool = True) -> str:
    if fmt == "json":
        return json.dumps(report_dict(r), indent=2, sort_keys=False)
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    v = r.verdict
    lines = [f"Test {r.test or '(unnamed)'}  arch={r.arch} storage={r.storage}"]
    if r.condition:
        lines.append(f"Condition: {r.condition}")
    lines.append(f"Verdict: {v.kind}")
    if r.expect is not None:
        lines.append(f"Expected: {r.expect}  {'PASS' if r.passed else 'FAIL'}")
    matching = set(v.matching)
    lines.append(f"Outcomes ({len(v.outcomes)}, {len(v.matching)} matching):")
    for o in v.outcomes:
        lines.append(f"  {'*' if o in matching else ' '} {o}")
    for note in v.notes:
        lines.append(f"Note: {note}")
    if witness and v.witness:
        lines.append("Witness:")
        for i, lab in enumerate(v.witness, 1):
            lines.append(f"  {i:>3}. {lab}")
    stats = f"States: {v.states}"
    if r.timing:
        stats += f"  time: {v.seconds:.3f}s"
    stats += f"  truncated: {'yes' if v.truncated else 'no'}"
    lines.append(stats)
    return "\n".join(lines) + "\n"
