"""Refinement by final-state inclusion, plus client-harness generators.

A job pairs an abstract test (always run under SC with map storage) with a
concrete one.  Both are projected onto named observables; the concrete side
refines the abstract one iff every projected concrete outcome is also an
abstract one.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from itertools import product

from .arch import SC, get_arch
from .explorer import Bounds, Exploration, Outcome, Verdict, explore, satisfies
from .litmus import ParseError, Parser, TestCase, format_expr, load_test
from .syntax import Expr, Value, format_value


@dataclass(frozen=True)
class Observable:
    name: str
    abstract: Expr
    concrete: Expr


@dataclass(frozen=True)
class RefinementJob:
    name: str
    abstract: TestCase
    concrete: TestCase
    observe: tuple[Observable, ...]
    exclude: tuple[Expr, ...] = ()
    expect: str | None = None


@dataclass(frozen=True, order=True)
class Observation:
    """An outcome projected onto the observables of a job."""

    values: tuple[tuple[str, Value], ...]

    def as_dict(self) -> dict[str, Value]:
        return dict(self.values)

    def __str__(self) -> str:
        return " ".join(f"{k}={format_value(v)}" for k, v in self.values)

    def sort_key(self) -> str:
        return str(self)


def project(o: Outcome, observe, side: str) -> Observation:
    return Observation(tuple((ob.name, o.evaluate(getattr(ob, side))) for ob in observe))


def check_refinement(
    job: RefinementJob, bounds: Bounds = Bounds(), arch: str | None = None, storage: str | None = None
) -> Verdict:
    """REFINES iff projected concrete outcomes are a subset of the abstract ones."""
    abs_ex = explore(SC, job.abstract.system(), "map", bounds)
    conc_arch = get_arch(arch or job.concrete.arch)
    conc_ex = explore(conc_arch, job.concrete.system(), storage or job.concrete.storage, bounds)
    return compare(job, abs_ex, conc_ex)


def compare(job: RefinementJob, abs_ex: Exploration, conc_ex: Exploration) -> Verdict:
    allowed = {project(o, job.observe, "abstract") for o in abs_ex.outcomes}
    kept, excluded = [], 0
    for o in conc_ex.outcomes:  # discovery order, so the first bad one has a shortest trace
        if any(satisfies(o, e) for e in job.exclude):
            excluded += 1
        else:
            kept.append(o)
    seen: dict[Observation, Outcome] = {}
    for o in kept:
        seen.setdefault(project(o, job.observe, "concrete"), o)
    bad = [p for p in seen if p not in allowed]
    notes = []
    if job.exclude:
        what = " or ".join(format_expr(e) for e in job.exclude)
        notes.append(f"excluded {excluded} concrete outcome(s) matching {what}")
    if abs_ex.truncated:
        notes.append("abstract exploration hit the loop bound")
    if conc_ex.truncated:
        notes.append("concrete exploration hit the loop bound")
    base = dict(
        states=abs_ex.states + conc_ex.states,
        outcomes=sorted(seen, key=Observation.sort_key),
        truncated=abs_ex.truncated or conc_ex.truncated,
        seconds=abs_ex.seconds + conc_ex.seconds,
        notes=notes,
    )
    if bad:
        first = next(p for p in seen if p in set(bad))
        witness = [str(x) for x in conc_ex.witness(seen[first])]
        notes.append(f"offending outcome: {seen[first]}")
        return Verdict("VIOLATES", witness, matching=sorted(bad, key=Observation.sort_key), **base)
    kind = "REFINES-WITHIN-BOUNDS" if base["truncated"] else "REFINES"
    return Verdict(kind, None, matching=[], **base)


# --------------------------------------------------------------------------
# .refine files


def parse_refine(text: str, base_dir: str = ".", loader=load_test) -> RefinementJob:
    """Parse a job file::

        refine chase-lev-fixed
        abstract deque-put-steal.abs.wmm
        concrete chase-lev-fixed.put-steal.wmm
        observe { ret = 2:ret ~ 2:ret; q = q ~ window(tasks, head, tail); }
        exclude 2:ret = fail;
        expect REFINES;
    """
    p = Parser(text)
    ts = p.ts

    def rest_of_line(what: str) -> str:
        line = ts.tok.line
        parts = []
        while ts.tok.kind != "eof" and ts.tok.line == line:
            parts.append(ts.tok.text)
            ts.i += 1
        if not parts:
            raise ts.error(f"expected {what}")
        return "".join(parts)

    name = ""
    if ts.accept("refine"):
        name = rest_of_line("a job name")
    ts.expect("abstract")
    abs_path = rest_of_line("a file name")
    ts.expect("concrete")
    conc_path = rest_of_line("a file name")
    try:
        abstract = loader(os.path.join(base_dir, abs_path))
        concrete = loader(os.path.join(base_dir, conc_path))
    except ParseError as e:
        raise ParseError(f"in referenced test: {e}") from e
    ts.expect("observe")
    ts.expect("{")
    observe = []
    while not ts.accept("}"):
        n = ts.ident("observable name").text
        ts.expect("=")
        a = p.parse_condition_of(abstract)
        ts.expect("~")
        c = p.parse_condition_of(concrete)
        ts.expect(";")
        if any(o.name == n for o in observe):
            raise ts.error(f"observable {n} declared twice")
        observe.append(Observable(n, a, c))
    if not observe:
        raise ts.error("a job needs at least one observable")
    exclude = []
    while ts.accept("exclude"):
        exclude.append(p.parse_condition_of(concrete))
        ts.expect(";")
    expect = None
    if ts.accept("expect"):
        e = ts.ident("REFINES or VIOLATES")
        if e.text not in ("REFINES", "VIOLATES"):
            raise ts.error(f"unknown expectation {e.text!r}", e)
        expect = e.text
        ts.accept(";")
    if ts.tok.kind != "eof":
        raise ts.error(f"unexpected {ts.tok.text!r}")
    return RefinementJob(name or concrete.name, abstract, concrete, tuple(observe), tuple(exclude), expect)


def load_refine(path: str) -> RefinementJob:
    with open(path, encoding="utf-8") as fh:
        return parse_refine(fh.read(), os.path.dirname(os.path.abspath(path)))


# --------------------------------------------------------------------------
# deque client harnesses


# "no-first-cfence" is the fixed steal without the cfence before the branch
DEQUE_VARIANTS = ("buggy", "fixed", "no-first-cfence")


@dataclass
class _Thread:
    pid: int
    regs: list[str] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)


def _abstract_op(op: str, k: int, v: int, th: _Thread) -> None:
    if op == "put":
        th.lines.append(f"q := q ++ [{v}];")
        return
    ret = f"ret{k}"
    th.regs.append(f"{ret} = none")
    pick, rest = ("last", "front") if op == "take" else ("hd", "tl")
    th.lines += [
        "choice {",
        f"  atomic {{ guard q = []; {ret} := empty; }}",
        "} or {",
        f"  atomic {{ guard q != []; {ret} := {pick}(q); q := {rest}(q); }}",
        "}",
    ]


def _concrete_op(op: str, k: int, v: int, th: _Thread, variant: str, size: int) -> None:
    h, t, ret = f"h{k}", f"t{k}", f"ret{k}"
    if op == "put":
        th.regs.append(f"{t} = _")
        th.lines += [
            f"{t} := tail;",
            f"tasks[{t} mod {size}] := {v};",
            "fence;",
            f"tail := {t} + 1;",
        ]
    elif op == "take":
        th.regs += [f"{h} = _", f"{t} = _", f"{ret} = _"]
        th.lines += [
            f"{t} := tail - 1;",
            f"tail := {t};",
            "fence;",
            f"{h} := head;",
            f"if {h} <= {t} {{",
            f"  {ret} := tasks[{t} mod {size}];",
            f"  if {h} = {t} {{",
            f"    if !CAS(head, {h}, {h} + 1) {{",
            f"      {ret} := empty;",
            "    }",
            f"    tail := {t} + 1;",
            "  }",
            "} else {",
            f"  {ret} := empty;",
            f"  tail := {t} + 1;",
            "}",
        ]
    else:
        th.regs += [f"{h} = _", f"{t} = _", f"{ret} = _"]
        th.lines += [f"{h} := head;", "fence;", f"{t} := tail;"]
        if variant != "no-first-cfence":
            th.lines.append("cfence;")
        th.lines.append(f"if {h} < {t} {{")
        if variant in ("fixed", "no-first-cfence"):
            th.lines += ["  cfence;", f"  {ret} := tasks[{h} mod {size}];"]
        else:
            th.lines += [f"  {ret} := tasks[{h} mod {size}];", "  cfence;"]
        th.lines += [
            f"  if !CAS(head, {h}, {h} + 1) {{",
            f"    {ret} := fail;",
            "  }",
            "} else {",
            f"  {ret} := empty;",
            "}",
        ]


def _render(name: str, arch: str, init: list[str], threads: list[_Thread]) -> str:
    out = [f"test {name}", f"arch {arch}", "init {"] + [f"  {i}" for i in init] + ["}"]
    for th in threads:
        out.append(f"thread {th.pid} {{")
        if th.regs:
            out.append("  reg " + ", ".join(th.regs) + ";")
        out += [f"  {ln}" for ln in th.lines]
        out.append("}")
    out.append("exists true")
    return "\n".join(out) + "\n"


def deque_harness(clients: list[list[str]], variant: str = "buggy", arch: str = "arm"):
    """Source texts ``(abstract, concrete, refine_body)`` for a deque client.

    ``clients[0]`` is the owner (``put``/``take``); the others only ``steal``.
    Operation ``k`` (numbered across the whole harness) returns into ``ret<k>``.
    """
    if variant not in DEQUE_VARIANTS:
        raise ValueError(f"unknown deque variant {variant!r}")
    for i, ops in enumerate(clients):
        allowed = {"put", "take"} if i == 0 else {"steal"}
        if not ops or not set(ops) <= allowed:
            raise ValueError(f"process {i + 1} may only run {sorted(allowed)}")
    puts = sum(op == "put" for ops in clients for op in ops)
    size = max(2, puts)
    abs_threads, conc_threads = [], []
    observe = []
    k, v = 0, 0
    for pid, ops in enumerate(clients, 1):
        at, ct = _Thread(pid), _Thread(pid)
        for op in ops:
            k += 1
            if op == "put":
                v += 1
            _abstract_op(op, k, v, at)
            _concrete_op(op, k, v, ct, variant, size)
            if op != "put":
                observe.append(f"ret{k}")
        abs_threads.append(at)
        conc_threads.append(ct)
    tag = "+".join("".join(o[0] for o in ops) for ops in clients)
    abstract = _render(f"deque-spec.{tag}", "sc", ["q = seq [];"], abs_threads)
    tasks = ", ".join(["_"] * size)
    concrete = _render(
        f"chase-lev-{variant}.{tag}", arch, ["head = 0;", "tail = 0;", f"tasks = [{tasks}];"], conc_threads
    )
    obs = [f"  q = q ~ window(tasks, head, tail);"]
    obs += [f"  {r} = {r} ~ {r};" for r in observe]
    excl = [f"exclude {r} = fail;" for r in observe if _is_steal(clients, r)]
    refine = "observe {\n" + "\n".join(obs) + "\n}\n" + "".join(e + "\n" for e in excl)
    return abstract, concrete, refine


def _is_steal(clients, reg: str) -> bool:
    k = int(reg[3:])
    flat = [op for ops in clients for op in ops]
    return flat[k - 1] == "steal"


def deque_job(clients: list[list[str]], variant: str = "buggy", arch: str = "arm") -> RefinementJob:
    from .litmus import parse_test

    a, c, body = deque_harness(clients, variant, arch)
    tests = {"abstract.wmm": parse_test(a), "concrete.wmm": parse_test(c)}
    text = "abstract abstract.wmm\nconcrete concrete.wmm\n" + body
    job = parse_refine(text, "", loader=lambda p: tests[os.path.basename(p)])
    return RefinementJob(tests["concrete.wmm"].name, job.abstract, job.concrete, job.observe, job.exclude)


def deque_clients(max_procs: int = 3, max_ops: int = 2):
    """Every harness with 1..max_procs processes doing 1..max_ops operations each."""
    owner_ops = [list(p) for n in range(1, max_ops + 1) for p in product(("put", "take"), repeat=n)]
    steal_ops = [["steal"] * n for n in range(1, max_ops + 1)]
    for procs in range(1, max_procs + 1):
        for owner in owner_ops:
            for stealers in product(steal_ops, repeat=procs - 1):
                yield [owner, *stealers]
