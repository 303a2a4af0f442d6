"""Hypothesis strategies for small actions, commands and litmus programs."""

from hypothesis import strategies as st

from memro.syntax import (
    CFENCE,
    FENCE,
    FENCE_L,
    FENCE_S,
    SKIP,
    Bin,
    Choice,
    Glob,
    Guard,
    Lit,
    Prefix,
    Reg,
    StrictPrefix,
    Update,
)

GLOBALS = ("x", "y")
REGS = ("r1", "r2")

vals = st.sampled_from([Lit(0), Lit(1)])
globs = st.sampled_from([Glob(g) for g in GLOBALS])
regs = st.sampled_from([Reg(r) for r in REGS])
atoms = st.one_of(vals, globs, regs)
reg_exprs = st.one_of(vals, regs, st.builds(Bin, st.just("+"), regs, vals))

stores = st.builds(Update, globs, st.one_of(vals, regs, st.builds(Bin, st.just("+"), regs, vals)))
loads = st.builds(Update, regs, st.one_of(globs, st.builds(Bin, st.just("+"), globs, regs)))
locals_ = st.builds(Update, regs, reg_exprs)
guards = st.builds(Guard, st.builds(Bin, st.sampled_from(["=", "!="]), atoms, vals))


def actions(gates: bool = False, plain: bool = False):
    """Single actions over two globals and two registers."""
    opts = [stores, loads, locals_, guards]
    if not plain:
        opts.append(st.sampled_from([FENCE, CFENCE]))
        if gates:
            opts.append(st.sampled_from([FENCE_L, FENCE_S]))
    return st.one_of(*opts)


@st.composite
def commands(draw, max_actions: int = 3, gates: bool = False):
    """Prefix chains with the odd strict prefix and at most one choice."""
    n = draw(st.integers(0, max_actions))
    acts = [draw(actions(gates)) for _ in range(n)]
    strict = [draw(st.booleans()) and draw(st.booleans()) for _ in range(n)]
    c = SKIP
    split = draw(st.integers(0, n)) if n and draw(st.booleans()) else None
    for i in reversed(range(n)):
        if i == split:
            c = Choice(c, SKIP)
        c = (StrictPrefix if strict[i] else Prefix)(acts[i], c)
    return c


@st.composite
def straight_programs(draw, max_actions: int = 5, gates: bool = False):
    n = draw(st.integers(1, max_actions))
    acts = [draw(actions(gates)) for _ in range(n)]
    c = SKIP
    for a in reversed(acts):
        c = Prefix(a, c)
    return c


@st.composite
def litmus_sources(draw, threads: int = 2, max_stmts: int = 3):
    """Source text of a small random test with straight-line threads and branches."""
    lines = ["test random", "arch sc", "init { x = 0; y = 0; }"]
    for pid in range(1, threads + 1):
        body = []
        for _ in range(draw(st.integers(1, max_stmts))):
            kind = draw(st.sampled_from(["store", "load", "fence", "if", "cas"]))
            g = draw(st.sampled_from(GLOBALS))
            r = draw(st.sampled_from(REGS))
            v = draw(st.integers(0, 2))
            if kind == "store":
                body.append(f"{g} := {draw(st.sampled_from([str(v), r + ' + 1']))};")
            elif kind == "load":
                body.append(f"{r} := {g};")
            elif kind == "fence":
                body.append(draw(st.sampled_from(["fence;", "cfence;"])))
            elif kind == "if":
                body.append(f"if {r} = {v} {{ {g} := {v + 1}; }} else {{ {r} := {g}; }}")
            else:
                body.append(f"if CAS({g}, {v}, {r}) {{ {r} := 7; }}")
        lines.append(f"thread {pid} {{ reg r1, r2; {' '.join(body)} }}")
    lines.append("exists x = 1")
    return "\n".join(lines)
