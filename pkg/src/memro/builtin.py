"""The built-in corpus of litmus tests and refinement jobs."""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

from .arch import get_arch
from .explorer import Bounds, check_condition, explore
from .litmus import Report, TestCase, format_expr, load_test
from .refinement import DEQUE_VARIANTS, RefinementJob, check_refinement, deque_clients, deque_job, load_refine


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    kind: str  # "test" | "refine"
    item: TestCase | RefinementJob
    expect: str | None
    note: str
    path: str | None = None


def corpus_dir() -> str:
    return str(resources.files("memro") / "corpus")


def _note(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    return first.lstrip("#").strip() if first.startswith("#") else ""


def builtin_corpus(sweep: bool = False) -> list[CorpusEntry]:
    """Every shipped test with an expectation, then every refinement job.

    ``.wmm`` files without an ``expect`` line are only halves of jobs.
    With ``sweep`` the deque client sweep (1-3 processes, 1-2 operations)
    is appended for the fixed variants.
    """
    d = corpus_dir()
    out: list[CorpusEntry] = []
    for fn in sorted(os.listdir(d)):
        path = os.path.join(d, fn)
        if fn.endswith(".wmm"):
            tc = load_test(path)
            if tc.expect is not None:
                out.append(CorpusEntry(tc.name, "test", tc, tc.expect, _note(path), path))
    for fn in sorted(os.listdir(d)):
        if fn.endswith(".refine"):
            path = os.path.join(d, fn)
            job = load_refine(path)
            out.append(CorpusEntry(job.name, "refine", job, job.expect, _note(path), path))
    if sweep:
        out += deque_sweep()
    return out


def deque_sweep(variants=("fixed", "no-first-cfence"), max_procs: int = 3, max_ops: int = 2) -> list[CorpusEntry]:
    out = []
    for variant in variants:
        if variant not in DEQUE_VARIANTS:
            raise ValueError(f"unknown deque variant {variant!r}")
        expect = None if variant == "buggy" else "REFINES"
        for clients in deque_clients(max_procs, max_ops):
            job = deque_job(clients, variant)
            out.append(CorpusEntry(job.name, "refine", job, expect, "deque client sweep"))
    return out


def run_entry(
    entry: CorpusEntry,
    bounds: Bounds = Bounds(),
    arch: str | None = None,
    storage: str | None = None,
    timing: bool = False,
) -> Report:
    if entry.kind == "test":
        report = run_test(entry.item, bounds, arch, storage, timing)
    else:
        report = run_job(entry.item, bounds, arch, storage, timing)
    report.expect = entry.expect
    return report


def run_test(tc: TestCase, bounds: Bounds = Bounds(), arch=None, storage=None, timing=False) -> Report:
    model = get_arch(arch or tc.arch)
    ex = explore(model, tc.system(), storage or tc.storage, bounds)
    v = check_condition(ex, tc.quantifier, tc.cond)
    return Report(tc.name, model.name, ex.storage, v, f"{tc.quantifier} {format_expr(tc.cond)}", tc.expect, timing)


def run_job(job: RefinementJob, bounds: Bounds = Bounds(), arch=None, storage=None, timing=False) -> Report:
    v = check_refinement(job, bounds, arch, storage)
    model = get_arch(arch or job.concrete.arch)
    st = storage or job.concrete.storage or model.default_storage
    return Report(job.name, model.name, st, v, "", job.expect, timing)
