"""Command-line entry point: ``memro run|enumerate|refine|corpus``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .builtin import builtin_corpus, run_entry, run_job, run_test
from .explorer import DEFAULT_LOOP_BOUND, DEFAULT_MAX_STATES, Bounds, ConditionError, StateBudgetExceeded, explore
from .arch import ARCH_NAMES, get_arch
from .litmus import ParseError, Report, load_test, outcome_json, render_report, report_dict
from .refinement import load_refine
from .semantics import IllFormedProcess
from .storage import StorageError
from .syntax import EvalError

EXIT_OK, EXIT_MISMATCH, EXIT_ERROR = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    command: str
    arch: str | None = None
    storage: str | None = None
    loop_bound: int = DEFAULT_LOOP_BOUND
    max_states: int = DEFAULT_MAX_STATES
    json: bool = False
    witness: bool = True
    jobs: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.loop_bound < 0:
            raise ValueError("--loop-bound must be non-negative")
        if self.max_states <= 0 or self.jobs <= 0:
            raise ValueError("--max-states and --jobs must be positive")

    @property
    def bounds(self) -> Bounds:
        return Bounds(self.loop_bound, self.max_states)


def _default_max_states() -> int:
    env = os.environ.get("MEMRO_MAX_STATES")
    if env is None:
        return DEFAULT_MAX_STATES
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"memro: MEMRO_MAX_STATES must be an integer, got {env!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--arch", choices=ARCH_NAMES, help="override the architecture named in the file")
    common.add_argument("--storage", choices=("map", "writelist"), help="override the storage subsystem")
    common.add_argument("--loop-bound", type=int, default=DEFAULT_LOOP_BOUND, help="unfoldings per loop (default %(default)s)")
    common.add_argument(
        "--max-states", type=int, default=None, help=f"state budget (default {DEFAULT_MAX_STATES} or $MEMRO_MAX_STATES)"
    )
    common.add_argument("--json", action="store_true", help="print JSON reports")
    common.add_argument("--witness", dest="witness", action="store_true", default=True, help="show witness traces (default)")
    common.add_argument("--no-witness", dest="witness", action="store_false")
    common.add_argument("--timing", action="store_true", help="include wall-clock times (makes output non-reproducible)")

    p = argparse.ArgumentParser(prog="memro", description="Explore programs under weak memory models.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="check the condition of one .wmm test")
    run.add_argument("file")
    en = sub.add_parser("enumerate", parents=[common], help="print every reachable outcome of a .wmm test")
    en.add_argument("file")
    ref = sub.add_parser("refine", parents=[common], help="run a .refine job")
    ref.add_argument("file")
    cor = sub.add_parser("corpus", parents=[common], help="run the built-in corpus against its expectations")
    cor.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    cor.add_argument("--filter", default=None, help="only entries whose name contains this text")
    cor.add_argument("--sweep", action="store_true", help="add the deque client sweep (1-3 processes x 1-2 operations)")
    cor.add_argument("--list", action="store_true", help="list entries without running them")
    return p


def _config(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        arch=ns.arch,
        storage=ns.storage,
        loop_bound=ns.loop_bound,
        max_states=ns.max_states if ns.max_states is not None else _default_max_states(),
        json=ns.json,
        witness=ns.witness,
        jobs=getattr(ns, "jobs", 1),
        timing=ns.timing,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = _config(ns)
        if cfg.command == "run":
            return cmd_run(ns.file, cfg)
        if cfg.command == "enumerate":
            return cmd_enumerate(ns.file, cfg)
        if cfg.command == "refine":
            return cmd_refine(ns.file, cfg)
        return cmd_corpus(cfg, ns.filter, ns.sweep, ns.list)
    except (ParseError, ConditionError, EvalError, IllFormedProcess, StorageError, StateBudgetExceeded, ValueError, OSError) as e:
        print(f"memro: error: {e}", file=sys.stderr)
        return EXIT_ERROR


def _emit(report: Report, cfg: RunConfig) -> None:
    sys.stdout.write(render_report(report, "json" if cfg.json else "text", witness=cfg.witness))
    if cfg.json:
        sys.stdout.write("\n")


def cmd_run(path: str, cfg: RunConfig) -> int:
    report = run_test(load_test(path), cfg.bounds, cfg.arch, cfg.storage, cfg.timing)
    _emit(report, cfg)
    return EXIT_MISMATCH if report.passed is False else EXIT_OK


def cmd_enumerate(path: str, cfg: RunConfig) -> int:
    tc = load_test(path)
    model = get_arch(cfg.arch or tc.arch)
    ex = explore(model, tc.system(), cfg.storage or tc.storage, cfg.bounds)
    outs = ex.sorted_outcomes()
    if cfg.json:
        d = {
            "test": tc.name,
            "arch": model.name,
            "storage": ex.storage,
            "outcomes": [outcome_json(o) for o in outs],
            "stats": {"states": ex.states, "outcomes": len(outs), "seconds": round(ex.seconds, 3) if cfg.timing else None},
            "truncated": ex.truncated,
        }
        print(json.dumps(d, indent=2))
    else:
        print(f"Test {tc.name or '(unnamed)'}  arch={model.name} storage={ex.storage}")
        for o in outs:
            print(f"  {o}")
        print(f"{len(outs)} outcome(s), {ex.states} states, truncated: {'yes' if ex.truncated else 'no'}")
    return EXIT_OK


def cmd_refine(path: str, cfg: RunConfig) -> int:
    report = run_job(load_refine(path), cfg.bounds, cfg.arch, cfg.storage, cfg.timing)
    _emit(report, cfg)
    if report.verdict.kind == "VIOLATES" or report.passed is False:
        return EXIT_MISMATCH
    return EXIT_OK


def _run_one(args) -> Report:
    entry, cfg = args
    return run_entry(entry, cfg.bounds, cfg.arch, cfg.storage, cfg.timing)


def cmd_corpus(cfg: RunConfig, name_filter: str | None, sweep: bool, list_only: bool) -> int:
    entries = [e for e in builtin_corpus(sweep) if not name_filter or name_filter in e.name]
    if list_only:
        for e in entries:
            print(f"{e.name:36} {e.kind:7} {e.expect or '-':10} {e.note}")
        return EXIT_OK
    work = [(e, cfg) for e in entries]
    if cfg.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            reports = list(pool.map(_run_one, work))
    else:
        reports = [_run_one(w) for w in work]
    failed = [r for r in reports if r.passed is False]
    if cfg.json:
        print(json.dumps({"results": [report_dict(r) for r in reports], "failed": len(failed)}, indent=2))
    else:
        print(f"{'name':36} {'verdict':22} {'expected':10} result  states")
        for e, r in zip(entries, reports):
            res = "-" if r.passed is None else ("PASS" if r.passed else "FAIL")
            trunc = "  (bounded)" if r.verdict.truncated else ""
            print(f"{r.test:36} {r.verdict.kind:22} {e.expect or '-':10} {res:7} {r.verdict.states}{trunc}")
        print(f"{len(reports) - len(failed)}/{len(reports)} match their expectations")
    return EXIT_MISMATCH if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
