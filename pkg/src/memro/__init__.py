"""memro: an explicit-state checker for programs under weak memory models."""

from .arch import ARM, POWER, SC, TSO, ArchModel, forward, get_arch, reorderable
from .builtin import CorpusEntry, builtin_corpus, run_entry
from .explorer import (
    Bounds,
    Exploration,
    Outcome,
    StateBudgetExceeded,
    Verdict,
    check_condition,
    explore,
    witness_trace,
)
from .litmus import ParseError, TestCase, load_test, parse_test, render_report, render_source
from .refinement import RefinementJob, check_refinement, deque_job, load_refine, parse_refine

__all__ = [
    "ARM", "POWER", "SC", "TSO", "ArchModel", "forward", "get_arch", "reorderable",
    "CorpusEntry", "builtin_corpus", "run_entry",
    "Bounds", "Exploration", "Outcome", "StateBudgetExceeded", "Verdict",
    "check_condition", "explore", "witness_trace",
    "ParseError", "TestCase", "load_test", "parse_test", "render_report", "render_source",
    "RefinementJob", "check_refinement", "deque_job", "load_refine", "parse_refine",
]
