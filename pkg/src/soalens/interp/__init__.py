"""Bytecode interpreter with a pure-Python engine and a compiled twin."""

from .compile import CompiledProgram, compile_unit, disassemble
from .runner import (
    RunResult,
    RunStats,
    Verdict,
    available_engines,
    comparison_masks,
    differential_check,
    prepare,
    resolve_engine,
    run,
    snapshot,
)
from .store import (
    Buffer,
    Mismatch,
    RuntimeStore,
    compare_stores,
    dump_text,
    make_input_store,
    seed_store,
)

__all__ = [
    "Buffer",
    "CompiledProgram",
    "Mismatch",
    "RunResult",
    "RunStats",
    "RuntimeStore",
    "Verdict",
    "available_engines",
    "compare_stores",
    "comparison_masks",
    "compile_unit",
    "differential_check",
    "disassemble",
    "dump_text",
    "make_input_store",
    "prepare",
    "resolve_engine",
    "run",
    "seed_store",
    "snapshot",
]
