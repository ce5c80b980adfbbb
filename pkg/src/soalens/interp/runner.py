"""Execution front door: engine selection, stats, differential checking.

The differential oracle runs an original unit and its transformed twin on
identical seeded stores and compares the results bit for bit, masking out
exactly the bytes the conversion is allowed to change: leaves that were
converted in but not copied back (discarded temporaries) on elements
inside the converted range. Everything else must match: output leaves,
every byte of out-of-range elements including padding, untouched arrays,
and globals.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from ..errors import MiniRuntimeError, ToolchainError
from ..nodes import Binary, Ident, IntLit, SCALAR_SIZES, SourceUnit, Unary
from ..semantics import ConversionSpec, analyze
from .compile import CompiledProgram, compile_unit
from .store import (RuntimeStore, _bits, compare_stores, dump_text,
                    make_input_store)
from . import vm as _pure

try:
    from . import _vmcore as _native
except ImportError:  # extension not built; pure engine still works
    _native = None


def available_engines() -> list:
    names = ["pure"]
    if _native is not None:
        names.append("compiled")
    return names


def resolve_engine(name: str = "auto") -> str:
    if name == "auto":
        return "compiled" if _native is not None else "pure"
    if name == "pure":
        return "pure"
    if name == "compiled":
        if _native is None:
            raise ToolchainError(
                "compiled engine requested but the native extension is not "
                "built; reinstall the package or use --engine pure")
        return "compiled"
    raise ValueError(f"unknown engine {name!r}")


@dataclass
class RunStats:
    statements: int = 0
    prologue_copies: int = 0
    epilogue_copies: int = 0
    peak_temp_bytes: int = 0
    plan_peaks: dict = dc_field(default_factory=dict)
    regions: list = dc_field(default_factory=list)
    wall_seconds: float = 0.0
    engine: str = "pure"

    def region_seconds(self, kind: str | None = None) -> float:
        return sum(sec for (_fn, k, _plan, _dir, sec) in self.regions
                   if kind is None or k == kind)

    @property
    def conversion_seconds(self) -> float:
        return (self.region_seconds("prologue")
                + self.region_seconds("epilogue"))


@dataclass
class RunResult:
    value: object
    stats: RunStats
    store: RuntimeStore


def prepare(unit: SourceUnit) -> CompiledProgram:
    return compile_unit(unit)


def run(unit, entry: str, store: RuntimeStore, mode: str = "run",
        engine: str = "auto", max_statements: int = 0) -> RunResult:
    """Execute entry against store; the store is mutated in place."""
    program = unit if isinstance(unit, CompiledProgram) else compile_unit(unit)
    name = resolve_engine(engine)
    eng = _pure if name == "pure" else _native
    t0 = time.perf_counter()
    value, raw = eng.execute(program, entry, store, mode, max_statements)
    wall = time.perf_counter() - t0
    regions = []
    for (fname, rid), sec in sorted(raw["region_seconds"].items()):
        fn = program.functions[program.fn_index[fname]]
        kind, plan, direction = fn.regions[rid]
        regions.append((fname, kind, plan, direction, sec))
    stats = RunStats(raw["statements"], raw["prologue_copies"],
                     raw["epilogue_copies"], raw["peak_temp_bytes"],
                     dict(raw["plan_peaks"]), regions, wall, name)
    return RunResult(value, stats, store)


def snapshot(result: RunResult) -> str:
    """Stable text form of a finished run, for golden files."""
    s = result.stats
    lines = [dump_text(result.store).rstrip("\n")]
    if result.value is not None:
        lines.append(f"returned {result.value!r}")
    lines.append(f"statements = {s.statements}")
    lines.append(f"prologue copies = {s.prologue_copies}")
    lines.append(f"epilogue copies = {s.epilogue_copies}")
    lines.append(f"peak temp bytes = {s.peak_temp_bytes}")
    return "\n".join(lines) + "\n"


# ---- comparison masks ----


def _static_value(e, scalars: dict):
    """Evaluate a size/start expression from entry parameters, or None."""
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Ident):
        v = scalars.get(e.name)
        return int(v) if v is not None else None
    if isinstance(e, Unary) and e.op == "-":
        v = _static_value(e.operand, scalars)
        return -v if v is not None else None
    if isinstance(e, Binary) and e.op in ("+", "-", "*"):
        a = _static_value(e.lhs, scalars)
        b = _static_value(e.rhs, scalars)
        if a is None or b is None:
            return None
        return a + b if e.op == "+" else a - b if e.op == "-" else a * b
    return None


def _spec_range(spec: ConversionSpec, store: RuntimeStore):
    size = _static_value(spec.size_expr, store.scalars)
    start = 0
    if spec.has_start:
        start = _static_value(spec.start_expr, store.scalars)
    if size is None or start is None:
        raise ValueError(
            "conversion size/start must be entry parameters or literals to "
            "derive a comparison mask")
    return start, size


def _mask_forward(spec: ConversionSpec, store: RuntimeStore, masks: dict):
    buf = store.buffer(spec.target)
    start, size = _spec_range(spec, store)
    lay = spec.layout
    tmpl = np.zeros(lay.size, dtype=bool)
    out = {l.name for l in spec.output_leaves}
    for leaf in lay.leaves:
        if leaf.name in out:
            tmpl[leaf.offset:leaf.offset + leaf.size] = True
    mask = masks.setdefault(spec.target,
                            np.ones(buf.nbytes, dtype=bool))
    lo = max(start, 0)
    hi = min(start + size, buf.length)
    for i in range(lo, max(hi, lo)):
        seg = mask[i * lay.size:(i + 1) * lay.size]
        seg &= tmpl


def _mask_mirror(spec: ConversionSpec, store: RuntimeStore, masks: dict):
    start, size = _spec_range(spec, store)
    out = {l.name for l in spec.output_leaves}
    for leaf in spec.union_leaves:
        pname = spec.leaf_params[leaf.name]
        buf = store.buffer(pname)
        mask = masks.setdefault(pname, np.ones(buf.nbytes, dtype=bool))
        if leaf.name in out:
            continue
        w = SCALAR_SIZES[leaf.type]
        lo = max(start, 0)
        hi = min(start + size, buf.length)
        if hi > lo:
            mask[lo * w:hi * w] = False


def comparison_masks(original: SourceUnit, store: RuntimeStore) -> dict:
    """Byte masks (True = must match) per buffer name."""
    analysis = analyze(original)
    masks: dict = {}
    for spec in analysis.specs:
        if spec.direction == "aos_to_soa":
            _mask_forward(spec, store, masks)
        else:
            _mask_mirror(spec, store, masks)
    return masks


@dataclass
class Verdict:
    passed: bool
    mismatches: list = dc_field(default_factory=list)
    error: str | None = None
    error_side: str | None = None
    seed: int = 0
    n: int = 0
    stats_original: RunStats | None = None
    stats_transformed: RunStats | None = None

    def __str__(self) -> str:
        if self.passed:
            return f"ok (seed {self.seed}, n {self.n})"
        if self.error is not None:
            return (f"{self.error_side} run failed (seed {self.seed}, "
                    f"n {self.n}): {self.error}")
        head = "; ".join(str(m) for m in self.mismatches[:4])
        return (f"{len(self.mismatches)} mismatches (seed {self.seed}, "
                f"n {self.n}): {head}")


def differential_check(original: SourceUnit, transformed: SourceUnit,
                       entry: str, seed: int, n: int = 64,
                       engine: str = "auto", overrides: dict | None = None,
                       mode: str = "run", limit: int = 32) -> Verdict:
    """Run both units on identical stores and compare the allowed state."""
    store_a = make_input_store(original, entry, n, seed, overrides)
    store_b = make_input_store(original, entry, n, seed, overrides)
    masks = comparison_masks(original, store_a)
    prog_a = compile_unit(original)
    prog_b = compile_unit(transformed)

    err_a = err_b = None
    res_a = res_b = None
    try:
        res_a = run(prog_a, entry, store_a, mode, engine)
    except MiniRuntimeError as exc:
        err_a = f"{type(exc).__name__}: {exc}"
    try:
        res_b = run(prog_b, entry, store_b, mode, engine)
    except MiniRuntimeError as exc:
        err_b = f"{type(exc).__name__}: {exc}"

    v = Verdict(False, seed=seed, n=n,
                stats_original=res_a.stats if res_a else None,
                stats_transformed=res_b.stats if res_b else None)
    if err_a is not None and err_b is not None:
        # both sides trapped: equivalent observable behavior
        v.passed = True
        v.error = err_a
        return v
    if err_a is not None or err_b is not None:
        v.error = err_a or err_b
        v.error_side = "original" if err_a is not None else "transformed"
        return v

    ra, rb = res_a.value, res_b.value
    if (ra is None) != (rb is None) or (
            ra is not None and _bits(ra) != _bits(rb)):
        v.mismatches.append(f"return value {ra!r} != {rb!r}")
        return v
    v.mismatches = compare_stores(store_a, store_b, masks, limit)
    v.passed = not v.mismatches
    return v
