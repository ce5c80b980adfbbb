"""Equivalence sweeps and wall-clock measurement over the kernel corpus.

verify_all runs the differential oracle for every kernel under two
conversion modes: soa-views (the per-kernel input/output sets as
annotated) and soa-full (every field converted both ways). bench_all
times kernel invocations per mode and particle count, reports
prologue+epilogue seconds separately from loop-body seconds, and renders
both a fixed-width text report and a CSV table. A native measurement
path compiles the c99 emission with a user-named C compiler; it is
opt-in because a toolchain may not exist on the host.
"""

from __future__ import annotations

import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from ..emit import EmitConfig, emit
from ..errors import ToolchainError
from ..interp import (compile_unit, differential_check, make_input_store,
                      resolve_engine, run)
from ..transform import transform_unit
from .corpus import KernelCase, build_corpus, widen_views

MODES = ("aos", "soa-full", "soa-views")
VERIFY_MODES = ("soa-full", "soa-views")
VERIFY_SIZES = (0, 1, 2, 64, 256)


def _unit_for_mode(case: KernelCase, mode: str):
    """Unit to execute for one measurement mode, plus its original."""
    unit = case.load()
    if mode == "aos":
        return unit, unit
    if mode == "soa-full":
        wide = widen_views(unit)
        return wide, transform_unit(wide).unit
    if mode == "soa-views":
        return unit, transform_unit(unit).unit
    raise ValueError(f"unknown mode {mode!r}")


# ---- verification ----


@dataclass
class VerifyRow:
    kernel: str
    mode: str
    seed: int
    n: int
    passed: bool
    detail: str = ""


@dataclass
class VerifyTable:
    rows: list = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]

    def render(self) -> str:
        lines = [f"{'kernel':<10}{'mode':<12}{'checks':>7}  result"]
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r.kernel, r.mode), []).append(r)
        for (kernel, mode), rows in groups.items():
            bad = [r for r in rows if not r.passed]
            verdict = "pass" if not bad else f"FAIL ({len(bad)})"
            lines.append(f"{kernel:<10}{mode:<12}{len(rows):>7}  {verdict}")
        for r in self.failures:
            lines.append(f"  {r.kernel}/{r.mode} seed {r.seed} n {r.n}: "
                         f"{r.detail}")
        tail = "all checks passed" if self.ok else \
            f"{len(self.failures)} of {len(self.rows)} checks FAILED"
        lines.append(f"{len(self.rows)} differential checks: {tail}")
        return "\n".join(lines) + "\n"


def verify_all(seeds=range(16), n_list=VERIFY_SIZES, modes=VERIFY_MODES,
               engine: str = "auto") -> VerifyTable:
    """Differential oracle for every kernel, conversion mode, seed, size."""
    table = VerifyTable()
    for case in build_corpus():
        for mode in modes:
            original, transformed = _unit_for_mode(case, mode)
            for seed in seeds:
                for n in n_list:
                    v = differential_check(original, transformed, case.name,
                                           seed=seed, n=n, engine=engine)
                    table.rows.append(VerifyRow(case.name, mode, seed, n,
                                                v.passed, str(v)))
    return table


# ---- measurement ----


@dataclass
class BenchCell:
    """Timings for one kernel at one size under one mode and engine."""

    kernel: str
    mode: str
    n: int
    samples: int
    seconds: list
    conversion: list    # prologue + epilogue seconds per sample
    body: list          # rewritten-loop seconds per sample
    complexity: str
    engine: str

    @property
    def avg(self) -> float:
        return sum(self.seconds) / len(self.seconds)

    @property
    def min(self) -> float:
        return min(self.seconds)

    @property
    def max(self) -> float:
        return max(self.seconds)

    @property
    def total(self) -> float:
        return sum(self.seconds)

    @property
    def throughput(self) -> float:
        """Updates per second; pair interactions per second if quadratic."""
        if self.total <= 0.0:
            return 0.0
        per_sample = self.n * (self.n - 1) \
            if self.complexity == "quadratic" else self.n
        return self.samples * per_sample / self.total


def _kernel_line(c: BenchCell) -> str:
    imax = c.seconds.index(c.max)
    imin = c.seconds.index(c.min)
    pct = (c.max - c.avg) / c.avg * 100.0 if c.avg > 0 else 0.0
    return (f"{c.kernel + ' kernel:':<16}{c.avg:g}  (avg={c.avg:g},"
            f"#measurements={c.samples},max={c.max:g}(value #{imax}),"
            f"min={c.min:g}(value #{imin}),+{pct:g}")


@dataclass
class BenchReport:
    cells: list
    n_list: tuple
    samples: int
    modes: tuple
    timestamp: str | None = None

    @property
    def engines(self) -> list:
        seen = []
        for c in self.cells:
            if c.engine not in seen:
                seen.append(c.engine)
        return seen

    def select(self, engine=None, mode=None, n=None, kernel=None) -> list:
        out = []
        for c in self.cells:
            if engine is not None and c.engine != engine:
                continue
            if mode is not None and c.mode != mode:
                continue
            if n is not None and c.n != n:
                continue
            if kernel is not None and c.kernel != kernel:
                continue
            out.append(c)
        return out

    def render(self) -> str:
        lines = []
        if self.timestamp:
            lines.append(f"generated {self.timestamp}")
            lines.append("")
        for engine in self.engines:
            for n in self.n_list:
                for mode in self.modes:
                    cells = self.select(engine=engine, mode=mode, n=n)
                    if not cells:
                        continue
                    title = (f"  {n} particles ({self.samples} samples), "
                             f"{mode}, {engine} engine")
                    rail = "=" * max(31, len(title) + 2)
                    lines += [rail, title, rail]
                    for c in cells:
                        lines.append(_kernel_line(c))
                    lines.append("conversion vs body seconds, averaged:")
                    for c in cells:
                        conv = sum(c.conversion) / len(c.conversion)
                        body = sum(c.body) / len(c.body)
                        lines.append(f"{c.kernel:<16}prologue+epilogue "
                                     f"{conv:g}   body {body:g}")
                    lines.append("")
        return "\n".join(lines) + "\n"

    def csv(self, engine: str | None = None) -> str:
        """Rows for one engine; defaults to the only/first engine present."""
        if engine is None:
            present = self.engines
            engine = present[0] if present else "pure"
        lines = ["kernel,mode,n,samples,avg,min,max,throughput"]
        for c in self.select(engine=engine):
            lines.append(f"{c.kernel},{c.mode},{c.n},{c.samples},"
                         f"{c.avg:.9g},{c.min:.9g},{c.max:.9g},"
                         f"{c.throughput:.9g}")
        return "\n".join(lines) + "\n"


def _measure_cell(case: KernelCase, mode: str, n: int, samples: int,
                  seed: int, engine: str) -> BenchCell:
    _original, unit = _unit_for_mode(case, mode)
    program = compile_unit(unit)
    secs, conv, body = [], [], []
    for _ in range(samples):
        store = make_input_store(unit, case.name, n, seed)
        r = run(program, case.name, store, engine=engine)
        secs.append(r.stats.wall_seconds)
        conv.append(r.stats.conversion_seconds)
        b = r.stats.region_seconds("body")
        body.append(b if mode != "aos" else r.stats.wall_seconds)
    return BenchCell(case.name, mode, n, samples, secs, conv, body,
                     case.complexity, engine)


def bench_all(n_list=(4096,), samples: int = 16, mode_list=MODES,
              engine: str = "auto", seed: int = 0,
              native_cc: str | None = None,
              timestamp: str | None = None) -> BenchReport:
    """Time every kernel per mode and size; optionally also native c99."""
    engines = ["pure", "compiled"] if engine == "both" \
        else [resolve_engine(engine)]
    for name in engines:
        resolve_engine(name)
    cells = []
    for eng in engines:
        for n in n_list:
            for mode in mode_list:
                for case in build_corpus():
                    cells.append(_measure_cell(case, mode, n, samples,
                                               seed, eng))
    if native_cc is not None:
        cells += bench_native(n_list, samples, mode_list, native_cc, seed)
    return BenchReport(cells, tuple(n_list), samples, tuple(mode_list),
                       timestamp)


# ---- native measurement ----


_LCG = """\
static uint64_t lcg_state;
static double rnd(void) {
    lcg_state = lcg_state * 6364136223846793005ULL + 1442695040888963407ULL;
    return ((double)(lcg_state >> 11) / 9007199254740992.0) * 2.0 - 1.0;
}
"""


def _driver_source(case: KernelCase, n: int, samples: int, seed: int) -> str:
    from .corpus import particle_layout

    lay = particle_layout()
    fill = []
    for leaf in lay.leaves:
        steps = [f + ("" if i is None else f"[{i}]") for f, i in leaf.path]
        access = f"particles[i].{'.'.join(steps)}"
        if leaf.type in ("float64", "float32"):
            fill.append(f"{access} = rnd();")
        elif leaf.type == "bool":
            fill.append(f"{access} = (lcg_state >> 17) & 1;")
        else:
            fill.append(f"{access} = (lcg_state >> 23) % 201 - 100;")
            fill.append("rnd();")
    fill_block = "\n        ".join(fill)
    dt_arg = ", 0.01" if case.scalar_args else ""
    return f"""
#include <stdio.h>
#include <time.h>

{_LCG}

int main(void) {{
    if (sizeof(Particle) != {lay.size}) return 9;
    int64_t n = {n};
    Particle *particles = (Particle *)calloc((size_t)n, sizeof(Particle));
    if (!particles) return 8;
    lcg_state = {seed}ULL * 2654435761ULL + 1ULL;
    for (int64_t i = 0; i < n; i++) {{
        {fill_block}
    }}
    struct timespec t0, t1;
    for (int k = 0; k < {samples}; k++) {{
        clock_gettime(CLOCK_MONOTONIC, &t0);
        {case.name}(particles, n{dt_arg});
        clock_gettime(CLOCK_MONOTONIC, &t1);
        printf("%.9e\\n", (double)(t1.tv_sec - t0.tv_sec)
               + 1e-9 * (double)(t1.tv_nsec - t0.tv_nsec));
    }}
    free(particles);
    return 0;
}}
"""


def bench_native(n_list, samples: int, mode_list, cc: str,
                 seed: int = 0) -> list:
    """Compile the c99 emission per kernel and mode; time real executions."""
    cc_path = shutil.which(cc)
    if cc_path is None:
        raise ToolchainError(
            f"native measurement requested but no C compiler named {cc!r} "
            "is on PATH")
    cells = []
    cfg = EmitConfig(dialect="c99")
    with tempfile.TemporaryDirectory(prefix="soalens-native-") as tmp:
        tdir = Path(tmp)
        for n in n_list:
            for mode in mode_list:
                for case in build_corpus():
                    _original, unit = _unit_for_mode(case, mode)
                    src = emit(unit, cfg) + _driver_source(case, n, samples,
                                                           seed)
                    stem = f"{case.name}-{mode}-{n}"
                    cfile = tdir / f"{stem}.c"
                    binary = tdir / stem
                    cfile.write_text(src)
                    build = subprocess.run(
                        [cc_path, "-O2", "-std=gnu99", str(cfile),
                         "-o", str(binary), "-lm"],
                        capture_output=True, text=True)
                    if build.returncode != 0:
                        raise ToolchainError(
                            f"{cc} failed on {stem}: "
                            f"{build.stderr.strip()[-400:]}")
                    proc = subprocess.run([str(binary)], capture_output=True,
                                          text=True)
                    if proc.returncode == 9:
                        raise ToolchainError(
                            "emitted record layout disagrees with the C "
                            "compiler; cannot trust native timings")
                    if proc.returncode != 0:
                        raise ToolchainError(
                            f"native run {stem} exited "
                            f"{proc.returncode}")
                    secs = [float(x) for x in proc.stdout.split()]
                    if len(secs) != samples:
                        raise ToolchainError(
                            f"native run {stem} produced {len(secs)} "
                            f"samples, expected {samples}")
                    zeros = [0.0] * samples
                    cells.append(BenchCell(case.name, mode, n, samples, secs,
                                           zeros, zeros, case.complexity,
                                           "native"))
    return cells
