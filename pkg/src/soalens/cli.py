"""Command line driver: transform, strip, check, run, bench, inspect.

Exit codes are part of the contract: 0 success, 1 source diagnostics,
2 verification failure, 3 I/O or toolchain trouble, 64 usage errors.
Flag spellings are descriptive; the README maps them to the compiler
switches they mirror. Reports never embed wall-clock dates unless
--timestamps is given, so identical invocations stay byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime
from pathlib import Path

from . import __version__
from .bench import MODES, VERIFY_MODES, bench_all, verify_all
from .bench.corpus import widen_views
from .emit import EmitConfig, emit
from .errors import (EmitError, FileError, LexError, MiniRuntimeError,
                     ParseError, SemanticError, SoaLensError, ToolchainError)
from .interp import (differential_check, dump_text, make_input_store,
                     resolve_engine, run)
from .layout import element_footprint
from .parser import parse_file
from .semantics import analyze
from .transform import strip, transform_unit

EXIT_OK = 0
EXIT_DIAG = 1
EXIT_VERIFY = 2
EXIT_IO = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with the BSD-style usage exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---- small argument grammars ----


def _parse_seeds(text) -> list:
    """Seed sets: '7', '0,3,9', or the inclusive range '0..15'."""
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(p) for p in text.split(",") if p != ""]


def _parse_ints(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(p) for p in str(text).split(",") if p != ""]


def _parse_modes(text) -> tuple:
    if isinstance(text, (list, tuple)):
        modes = tuple(text)
    else:
        modes = tuple(p.strip() for p in str(text).split(",") if p.strip())
    for m in modes:
        if m not in MODES:
            raise UsageError(f"unknown mode {m!r}; pick from {', '.join(MODES)}")
    return modes


def _parse_override(text: str):
    if "=" not in text:
        raise UsageError(f"--set wants name=value, got {text!r}")
    name, raw = text.split("=", 1)
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        value = low == "true"
    else:
        try:
            value = int(raw)
        except ValueError:
            try:
                value = float(raw)
            except ValueError:
                raise UsageError(f"--set value {raw!r} is not a number or bool")
    return name.strip(), value


def _config_value(raw: str):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw.startswith("'") and raw.endswith("'") and len(raw) >= 2:
        return raw[1:-1]
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def load_config(path: str) -> dict:
    """Flat key = value lines; comments start with '#'."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileError(f"cannot read config file {path}: {exc.strerror}")
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FileError(f"{path}:{ln}: expected key = value")
        key, raw = line.split("=", 1)
        out[key.strip().replace("-", "_")] = _config_value(raw)
    return out


# ---- shared helpers ----


def _collect_sources(paths) -> list:
    files = []
    for p in paths:
        pt = Path(p)
        if pt.is_dir():
            found = sorted(pt.glob("*.minic"))
            if not found:
                raise FileError(f"no .minic files under {p}")
            files += found
        else:
            files.append(pt)
    return files


def _write_or_print(text: str, out_path, also_stdout: bool) -> None:
    if out_path:
        try:
            Path(out_path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise FileError(f"cannot write {out_path}: {exc.strerror}")
        if also_stdout:
            sys.stdout.write(text)
    else:
        sys.stdout.write(text)


def _pick_entry(unit, wanted, path):
    names = [f.name for f in unit.functions]
    if wanted:
        if wanted not in names:
            raise UsageError(f"{path}: no function named {wanted!r} "
                             f"(have: {', '.join(names)})")
        return wanted
    if len(names) == 1:
        return names[0]
    annotated = sorted({s.func.name for s in analyze(unit).specs})
    if len(annotated) == 1:
        return annotated[0]
    raise UsageError(f"{path}: pick an entry with --entry "
                     f"(have: {', '.join(names)})")


# ---- subcommand handlers ----


def _cmd_transform(args) -> int:
    unit = parse_file(args.input)
    if args.no_conversion:
        out_unit = strip(unit)
    else:
        out_unit = transform_unit(unit, safe_outputs=args.safe_outputs).unit
    cfg = EmitConfig(dialect=args.dialect, annotate=args.annotate)
    text = emit(out_unit, cfg)
    _write_or_print(text, args.output, args.dump_rewritten)
    return EXIT_OK


def _cmd_strip(args) -> int:
    unit = parse_file(args.input)
    text = emit(strip(unit), EmitConfig(dialect=args.dialect))
    _write_or_print(text, args.output, args.dump_rewritten)
    return EXIT_OK


def _check_pair(original, transformed, entries, seeds, sizes, engine,
                label, lines) -> tuple:
    total = failures = 0
    for entry in entries:
        bad = []
        for seed in seeds:
            for n in sizes:
                total += 1
                v = differential_check(original, transformed, entry,
                                       seed=seed, n=n, engine=engine)
                if not v.passed:
                    failures += 1
                    bad.append(f"    seed {seed} n {n}: {v}")
        verdict = "pass" if not bad else "FAIL"
        lines.append(f"{label(entry)}{len(seeds) * len(sizes):>4} checks  "
                     f"{verdict}")
        lines += bad
    return total, failures


def _cmd_check(args) -> int:
    seeds = _parse_seeds(args.seeds)
    sizes = _parse_ints(args.n)
    engine = resolve_engine(args.engine)
    views = ("views", "full", "both")
    if args.views not in views:
        raise UsageError(f"--views must be one of {', '.join(views)}")
    total = failures = 0
    lines = []

    if args.against:
        files = _collect_sources(args.inputs)
        if len(files) != 1:
            raise UsageError("--against compares exactly one input file")
        original = parse_file(str(files[0]))
        transformed = parse_file(args.against)
        entry = _pick_entry(original, args.entry, str(files[0]))
        label = lambda e: f"{files[0].name:<18}{e:<12}{'vs file':<12}"
        total, failures = _check_pair(original, transformed, [entry], seeds,
                                      sizes, engine, label, lines)
        print("\n".join(lines))
        if failures:
            print(f"{failures} of {total} checks FAILED")
            return EXIT_VERIFY
        print(f"all {total} checks passed")
        return EXIT_OK

    for path in _collect_sources(args.inputs):
        unit = parse_file(str(path))
        variants = []
        if args.views in ("views", "both"):
            variants.append(("soa-views", unit))
        if args.views in ("full", "both"):
            variants.append(("soa-full", widen_views(unit)))
        for mode, original in variants:
            entries = sorted({s.func.name for s in analyze(original).specs})
            if not entries:
                lines.append(f"{path.name}: no conversion loops, skipped")
                continue
            transformed = transform_unit(original).unit
            label = lambda e: f"{path.name:<18}{e:<12}{mode:<12}"
            t, f = _check_pair(original, transformed, entries, seeds, sizes,
                               engine, label, lines)
            total += t
            failures += f
    print("\n".join(lines))
    if failures:
        print(f"{failures} of {total} checks FAILED")
        return EXIT_VERIFY
    print(f"all {total} checks passed")
    return EXIT_OK


def _cmd_run(args) -> int:
    unit = parse_file(args.input)
    entry = _pick_entry(unit, args.entry, args.input)
    overrides = dict(_parse_override(s) for s in args.set or [])
    store = make_input_store(unit, entry, args.n, args.seed,
                             overrides or None)
    if args.transformed:
        unit = transform_unit(unit).unit
    result = run(unit, entry, store, mode=args.mode, engine=args.engine,
                 max_statements=args.max_statements)
    s = result.stats
    if result.value is not None:
        print(f"returned {result.value!r}")
    print(f"statements = {s.statements}")
    print(f"prologue copies = {s.prologue_copies}")
    print(f"epilogue copies = {s.epilogue_copies}")
    print(f"peak temp bytes = {s.peak_temp_bytes}")
    if args.times:
        print(f"wall seconds = {s.wall_seconds:.6f} ({s.engine} engine)")
        print(f"conversion seconds = {s.conversion_seconds:.6f}")
    if args.dump:
        sys.stdout.write(dump_text(result.store))
    return EXIT_OK


def _cmd_bench(args) -> int:
    sizes = _parse_ints(args.n)
    modes = _parse_modes(args.modes)
    if not args.skip_verify:
        table = verify_all(seeds=_parse_seeds(args.verify_seeds),
                           n_list=(0, 2, 33), modes=VERIFY_MODES,
                           engine=args.engine if args.engine != "both"
                           else "auto")
        if not table.ok:
            sys.stderr.write(table.render())
            sys.stderr.write("bench aborted: corpus failed verification\n")
            return EXIT_VERIFY
    ts = datetime.now().isoformat(timespec="seconds") if args.timestamps \
        else None
    report = bench_all(n_list=sizes, samples=args.samples, mode_list=modes,
                       engine=args.engine, seed=args.seed,
                       native_cc=args.native_cc, timestamp=ts)
    sys.stdout.write(report.render())
    if args.csv:
        engines = report.engines
        for eng in engines:
            out = Path(args.csv)
            if len(engines) > 1:
                out = out.with_name(f"{out.stem}-{eng}{out.suffix}")
            try:
                out.write_text(report.csv(engine=eng), encoding="utf-8")
            except OSError as exc:
                raise FileError(f"cannot write {out}: {exc.strerror}")
            print(f"csv written to {out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    table = verify_all(seeds=_parse_seeds(args.seeds),
                       n_list=tuple(_parse_ints(args.n)),
                       engine=args.engine)
    sys.stdout.write(table.render())
    return EXIT_OK if table.ok else EXIT_VERIFY


def _fmt_expr(e) -> str:
    from .emit import emit_expr
    return emit_expr(e)


def _cmd_inspect(args) -> int:
    for path in _collect_sources(args.inputs):
        unit = parse_file(str(path))
        specs = analyze(unit).specs
        if not specs:
            print(f"{path}: no conversion loops")
            continue
        for spec in specs:
            lay = spec.layout
            ins = {l.name for l in spec.input_leaves}
            outs = {l.name for l in spec.output_leaves}
            union = spec.union_leaves
            print(f"{path}: function {spec.func.name}, "
                  f"loop at line {spec.loop.loc.line}")
            print(f"  direction   {spec.direction}")
            if spec.direction == "aos_to_soa":
                print(f"  target      {spec.target} "
                      f"(record {lay.name}, {lay.size} bytes/element)")
            else:
                print(f"  record      {lay.name} ({lay.size} bytes/element), "
                      f"leaf arrays "
                      + ", ".join(sorted(set(spec.leaf_params.values()))))
            start = _fmt_expr(spec.start_expr) if spec.has_start else "0"
            print(f"  range       [{start}, {start} + "
                  f"{_fmt_expr(spec.size_expr)})")
            print(f"  inputs  A   {', '.join(spec.inputs)} "
                  f"({len(ins)} leaves)")
            print(f"  outputs A^  {', '.join(spec.outputs)} "
                  f"({len(outs)} leaves)")
            per = element_footprint(lay, [l.name for l in union])
            print(f"  temp bytes  {per} per element "
                  f"(vs {lay.size} for the whole record)")
            print(f"  {'leaf':<14}{'type':<10}{'offset':>6}{'size':>6}"
                  f"  in  out")
            for leaf in union:
                print(f"  {leaf.name:<14}{leaf.type:<10}{leaf.offset:>6}"
                      f"{leaf.size:>6}  {'x' if leaf.name in ins else '.':<3}"
                      f" {'x' if leaf.name in outs else '.'}")
            print()
    return EXIT_OK


# ---- parser wiring ----


def build_parser() -> tuple:
    parser = _Parser(prog="soalens",
                     description="annotation-driven AoS/SoA layout "
                                 "conversion with differential checking")
    parser.add_argument("--version", action="version",
                        version=f"soalens {__version__}")
    parser.add_argument("--config", metavar="FILE",
                        help="key = value defaults for any flag below")
    sub = parser.add_subparsers(dest="command", metavar="command",
                                parser_class=_Parser)
    subparsers = {}

    def common_output(sp):
        sp.add_argument("-o", "--output", metavar="FILE",
                        help="write result here instead of stdout")
        sp.add_argument("--dump-rewritten", action="store_true",
                        help="also print the result to stdout")
        sp.add_argument("--dialect", choices=("minic", "c99"),
                        default="minic")

    sp = sub.add_parser("transform",
                        help="rewrite conversion loops out of place")
    sp.add_argument("input", metavar="FILE.minic")
    common_output(sp)
    sp.add_argument("--no-conversion", action="store_true",
                    help="ignore conversion annotations; just strip them")
    sp.add_argument("--safe-outputs", action="store_true",
                    help="prologue-fill output-only temps as well")
    sp.add_argument("--annotate", action="store_true",
                    help="emit region comments in the rewritten source")
    sp.set_defaults(func=_cmd_transform)
    subparsers["transform"] = sp

    sp = sub.add_parser("strip",
                        help="remove conversion annotations")
    sp.add_argument("input", metavar="FILE.minic")
    common_output(sp)
    sp.set_defaults(func=_cmd_strip)
    subparsers["strip"] = sp

    sp = sub.add_parser("check",
                        help="differential-test transforms over seeds")
    sp.add_argument("inputs", nargs="+", metavar="FILE|DIR")
    sp.add_argument("--seeds", default="0..15",
                    help="'0..15' or '0,3,9' (default 0..15)")
    sp.add_argument("--n", default="0,1,2,64,256",
                    help="array sizes, comma separated")
    sp.add_argument("--views", default="views",
                    choices=("views", "full", "both"),
                    help="check declared views, widened views, or both")
    sp.add_argument("--against", metavar="FILE.minic",
                    help="compare one input against this already-rewritten "
                         "file instead of transforming in process")
    sp.add_argument("--entry", help="entry function for --against pairs")
    sp.add_argument("--engine", default="auto",
                    choices=("auto", "pure", "compiled"))
    sp.set_defaults(func=_cmd_check)
    subparsers["check"] = sp

    sp = sub.add_parser("run",
                        help="interpret one entry function")
    sp.add_argument("input", metavar="FILE.minic")
    sp.add_argument("--entry", help="function to run (default: the only one)")
    sp.add_argument("--n", type=int, default=64, help="seeded array length")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--set", action="append", metavar="NAME=VALUE",
                    help="override a scalar argument")
    sp.add_argument("--transformed", action="store_true",
                    help="run the rewritten program instead of the original")
    sp.add_argument("--mode", default="run", choices=("run", "check"),
                    help="check mode traps reads of never-written temps")
    sp.add_argument("--engine", default="auto",
                    choices=("auto", "pure", "compiled"))
    sp.add_argument("--max-statements", type=int, default=0,
                    help="abort after this many statements (0 = no limit)")
    sp.add_argument("--dump", action="store_true",
                    help="print the final store state")
    sp.add_argument("--times", action="store_true",
                    help="print wall and conversion seconds (not reproducible)")
    sp.set_defaults(func=_cmd_run)
    subparsers["run"] = sp

    sp = sub.add_parser("bench",
                        help="time the kernel corpus")
    sp.add_argument("--n", default="4096", help="particle counts, comma "
                                                "separated (default 4096)")
    sp.add_argument("--samples", type=int, default=16)
    sp.add_argument("--modes", default=",".join(MODES))
    sp.add_argument("--engine", default="auto",
                    choices=("auto", "pure", "compiled", "both"))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv", metavar="FILE", help="also write CSV rows here")
    sp.add_argument("--native-cc", metavar="CC",
                    help="also time real executables built with this C "
                         "compiler from the c99 emission")
    sp.add_argument("--skip-verify", action="store_true",
                    help="skip the quick equivalence sweep before timing")
    sp.add_argument("--verify-seeds", default="0,1",
                    help="seeds for the pre-bench sweep")
    sp.add_argument("--timestamps", action="store_true",
                    help="embed the current time in the report header")
    sp.set_defaults(func=_cmd_bench)
    subparsers["bench"] = sp

    sp = sub.add_parser("verify",
                        help="full corpus equivalence table")
    sp.add_argument("--seeds", default="0..15")
    sp.add_argument("--n", default="0,1,2,64,256")
    sp.add_argument("--engine", default="auto",
                    choices=("auto", "pure", "compiled"))
    sp.set_defaults(func=_cmd_verify)
    subparsers["verify"] = sp

    sp = sub.add_parser("inspect",
                        help="print per-loop conversion summaries")
    sp.add_argument("inputs", nargs="+", metavar="FILE|DIR")
    sp.set_defaults(func=_cmd_inspect)
    subparsers["inspect"] = sp

    return parser, subparsers


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _rest = pre.parse_known_args(argv)
    if known.config:
        try:
            defaults = load_config(known.config)
        except SoaLensError as exc:
            sys.stderr.write(f"soalens: {exc}\n")
            return EXIT_IO
        for sp in subparsers.values():
            sp.set_defaults(**defaults)

    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"soalens {args.command}: {exc}\n")
        return EXIT_USAGE
    except (LexError, ParseError, SemanticError, EmitError) as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_DIAG
    except MiniRuntimeError as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return EXIT_DIAG
    except ToolchainError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_IO
    except FileError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_IO
    except OSError as exc:
        sys.stderr.write(f"soalens: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
