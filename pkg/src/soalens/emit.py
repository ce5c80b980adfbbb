"""Source printers.

Two dialects share one walker. `minic` is the canonical form of the input
language: emit(parse(s)) normalizes whitespace, comments, paren placement and
literal spelling, and a second parse/emit round trip is the identity. `c99`
renders the same tree as compilable C: records become typedefs, array locals
become heap allocations, reference bindings become element pointers.

Provenance comments (annotate=True) mark statements the transform introduced.
They are emitted as block comments, carry no semantics, and disappear on
reparse.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass

from .errors import EmitError
from .nodes import (
    Assign,
    Attribute,
    Binary,
    Block,
    BoolLit,
    Call,
    Expr,
    ExprStmt,
    Field,
    FloatLit,
    For,
    Free,
    FunctionDef,
    Ident,
    If,
    Index,
    IntLit,
    Param,
    RecordDef,
    RefBind,
    Return,
    SourceUnit,
    Stmt,
    Unary,
    VarDecl,
)

# binding strength, larger binds tighter
_PREC = {
    "||": 1,
    "&&": 2,
    "<": 3, "<=": 3, ">": 3, ">=": 3, "==": 3, "!=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5,
}
_UNARY_PREC = 6
_ATOM_PREC = 7

_C_TYPES = {
    "float64": "double",
    "float32": "float",
    "int64": "int64_t",
    "int32": "int32_t",
    "bool": "bool",
}

_C_BUILTINS = {
    "sqrt": "sqrt",
    "pow": "pow",
    "abs": "minic_abs",
    "min": "minic_min",
    "max": "minic_max",
}

_C_PREAMBLE = """\
#include <math.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define minic_min(a, b) ((a) < (b) ? (a) : (b))
#define minic_max(a, b) ((a) > (b) ? (a) : (b))
#define minic_abs(a) ((a) < 0 ? -(a) : (a))
"""

#: comment text per (loop region kind, conversion direction)
_REGION_NOTES = {
    ("prologue", "aos_to_soa"): "out-of-place AoS-SoA conversion",
    ("epilogue", "aos_to_soa"): "SoA-AoS conversion due to outputs statement",
    ("prologue", "soa_to_aos"): "out-of-place SoA-AoS conversion",
    ("epilogue", "soa_to_aos"): "AoS-SoA conversion due to outputs statement",
}


@dataclass
class EmitConfig:
    dialect: str = "minic"  # minic | c99
    indent: int = 4
    annotate: bool = False  # opt-in so emit(parse(emit(u))) == emit(u)


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary):
        return _UNARY_PREC
    return _ATOM_PREC


class _Printer:
    def __init__(self, config: EmitConfig):
        if config.dialect not in ("minic", "c99"):
            raise EmitError(f"unknown dialect {config.dialect!r}")
        if config.indent < 0:
            raise EmitError("indent must be non-negative")
        self.cfg = config
        self.c = config.dialect == "c99"
        self.pad1 = " " * config.indent
        self.refs: set[str] = set()      # pointer-aliased names, c99 only
        self.last_temp_plan = -1

    # ---- expressions ----

    def expr(self, e: Expr) -> str:
        if isinstance(e, IntLit):
            if self.c and e.value > 2147483647:
                return f"{e.value}LL"
            return str(e.value)
        if isinstance(e, FloatLit):
            return repr(e.value) + ("f" if e.is_f32 else "")
        if isinstance(e, BoolLit):
            return "true" if e.value else "false"
        if isinstance(e, Ident):
            return e.name
        if isinstance(e, Index):
            return f"{self._sub(e.base, _ATOM_PREC)}[{self.expr(e.index)}]"
        if isinstance(e, Field):
            if self.c and isinstance(e.base, Ident) and e.base.name in self.refs:
                return f"{e.base.name}->{e.name}"
            return f"{self._sub(e.base, _ATOM_PREC)}.{e.name}"
        if isinstance(e, Call):
            name = _C_BUILTINS.get(e.name, e.name) if self.c else e.name
            return f"{name}({', '.join(self.expr(a) for a in e.args)})"
        if isinstance(e, Unary):
            return e.op + self._sub(e.operand, _UNARY_PREC)
        if isinstance(e, Binary):
            p = _PREC[e.op]
            # left associative: parenthesize an equal-strength right child
            return f"{self._sub(e.lhs, p)} {e.op} {self._sub(e.rhs, p + 1)}"
        raise EmitError(f"cannot print expression node {type(e).__name__}")

    def _sub(self, e: Expr, need: int) -> str:
        text = self.expr(e)
        return f"({text})" if _prec(e) < need else text

    # ---- statement helpers ----

    def _type(self, name: str) -> str:
        return _C_TYPES[name] if self.c else name

    def _note(self, text: str | None) -> str:
        return f"  /* {text} */" if text and self.cfg.annotate else ""

    def _attr(self, a: Attribute) -> str:
        head = f"{a.ns}::{a.name}" if a.ns else a.name
        if a.raw_args is not None:
            return f"[[{head}({' '.join(a.raw_args)})]]"
        if a.args or a.had_parens:
            return f"[[{head}({', '.join(self.expr(x) for x in a.args)})]]"
        return f"[[{head}]]"

    def _var_decl(self, d: VarDecl) -> str:
        t = self._type(d.type.name)
        if d.length is not None:
            if self.c:
                return (f"{t} *{d.name} = ({t} *)calloc((size_t)({self.expr(d.length)}), "
                        f"sizeof({t}))")
            return f"{d.type.name} {d.name}[{self.expr(d.length)}]"
        if d.init is not None:
            return f"{t} {d.name} = {self.expr(d.init)}"
        if self.c:
            return f"{t} {d.name} = 0"  # declarations zero-initialize
        return f"{t} {d.name}"

    def _inline_stmt(self, s: Stmt) -> str:
        if isinstance(s, VarDecl):
            return self._var_decl(s)
        if isinstance(s, Assign):
            return f"{self.expr(s.lvalue)} {s.op} {self.expr(s.value)}"
        if isinstance(s, ExprStmt):
            return self.expr(s.expr)
        raise EmitError(f"cannot print {type(s).__name__} inside a for header")

    # ---- statements ----

    def stmt(self, s: Stmt, out: list[str], depth: int) -> None:
        pad = self.pad1 * depth

        if isinstance(s, Block):
            out.append(pad + "{")
            for inner in s.stmts:
                self.stmt(inner, out, depth + 1)
            out.append(pad + "}")
            return

        if isinstance(s, VarDecl):
            note = None
            if s.is_conversion_temp and s.temp_plan != self.last_temp_plan:
                note = "temporary out-of-place array"
                self.last_temp_plan = s.temp_plan
            out.append(pad + self._var_decl(s) + ";" + self._note(note))
            return

        if isinstance(s, RefBind):
            if self.c:
                out.append(f"{pad}{s.record} *{s.name} = &{self.expr(s.target)};")
                self.refs.add(s.name)
            else:
                out.append(f"{pad}ref {s.record} {s.name} = {self.expr(s.target)};")
            return

        if isinstance(s, Assign):
            out.append(f"{pad}{self.expr(s.lvalue)} {s.op} {self.expr(s.value)};")
            return

        if isinstance(s, If):
            out.append(f"{pad}if ({self.expr(s.cond)}) {{")
            for inner in s.then.stmts:
                self.stmt(inner, out, depth + 1)
            node = s
            while node.orelse is not None:
                chain = node.orelse.stmts
                if len(chain) == 1 and isinstance(chain[0], If):
                    nested = chain[0]
                    out.append(f"{pad}}} else if ({self.expr(nested.cond)}) {{")
                    for inner in nested.then.stmts:
                        self.stmt(inner, out, depth + 1)
                    node = nested
                else:
                    out.append(pad + "} else {")
                    for inner in chain:
                        self.stmt(inner, out, depth + 1)
                    break
            out.append(pad + "}")
            return

        if isinstance(s, For):
            if not self.c:
                for a in s.attrs:
                    out.append(pad + self._attr(a))
            note = None
            if s.region is not None:
                note = _REGION_NOTES.get((s.region[0], s.region[2]))
            init = self._inline_stmt(s.init) if s.init is not None else ""
            cond = self.expr(s.cond) if s.cond is not None else ""
            step = self._inline_stmt(s.step) if s.step is not None else ""
            out.append(f"{pad}for ({init}; {cond}; {step}) {{" + self._note(note))
            for inner in s.body.stmts:
                self.stmt(inner, out, depth + 1)
            out.append(pad + "}")
            return

        if isinstance(s, Return):
            if s.value is None:
                out.append(pad + "return;")
            else:
                out.append(f"{pad}return {self.expr(s.value)};")
            return

        if isinstance(s, ExprStmt):
            out.append(pad + self.expr(s.expr) + ";")
            return

        if isinstance(s, Free):
            out.append(f"{pad}free({s.name});")
            return

        raise EmitError(f"cannot print statement node {type(s).__name__}")

    # ---- top level ----

    def record(self, r: RecordDef, out: list[str]) -> None:
        if self.c:
            out.append(f"typedef struct {r.name} {{")
        else:
            out.append(f"record {r.name} {{")
        for f in r.fields:
            suffix = f"[{f.type.count}]" if f.type.is_array else ""
            tname = _C_TYPES.get(f.type.name, f.type.name) if self.c else f.type.name
            out.append(f"{self.pad1}{tname} {f.name}{suffix};")
        out.append(f"}} {r.name};" if self.c else "};")

    def param(self, p: Param) -> str:
        star = "*" if p.is_array_base else ""
        return f"{self._type_or_record(p.type.name)} {star}{p.name}"

    def _type_or_record(self, name: str) -> str:
        if self.c:
            return _C_TYPES.get(name, name)
        return name

    def function(self, f: FunctionDef, out: list[str]) -> None:
        self.refs = set()
        self.last_temp_plan = -1
        ret = "void" if f.return_type == "void" else self._type(f.return_type)
        params = ", ".join(self.param(p) for p in f.params)
        if self.c and not params:
            params = "void"
        out.append(f"{ret} {f.name}({params}) {{")
        for s in f.body.stmts:
            self.stmt(s, out, 1)
        out.append("}")

    def unit(self, u: SourceUnit) -> str:
        out: list[str] = []
        if self.c:
            out.append(_C_PREAMBLE)
        records = _dependency_order(u) if self.c else u.records
        chunks = 0
        for r in records:
            if chunks:
                out.append("")
            self.record(r, out)
            chunks += 1
        for g in u.globals:
            if chunks:
                out.append("")
                chunks = 0  # globals group together
            out.append(self._var_decl(g) + ";")
            chunks += 1
        for f in u.functions:
            if chunks:
                out.append("")
            self.function(f, out)
            chunks += 1
        if not chunks:
            out.append("/* empty translation unit */" if self.c else "// empty translation unit")
        return "\n".join(out) + "\n"


def _dependency_order(u: SourceUnit) -> list[RecordDef]:
    """Records reordered so nested record types precede their users."""
    seen: set[str] = set()
    ordered: list[RecordDef] = []

    def visit(r: RecordDef) -> None:
        if r.name in seen:
            return
        seen.add(r.name)
        for f in r.fields:
            dep = u.record(f.type.name)
            if dep is not None:
                visit(dep)
        ordered.append(r)

    for r in u.records:
        visit(r)
    return ordered


def emit(unit: SourceUnit, config: EmitConfig | None = None) -> str:
    """Print a source unit; same tree and config always give identical text."""
    return _Printer(config or EmitConfig()).unit(unit)


def emit_expr(e: Expr) -> str:
    """Canonical minic spelling of one expression."""
    return _Printer(EmitConfig(annotate=False)).expr(e)


def diff_report(before_text: str, after_text: str) -> str:
    """Unified diff between two source texts."""
    lines = difflib.unified_diff(
        before_text.splitlines(keepends=True),
        after_text.splitlines(keepends=True),
        fromfile="before",
        tofile="after",
    )
    return "".join(lines)
