"""Name/type analysis and annotation binding.

analyze() walks a parsed unit and produces an Analysis: record layouts, one
ConversionSpec per legally annotated loop, a type for every expression, and
the diagnostic list. Nothing here mutates the tree; the transform consumes
the specs afterwards.

The legality rules for annotated loops beyond plain typing:
  - the target must be an array-base parameter of record type (forward
    direction) or a record name whose view leaves all have matching flat
    array parameters (mirror direction);
  - a size annotation is mandatory;
  - call arguments must not pass a whole element (or sub-record) of the
    target, though passing individual scalar leaves is fine;
  - reference bindings of the target bind once per name and only to a plain
    element expression;
  - indices into embedded arrays of converted fields must be literals, since
    every leaf gets its own flat temporary;
  - return inside the loop and nested annotated loops are rejected, as both
    would bypass or double up the generated epilogue.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .errors import Diagnostic, Loc
from .layout import Leaf, RecordLayout, build_layouts
from .nodes import (
    Assign,
    Attribute,
    Binary,
    Block,
    BoolLit,
    BUILTINS,
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
    Return,
    RefBind,
    SCALAR_TYPES,
    SourceUnit,
    Stmt,
    TypeRef,
    Unary,
    VarDecl,
    promote,
    walk_exprs,
)

INT64_MAX = 2**63 - 1

FLOATS = ("float64", "float32")
INTS = ("int64", "int32")


@dataclass(frozen=True)
class Ty:
    """Type of an expression or binding.

    kind: scalar | arr (flat scalar array) | recarr (record array base) |
    elem (record element or record value) | embarr (fixed array field) |
    embrecarr (fixed array of records field) | void
    """

    kind: str
    name: str = ""
    count: int = 0

    @property
    def is_scalar(self) -> bool:
        return self.kind == "scalar"

    @property
    def is_numeric(self) -> bool:
        return self.kind == "scalar" and self.name != "bool"

    @property
    def is_int(self) -> bool:
        return self.kind == "scalar" and self.name in INTS

    @property
    def is_float(self) -> bool:
        return self.kind == "scalar" and self.name in FLOATS

    @property
    def is_bool(self) -> bool:
        return self.kind == "scalar" and self.name == "bool"

    def __str__(self) -> str:
        if self.kind == "scalar":
            return self.name
        if self.kind == "arr":
            return f"{self.name}*"
        if self.kind == "recarr":
            return f"{self.name}*"
        if self.kind == "elem":
            return self.name
        if self.kind in ("embarr", "embrecarr"):
            return f"{self.name}[{self.count}]"
        return self.kind


VOID = Ty("void")
F64 = Ty("scalar", "float64")
F32 = Ty("scalar", "float32")
I64 = Ty("scalar", "int64")
I32 = Ty("scalar", "int32")
BOOL = Ty("scalar", "bool")

_SCALAR_TY = {"float64": F64, "float32": F32, "int64": I64, "int32": I32, "bool": BOOL}


@dataclass
class ConversionSpec:
    """Everything the transform needs for one annotated loop."""

    direction: str                    # aos_to_soa | soa_to_aos
    func: FunctionDef
    loop: For
    layout: RecordLayout
    size_expr: Expr
    start_expr: Expr                  # IntLit(0) when the annotation is absent
    has_start: bool
    inputs: tuple[str, ...]           # A, in record declaration order
    outputs: tuple[str, ...]          # Â, in record declaration order
    target: str | None = None         # array parameter name (forward)
    leaf_params: dict[str, str] | None = None  # leaf name -> parameter (mirror)
    aliases: dict[str, Expr] = dc_field(default_factory=dict)

    @property
    def union_fields(self) -> tuple[str, ...]:
        want = set(self.inputs) | set(self.outputs)
        return tuple(s for s in self.layout.slots if s in want)

    def leaves_of(self, fields) -> tuple[Leaf, ...]:
        want = set(fields)
        return tuple(l for l in self.layout.leaves if l.path[0][0] in want)

    @property
    def union_leaves(self) -> tuple[Leaf, ...]:
        return self.leaves_of(self.union_fields)

    @property
    def input_leaves(self) -> tuple[Leaf, ...]:
        return self.leaves_of(self.inputs)

    @property
    def output_leaves(self) -> tuple[Leaf, ...]:
        return self.leaves_of(self.outputs)


@dataclass
class Analysis:
    unit: SourceUnit
    layouts: dict[str, RecordLayout]
    specs: list[ConversionSpec]
    diagnostics: list[Diagnostic]
    expr_types: dict[int, Ty]
    loop_specs: dict[int, ConversionSpec]  # id(For) -> spec

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def type_of(self, e: Expr) -> Ty:
        return self.expr_types[id(e)]


@dataclass(frozen=True)
class AccessPath:
    """One source access into a conversion target, classified.

    element: the element index expression (forward direction) or the flat
    array index (mirror direction). steps: (field, literal index or None)
    pairs from the element root. leaf: resolved leaf when the access names a
    full scalar leaf with literal embedded indices; None for a sub-record,
    whole embedded array, or a dynamic embedded index (dynamic=True).
    """

    element: Expr
    steps: tuple
    field: str | None
    leaf: Leaf | None
    via_alias: str | None = None
    dynamic: bool = False


class _Scope:
    def __init__(self, parent: "_Scope | None" = None):
        self.parent = parent
        self.names: dict[str, Ty] = {}
        self.ref_targets: dict[str, Expr] = {}
        self.freeable: set[str] = set()

    def lookup(self, name: str) -> Ty | None:
        s: _Scope | None = self
        while s is not None:
            if name in s.names:
                return s.names[name]
            s = s.parent
        return None

    def lookup_ref(self, name: str) -> Expr | None:
        s: _Scope | None = self
        while s is not None:
            if name in s.ref_targets:
                return s.ref_targets[name]
            if name in s.names:
                return None  # shadowed by a non-ref binding
            s = s.parent
        return None

    def is_freeable(self, name: str) -> bool:
        s: _Scope | None = self
        while s is not None:
            if name in s.names:
                return name in s.freeable
            s = s.parent
        return False


class _LoopCtx:
    """Context of the innermost annotated loop while walking its body."""

    def __init__(self, spec: ConversionSpec):
        self.spec = spec
        self.bound_refs: set[str] = set()


class _Checker:
    def __init__(self, unit: SourceUnit):
        self.unit = unit
        self.diags: list[Diagnostic] = []
        self.expr_types: dict[int, Ty] = {}
        self.specs: list[ConversionSpec] = []
        self.loop_specs: dict[int, ConversionSpec] = {}
        self.layouts: dict[str, RecordLayout] = {}
        self.functions: dict[str, FunctionDef] = {}
        self.globals: dict[str, Ty] = {}
        self.fn: FunctionDef | None = None
        self.loop_ctx: _LoopCtx | None = None

    # ---- diagnostics ----

    def err(self, code: str, message: str, loc: Loc | None) -> None:
        self.diags.append(Diagnostic(message, loc or Loc(), code, self.unit.path))

    # ---- entry ----

    def run(self) -> Analysis:
        try:
            self.layouts = build_layouts(self.unit)
        except Exception as exc:  # SemanticError subclasses
            code = getattr(exc, "code", "semantic")
            self.err(code, str(getattr(exc, "message", exc)), getattr(exc, "loc", None))
            self.layouts = {}

        seen_rec: set[str] = set()
        for r in self.unit.records:
            if r.name in seen_rec:
                self.err("semantic", f"duplicate record name {r.name!r}", r.loc)
            seen_rec.add(r.name)
            for f in r.fields:
                if f.type.name not in SCALAR_TYPES and self.unit.record(f.type.name) is None:
                    self.err("semantic", f"unknown type {f.type.name!r} for field {f.name!r}", f.loc)

        gscope = _Scope()
        for g in self.unit.globals:
            if g.name in self.globals:
                self.err("semantic", f"duplicate global {g.name!r}", g.loc)
                continue
            ty = _SCALAR_TY[g.type.name]
            if g.init is not None:
                bad_call = next((e for e in walk_exprs(g.init)
                                 if isinstance(e, Call) and e.name not in BUILTINS), None)
                if bad_call is not None:
                    self.err("semantic",
                             "global initializers may only call builtins",
                             bad_call.loc)
                    self.globals[g.name] = ty
                    gscope.names[g.name] = ty
                    continue
                # initializers run in order, so earlier globals are visible
                it = self.expr(g.init, gscope)
                self.check_store(ty, it, g.loc, f"global {g.name!r}")
            self.globals[g.name] = ty
            gscope.names[g.name] = ty

        for f in self.unit.functions:
            if f.name in self.functions:
                self.err("semantic", f"duplicate function name {f.name!r}", f.loc)
            elif f.name in BUILTINS:
                self.err("semantic", f"function name {f.name!r} shadows a builtin", f.loc)
            else:
                self.functions[f.name] = f

        for f in self.unit.functions:
            self.check_function(f)

        return Analysis(self.unit, self.layouts, self.specs, self.diags,
                        self.expr_types, self.loop_specs)

    # ---- declarations ----

    def param_type(self, p) -> Ty:
        if p.type.name in SCALAR_TYPES:
            return Ty("arr", p.type.name) if p.is_array_base else _SCALAR_TY[p.type.name]
        if self.unit.record(p.type.name) is None:
            self.err("semantic", f"unknown parameter type {p.type.name!r}", p.loc)
            return VOID
        return Ty("recarr", p.type.name) if p.is_array_base else Ty("elem", p.type.name)

    def check_function(self, fn: FunctionDef) -> None:
        self.fn = fn
        scope = _Scope()
        scope.names.update(self.globals)
        inner = _Scope(scope)
        seen = set()
        for p in fn.params:
            if p.name in seen:
                self.err("semantic", f"duplicate parameter {p.name!r}", p.loc)
            seen.add(p.name)
            inner.names[p.name] = self.param_type(p)
        self.block(fn.body, _Scope(inner))
        self.fn = None

    # ---- statements ----

    def block(self, b: Block, scope: _Scope) -> None:
        for s in b.stmts:
            self.stmt(s, scope)

    def stmt(self, s: Stmt, scope: _Scope) -> None:
        if isinstance(s, Block):
            self.block(s, _Scope(scope))
        elif isinstance(s, VarDecl):
            self.var_decl(s, scope)
        elif isinstance(s, RefBind):
            self.ref_bind(s, scope)
        elif isinstance(s, Assign):
            self.assign(s, scope)
        elif isinstance(s, If):
            cond = self.expr(s.cond, scope)
            if cond.kind != "void" and not cond.is_bool:
                self.err("type", f"if condition must be bool, got {cond}", s.loc)
            self.block(s.then, _Scope(scope))
            if s.orelse is not None:
                self.block(s.orelse, _Scope(scope))
        elif isinstance(s, For):
            self.for_stmt(s, scope)
        elif isinstance(s, Return):
            self.ret(s, scope)
        elif isinstance(s, ExprStmt):
            self.expr(s.expr, scope)
        elif isinstance(s, Free):
            if not scope.is_freeable(s.name):
                self.err("type", f"free target {s.name!r} is not a local array", s.loc)
        else:
            self.err("semantic", f"unsupported statement {type(s).__name__}", getattr(s, "loc", None))

    def var_decl(self, d: VarDecl, scope: _Scope) -> None:
        if d.name in scope.names:
            self.err("semantic", f"redeclaration of {d.name!r}", d.loc)
        ty = _SCALAR_TY[d.type.name]
        if d.length is not None:
            lt = self.expr(d.length, scope)
            if lt.kind != "void" and not lt.is_int:
                self.err("type", f"array length must be an integer, got {lt}", d.loc)
            scope.names[d.name] = Ty("arr", d.type.name)
            scope.freeable.add(d.name)
            return
        if d.init is not None:
            it = self.expr(d.init, scope)
            self.check_store(ty, it, d.loc, f"initializer of {d.name!r}")
        scope.names[d.name] = ty

    def ref_bind(self, s: RefBind, scope: _Scope) -> None:
        if self.unit.record(s.record) is None:
            self.err("semantic", f"unknown record type {s.record!r}", s.loc)
            return
        target_ok = isinstance(s.target, Index) and isinstance(s.target.base, Ident)
        if not target_ok:
            self.err("alias", "reference must bind an element of a record array", s.loc)
            self.expr(s.target, scope)
            return
        tt = self.expr(s.target, scope)
        if not (tt.kind == "elem" and tt.name == s.record):
            if tt.kind != "void":
                self.err("type", f"reference of type {s.record} cannot bind {tt}", s.loc)
            return
        if s.name in scope.names or s.name in scope.ref_targets:
            self.err("alias", f"rebinding of reference {s.name!r}", s.loc)
            return
        ctx = self.loop_ctx
        if ctx is not None:
            base = s.target.base.name
            if base == ctx.spec.target:
                if s.name in ctx.bound_refs:
                    self.err("alias", f"rebinding of reference {s.name!r}", s.loc)
                ctx.bound_refs.add(s.name)
                ctx.spec.aliases[s.name] = s.target.index
        scope.names[s.name] = Ty("elem", s.record)
        scope.ref_targets[s.name] = s.target

    def assign(self, s: Assign, scope: _Scope) -> None:
        lt = self.lvalue(s.lvalue, scope)
        vt = self.expr(s.value, scope)
        if lt.kind == "void" or vt.kind == "void":
            return
        if s.op != "=":
            if not lt.is_numeric:
                self.err("type", f"compound assignment needs a numeric target, got {lt}", s.loc)
                return
            if not vt.is_numeric:
                self.err("type", f"compound assignment needs a numeric value, got {vt}", s.loc)
                return
            # the implied binary op computes in the promoted type, then stores
            self.check_store(lt, _SCALAR_TY[promote(lt.name, vt.name)], s.loc, "assignment")
            return
        self.check_store(lt, vt, s.loc, "assignment")

    def lvalue(self, e: Expr, scope: _Scope) -> Ty:
        t = self.expr(e, scope)
        if isinstance(e, Ident):
            if scope.lookup_ref(e.name) is not None:
                self.err("alias", f"cannot assign to reference {e.name!r}", e.loc)
                return VOID
            if t.kind == "elem":
                self.err("type", "whole records are not assignable", e.loc)
                return VOID
            if t.kind != "scalar":
                self.err("type", f"cannot assign to {t}", e.loc)
                return VOID
            return t
        if isinstance(e, (Index, Field)):
            if t.kind != "scalar":
                self.err("type", f"assignment target must be a scalar, got {t}", e.loc)
                return VOID
            return t
        self.err("type", "expression is not assignable", getattr(e, "loc", None))
        return VOID

    def for_stmt(self, s: For, scope: _Scope) -> None:
        head = _Scope(scope)
        if s.init is not None:
            self.stmt(s.init, head)
        if s.cond is not None:
            ct = self.expr(s.cond, head)
            if ct.kind != "void" and not ct.is_bool:
                self.err("type", f"loop condition must be bool, got {ct}", s.loc)
        if s.step is not None:
            self.stmt(s.step, head)

        spec = self.bind_attributes(s, head) if s.attrs else None
        if spec is not None:
            if self.loop_ctx is not None:
                self.err("semantic", "nested annotated loops are not supported", s.loc)
                spec = None
        if spec is None:
            self.block(s.body, _Scope(head))
            return

        outer = self.loop_ctx
        self.loop_ctx = _LoopCtx(spec)
        self.block(s.body, _Scope(head))
        self.loop_ctx = outer

        self.check_loop_body_legality(s, spec)
        self.specs.append(spec)
        self.loop_specs[id(s)] = spec

    def ret(self, s: Return, scope: _Scope) -> None:
        if self.loop_ctx is not None:
            self.err("semantic", "return inside an annotated loop is not supported", s.loc)
        rt = self.fn.return_type if self.fn else "void"
        if s.value is None:
            if rt != "void":
                self.err("type", f"function returns {rt}, missing value", s.loc)
            return
        vt = self.expr(s.value, scope)
        if rt == "void":
            self.err("type", "void function cannot return a value", s.loc)
        elif vt.kind != "void":
            self.check_store(_SCALAR_TY[rt], vt, s.loc, "return value")

    # ---- stores / conversions ----

    def check_store(self, slot: Ty, value: Ty, loc, what: str) -> None:
        if slot.kind != "scalar" or value.kind != "scalar":
            self.err("type", f"{what}: cannot store {value} into {slot}", loc)
            return
        if slot.name == "bool":
            if value.name != "bool":
                self.err("type", f"{what}: cannot store {value} into bool", loc)
        elif slot.name in INTS:
            if value.name not in INTS and value.name != "bool":
                self.err("type", f"{what}: cannot store {value} into {slot}", loc)
        else:  # float slots accept any numeric
            if value.name == "bool":
                self.err("type", f"{what}: cannot store bool into {slot}", loc)

    # ---- expressions ----

    def expr(self, e: Expr, scope: _Scope) -> Ty:
        t = self._expr(e, scope)
        self.expr_types[id(e)] = t
        return t

    def _expr(self, e: Expr, scope: _Scope) -> Ty:
        if isinstance(e, IntLit):
            if e.value > INT64_MAX:
                self.err("type", "integer literal does not fit int64", e.loc)
            return I64
        if isinstance(e, FloatLit):
            return F32 if e.is_f32 else F64
        if isinstance(e, BoolLit):
            return BOOL
        if isinstance(e, Ident):
            t = scope.lookup(e.name)
            if t is None:
                self.err("semantic", f"unknown name {e.name!r}", e.loc)
                return VOID
            return t
        if isinstance(e, Index):
            return self.index(e, scope)
        if isinstance(e, Field):
            return self.field_access(e, scope)
        if isinstance(e, Unary):
            return self.unary(e, scope)
        if isinstance(e, Binary):
            return self.binary(e, scope)
        if isinstance(e, Call):
            return self.call(e, scope)
        self.err("semantic", f"unsupported expression {type(e).__name__}", getattr(e, "loc", None))
        return VOID

    def index(self, e: Index, scope: _Scope) -> Ty:
        bt = self.expr(e.base, scope)
        it = self.expr(e.index, scope)
        if it.kind != "void" and not it.is_int:
            self.err("type", f"index must be an integer, got {it}", e.loc)
        if bt.kind in ("embarr", "embrecarr"):
            lit = _literal_index(e.index)
            if lit is not None and not (0 <= lit < bt.count):
                self.err("type",
                         f"index {lit} out of range for {bt}", e.loc)
        if bt.kind == "arr":
            return _SCALAR_TY[bt.name]
        if bt.kind == "recarr":
            return Ty("elem", bt.name)
        if bt.kind == "embarr":
            return _SCALAR_TY[bt.name]
        if bt.kind == "embrecarr":
            return Ty("elem", bt.name)
        if bt.kind != "void":
            self.err("type", f"{bt} cannot be indexed", e.loc)
        return VOID

    def field_access(self, e: Field, scope: _Scope) -> Ty:
        bt = self.expr(e.base, scope)
        if bt.kind == "void":
            return VOID
        if bt.kind != "elem":
            self.err("type", f"{bt} has no fields", e.loc)
            return VOID
        rec = self.unit.record(bt.name)
        f = rec.field_map().get(e.name) if rec else None
        if f is None:
            self.err("unknown-field", f"record {bt.name!r} has no field {e.name!r}", e.loc)
            return VOID
        if f.type.name in SCALAR_TYPES:
            if f.type.is_array:
                return Ty("embarr", f.type.name, f.type.count)
            return _SCALAR_TY[f.type.name]
        if f.type.is_array:
            return Ty("embrecarr", f.type.name, f.type.count)
        return Ty("elem", f.type.name)

    def unary(self, e: Unary, scope: _Scope) -> Ty:
        ot = self.expr(e.operand, scope)
        if ot.kind == "void":
            return VOID
        if e.op == "!":
            if not ot.is_bool:
                self.err("type", f"! needs a bool operand, got {ot}", e.loc)
                return VOID
            return BOOL
        if not ot.is_numeric and not ot.is_bool:
            self.err("type", f"unary - needs a numeric operand, got {ot}", e.loc)
            return VOID
        return _SCALAR_TY[promote(ot.name, ot.name)]

    def binary(self, e: Binary, scope: _Scope) -> Ty:
        lt = self.expr(e.lhs, scope)
        rt = self.expr(e.rhs, scope)
        if lt.kind == "void" or rt.kind == "void":
            return VOID
        op = e.op
        if op in ("&&", "||"):
            if not lt.is_bool or not rt.is_bool:
                self.err("type", f"{op} needs bool operands, got {lt} and {rt}", e.loc)
                return VOID
            return BOOL
        if op in ("==", "!="):
            if lt.is_bool and rt.is_bool:
                return BOOL
        if not lt.is_scalar or not rt.is_scalar or lt.is_bool or rt.is_bool:
            self.err("type", f"{op} needs numeric operands, got {lt} and {rt}", e.loc)
            return VOID
        if op in ("<", "<=", ">", ">=", "==", "!="):
            return BOOL
        return _SCALAR_TY[promote(lt.name, rt.name)]

    def call(self, e: Call, scope: _Scope) -> Ty:
        if e.name in BUILTINS:
            return self.builtin_call(e, scope)
        fn = self.functions.get(e.name)
        if fn is None:
            self.err("type", f"unknown function {e.name!r}", e.loc)
            for a in e.args:
                self.expr(a, scope)
            return VOID
        if len(e.args) != len(fn.params):
            self.err("type",
                     f"{e.name}() takes {len(fn.params)} arguments, got {len(e.args)}", e.loc)
        for a, p in zip(e.args, fn.params):
            at = self.expr(a, scope)
            pt = self.param_type(p)
            self.check_call_arg(e, a, at, pt)
        for a in e.args[len(fn.params):]:
            self.expr(a, scope)
        return VOID if fn.return_type == "void" else _SCALAR_TY[fn.return_type]

    def check_call_arg(self, call: Call, arg: Expr, at: Ty, pt: Ty) -> None:
        loc = getattr(arg, "loc", call.loc)
        if at.kind == "void" or pt.kind == "void":
            return
        if self.loop_ctx is not None and at.kind == "elem":
            spec = self.loop_ctx.spec
            acc = classify_access(arg, spec)
            converted = acc is not None and (
                acc.field is None or acc.field in set(spec.union_fields))
            if converted:
                self.err("illegal-call",
                         "cannot pass a whole element of the conversion target to a "
                         "function inside the annotated loop; pass scalar leaves instead",
                         loc)
                return
        if pt.kind == "scalar":
            self.check_store(pt, at, loc, f"argument to {call.name}()")
        elif pt.kind in ("arr", "recarr", "elem"):
            if (at.kind, at.name) != (pt.kind, pt.name):
                self.err("type", f"argument to {call.name}(): expected {pt}, got {at}", loc)

    def builtin_call(self, e: Call, scope: _Scope) -> Ty:
        arity = {"sqrt": 1, "abs": 1, "pow": 2, "min": 2, "max": 2}[e.name]
        args = [self.expr(a, scope) for a in e.args]
        if len(e.args) != arity:
            self.err("type", f"{e.name}() takes {arity} arguments, got {len(e.args)}", e.loc)
            return VOID
        if any(a.kind == "void" for a in args):
            return VOID
        if any(not a.is_numeric for a in args):
            self.err("type", f"{e.name}() needs numeric arguments", e.loc)
            return VOID
        if e.name in ("sqrt", "pow"):
            return F64
        if e.name == "abs":
            return F64 if args[0].is_float else I64
        return _SCALAR_TY[promote(args[0].name, args[1].name)]

    # ---- annotated-loop binding ----

    def bind_attributes(self, loop: For, scope: _Scope) -> ConversionSpec | None:
        by_name: dict[str, Attribute] = {}
        bad = False
        for a in loop.attrs:
            if not a.known:
                continue  # unknown attributes are inert
            if a.name in by_name:
                self.err("semantic", f"duplicate attribute {a.ns}::{a.name}", a.loc)
                bad = True
                continue
            by_name[a.name] = a
        if not by_name:
            return None

        soa_t = by_name.get("soa_conversion_target")
        aos_t = by_name.get("aos_conversion_target")
        if soa_t is not None and aos_t is not None:
            self.err("semantic", "conflicting conversion directions on one loop", loop.loc)
            return None
        head = soa_t or aos_t
        if head is None:
            first = next(iter(by_name.values()))
            self.err("semantic",
                     f"{first.ns}::{first.name} requires a conversion target annotation",
                     first.loc)
            return None
        if bad:
            return None

        target_name = self.attr_single_ident(head)
        if target_name is None:
            return None

        size_attr = by_name.get("soa_conversion_target_size")
        if size_attr is None:
            self.err("missing-size",
                     "conversion requires clang::soa_conversion_target_size",
                     head.loc)
            return None
        size_expr = self.attr_single_expr(size_attr, scope, "size")
        if size_expr is None:
            return None

        start_attr = by_name.get("soa_conversion_start_idx")
        has_start = start_attr is not None
        if has_start:
            start_expr = self.attr_single_expr(start_attr, scope, "start index")
            if start_expr is None:
                return None
        else:
            start_expr = IntLit(0)

        if soa_t is not None:
            direction = "aos_to_soa"
            tt = scope.lookup(target_name)
            if tt is None or tt.kind != "recarr":
                self.err("unknown-target",
                         f"conversion target {target_name!r} is not an array-base "
                         "parameter of record type", head.loc)
                return None
            layout = self.layouts.get(tt.name)
            outputs_attr = by_name.get("soa_conversion_outputs")
        else:
            direction = "soa_to_aos"
            layout = self.layouts.get(target_name)
            if layout is None:
                self.err("unknown-target",
                         f"conversion target {target_name!r} is not a record type", head.loc)
                return None
            outputs_attr = by_name.get("aos_conversion_outputs")
            if by_name.get("soa_conversion_outputs") is not None:
                self.err("semantic",
                         "use clang::aos_conversion_outputs with aos_conversion_target",
                         by_name["soa_conversion_outputs"].loc)
                return None
        if layout is None:
            return None  # layout failed earlier, diagnostic already present

        inputs_attr = by_name.get("soa_conversion_inputs")
        inputs = self.attr_field_list(inputs_attr, layout)
        outputs = self.attr_field_list(outputs_attr, layout)
        if inputs is None or outputs is None:
            return None
        if inputs_attr is None:
            inputs = tuple(layout.slots)
        if outputs_attr is None:
            outputs = ()

        spec = ConversionSpec(direction, self.fn, loop, layout, size_expr,
                              start_expr, has_start, inputs, outputs)
        if direction == "aos_to_soa":
            spec.target = target_name
        else:
            if not self.bind_leaf_params(spec, scope, head):
                return None
        return spec

    def attr_single_ident(self, a: Attribute) -> str | None:
        if len(a.args) == 1 and isinstance(a.args[0], Ident):
            return a.args[0].name
        self.err("semantic", f"{a.ns}::{a.name} expects one name argument", a.loc)
        return None

    def attr_single_expr(self, a: Attribute, scope: _Scope, what: str) -> Expr | None:
        if len(a.args) != 1:
            self.err("semantic", f"{a.ns}::{a.name} expects one expression", a.loc)
            return None
        t = self.expr(a.args[0], scope)
        if t.kind == "void":
            return None
        if not t.is_int:
            self.err("type", f"conversion {what} must be an integer, got {t}", a.loc)
            return None
        return a.args[0]

    def attr_field_list(self, a: Attribute | None, layout: RecordLayout):
        if a is None:
            return ()
        names: list[str] = []
        ok = True
        for arg in a.args:
            if not isinstance(arg, Ident):
                self.err("semantic", f"{a.ns}::{a.name} takes field names", a.loc)
                ok = False
                continue
            if arg.name not in layout.slots:
                self.err("unknown-field",
                         f"record {layout.name!r} has no field {arg.name!r}", arg.loc)
                ok = False
                continue
            if arg.name not in names:
                names.append(arg.name)
        if not ok:
            return None
        return tuple(s for s in layout.slots if s in set(names))

    def bind_leaf_params(self, spec: ConversionSpec, scope: _Scope, head: Attribute) -> bool:
        params: dict[str, str] = {}
        ok = True
        for leaf in spec.union_leaves:
            t = scope.lookup(leaf.name)
            if t is None or t.kind != "arr" or t.name != leaf.type:
                self.err("unknown-field",
                         f"no flat {leaf.type} array parameter named {leaf.name!r} "
                         f"for leaf of record {spec.layout.name!r}", head.loc)
                ok = False
                continue
            params[leaf.name] = leaf.name
        spec.leaf_params = params
        return ok

    # ---- annotated-loop body legality ----

    def check_loop_body_legality(self, loop: For, spec: ConversionSpec) -> None:
        from .nodes import all_exprs

        union = set(spec.union_fields)
        for node in all_exprs(loop.body):
            acc = classify_access(node, spec)
            if acc is None or acc.field is None:
                continue
            if acc.field in union and acc.dynamic:
                self.err("semantic",
                         "accesses into embedded arrays of converted fields need "
                         "literal indices", getattr(node, "loc", None))


def _literal_index(e: Expr) -> int | None:
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Unary) and e.op == "-" and isinstance(e.operand, IntLit):
        return -e.operand.value
    return None


def classify_access(e: Expr, spec: ConversionSpec) -> AccessPath | None:
    """Classify e as an access rooted at spec's target, or None.

    Forward direction roots: `target[idx]` or a bound alias name. Mirror
    direction roots: `leafparam[idx]`. The returned steps/leaf describe how
    far into the element the access goes.
    """
    if spec.direction == "soa_to_aos":
        if isinstance(e, Index) and isinstance(e.base, Ident) and spec.leaf_params:
            pname = e.base.name
            for leaf_name, param in spec.leaf_params.items():
                if param == pname:
                    leaf = spec.layout.leaf(leaf_name)
                    return AccessPath(e.index, (), leaf.path[0][0], leaf)
        return None

    # peel Field/Index steps down to the root
    chain: list = []
    node = e
    while True:
        if isinstance(node, Field):
            chain.append(("field", node.name))
            node = node.base
        elif isinstance(node, Index):
            chain.append(("index", node.index))
            node = node.base
        else:
            break

    via_alias = None
    if isinstance(node, Ident) and node.name in spec.aliases:
        element = spec.aliases[node.name]
        via_alias = node.name
    elif (isinstance(node, Ident) and node.name == spec.target):
        # root is the bare array: the first chain entry (last peeled) must be
        # the element index
        if not chain or chain[-1][0] != "index":
            return None
        element = chain.pop()[1]
    else:
        return None

    chain.reverse()  # now root-outward: field, maybe index, field, ...
    steps: list = []
    layout = spec.layout
    slot = None
    field_name: str | None = None
    leaf_path: list = []
    i = 0
    while i < len(chain):
        kind, payload = chain[i]
        if kind != "field":
            return None  # indexing the element itself, not a well-formed access
        if layout is None or payload not in layout.slots:
            return None
        slot = layout.slots[payload]
        if field_name is None:
            field_name = payload
        idx: int | None = None
        consumed_index = False
        if slot.count > 0:
            if i + 1 < len(chain) and chain[i + 1][0] == "index":
                idx = _literal_index(chain[i + 1][1])
                consumed_index = True
                if idx is None:
                    steps.append((payload, None))
                    return AccessPath(element, tuple(steps), field_name, None,
                                      via_alias, dynamic=True)
            else:
                # whole embedded array (no index step): sub-object access
                steps.append((payload, None))
                return AccessPath(element, tuple(steps), field_name, None, via_alias)
        steps.append((payload, idx))
        leaf_path.append((payload, idx))
        i += 2 if consumed_index else 1
        layout = None
        if slot.record is not None:
            layout = slot.record
    if slot is None:
        # bare element access (whole record)
        return AccessPath(element, (), None, None, via_alias)
    if slot.scalar is None:
        # stops at a sub-record
        return AccessPath(element, tuple(steps), field_name, None, via_alias)
    want = tuple(leaf_path)
    for leaf in spec.layout.leaves:
        if leaf.path == want:
            return AccessPath(element, tuple(steps), field_name, leaf, via_alias)
    return AccessPath(element, tuple(steps), field_name, None, via_alias)


def field_access_sets(spec: ConversionSpec) -> tuple[set, set]:
    """Top-level target fields the loop body reads and writes."""
    from .nodes import stmt_exprs, walk_exprs, walk_stmts

    reads: set = set()
    writes: set = set()

    def note_reads(e: Expr) -> None:
        for sub in walk_exprs(e):
            acc = classify_access(sub, spec)
            if acc is not None and acc.field is not None:
                reads.add(acc.field)

    for s in walk_stmts(spec.loop.body):
        if isinstance(s, Assign):
            acc = classify_access(s.lvalue, spec)
            if acc is not None and acc.field is not None:
                writes.add(acc.field)
                if s.op != "=":
                    reads.add(acc.field)
                if isinstance(s.lvalue, (Index, Field)):
                    # index subexpressions of the lvalue are reads
                    for kid in walk_exprs(s.lvalue):
                        if kid is not s.lvalue:
                            acc2 = classify_access(kid, spec)
                            if acc2 is not None and acc2.field is not None:
                                reads.add(acc2.field)
            else:
                note_reads(s.lvalue)
            note_reads(s.value)
        else:
            for e in stmt_exprs(s):
                note_reads(e)

    return reads, writes


def analyze(unit: SourceUnit) -> Analysis:
    """Type-check a unit and bind its conversion annotations."""
    return _Checker(unit).run()
