"""The AoS/SoA rewrite.

plan() turns one ConversionSpec into a RewritePlan: flat temporaries (one
per leaf of A ∪ Â), a prologue loop copying leaves(A) element-by-element
into the temps, a redirect map sending in-loop target accesses to the
temps, an epilogue loop copying leaves(Â) back, and frees. apply() splices
the plans into the unit; strip() removes the annotations instead, which is
the transformation-disabled path.

Temp names follow `<leaf>_soa<ordinal>_t`, where the ordinal is per loop
and bumped past any ordinal whose names would collide with an identifier
already used in the function. The prologue/epilogue index variable uses
the same scheme rooted at `i`.

With a start index, the converted range is [start, start + size): the
prologue reads element start+i into temp slot i, and a body access
target[e].leaf becomes temp[e - start]. Accesses outside the converted
range still redirect (the interpreter traps the out-of-range temp index);
accesses to fields outside A ∪ Â keep hitting the original array.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field as dc_field

from .errors import InternalError, raise_first
from .layout import Leaf, element_footprint
from .nodes import (
    Assign,
    Binary,
    Block,
    Call,
    Expr,
    ExprStmt,
    Field,
    For,
    Free,
    FunctionDef,
    Ident,
    If,
    Index,
    IntLit,
    RefBind,
    Return,
    SourceUnit,
    Stmt,
    TypeRef,
    Unary,
    VarDecl,
    stmt_exprs,
    walk_exprs,
    walk_stmts,
)
from .semantics import Analysis, ConversionSpec, analyze, classify_access

RESERVED_MARK = "_soa"


def mangle(base: str, ordinal: int) -> str:
    """Temp identifier for a leaf (or index var) of conversion #ordinal."""
    return f"{base}_soa{ordinal}_t"


@dataclass
class RewritePlan:
    spec: ConversionSpec
    ordinal: int
    loop_var: str
    temp_decls: list          # (temp name, scalar type, length expr)
    redirect_map: dict        # leaf path tuple -> temp name
    prologue: For
    epilogue: For
    frees: list               # temp names, declaration order
    index_shift: Expr         # start index expression

    @property
    def direction(self) -> str:
        return self.spec.direction

    @property
    def temp_names(self) -> list:
        return [t[0] for t in self.temp_decls]


@dataclass
class PlanReport:
    function: str
    ordinal: int
    direction: str
    record: str
    input_leaves: int
    output_leaves: int
    union_leaves: int
    element_bytes: int        # per-element bytes of the union view


@dataclass
class TransformResult:
    unit: SourceUnit
    plans: list
    report: list = dc_field(default_factory=list)


def _function_identifiers(unit: SourceUnit, fn: FunctionDef) -> set:
    names = {g.name for g in unit.globals}
    names.update(r.name for r in unit.records)
    names.update(f.name for f in unit.functions)
    names.update(p.name for p in fn.params)
    for s in walk_stmts(fn.body):
        if isinstance(s, (VarDecl, RefBind)):
            names.add(s.name)
        for e in stmt_exprs(s):
            for sub in walk_exprs(e):
                if isinstance(sub, Ident):
                    names.add(sub.name)
    return names


def _start_is_zero(e: Expr) -> bool:
    return isinstance(e, IntLit) and e.value == 0


def _shift(e: Expr, start: Expr, op: str) -> Expr:
    if _start_is_zero(start):
        return e
    return Binary(op, e, copy.deepcopy(start))


def _leaf_access(target: str, element: Expr, leaf: Leaf) -> Expr:
    """Build `target[element].step1[i1]...` along the leaf's path."""
    node: Expr = Index(Ident(target), element)
    for name, idx in leaf.path:
        node = Field(node, name)
        if idx is not None:
            node = Index(node, IntLit(idx))
    return node


def _source_access(spec: ConversionSpec, element: Expr, leaf: Leaf) -> Expr:
    if spec.direction == "aos_to_soa":
        return _leaf_access(spec.target, element, leaf)
    return Index(Ident(spec.leaf_params[leaf.name]), element)


def _copy_loop(spec: ConversionSpec, ordinal: int, loop_var: str,
               temps: dict, leaves, kind: str) -> For:
    """Copy loop between source elements and the temps.

    kind == "prologue": temp[i] = source(start + i) per leaf;
    kind == "epilogue": roles swapped.
    """
    init = VarDecl(TypeRef("int64"), loop_var, init=IntLit(0))
    cond = Binary("<", Ident(loop_var), copy.deepcopy(spec.size_expr))
    step = Assign(Ident(loop_var), "+=", IntLit(1))
    body = []
    for leaf in leaves:
        element = _shift(Ident(loop_var), spec.start_expr, "+")
        src = _source_access(spec, element, leaf)
        tmp = Index(Ident(temps[leaf.name]), Ident(loop_var))
        if kind == "prologue":
            body.append(Assign(tmp, "=", src))
        else:
            body.append(Assign(src, "=", tmp))
    loop = For(init, cond, step, Block(body))
    loop.region = (kind, ordinal, spec.direction)
    return loop


def plan(spec: ConversionSpec, taken: set | None = None, first_ordinal: int = 0,
         safe_outputs: bool = False) -> RewritePlan:
    """Derive the concrete rewrite for one legal annotated loop."""
    union = spec.union_leaves
    taken = set(taken or ())
    ordinal = first_ordinal
    while any(mangle(l.name, ordinal) in taken for l in union) or mangle("i", ordinal) in taken:
        ordinal += 1

    temps = {l.name: mangle(l.name, ordinal) for l in union}
    loop_var = mangle("i", ordinal)

    temp_decls = [(temps[l.name], l.type, copy.deepcopy(spec.size_expr)) for l in union]
    redirect_map = {l.path: temps[l.name] for l in union}

    prologue_leaves = list(spec.input_leaves)
    if safe_outputs:
        have = {l.name for l in prologue_leaves}
        # prefill output-only leaves so conditional writers never leave garbage
        prologue_leaves += [l for l in union if l.name not in have]
    prologue = _copy_loop(spec, ordinal, loop_var, temps, prologue_leaves, "prologue")
    epilogue = _copy_loop(spec, ordinal, loop_var, temps, spec.output_leaves, "epilogue")
    frees = [temps[l.name] for l in union]

    return RewritePlan(spec, ordinal, loop_var, temp_decls, redirect_map,
                       prologue, epilogue, frees, spec.start_expr)


class _Rewriter:
    """Redirects target accesses of one plan inside the loop body."""

    def __init__(self, p: RewritePlan):
        self.plan = p
        self.spec = p.spec
        self.union_paths = set(p.redirect_map)
        self.alias_uses: dict = {a: 0 for a in self.spec.aliases}

    def expr(self, e: Expr) -> Expr:
        acc = classify_access(e, self.spec)
        if acc is not None and acc.leaf is not None and acc.leaf.path in self.union_paths:
            tmp = self.plan.redirect_map.get(acc.leaf.path)
            if tmp is None:
                raise InternalError(
                    f"converted leaf {acc.leaf.name!r} missing from the redirect map",
                    getattr(e, "loc", None))
            idx = _shift(self.expr(copy.deepcopy(acc.element)),
                         self.plan.index_shift, "-")
            return Index(Ident(tmp), idx)
        return self._descend(e)

    def _descend(self, e: Expr) -> Expr:
        if isinstance(e, Ident):
            if e.name in self.alias_uses:
                self.alias_uses[e.name] += 1
            return e
        if isinstance(e, Index):
            e.base = self.expr(e.base)
            e.index = self.expr(e.index)
            return e
        if isinstance(e, Field):
            e.base = self.expr(e.base)
            return e
        if isinstance(e, Unary):
            e.operand = self.expr(e.operand)
            return e
        if isinstance(e, Binary):
            e.lhs = self.expr(e.lhs)
            e.rhs = self.expr(e.rhs)
            return e
        if isinstance(e, Call):
            e.args = [self.expr(a) for a in e.args]
            return e
        return e

    def stmt(self, s: Stmt) -> None:
        if isinstance(s, Block):
            for k in s.stmts:
                self.stmt(k)
        elif isinstance(s, VarDecl):
            if s.length is not None:
                s.length = self.expr(s.length)
            if s.init is not None:
                s.init = self.expr(s.init)
        elif isinstance(s, RefBind):
            # the binding still points at the original array; it is dropped
            # afterwards if every use got redirected
            pass
        elif isinstance(s, Assign):
            s.lvalue = self.expr(s.lvalue)
            s.value = self.expr(s.value)
        elif isinstance(s, If):
            s.cond = self.expr(s.cond)
            self.stmt(s.then)
            if s.orelse is not None:
                self.stmt(s.orelse)
        elif isinstance(s, For):
            if s.init is not None:
                self.stmt(s.init)
            if s.cond is not None:
                s.cond = self.expr(s.cond)
            if s.step is not None:
                self.stmt(s.step)
            self.stmt(s.body)
        elif isinstance(s, Return):
            if s.value is not None:
                s.value = self.expr(s.value)
        elif isinstance(s, ExprStmt):
            s.expr = self.expr(s.expr)

    def drop_dead_aliases(self, body: Block) -> None:
        dead = {a for a, uses in self.alias_uses.items() if uses == 0}
        if not dead:
            return
        for s in walk_stmts(body):
            if isinstance(s, Block):
                s.stmts = [k for k in s.stmts
                           if not (isinstance(k, RefBind) and k.name in dead)]


def _check_no_leaks(p: RewritePlan) -> None:
    """Post-rewrite sanity pass: no converted-leaf access may survive."""
    for s in walk_stmts(p.spec.loop.body):
        if isinstance(s, RefBind):
            continue  # retained binds legitimately reference the target
        for e in stmt_exprs(s):
            for sub in walk_exprs(e):
                acc = classify_access(sub, p.spec)
                if acc is not None and acc.leaf is not None \
                        and acc.leaf.path in p.redirect_map:
                    raise InternalError(
                        f"unredirected access to converted leaf {acc.leaf.name!r} "
                        "survived the rewrite", getattr(sub, "loc", None))


def _rewrite_loop(p: RewritePlan) -> list:
    """Replacement statement sequence for one annotated loop."""
    loop = p.spec.loop
    rw = _Rewriter(p)
    rw.stmt(loop.body)
    rw.drop_dead_aliases(loop.body)
    _check_no_leaks(p)

    loop.attrs = [a for a in loop.attrs if not a.known]
    loop.region = ("body", p.ordinal, p.spec.direction)

    out: list = []
    for name, scalar, length in p.temp_decls:
        out.append(VarDecl(TypeRef(scalar), name, length=length,
                           is_conversion_temp=True, temp_plan=p.ordinal))
    # empty copy loops (A or Â empty) are dropped, not emitted as no-ops
    if p.prologue.body.stmts:
        out.append(p.prologue)
    out.append(loop)
    if p.epilogue.body.stmts:
        out.append(p.epilogue)
    out.extend(Free(n) for n in p.frees)
    return out


def _splice(block: Block, plans_by_loop: dict) -> None:
    out: list = []
    for s in block.stmts:
        if isinstance(s, For) and id(s) in plans_by_loop:
            out.extend(_rewrite_loop(plans_by_loop[id(s)]))
            continue
        _splice_children(s, plans_by_loop)
        out.append(s)
    block.stmts = out


def _splice_children(s: Stmt, plans_by_loop: dict) -> None:
    if isinstance(s, Block):
        _splice(s, plans_by_loop)
    elif isinstance(s, If):
        _splice(s.then, plans_by_loop)
        if s.orelse is not None:
            _splice(s.orelse, plans_by_loop)
    elif isinstance(s, For):
        _splice(s.body, plans_by_loop)


def apply(unit: SourceUnit, plans: list) -> TransformResult:
    """Splice prepared plans into the unit they were planned against."""
    report: list = []
    plans_by_loop = {id(p.spec.loop): p for p in plans}
    for fn in unit.functions:
        _splice(fn.body, plans_by_loop)
    for p in plans:
        report.append(PlanReport(
            p.spec.func.name, p.ordinal, p.spec.direction, p.spec.layout.name,
            len(p.spec.input_leaves), len(p.spec.output_leaves),
            len(p.spec.union_leaves),
            element_footprint(p.spec.layout, [l.name for l in p.spec.union_leaves])))
    return TransformResult(unit, plans, report)


def plan_all(analysis: Analysis, safe_outputs: bool = False) -> list:
    """One RewritePlan per legal spec, with per-function collision sets."""
    plans: list = []
    by_fn: dict = {}
    for spec in analysis.specs:
        by_fn.setdefault(id(spec.func), []).append(spec)
    for fn in analysis.unit.functions:
        specs = by_fn.get(id(fn))
        if not specs:
            continue
        taken = _function_identifiers(analysis.unit, fn)
        next_ordinal = 0
        for spec in specs:
            p = plan(spec, taken, next_ordinal, safe_outputs)
            taken.update(p.temp_names)
            taken.add(p.loop_var)
            next_ordinal = p.ordinal + 1
            plans.append(p)
    return plans


def transform_unit(unit: SourceUnit, safe_outputs: bool = False) -> TransformResult:
    """Analyze, plan and apply on a copy, leaving the input untouched."""
    work = copy.deepcopy(unit)
    analysis = analyze(work)
    raise_first(analysis.diagnostics)
    return apply(work, plan_all(analysis, safe_outputs))


def strip(unit: SourceUnit) -> SourceUnit:
    """Remove recognized conversion attributes; everything else unchanged."""
    out = copy.deepcopy(unit)
    for fn in out.functions:
        for s in walk_stmts(fn.body):
            if isinstance(s, For) and s.attrs:
                s.attrs = [a for a in s.attrs if not a.known]
    return out
