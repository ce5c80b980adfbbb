"""AST node definitions for the annotated kernel language.

Node equality is structural and ignores source locations, so a parse of the
emitter's output compares equal to the original tree. Every node keeps its
`loc` for diagnostics only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .errors import Loc

SCALAR_SIZES = {
    "float64": 8,
    "float32": 4,
    "int64": 8,
    "int32": 4,
    "bool": 1,
}

SCALAR_TYPES = frozenset(SCALAR_SIZES)

FLOAT_TYPES = frozenset({"float64", "float32"})
INT_TYPES = frozenset({"int64", "int32", "bool"})

#: numeric rank used for the usual arithmetic conversions
TYPE_RANK = {"bool": 0, "int32": 1, "int64": 2, "float32": 3, "float64": 4}

BUILTINS = frozenset({"sqrt", "pow", "abs", "min", "max"})


def promote(a: str, b: str) -> str:
    """Result type of a binary arithmetic op between scalar types a and b."""
    t = a if TYPE_RANK[a] >= TYPE_RANK[b] else b
    # bool arithmetic happens in int64
    return "int64" if t == "bool" else t


@dataclass(frozen=True)
class TypeRef:
    """A declared type: scalar or record name, optionally a fixed array of it.

    count == 0 means plain scalar/record; count > 0 is a fixed-size array.
    """

    name: str
    count: int = 0

    @property
    def is_array(self) -> bool:
        return self.count > 0

    @property
    def is_scalar(self) -> bool:
        return self.count == 0 and self.name in SCALAR_TYPES

    def __str__(self) -> str:
        return f"{self.name}[{self.count}]" if self.is_array else self.name


# --------------------------------------------------------------------------
# expressions
# --------------------------------------------------------------------------


@dataclass
class IntLit:
    value: int
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class FloatLit:
    value: float
    is_f32: bool = False
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class BoolLit:
    value: bool
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class Ident:
    name: str
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class Index:
    base: "Expr"
    index: "Expr"
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class Field:
    base: "Expr"
    name: str
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class Binary:
    op: str  # + - * / < <= > >= == != && ||
    lhs: "Expr"
    rhs: "Expr"
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class Unary:
    op: str  # - !
    operand: "Expr"
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class Call:
    name: str
    args: list["Expr"]
    loc: Loc = field(default_factory=Loc, compare=False)


Expr = Union[IntLit, FloatLit, BoolLit, Ident, Index, Field, Binary, Unary, Call]


# --------------------------------------------------------------------------
# attributes
# --------------------------------------------------------------------------

#: recognized attribute spellings, namespace `clang`
KNOWN_ATTRS = frozenset({
    "soa_conversion_target",
    "soa_conversion_target_size",
    "soa_conversion_inputs",
    "soa_conversion_outputs",
    "soa_conversion_start_idx",
    "aos_conversion_target",
    "aos_conversion_outputs",
})


@dataclass
class Attribute:
    """One `[[ns::name(args...)]]` entry.

    Recognized spellings carry parsed `args` expressions; unrecognized ones
    keep their raw argument lexemes so they survive emission verbatim.
    """

    ns: str
    name: str
    args: list[Expr] = field(default_factory=list)
    raw_args: list[str] | None = None  # set for unknown attributes
    had_parens: bool = False
    loc: Loc = field(default_factory=Loc, compare=False)

    @property
    def known(self) -> bool:
        return self.ns == "clang" and self.name in KNOWN_ATTRS


# --------------------------------------------------------------------------
# statements
# --------------------------------------------------------------------------


@dataclass
class VarDecl:
    type: TypeRef           # scalar element type for array locals
    name: str
    length: Expr | None = None   # array local when set; may be a runtime expr
    init: Expr | None = None
    is_conversion_temp: bool = field(default=False, compare=False)
    temp_plan: int = field(default=-1, compare=False)   # plan ordinal for temps
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class RefBind:
    """`ref Rec p = arr[idx];` — an element alias, the only inferred binding."""

    record: str
    name: str
    target: Expr  # must be Index(Ident, expr)
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class Assign:
    lvalue: Expr
    op: str  # "=", "+=", "-=", "*=", "/="
    value: Expr
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class Block:
    stmts: list["Stmt"]
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class If:
    cond: Expr
    then: Block
    orelse: Block | None = None
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class For:
    init: "Stmt | None"
    cond: Expr | None
    step: "Stmt | None"
    body: Block
    attrs: list[Attribute] = field(default_factory=list)
    #: (kind, plan ordinal, direction) set by the transform on generated
    #: prologue/epilogue loops and on the rewritten body loop; lost on
    #: reparse, used for stats, timing and provenance comments only.
    region: tuple[str, int, str] | None = field(default=None, compare=False)
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class Return:
    value: Expr | None = None
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class ExprStmt:
    expr: Expr
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class Free:
    name: str
    loc: Loc = field(default_factory=Loc, compare=False)


Stmt = Union[VarDecl, RefBind, Assign, Block, If, For, Return, ExprStmt, Free]


# --------------------------------------------------------------------------
# top level
# --------------------------------------------------------------------------


@dataclass
class FieldDecl:
    name: str
    type: TypeRef
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class RecordDef:
    name: str
    fields: list[FieldDecl]
    loc: Loc = field(default_factory=Loc, compare=False)

    def field_map(self) -> dict[str, FieldDecl]:
        return {f.name: f for f in self.fields}


@dataclass
class Param:
    name: str
    type: TypeRef
    is_array_base: bool = False  # declared with pointer syntax `T *name`
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class FunctionDef:
    name: str
    return_type: str  # "void" or scalar type name
    params: list[Param]
    body: Block
    loc: Loc = field(default_factory=Loc, compare=False)


@dataclass
class SourceUnit:
    records: list[RecordDef] = field(default_factory=list)
    functions: list[FunctionDef] = field(default_factory=list)
    #: top-level scalar declarations, initialized before entry, in order
    globals: list[VarDecl] = field(default_factory=list)
    path: str | None = field(default=None, compare=False)

    def record(self, name: str) -> RecordDef | None:
        for r in self.records:
            if r.name == name:
                return r
        return None

    def function(self, name: str) -> FunctionDef | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None


# --------------------------------------------------------------------------
# traversal helpers
# --------------------------------------------------------------------------


def walk_stmts(stmt: Stmt):
    """Yield stmt and every statement nested below it, preorder."""
    yield stmt
    if isinstance(stmt, Block):
        for s in stmt.stmts:
            yield from walk_stmts(s)
    elif isinstance(stmt, If):
        yield from walk_stmts(stmt.then)
        if stmt.orelse is not None:
            yield from walk_stmts(stmt.orelse)
    elif isinstance(stmt, For):
        if stmt.init is not None:
            yield from walk_stmts(stmt.init)
        if stmt.step is not None:
            yield from walk_stmts(stmt.step)
        yield from walk_stmts(stmt.body)


def stmt_exprs(stmt: Stmt):
    """Yield the expressions directly owned by one statement (not nested stmts)."""
    if isinstance(stmt, VarDecl):
        if stmt.length is not None:
            yield stmt.length
        if stmt.init is not None:
            yield stmt.init
    elif isinstance(stmt, RefBind):
        yield stmt.target
    elif isinstance(stmt, Assign):
        yield stmt.lvalue
        yield stmt.value
    elif isinstance(stmt, If):
        yield stmt.cond
    elif isinstance(stmt, For):
        if stmt.cond is not None:
            yield stmt.cond
    elif isinstance(stmt, Return):
        if stmt.value is not None:
            yield stmt.value
    elif isinstance(stmt, ExprStmt):
        yield stmt.expr


def walk_exprs(expr: Expr):
    """Yield expr and every subexpression, preorder."""
    yield expr
    if isinstance(expr, Index):
        yield from walk_exprs(expr.base)
        yield from walk_exprs(expr.index)
    elif isinstance(expr, Field):
        yield from walk_exprs(expr.base)
    elif isinstance(expr, Binary):
        yield from walk_exprs(expr.lhs)
        yield from walk_exprs(expr.rhs)
    elif isinstance(expr, Unary):
        yield from walk_exprs(expr.operand)
    elif isinstance(expr, Call):
        for a in expr.args:
            yield from walk_exprs(a)


def all_exprs(stmt: Stmt):
    """Yield every expression anywhere below stmt."""
    for s in walk_stmts(stmt):
        for e in stmt_exprs(s):
            yield from walk_exprs(e)
