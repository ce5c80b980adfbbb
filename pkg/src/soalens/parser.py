"""Recursive descent parser producing the trees defined in nodes.py.

The grammar is LL(2) except for one wrinkle: a close bracket inside an
attribute argument can collide with the lexer's maximal-munch `]]` token
(think `start_idx(offs[0])`). Where a plain `]` is expected and the current
token is `]]`, the parser splits it in place, the same trick C++ front ends
use for `>>` closing nested templates.
"""

from __future__ import annotations

from .errors import Loc, ParseError
from .lexer import Token, tokenize
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
    FieldDecl,
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
    SCALAR_TYPES,
    SourceUnit,
    Stmt,
    TypeRef,
    Unary,
    VarDecl,
)

KEYWORDS = frozenset(
    {"record", "ref", "for", "if", "else", "return", "free", "true", "false", "void"}
) | SCALAR_TYPES

_ASSIGN_OPS = ("=", "+=", "-=", "*=", "/=")


class Parser:
    def __init__(self, tokens: list[Token], path: str | None = None):
        self.toks = list(tokens)
        self.path = path
        self.i = 0
        self.records: set[str] = set()

    # ---- cursor helpers ----

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        j = min(self.i + k, len(self.toks) - 1)
        return self.toks[j]

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.cur
        return t.kind == kind and (text is None or t.text == text)

    def at_punct(self, text: str) -> bool:
        return self.at("punct", text)

    def at_kw(self, word: str) -> bool:
        return self.at("ident", word)

    def eat(self) -> Token:
        t = self.cur
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        t = tok or self.cur
        found = str(t) if t.kind != "eof" else "end of input"
        return ParseError(f"{msg}, found {found}", t.loc, self.path)

    def expect(self, kind: str, text: str | None = None) -> Token:
        if self.at(kind, text):
            return self.eat()
        want = repr(text) if text is not None else kind
        raise self.error(f"expected {want}")

    def expect_punct(self, text: str) -> Token:
        if text == "]" and self.at("attr_close"):
            # split `]]` into two `]`
            t = self.cur
            self.toks[self.i] = Token("punct", "]", t.line, t.col + 1)
            return Token("punct", "]", t.line, t.col)
        return self.expect("punct", text)

    def expect_ident(self, what: str = "identifier") -> Token:
        if self.at("ident") and self.cur.text not in KEYWORDS:
            return self.eat()
        raise self.error(f"expected {what}")

    # ---- top level ----

    def parse_unit(self) -> SourceUnit:
        unit = SourceUnit(path=self.path)
        while not self.at("eof"):
            if self.at_kw("record"):
                rec = self.parse_record()
                unit.records.append(rec)
                self.records.add(rec.name)
            elif (
                self.at("ident")
                and self.cur.text in SCALAR_TYPES
                and not (self.peek(2).kind == "punct" and self.peek(2).text == "(")
            ):
                decl = self.parse_var_decl()
                if decl.length is not None:
                    raise ParseError("global declarations must be scalars", decl.loc, self.path)
                self.expect_punct(";")
                unit.globals.append(decl)
            else:
                unit.functions.append(self.parse_function())
        return unit

    def parse_record(self) -> RecordDef:
        loc = self.cur.loc
        self.expect("ident", "record")
        name = self.expect_ident("record name")
        self.expect_punct("{")
        fields: list[FieldDecl] = []
        while not self.at_punct("}"):
            fields.append(self.parse_field_decl())
        self.expect_punct("}")
        self.expect_punct(";")
        return RecordDef(name.text, fields, loc=loc)

    def parse_field_decl(self) -> FieldDecl:
        loc = self.cur.loc
        tname = self.parse_type_name()
        name = self.expect_ident("field name")
        count = 0
        if self.at_punct("["):
            self.eat()
            lit = self.expect("int")
            count = int(lit.text)
            if count <= 0:
                raise self.error("array field length must be positive", lit)
            self.expect_punct("]")
        self.expect_punct(";")
        return FieldDecl(name.text, TypeRef(tname, count), loc=loc)

    def parse_type_name(self) -> str:
        t = self.cur
        if t.kind == "ident" and (t.text in SCALAR_TYPES or t.text not in KEYWORDS):
            self.eat()
            return t.text
        raise self.error("expected type name")

    def parse_function(self) -> FunctionDef:
        loc = self.cur.loc
        if self.at_kw("void"):
            ret = self.eat().text
        elif self.at("ident") and self.cur.text in SCALAR_TYPES:
            ret = self.eat().text
        else:
            raise self.error("expected return type")
        name = self.expect_ident("function name")
        self.expect_punct("(")
        params: list[Param] = []
        if not self.at_punct(")"):
            params.append(self.parse_param())
            while self.at_punct(","):
                self.eat()
                params.append(self.parse_param())
        self.expect_punct(")")
        body = self.parse_block()
        return FunctionDef(name.text, ret, params, body, loc=loc)

    def parse_param(self) -> Param:
        loc = self.cur.loc
        tname = self.parse_type_name()
        is_base = False
        if self.at_punct("*"):
            self.eat()
            is_base = True
        name = self.expect_ident("parameter name")
        return Param(name.text, TypeRef(tname), is_base, loc=loc)

    # ---- statements ----

    def parse_block(self) -> Block:
        loc = self.cur.loc
        self.expect_punct("{")
        stmts: list[Stmt] = []
        while not self.at_punct("}"):
            stmts.append(self.parse_stmt())
        self.expect_punct("}")
        return Block(stmts, loc=loc)

    def parse_stmt(self) -> Stmt:
        if self.at("attr_open"):
            return self.parse_attributed_for()
        if self.at_punct("{"):
            return self.parse_block()
        if self.at_kw("if"):
            return self.parse_if()
        if self.at_kw("for"):
            return self.parse_for()
        if self.at_kw("return"):
            loc = self.eat().loc
            value = None if self.at_punct(";") else self.parse_expr()
            self.expect_punct(";")
            return Return(value, loc=loc)
        if self.at_kw("free"):
            loc = self.eat().loc
            self.expect_punct("(")
            name = self.expect_ident("buffer name")
            self.expect_punct(")")
            self.expect_punct(";")
            return Free(name.text, loc=loc)
        if self.at_kw("ref"):
            return self.parse_ref_bind()
        if self.at("ident") and self.cur.text in SCALAR_TYPES:
            decl = self.parse_var_decl()
            self.expect_punct(";")
            return decl
        stmt = self.parse_assign_or_expr()
        self.expect_punct(";")
        return stmt

    def parse_var_decl(self) -> VarDecl:
        loc = self.cur.loc
        tname = self.eat().text  # scalar type keyword
        name = self.expect_ident("variable name")
        if self.at_punct("["):
            self.eat()
            length = self.parse_expr()
            self.expect_punct("]")
            return VarDecl(TypeRef(tname), name.text, length=length, loc=loc)
        init = None
        if self.at_punct("="):
            self.eat()
            init = self.parse_expr()
        return VarDecl(TypeRef(tname), name.text, init=init, loc=loc)

    def parse_ref_bind(self) -> RefBind:
        loc = self.eat().loc  # ref
        rec = self.expect_ident("record name")
        name = self.expect_ident("reference name")
        self.expect_punct("=")
        target = self.parse_expr()
        self.expect_punct(";")
        return RefBind(rec.text, name.text, target, loc=loc)

    def parse_assign_or_expr(self) -> Stmt:
        loc = self.cur.loc
        e = self.parse_expr()
        if self.at("punct") and self.cur.text in _ASSIGN_OPS:
            op = self.eat().text
            if not isinstance(e, (Ident, Index, Field)):
                raise self.error("left side of assignment is not assignable")
            value = self.parse_expr()
            return Assign(e, op, value, loc=loc)
        return ExprStmt(e, loc=loc)

    def parse_if(self) -> If:
        loc = self.eat().loc  # if
        self.expect_punct("(")
        cond = self.parse_expr()
        self.expect_punct(")")
        then = self.parse_block()
        orelse = None
        if self.at_kw("else"):
            self.eat()
            if self.at_kw("if"):
                nested = self.parse_if()
                orelse = Block([nested], loc=nested.loc)
            else:
                orelse = self.parse_block()
        return If(cond, then, orelse, loc=loc)

    def parse_for(self, attrs: list[Attribute] | None = None) -> For:
        loc = self.eat().loc  # for
        self.expect_punct("(")
        init: Stmt | None = None
        if not self.at_punct(";"):
            if self.at("ident") and self.cur.text in SCALAR_TYPES:
                init = self.parse_var_decl()
            else:
                init = self.parse_assign_or_expr()
        self.expect_punct(";")
        cond = None if self.at_punct(";") else self.parse_expr()
        self.expect_punct(";")
        step: Stmt | None = None
        if not self.at_punct(")"):
            step = self.parse_assign_or_expr()
        self.expect_punct(")")
        body = self.parse_block()
        return For(init, cond, step, body, attrs=attrs or [], loc=loc)

    def parse_attributed_for(self) -> For:
        attrs: list[Attribute] = []
        while self.at("attr_open"):
            attrs.extend(self.parse_attr_group())
        if not self.at_kw("for"):
            raise self.error("attributes must be followed by a for loop")
        return self.parse_for(attrs)

    # ---- attributes ----

    def parse_attr_group(self) -> list[Attribute]:
        self.expect("attr_open")
        attrs = [self.parse_attribute()]
        while self.at_punct(","):
            self.eat()
            attrs.append(self.parse_attribute())
        self.expect("attr_close")
        return attrs

    def parse_attribute(self) -> Attribute:
        loc = self.cur.loc
        first = self.expect("ident")
        ns = ""
        name = first.text
        if self.at_punct("::"):
            self.eat()
            ns = first.text
            name = self.expect("ident").text
        attr = Attribute(ns, name, loc=loc)
        if not self.at_punct("("):
            return attr
        if attr.known:
            self.eat()
            if not self.at_punct(")"):
                attr.args.append(self.parse_expr())
                while self.at_punct(","):
                    self.eat()
                    attr.args.append(self.parse_expr())
            self.expect_punct(")")
            attr.had_parens = True
        else:
            # unknown attribute: keep raw lexemes across balanced parens
            attr.raw_args = self._skim_raw_args()
            attr.had_parens = True
        return attr

    def _skim_raw_args(self) -> list[str]:
        self.expect_punct("(")
        depth = 1
        texts: list[str] = []
        while depth > 0:
            t = self.cur
            if t.kind == "eof":
                raise self.error("unterminated attribute argument list")
            if t.kind == "punct" and t.text == "(":
                depth += 1
            elif t.kind == "punct" and t.text == ")":
                depth -= 1
                if depth == 0:
                    self.eat()
                    break
            texts.append(t.text)
            self.eat()
        return texts

    # ---- expressions ----

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        e = self.parse_and()
        while self.at_punct("||"):
            loc = self.eat().loc
            e = Binary("||", e, self.parse_and(), loc=loc)
        return e

    def parse_and(self) -> Expr:
        e = self.parse_cmp()
        while self.at_punct("&&"):
            loc = self.eat().loc
            e = Binary("&&", e, self.parse_cmp(), loc=loc)
        return e

    def parse_cmp(self) -> Expr:
        e = self.parse_add()
        while self.at("punct") and self.cur.text in ("<", "<=", ">", ">=", "==", "!="):
            op = self.eat()
            e = Binary(op.text, e, self.parse_add(), loc=op.loc)
        return e

    def parse_add(self) -> Expr:
        e = self.parse_mul()
        while self.at("punct") and self.cur.text in ("+", "-"):
            op = self.eat()
            e = Binary(op.text, e, self.parse_mul(), loc=op.loc)
        return e

    def parse_mul(self) -> Expr:
        e = self.parse_unary()
        while self.at("punct") and self.cur.text in ("*", "/"):
            op = self.eat()
            e = Binary(op.text, e, self.parse_unary(), loc=op.loc)
        return e

    def parse_unary(self) -> Expr:
        if self.at("punct") and self.cur.text in ("-", "!"):
            op = self.eat()
            return Unary(op.text, self.parse_unary(), loc=op.loc)
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        e = self.parse_primary()
        while True:
            if self.at_punct("["):
                loc = self.eat().loc
                idx = self.parse_expr()
                self.expect_punct("]")
                e = Index(e, idx, loc=loc)
            elif self.at_punct("."):
                loc = self.eat().loc
                name = self.expect_ident("field name")
                e = Field(e, name.text, loc=loc)
            else:
                return e

    def parse_primary(self) -> Expr:
        t = self.cur
        if t.kind == "int":
            self.eat()
            return IntLit(int(t.text), loc=t.loc)
        if t.kind == "float":
            self.eat()
            text = t.text
            is_f32 = text[-1] in "fF"
            if is_f32:
                text = text[:-1]
            return FloatLit(float(text), is_f32, loc=t.loc)
        if t.kind == "ident" and t.text in ("true", "false"):
            self.eat()
            return BoolLit(t.text == "true", loc=t.loc)
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.eat()
            if self.at_punct("("):
                self.eat()
                args: list[Expr] = []
                if not self.at_punct(")"):
                    args.append(self.parse_expr())
                    while self.at_punct(","):
                        self.eat()
                        args.append(self.parse_expr())
                self.expect_punct(")")
                return Call(t.text, args, loc=t.loc)
            return Ident(t.text, loc=t.loc)
        if self.at_punct("("):
            self.eat()
            e = self.parse_expr()
            self.expect_punct(")")
            return e
        raise self.error("expected expression")


def parse_tokens(tokens: list[Token], path: str | None = None) -> SourceUnit:
    """Parse a lexed token stream into a source unit."""
    return Parser(tokens, path).parse_unit()


def parse(src: str, path: str | None = None) -> SourceUnit:
    """Lex and parse a full source unit."""
    return Parser(tokenize(src, path), path).parse_unit()


def parse_file(path: str) -> SourceUnit:
    """Parse one source file; diagnostics carry the file path."""
    from .errors import FileError

    try:
        with open(path, encoding="utf-8") as fh:
            src = fh.read()
    except OSError as exc:
        raise FileError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return parse(src, str(path))


def parse_expr(src: str, path: str | None = None) -> Expr:
    """Parse a single expression; trailing tokens are an error."""
    p = Parser(tokenize(src, path), path)
    e = p.parse_expr()
    if not p.at("eof"):
        raise p.error("trailing input after expression")
    return e
