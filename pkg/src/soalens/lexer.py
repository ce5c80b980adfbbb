"""Tokenizer for the kernel source language."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LexError, Loc

# longest first so  <=  never lexes as  <  =
_MULTI_PUNCT = ("::", "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=")
_SINGLE_PUNCT = set("(){}[];,.=<>+-*/!:")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | float | punct | attr_open | attr_close | eof
    text: str
    line: int = 0
    col: int = 0

    @property
    def loc(self) -> Loc:
        return Loc(self.line, self.col)

    def __str__(self) -> str:
        return f"{self.kind}({self.text!r})" if self.text else self.kind


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c == "_"


def _is_ident_char(c: str) -> bool:
    return c.isalnum() or c == "_"


def tokenize(src: str, path: str | None = None) -> list[Token]:
    """Lex src into a token list ending with an eof token.

    Contiguous `[[` and `]]` always lex as attribute brackets (maximal munch);
    the parser re-splits a `]]` into two `]` where a plain bracket is legal,
    mirroring how C++ parsers handle `>>`.
    """
    toks: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(src)

    def err(msg: str, l: int, c: int) -> LexError:
        return LexError(msg, Loc(l, c), path)

    while i < n:
        c = src[i]

        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue

        # comments are discarded
        if c == "/" and i + 1 < n and src[i + 1] == "/":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c == "/" and i + 1 < n and src[i + 1] == "*":
            sl, sc = line, col
            i += 2
            col += 2
            while True:
                if i + 1 >= n:
                    raise err("unterminated block comment", sl, sc)
                if src[i] == "*" and src[i + 1] == "/":
                    i += 2
                    col += 2
                    break
                if src[i] == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
                i += 1
            continue

        if _is_ident_start(c):
            start = i
            while i < n and _is_ident_char(src[i]):
                i += 1
            text = src[start:i]
            toks.append(Token("ident", text, line, col))
            col += i - start
            continue

        if c.isdigit():
            start = i
            sl, sc = line, col
            while i < n and src[i].isdigit():
                i += 1
            is_float = False
            if i < n and src[i] == ".":
                is_float = True
                i += 1
                while i < n and src[i].isdigit():
                    i += 1
            if i < n and src[i] in "eE":
                j = i + 1
                if j < n and src[j] in "+-":
                    j += 1
                if j < n and src[j].isdigit():
                    is_float = True
                    i = j
                    while i < n and src[i].isdigit():
                        i += 1
            if i < n and src[i] in "fF":
                is_float = True
                i += 1
            text = src[start:i]
            if i < n and _is_ident_char(src[i]):
                raise err(f"invalid numeric literal starting with {text!r}", sl, sc)
            toks.append(Token("float" if is_float else "int", text, sl, sc))
            col += i - start
            continue

        if c == "[" and i + 1 < n and src[i + 1] == "[":
            toks.append(Token("attr_open", "[[", line, col))
            i += 2
            col += 2
            continue
        if c == "]" and i + 1 < n and src[i + 1] == "]":
            toks.append(Token("attr_close", "]]", line, col))
            i += 2
            col += 2
            continue

        two = src[i : i + 2]
        if two in _MULTI_PUNCT:
            toks.append(Token("punct", two, line, col))
            i += 2
            col += 2
            continue
        if c in _SINGLE_PUNCT:
            toks.append(Token("punct", c, line, col))
            i += 1
            col += 1
            continue

        raise err(f"illegal character {c!r}", line, col)

    toks.append(Token("eof", "", line, col))
    return toks
