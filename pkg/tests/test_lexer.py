"""Token-level behavior: kinds, positions, comments, error cases."""

import pytest

from soalens.errors import LexError
from soalens.lexer import Token, tokenize


def texts(src):
    return [t.text for t in tokenize(src)[:-1]]  # drop eof


def test_compound_assignment_statement():
    toks = tokenize("p.pos[0] += p.vel[0] * dt;")
    got = [(t.kind, t.text) for t in toks]
    assert got == [
        ("ident", "p"), ("punct", "."), ("ident", "pos"),
        ("punct", "["), ("int", "0"), ("punct", "]"),
        ("punct", "+="),
        ("ident", "p"), ("punct", "."), ("ident", "vel"),
        ("punct", "["), ("int", "0"), ("punct", "]"),
        ("punct", "*"), ("ident", "dt"), ("punct", ";"),
        ("eof", ""),
    ]


def test_empty_input_is_just_eof():
    toks = tokenize("")
    assert len(toks) == 1
    assert toks[0].kind == "eof"


def test_attribute_token_run():
    toks = tokenize("[[clang::soa_conversion_inputs(pos, vel, updated)]]")
    got = [(t.kind, t.text) for t in toks[:-1]]
    assert got == [
        ("attr_open", "[["), ("ident", "clang"), ("punct", "::"),
        ("ident", "soa_conversion_inputs"),
        ("punct", "("), ("ident", "pos"), ("punct", ","),
        ("ident", "vel"), ("punct", ","), ("ident", "updated"),
        ("punct", ")"), ("attr_close", "]]"),
    ]


def test_double_bracket_always_lexes_as_attr_tokens():
    # maximal munch: the parser re-splits where a plain bracket is needed
    toks = tokenize("m[a[1]]")
    assert toks[-2].kind == "attr_close"
    assert tokenize("[[")[0].kind == "attr_open"


@pytest.mark.parametrize("op", ["==", "!=", "<=", ">=", "&&", "||",
                                "+=", "-=", "*=", "/=", "::"])
def test_two_char_punct_lexes_whole(op):
    toks = tokenize(op)
    assert [(t.kind, t.text) for t in toks[:-1]] == [("punct", op)]


def test_multi_punct_longest_first():
    assert texts("a<=b") == ["a", "<=", "b"]
    assert texts("a< =b") == ["a", "<", "=", "b"]


@pytest.mark.parametrize("lit, kind", [
    ("0", "int"),
    ("42", "int"),
    ("1.5", "float"),
    ("1.", "float"),
    ("2f", "float"),
    ("1.5e-3", "float"),
    ("3E+4", "float"),
    ("7e2", "float"),
])
def test_numeric_literal_kinds(lit, kind):
    toks = tokenize(lit)
    assert toks[0].kind == kind
    assert toks[0].text == lit


def test_comments_are_discarded():
    src = "a // line comment\n/* block\n comment */ b"
    assert texts(src) == ["a", "b"]


def test_line_and_column_tracking():
    toks = tokenize("a\n  bb\n/* x\ny */ c")
    a, bb, c = toks[0], toks[1], toks[2]
    assert (a.line, a.col) == (1, 1)
    assert (bb.line, bb.col) == (2, 3)
    assert c.line == 4
    assert bb.loc.line == 2


def test_token_str_forms():
    assert str(Token("ident", "dt")) == "ident('dt')"
    assert str(Token("eof", "")) == "eof"


@pytest.mark.parametrize("bad", ["1.5x", "12abc", "2e"])
def test_bad_numeric_literal(bad):
    with pytest.raises(LexError):
        tokenize(bad)


def test_illegal_character():
    with pytest.raises(LexError) as ei:
        tokenize("a @ b")
    assert "@" in str(ei.value)


def test_unterminated_block_comment():
    with pytest.raises(LexError) as ei:
        tokenize("a /* never closed")
    assert "unterminated" in str(ei.value)


def test_error_carries_location_and_path():
    with pytest.raises(LexError) as ei:
        tokenize("\n  $", path="k.minic")
    err = ei.value
    assert err.loc.line == 2
    assert str(err).startswith("k.minic:2:")
