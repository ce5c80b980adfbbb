"""Grammar coverage: attribute attachment, statements, round-trip, errors."""

import pytest

from soalens import nodes
from soalens.emit import emit
from soalens.errors import FileError, ParseError
from soalens.parser import parse, parse_expr, parse_file

from conftest import TINY_SRC, parse_src


def only_for(fn):
    loops = [s for s in nodes.walk_stmts(fn.body) if isinstance(s, nodes.For)]
    assert len(loops) == 1
    return loops[0]


def test_annotated_drift_shape():
    unit = parse_src(TINY_SRC)
    assert [r.name for r in unit.records] == ["Pt"]
    assert [f.name for f in unit.functions] == ["drift2"]
    fn = unit.functions[0]
    assert [p.name for p in fn.params] == ["particles", "size", "dt"]
    assert fn.params[0].is_array_base
    assert not fn.params[1].is_array_base

    loop = only_for(fn)
    attrs = {a.name: a for a in loop.attrs}
    assert set(attrs) == {
        "soa_conversion_target", "soa_conversion_target_size",
        "soa_conversion_inputs", "soa_conversion_outputs",
    }
    assert all(a.ns == "clang" and a.known for a in loop.attrs)
    target = attrs["soa_conversion_target"]
    assert isinstance(target.args[0], nodes.Ident)
    assert target.args[0].name == "particles"
    inputs = attrs["soa_conversion_inputs"]
    assert [a.name for a in inputs.args] == ["pos", "vel", "updated"]
    outputs = attrs["soa_conversion_outputs"]
    assert [a.name for a in outputs.args] == ["pos", "updated"]


def test_unannotated_loop_has_no_attrs():
    unit = parse_src("""
        void f(int64 n) {
            for (int64 i = 0; i < n; i += 1) {
            }
        }
    """)
    assert only_for(unit.functions[0]).attrs == []


def test_attrs_must_precede_a_for():
    with pytest.raises(ParseError):
        parse_src("""
            void f(bool c) {
                [[clang::soa_conversion_target(x)]]
                if (c) {
                }
            }
        """)


def test_attrs_at_end_of_block_rejected():
    with pytest.raises(ParseError):
        parse_src("void f() { [[clang::soa_conversion_target(x)]] }")


def test_unknown_attribute_is_kept_but_not_known():
    unit = parse_src("""
        void f(int64 n) {
            [[acme::vectorize(8)]]
            for (int64 i = 0; i < n; i += 1) {
            }
        }
    """)
    a, = only_for(unit.functions[0]).attrs
    assert (a.ns, a.name) == ("acme", "vectorize")
    assert not a.known


def test_record_only_unit():
    unit = parse_src("record R { float64 x; };")
    assert len(unit.records) == 1
    assert unit.functions == []


def test_record_requires_trailing_semicolon():
    with pytest.raises(ParseError):
        parse_src("record R { float64 x; }")


def test_ref_binding_statement():
    unit = parse_src(TINY_SRC)
    body = only_for(unit.functions[0]).body
    bind = body.stmts[0]
    assert isinstance(bind, nodes.RefBind)
    assert bind.name == "p"
    assert isinstance(bind.target, nodes.Index)
    assert bind.target.base.name == "particles"


def test_unary_binds_tighter_than_binary():
    e = parse_expr("-a * b")
    assert isinstance(e, nodes.Binary) and e.op == "*"
    assert isinstance(e.lhs, nodes.Unary) and e.lhs.op == "-"

    e = parse_expr("!a && b")
    assert isinstance(e, nodes.Binary) and e.op == "&&"
    assert isinstance(e.lhs, nodes.Unary) and e.lhs.op == "!"


def test_precedence_ladder():
    e = parse_expr("a + b * c")
    assert e.op == "+" and e.rhs.op == "*"
    e = parse_expr("a < b == c")
    assert e.op == "==" and e.lhs.op == "<"
    e = parse_expr("a || b && c")
    assert e.op == "||" and e.rhs.op == "&&"


def test_double_bracket_resplit_in_index_context():
    # tokenizes as attr_close, parser must treat it as two plain brackets
    unit = parse_src("""
        void f(float64 *m, int64 *a) {
            m[a[1]] = m[a[0]];
        }
    """)
    st = unit.functions[0].body.stmts[0]
    assert isinstance(st.lvalue, nodes.Index)
    assert isinstance(st.lvalue.index, nodes.Index)


def test_call_statement_and_expression():
    unit = parse_src("""
        float64 g(float64 x) {
            return x + 1.0;
        }
        void f(float64 *v, int64 n) {
            for (int64 i = 0; i < n; i += 1) {
                v[i] = g(v[i]) + sqrt(v[i]);
            }
        }
    """)
    assert [f.name for f in unit.functions] == ["g", "f"]


def test_globals_parse_before_functions():
    unit = parse_src("""
        float64 gdt = 0.25;
        void f() {
        }
    """)
    g, = unit.globals
    assert g.name == "gdt"
    assert isinstance(g.init, nodes.FloatLit)


def test_parse_error_reports_location():
    with pytest.raises(ParseError) as ei:
        parse("void f( {", "bad.minic")
    assert "bad.minic" in str(ei.value)


@pytest.mark.parametrize("bad", [
    "void f() { x = ; }",
    "void f() { for (;;) }",
    "record { float64 x; };",
    "void f() { ref Pt p 3; }",
])
def test_malformed_programs_rejected(bad):
    with pytest.raises(ParseError):
        parse(bad)


def test_parse_file_reads_and_tags_path(tmp_path):
    p = tmp_path / "k.minic"
    p.write_text(TINY_SRC)
    unit = parse_file(str(p))
    assert unit.path == str(p)
    assert len(unit.records) == 1 and len(unit.functions) == 1


def test_parse_file_missing_file():
    with pytest.raises(FileError):
        parse_file("/no/such/file.minic")


def test_structural_equality_ignores_locations():
    a = parse_src(TINY_SRC)
    b = parse(emit(a))
    assert a == b
    assert a.functions[0].loc != b.functions[0].loc or True  # locs not compared


def test_round_trip_is_stable(tiny_unit):
    text = emit(tiny_unit)
    assert parse(text) == tiny_unit
    assert emit(parse(text)) == text
