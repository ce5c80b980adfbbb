"""Pretty-printing: determinism, round trips, the c99 dialect, diffs."""

import pytest

from soalens.bench import kernel_case
from soalens.emit import EmitConfig, diff_report, emit, emit_expr
from soalens.parser import parse, parse_expr
from soalens.transform import strip, transform_unit

from conftest import KERNELS, TINY_SRC, parse_src


def test_emission_is_deterministic(tiny_unit):
    assert emit(tiny_unit) == emit(tiny_unit)
    cfg = EmitConfig(dialect="c99", annotate=True)
    assert emit(tiny_unit, cfg) == emit(tiny_unit, cfg)


def test_reparse_fidelity(tiny_unit):
    assert parse(emit(tiny_unit)) == tiny_unit


@pytest.mark.parametrize("name", KERNELS)
def test_corpus_fixed_point(name):
    unit = kernel_case(name).load()
    once = emit(unit)
    assert emit(parse(once)) == once


def test_transformed_unit_fixed_point(tiny_unit):
    once = emit(transform_unit(tiny_unit).unit)
    assert emit(parse(once)) == once


def test_empty_unit():
    from soalens.nodes import SourceUnit
    text = emit(SourceUnit())
    assert text.strip() == ""
    assert parse(text) == SourceUnit()


def test_clean_unit_has_no_reserved_names(tiny_unit):
    assert "_soa" not in emit(tiny_unit)
    assert "_soa" not in emit(strip(tiny_unit))


def test_expression_printing_minimal_parens():
    assert emit_expr(parse_expr("(a * b) + c")) == "a * b + c"
    assert emit_expr(parse_expr("a * (b + c)")) == "a * (b + c)"
    assert emit_expr(parse_expr("-(a + b)")) == "-(a + b)"
    assert emit_expr(parse_expr("a / (b / c)")) == "a / (b / c)"
    assert emit_expr(parse_expr("(a / b) / c")) == "a / b / c"
    assert emit_expr(parse_expr("!(a && b) || c")) == "!(a && b) || c"


def test_expression_round_trip_preserves_structure():
    for src in ("a - (b - c)", "a - b - c", "pow(x, 2.0) * 0.5",
                "p.pos[0] + q[i + 1].vel[2]"):
        e = parse_expr(src)
        assert parse_expr(emit_expr(e)) == e


def test_c99_rendering_of_transformed_drift(tiny_unit):
    text = emit(transform_unit(tiny_unit).unit, EmitConfig(dialect="c99"))
    assert "typedef struct {" in text
    assert "} Pt;" in text
    assert "#include <stdint.h>" in text and "#include <stdbool.h>" in text
    assert "double *pos0_soa0_t = (double *)calloc((size_t)(size), sizeof(double));" in text
    assert "bool *updated_soa0_t = (bool *)calloc((size_t)(size), sizeof(bool));" in text
    assert "free(pos0_soa0_t);" in text
    assert "int64_t" in text  # loop counters
    assert "float64" not in text


def test_c99_annotate_marks_conversion_regions(tiny_unit):
    text = emit(transform_unit(tiny_unit).unit,
                EmitConfig(dialect="c99", annotate=True))
    assert "/* temporary out-of-place array */" in text
    assert "/* out-of-place AoS-SoA conversion */" in text
    assert "/* SoA-AoS conversion due to outputs statement */" in text
    plain = emit(transform_unit(tiny_unit).unit, EmitConfig(dialect="c99"))
    assert "/*" not in plain


def test_minic_annotate_comments_roundtrip_away(tiny_unit):
    t = transform_unit(tiny_unit).unit
    text = emit(t, EmitConfig(annotate=True))
    assert "out-of-place" in text
    # comments are lexed away, so the annotated text reparses to the same tree
    assert parse(text) == t


def test_c99_reference_binding_becomes_pointer_alias():
    src = """
        record Pt { float64 x; };
        void f(Pt *ps, int64 n) {
            for (int64 i = 0; i < n; i += 1) {
                ref Pt p = ps[i];
                p.x = p.x + 1.0;
            }
        }
    """
    text = emit(parse_src(src), EmitConfig(dialect="c99"))
    assert "Pt *p = &ps[i];" in text
    assert "p->x = p->x + 1.0;" in text


def test_c99_builtin_helpers_emitted_only_when_used():
    with_abs = parse_src("void f(float64 x) { x = abs(x) + min(x, 1.0); }")
    text = emit(with_abs, EmitConfig(dialect="c99"))
    assert "minic_abs" in text and "minic_min" in text
    without = parse_src("void f(float64 x) { x = x + 1.0; }")
    assert "minic_" not in emit(without, EmitConfig(dialect="c99"))


def test_c99_math_calls_map_to_libm():
    unit = parse_src("void f(float64 x) { x = sqrt(x) + pow(x, 2.0); }")
    text = emit(unit, EmitConfig(dialect="c99"))
    assert "#include <math.h>" in text
    assert "sqrt(x)" in text and "pow(x, 2.0)" in text


def test_diff_report_shapes(tiny_unit):
    before = emit(tiny_unit)
    after = emit(transform_unit(tiny_unit).unit)
    report = diff_report(before, after)
    assert report.startswith("--- before")
    removed = [l for l in report.splitlines() if l.startswith("-") and "[[" in l]
    added = [l for l in report.splitlines() if l.startswith("+") and "_soa0_t" in l]
    assert len(removed) == 4   # the four attribute lines
    assert added               # prologue/epilogue insertions


def test_diff_report_identical_inputs_is_empty(tiny_unit):
    text = emit(tiny_unit)
    assert diff_report(text, text) == ""


def test_diff_report_strip_only_removes_attribute_lines(tiny_unit):
    report = diff_report(emit(tiny_unit), emit(strip(tiny_unit)))
    changed = [l for l in report.splitlines()
               if l[:1] in "+-" and not l.startswith(("---", "+++"))]
    assert all(l.startswith("-") for l in changed)
    assert all("[[clang::" in l for l in changed)
    assert len(changed) == 4
