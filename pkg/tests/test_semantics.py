"""Annotation binding, view sets, aliases and call legality."""

import pytest

from soalens import nodes
from soalens.errors import (AliasError, IllegalCallError, MissingSizeError,
                            UnknownFieldError, UnknownTargetError)
from soalens.semantics import analyze
from soalens.transform import transform_unit

from conftest import TINY_SRC, parse_src


def sole_spec(unit):
    a = analyze(unit)
    assert a.ok, [str(d) for d in a.diagnostics]
    assert len(a.specs) == 1
    return a.specs[0]


def codes(unit):
    return [d.code for d in analyze(unit).diagnostics]


def test_drift_spec_sets(tiny_unit):
    spec = sole_spec(tiny_unit)
    assert spec.direction == "aos_to_soa"
    assert spec.target == "particles"
    assert spec.inputs == ("pos", "vel", "updated")
    assert spec.outputs == ("pos", "updated")
    assert spec.union_fields == ("pos", "vel", "updated")  # record decl order
    assert [l.name for l in spec.input_leaves] == [
        "pos0", "pos1", "vel0", "vel1", "updated"]
    assert [l.name for l in spec.output_leaves] == ["pos0", "pos1", "updated"]
    assert isinstance(spec.size_expr, nodes.Ident)
    assert spec.size_expr.name == "size"
    assert not spec.has_start
    assert spec.start_expr == nodes.IntLit(0)


def test_union_contains_no_extra_leaves(kernel):
    spec = sole_spec(kernel.load())
    union = set(spec.union_leaves)
    assert set(spec.input_leaves) <= union
    assert set(spec.output_leaves) <= union
    assert union == set(spec.input_leaves) | set(spec.output_leaves)


def test_missing_size_rejected():
    src = TINY_SRC.replace("[[clang::soa_conversion_target_size(size)]]\n", "")
    unit = parse_src(src)
    assert codes(unit) == ["missing-size"]
    with pytest.raises(MissingSizeError):
        transform_unit(unit)


def test_unknown_input_field_rejected():
    src = TINY_SRC.replace("soa_conversion_inputs(pos,", "soa_conversion_inputs(posx,")
    unit = parse_src(src)
    assert codes(unit) == ["unknown-field"]
    with pytest.raises(UnknownFieldError):
        transform_unit(unit)


def test_target_must_be_record_array_parameter():
    for bad in ("dt", "nosuch"):
        src = TINY_SRC.replace("soa_conversion_target(particles)",
                               f"soa_conversion_target({bad})")
        unit = parse_src(src)
        assert codes(unit) == ["unknown-target"]
        with pytest.raises(UnknownTargetError):
            transform_unit(unit)


def test_absent_inputs_means_whole_record():
    src = TINY_SRC.replace(
        "[[clang::soa_conversion_inputs(pos, vel, updated)]]\n    ", "")
    spec = sole_spec(parse_src(src))
    assert spec.inputs == ("pos", "vel", "updated")
    assert len(spec.input_leaves) == 5


def test_absent_outputs_means_nothing_written_back():
    src = TINY_SRC.replace(
        "[[clang::soa_conversion_outputs(pos, updated)]]\n    ", "")
    spec = sole_spec(parse_src(src))
    assert spec.outputs == ()
    assert spec.output_leaves == ()


def test_explicitly_empty_inputs():
    src = TINY_SRC.replace("soa_conversion_inputs(pos, vel, updated)",
                           "soa_conversion_inputs()")
    unit = parse_src(src)
    a = analyze(unit)
    assert a.ok, [str(d) for d in a.diagnostics]
    assert a.specs[0].inputs == ()


def test_start_idx_binding():
    src = TINY_SRC.replace(
        "[[clang::soa_conversion_target_size(size)]]",
        "[[clang::soa_conversion_target_size(size)]]\n"
        "    [[clang::soa_conversion_start_idx(start)]]").replace(
        "int64 size, float64 dt", "int64 size, int64 start, float64 dt")
    spec = sole_spec(parse_src(src))
    assert spec.has_start
    assert isinstance(spec.start_expr, nodes.Ident)
    assert spec.start_expr.name == "start"


def test_alias_map_binds_reference():
    spec = sole_spec(parse_src(TINY_SRC))
    assert set(spec.aliases) == {"p"}
    # the map holds the element index expression
    assert spec.aliases["p"] == nodes.Ident("i")


def test_no_reference_bindings_empty_alias_map():
    src = """
        record Pt { float64 x; };
        void f(Pt *ps, int64 size) {
            [[clang::soa_conversion_target(ps)]]
            [[clang::soa_conversion_target_size(size)]]
            [[clang::soa_conversion_outputs(x)]]
            for (int64 i = 0; i < size; i += 1) {
                ps[i].x = ps[i].x + 1.0;
            }
        }
    """
    assert sole_spec(parse_src(src)).aliases == {}


def test_alias_with_shifted_index_is_fine():
    src = TINY_SRC.replace("particles[i];", "particles[i + 1];")
    spec = sole_spec(parse_src(src))
    assert "p" in spec.aliases


def test_alias_reassignment_rejected():
    src = TINY_SRC.replace(
        "p.updated = true;",
        "p.updated = true;\n        ref Pt p = particles[0];")
    unit = parse_src(src)
    assert "alias" in codes(unit)
    with pytest.raises(AliasError):
        transform_unit(unit)


def test_whole_element_call_rejected_in_annotated_loop():
    src = """
        record Pt { float64 x; };
        void foo(Pt q) {
        }
        void f(Pt *ps, int64 size) {
            [[clang::soa_conversion_target(ps)]]
            [[clang::soa_conversion_target_size(size)]]
            [[clang::soa_conversion_outputs(x)]]
            for (int64 i = 0; i < size; i += 1) {
                foo(ps[i]);
                ps[i].x = 1.0;
            }
        }
    """
    unit = parse_src(src)
    assert codes(unit) == ["illegal-call"]
    with pytest.raises(IllegalCallError):
        transform_unit(unit)


def test_whole_element_call_through_alias_rejected():
    src = """
        record Pt { float64 x; };
        void foo(Pt q) {
        }
        void f(Pt *ps, int64 size) {
            [[clang::soa_conversion_target(ps)]]
            [[clang::soa_conversion_target_size(size)]]
            [[clang::soa_conversion_outputs(x)]]
            for (int64 i = 0; i < size; i += 1) {
                ref Pt p = ps[i];
                foo(p);
                p.x = 1.0;
            }
        }
    """
    assert codes(parse_src(src)) == ["illegal-call"]


def test_per_leaf_call_arguments_are_legal():
    src = """
        record Pt { float64 pos[2]; float64 m; };
        float64 foo(float64 a, float64 b) {
            return a + b;
        }
        void f(Pt *ps, int64 size) {
            [[clang::soa_conversion_target(ps)]]
            [[clang::soa_conversion_target_size(size)]]
            [[clang::soa_conversion_outputs(m)]]
            for (int64 i = 0; i < size; i += 1) {
                ps[i].m = foo(ps[i].pos[0], ps[i].pos[1]);
            }
        }
    """
    assert analyze(parse_src(src)).ok


def test_whole_element_call_fine_outside_annotated_loop():
    src = """
        record Pt { float64 x; };
        void foo(Pt q) {
        }
        void f(Pt *ps, int64 size) {
            for (int64 i = 0; i < size; i += 1) {
                foo(ps[i]);
            }
        }
    """
    assert analyze(parse_src(src)).ok


def test_mirror_direction_spec():
    src = """
        record Pair { float64 a; float64 b; };
        void scale(float64 *a, float64 *b, int64 size, float64 q) {
            [[clang::aos_conversion_target(Pair)]]
            [[clang::soa_conversion_target_size(size)]]
            [[clang::aos_conversion_outputs(a, b)]]
            for (int64 i = 0; i < size; i += 1) {
                a[i] = a[i] * q;
                b[i] = b[i] + a[i];
            }
        }
    """
    spec = sole_spec(parse_src(src))
    assert spec.direction == "soa_to_aos"
    assert spec.target is None
    assert spec.leaf_params == {"a": "a", "b": "b"}
    assert spec.layout.name == "Pair"


def test_mirror_target_must_name_a_record():
    src = """
        void scale(float64 *a, int64 size) {
            [[clang::aos_conversion_target(Nope)]]
            [[clang::soa_conversion_target_size(size)]]
            [[clang::aos_conversion_outputs(a)]]
            for (int64 i = 0; i < size; i += 1) {
                a[i] = a[i] * 2.0;
            }
        }
    """
    assert codes(parse_src(src)) == ["unknown-target"]


def test_nested_annotated_loops_rejected():
    src = """
        record Pt { float64 x; };
        void f(Pt *ps, int64 size) {
            [[clang::soa_conversion_target(ps)]]
            [[clang::soa_conversion_target_size(size)]]
            [[clang::soa_conversion_outputs(x)]]
            for (int64 i = 0; i < size; i += 1) {
                [[clang::soa_conversion_target(ps)]]
                [[clang::soa_conversion_target_size(size)]]
                [[clang::soa_conversion_outputs(x)]]
                for (int64 j = 0; j < size; j += 1) {
                    ps[j].x = ps[j].x + 1.0;
                }
            }
        }
    """
    assert codes(parse_src(src))  # at least one diagnostic, no crash


def test_duplicate_attribute_rejected(tiny_unit):
    src = TINY_SRC.replace(
        "[[clang::soa_conversion_target_size(size)]]",
        "[[clang::soa_conversion_target_size(size)]]\n"
        "    [[clang::soa_conversion_target_size(size)]]")
    assert "semantic" in codes(parse_src(src))


def test_analyze_is_idempotent(kernel):
    unit = kernel.load()
    a1, a2 = analyze(unit), analyze(unit)
    assert [str(d) for d in a1.diagnostics] == [str(d) for d in a2.diagnostics]
    assert len(a1.specs) == len(a2.specs)
    for s1, s2 in zip(a1.specs, a2.specs):
        assert (s1.direction, s1.target, s1.inputs, s1.outputs) == \
               (s2.direction, s2.target, s2.inputs, s2.outputs)
        assert s1.size_expr == s2.size_expr


def test_type_errors_are_reported():
    assert "semantic" in codes(parse_src("void f(float64 x) { x = y; }"))
    assert "type" in codes(parse_src("void f(float64 x) { x = sqrt(1.0, 2.0); }"))
    assert "type" in codes(parse_src("void f(float64 x) { x[0] = 1.0; }"))
