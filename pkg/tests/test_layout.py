"""Offsets, sizes and leaf flattening, cross-checked against ctypes."""

import ctypes

import pytest
from hypothesis import given, settings, strategies as st

from soalens.errors import RecordRecursionError, SemanticError
from soalens.layout import (build_layouts, element_footprint, record_layout,
                            view_footprint)

from conftest import TINY_SRC, parse_src

CT_SCALARS = {
    "float64": ctypes.c_double,
    "float32": ctypes.c_float,
    "int64": ctypes.c_int64,
    "int32": ctypes.c_int32,
    "bool": ctypes.c_bool,
}


def ctypes_struct(unit, name, cache=None):
    """Independent layout oracle: the same record as a ctypes.Structure."""
    cache = {} if cache is None else cache
    if name in cache:
        return cache[name]
    rec = unit.record(name)
    fields = []
    for f in rec.fields:
        base = (CT_SCALARS[f.type.name] if f.type.name in CT_SCALARS
                else ctypes_struct(unit, f.type.name, cache))
        if f.type.count:
            base = base * f.type.count
        fields.append((f.name, base))
    cls = type(name, (ctypes.Structure,), {"_fields_": fields})
    cache[name] = cls
    return cls


def assert_matches_ctypes(unit, name):
    lay = record_layout(unit, name)
    ct = ctypes_struct(unit, name)
    assert ctypes.sizeof(ct) == lay.size
    assert ctypes.alignment(ct) == lay.align
    for fname, slot in lay.slots.items():
        assert getattr(ct, fname).offset == slot.offset, fname
        assert getattr(ct, fname).size == slot.size, fname


def test_two_vector_record_hand_offsets():
    unit = parse_src(TINY_SRC)
    lay = record_layout(unit, "Pt")
    got = [(l.name, l.offset, l.type) for l in lay.leaves]
    assert got == [
        ("pos0", 0, "float64"),
        ("pos1", 8, "float64"),
        ("vel0", 16, "float64"),
        ("vel1", 24, "float64"),
        ("updated", 32, "bool"),
    ]
    assert lay.size == 40  # 33 payload bytes padded to the 8-byte align
    assert lay.align == 8
    assert_matches_ctypes(unit, "Pt")


def test_empty_record():
    unit = parse_src("record E { };")
    lay = record_layout(unit, "E")
    assert lay.size == 0
    assert lay.leaves == ()


def test_alignment_padding_between_fields():
    unit = parse_src("record M { bool b; float64 x; int32 k; };")
    lay = record_layout(unit, "M")
    assert [(l.name, l.offset) for l in lay.leaves] == [
        ("b", 0), ("x", 8), ("k", 16)]
    assert lay.size == 24
    assert_matches_ctypes(unit, "M")


def test_nested_record_array_flattening():
    unit = parse_src("""
        record Inner { float64 x; int32 k; };
        record Outer { Inner a[2]; bool c; };
    """)
    lay = record_layout(unit, "Outer")
    assert [(l.name, l.offset, l.type) for l in lay.leaves] == [
        ("a0_x", 0, "float64"), ("a0_k", 8, "int32"),
        ("a1_x", 16, "float64"), ("a1_k", 24, "int32"),
        ("c", 32, "bool"),
    ]
    assert lay.leaves[0].path == (("a", 0), ("x", None))
    assert lay.size == 40
    assert_matches_ctypes(unit, "Outer")


def test_leaf_name_collision_gets_suffix():
    unit = parse_src("record C { float64 pos[2]; float64 pos0; };")
    lay = record_layout(unit, "C")
    assert lay.leaf_names == ("pos0", "pos1", "pos0_2")


def test_leaves_under_and_leaf_lookup():
    unit = parse_src(TINY_SRC)
    lay = record_layout(unit, "Pt")
    assert [l.name for l in lay.leaves_under("pos")] == ["pos0", "pos1"]
    assert lay.leaf("vel1").offset == 24
    with pytest.raises(KeyError):
        lay.leaf("nope")


def test_recursive_record_rejected():
    unit = parse_src("record A { B b; };\nrecord B { A a; };")
    with pytest.raises(RecordRecursionError):
        build_layouts(unit)
    self_ref = parse_src("record S { S s; };")
    with pytest.raises(RecordRecursionError):
        build_layouts(self_ref)


def test_unknown_field_record_type():
    unit = parse_src("record A { Nope n; };")
    with pytest.raises(SemanticError):
        build_layouts(unit)


def test_duplicate_field_rejected():
    unit = parse_src("record D { float64 x; int32 x; };")
    with pytest.raises(SemanticError):
        build_layouts(unit)


def test_particle_record_size_and_leaf_count(particle):
    assert particle.size == 256
    assert particle.align == 8
    assert len(particle.leaves) == 39
    # spot offsets across the scalar tail and the aligned int block
    assert particle.slots["mass"].offset == 120
    assert particle.slots["id"].offset == 200
    assert particle.slots["neigh_count"].offset == 208
    assert particle.slots["updated"].offset == 216
    assert particle.slots["active"].offset == 217
    assert particle.slots["pad"].offset == 220


def test_particle_matches_ctypes(kernel):
    assert_matches_ctypes(kernel.load(), "Particle")


def test_view_footprint_hand_values():
    unit = parse_src(TINY_SRC)
    lay = record_layout(unit, "Pt")
    view = ("pos0", "pos1", "vel0", "vel1", "updated")
    assert element_footprint(lay, view) == 33
    assert view_footprint(lay, view, 10) == 330
    assert view_footprint(lay, view, 10) <= 10 * lay.size
    assert view_footprint(lay, lay.leaf_names, 10) == 330  # all leaves here
    assert view_footprint(lay, (), 10) == 0
    assert view_footprint(lay, view, 0) == 0


def test_footprint_never_exceeds_padded_size(particle):
    n = 7
    assert view_footprint(particle, particle.leaf_names, n) <= n * particle.size
    assert element_footprint(particle, particle.leaf_names) == 254


record_specs = st.lists(
    st.lists(
        st.tuples(st.sampled_from(list(CT_SCALARS)), st.integers(0, 3)),
        min_size=1, max_size=6),
    min_size=1, max_size=3)


@settings(deadline=None, max_examples=60)
@given(record_specs, st.data())
def test_random_records_match_ctypes(specs, data):
    # lower records may appear as field types of later ones
    lines = []
    names = []
    for ri, fields in enumerate(specs):
        rname = f"R{ri}"
        decls = []
        for fi, (scalar, count) in enumerate(fields):
            t = scalar
            if names and data.draw(st.booleans(), label=f"nest {ri}.{fi}"):
                t = data.draw(st.sampled_from(names), label=f"inner {ri}.{fi}")
            decls.append(f"    {t} f{fi}" + (f"[{count}]" if count else "") + ";")
        lines.append(f"record {rname} {{\n" + "\n".join(decls) + "\n};")
        names.append(rname)
    unit = parse_src("\n".join(lines))
    for rname in names:
        assert_matches_ctypes(unit, rname)
        lay = record_layout(unit, rname)
        # leaves tile the record without overlap
        spans = sorted((l.offset, l.offset + l.size) for l in lay.leaves)
        for (a0, a1), (b0, _) in zip(spans, spans[1:]):
            assert a1 <= b0
        if spans:
            assert spans[-1][1] <= lay.size
