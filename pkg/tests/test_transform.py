"""Rewrite plans: temps, prologue/epilogue, redirection, strip."""

from pathlib import Path

from soalens import nodes
from soalens.bench import kernel_case
from soalens.emit import emit
from soalens.interp import differential_check, make_input_store, run
from soalens.parser import parse
from soalens.semantics import analyze
from soalens.transform import mangle, plan, strip, transform_unit

from conftest import TINY_SRC, parse_src

GOLDEN = Path(__file__).parent / "golden"


def transformed(src_or_unit):
    unit = parse_src(src_or_unit) if isinstance(src_or_unit, str) else src_or_unit
    return transform_unit(unit)


def test_mangle_scheme():
    assert mangle("pos0", 0) == "pos0_soa0_t"
    assert mangle("updated", 3) == "updated_soa3_t"


def test_drift_matches_golden_skeleton():
    got = emit(transform_unit(kernel_case("drift").load()).unit)
    want = (GOLDEN / "drift_transformed.minic").read_text()
    assert got == want


def test_plan_shape_for_tiny_drift(tiny_unit):
    a = analyze(tiny_unit)
    p = plan(a.specs[0])
    assert p.temp_names == [
        "pos0_soa0_t", "pos1_soa0_t", "vel0_soa0_t", "vel1_soa0_t",
        "updated_soa0_t"]
    assert [t[1] for t in p.temp_decls] == ["float64"] * 4 + ["bool"]
    # prologue copies A (5 leaves), epilogue copies back only Â (3 leaves)
    assert len(p.prologue.body.stmts) == 5
    assert len(p.epilogue.body.stmts) == 3
    assert p.frees == p.temp_names
    assert set(p.redirect_map.values()) == set(p.temp_names)


def test_statement_order_temps_prologue_body_epilogue_frees(tiny_unit):
    t = transformed(tiny_unit)
    stmts = t.unit.functions[0].body.stmts
    kinds = [type(s).__name__ for s in stmts]
    assert kinds == ["VarDecl"] * 5 + ["For", "For", "For"] + ["Free"] * 5
    prologue, body, epilogue = stmts[5], stmts[6], stmts[7]
    assert prologue.region[0] == "prologue"
    assert body.region[0] == "body"
    assert epilogue.region[0] == "epilogue"
    # frees follow the epilogue, never earlier
    assert [s.name for s in stmts[8:]] == [
        "pos0_soa0_t", "pos1_soa0_t", "vel0_soa0_t", "vel1_soa0_t",
        "updated_soa0_t"]


def test_redirected_body_accesses():
    text = emit(transformed(TINY_SRC).unit)
    assert "pos0_soa0_t[i] += vel0_soa0_t[i] * dt;" in text
    assert "updated_soa0_t[i] = true;" in text
    assert "if (!updated_soa0_t[i])" in text


def test_fully_redirected_alias_binding_is_dropped():
    t = transformed(TINY_SRC)
    body = t.plans[0].spec.loop.body
    assert not any(isinstance(s, nodes.RefBind) for s in nodes.walk_stmts(body))


def test_unannotated_leaf_access_still_hits_target():
    src = TINY_SRC.replace(
        "record Pt {", "record Pt {\n    float64 m;").replace(
        "p.updated = true;", "p.updated = true;\n        p.m = p.m + 1.0;")
    text = emit(transformed(src).unit)
    # the ref binding stays alive for the unconverted leaf; m gets no temp
    assert "ref Pt p = particles[i];" in text
    assert "p.m = p.m + 1.0;" in text
    assert "m_soa" not in text
    unit = parse_src(src)
    v = differential_check(unit, transformed(src).unit, "drift2", seed=2, n=8)
    assert v.passed, str(v)


def test_no_redirect_leaks_in_body(kernel):
    t = transform_unit(kernel.load())
    for p in t.plans:
        target = p.spec.target
        redirected = {l.name for l in p.spec.union_leaves}
        for e in nodes.all_exprs(p.spec.loop.body):
            if not (isinstance(e, nodes.Field) or isinstance(e, nodes.Index)):
                continue
            # reconstruct target[..].leaf shapes; none may survive
            root = e
            while isinstance(root, (nodes.Field, nodes.Index)):
                root = root.base
            if isinstance(root, nodes.Ident) and root.name == target:
                leafish = emit_leaf_name(e)
                assert leafish not in redirected, emit_leaf_name(e)


def emit_leaf_name(e):
    steps = []
    cur = e
    while isinstance(cur, (nodes.Field, nodes.Index)):
        if isinstance(cur, nodes.Field):
            steps.append(cur.name)
        elif isinstance(cur, nodes.Index) and isinstance(cur.index, nodes.IntLit):
            steps.append(str(cur.index.value))
        cur = cur.base
    return "".join(reversed(steps))


def test_empty_outputs_empty_epilogue():
    src = TINY_SRC.replace(
        "[[clang::soa_conversion_outputs(pos, updated)]]\n    ", "")
    t = transformed(src)
    p = t.plans[0]
    assert p.epilogue.body.stmts == []
    stmts = t.unit.functions[0].body.stmts
    kinds = [type(s).__name__ for s in stmts]
    # no epilogue loop emitted: temps, prologue, body, frees
    assert kinds == ["VarDecl"] * 5 + ["For", "For"] + ["Free"] * 5


def test_start_idx_shifts_copies_and_redirection():
    src = """
        record Pt { float64 x; };
        void bump(Pt *ps, int64 size, int64 start) {
            [[clang::soa_conversion_target(ps)]]
            [[clang::soa_conversion_target_size(size)]]
            [[clang::soa_conversion_start_idx(start)]]
            [[clang::soa_conversion_inputs(x)]]
            [[clang::soa_conversion_outputs(x)]]
            for (int64 i = start; i < start + size; i += 1) {
                ps[i].x += 1.0;
            }
        }
    """
    t = transformed(src)
    text = emit(t.unit)
    assert "ps[i_soa0_t + start].x" in text
    assert "x_soa0_t[i - start] += 1.0;" in text

    # 9-element array, convert the middle third: only it may change
    unit = parse_src(src)
    store = make_input_store(unit, "bump", 9, seed=5,
                             overrides={"size": 3, "start": 3})
    import numpy as np
    from soalens.interp.store import record_dtype
    buf = store.buffer("ps")
    before = np.frombuffer(bytes(buf.data),
                           dtype=record_dtype(buf.record))["x"].copy()
    run(t.unit, "bump", store)
    after = np.frombuffer(bytes(buf.data), dtype=record_dtype(buf.record))["x"]
    assert (after[:3] == before[:3]).all()
    assert (after[6:] == before[6:]).all()
    assert (after[3:6] == before[3:6] + 1.0).all()

    v = differential_check(unit, t.unit, "bump", seed=5, n=9,
                           overrides={"size": 3, "start": 3})
    assert v.passed, str(v)


def test_temp_name_collision_bumps_ordinal():
    src = TINY_SRC.replace(
        "ref Pt p = particles[i];",
        "ref Pt p = particles[i];\n        float64 pos0_soa0_t = 0.0;")
    t = transformed(src)
    names = t.plans[0].temp_names
    assert names[0] == "pos0_soa1_t"
    assert all(n.endswith("_soa1_t") for n in names)


def test_two_annotated_loops_get_disjoint_temps():
    src = """
        record Pt { float64 x; };
        void f(Pt *ps, int64 size) {
            [[clang::soa_conversion_target(ps)]]
            [[clang::soa_conversion_target_size(size)]]
            [[clang::soa_conversion_inputs(x)]]
            [[clang::soa_conversion_outputs(x)]]
            for (int64 i = 0; i < size; i += 1) {
                ps[i].x += 1.0;
            }
            [[clang::soa_conversion_target(ps)]]
            [[clang::soa_conversion_target_size(size)]]
            [[clang::soa_conversion_inputs(x)]]
            [[clang::soa_conversion_outputs(x)]]
            for (int64 i = 0; i < size; i += 1) {
                ps[i].x *= 2.0;
            }
        }
    """
    t = transformed(src)
    assert len(t.plans) == 2
    n0, n1 = (set(p.temp_names) for p in t.plans)
    assert not (n0 & n1)
    assert "x_soa0_t" in n0 and "x_soa1_t" in n1
    unit = parse_src(src)
    v = differential_check(unit, t.unit, "f", seed=3, n=17)
    assert v.passed, str(v)


def test_transform_leaves_input_unit_untouched(tiny_unit):
    before = emit(tiny_unit)
    transform_unit(tiny_unit)
    assert emit(tiny_unit) == before


def test_report_summarizes_each_plan(tiny_unit):
    t = transformed(tiny_unit)
    r, = t.report
    assert (r.function, r.ordinal, r.direction) == ("drift2", 0, "aos_to_soa")
    assert (r.input_leaves, r.output_leaves, r.union_leaves) == (5, 3, 5)
    assert r.element_bytes == 33


def test_strip_removes_only_known_attributes():
    src = TINY_SRC.replace(
        "[[clang::soa_conversion_target(particles)]]",
        "[[clang::soa_conversion_target(particles)]]\n    [[acme::keep(1)]]")
    unit = parse_src(src)
    s = strip(unit)
    loops = [st for st in nodes.walk_stmts(s.functions[0].body)
             if isinstance(st, nodes.For)]
    attrs = loops[0].attrs
    assert [(a.ns, a.name) for a in attrs] == [("acme", "keep")]
    assert "soa_conversion" not in emit(s)
    assert "[[acme::keep(1)]]" in emit(s)


def test_strip_is_idempotent(kernel):
    unit = kernel.load()
    once = strip(unit)
    assert emit(strip(once)) == emit(once)


def test_strip_of_unannotated_unit_is_identity():
    unit = parse_src("void f(int64 n) { for (int64 i = 0; i < n; i += 1) { } }")
    assert strip(unit) == unit


def test_corpus_differential_smoke(kernel):
    unit = kernel.load()
    t = transform_unit(unit)
    v = differential_check(unit, t.unit, kernel.name, seed=0, n=12)
    assert v.passed, str(v)
