"""Seeded random miniC programs for property tests.

Three generator families, each deterministic in its seed:

  discard_case   annotated kernel whose loop writes at least one converted
                 input-only field; after running the transformed program
                 those fields must be bit-identical in the original array
  inverse_case   conversion with matching input and output sets over an
                 empty loop body; the store must come back unchanged
  wide_program   grammar-covering source for parse/emit round-trips:
                 globals, helper calls, refs, unknown attributes, else
                 chains, array locals, free, float32 literals

The runnable families keep numerics trap-free by construction: divisors
are nonzero literals and sqrt arguments are wrapped in abs().
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field as dc_field

SCALARS = ("float64", "float32", "int64", "int32", "bool")


def _domain(t: str) -> str:
    if t in ("float64", "float32"):
        return "float"
    return "bool" if t == "bool" else "int"


@dataclass
class GenField:
    name: str
    decl: str                       # one field line, without indentation
    accesses: list = dc_field(default_factory=list)  # (suffix, domain)


@dataclass
class GenCase:
    src: str
    entry: str
    record: str
    array_param: str
    a_fields: tuple
    ahat_fields: tuple
    discard_fields: tuple = ()


_NESTED = "record Inner {\n    float64 x;\n    int32 k;\n};\n\n"


def _gen_fields(rng: random.Random, allow_nested: bool = True):
    fields = []
    nested_used = False
    for k in range(rng.randint(2, 6)):
        name = f"f{k}"
        r = rng.random()
        if r < 0.22:
            t = rng.choice(("float64", "float32", "int64"))
            cnt = rng.randint(2, 4)
            fields.append(GenField(
                name, f"{t} {name}[{cnt}];",
                [(f".{name}[{j}]", _domain(t)) for j in range(cnt)]))
        elif r < 0.34 and allow_nested:
            nested_used = True
            fields.append(GenField(
                name, f"Inner {name};",
                [(f".{name}.x", "float"), (f".{name}.k", "int")]))
        else:
            t = rng.choice(SCALARS)
            fields.append(GenField(name, f"{t} {name};",
                                   [(f".{name}", _domain(t))]))
    return fields, nested_used


def _record_text(name: str, fields, nested_used: bool) -> str:
    body = "\n".join(f"    {f.decl}" for f in fields)
    text = f"record {name} {{\n{body}\n}};\n"
    return (_NESTED + text) if nested_used else text


def _flit(rng: random.Random) -> str:
    v = rng.choice((0.25, 0.5, 1.0, 1.5, 2.0, -0.75, 3.25, 0.125))
    return repr(v)


def _fexpr(rng: random.Random, reads, depth: int = 0) -> str:
    r = rng.random()
    if depth >= 2 or not reads or r < 0.25:
        if reads and r < 0.6:
            return rng.choice(reads)
        return _flit(rng)
    if r < 0.45:
        return f"sqrt(abs({_fexpr(rng, reads, depth + 1)}) + 0.5)"
    if r < 0.55:
        return (f"min({_fexpr(rng, reads, depth + 1)}, "
                f"{_fexpr(rng, reads, depth + 1)})")
    a = _fexpr(rng, reads, depth + 1)
    b = _fexpr(rng, reads, depth + 1)
    op = rng.choice(("+", "-", "*", "/"))
    if op == "/":
        return f"({a}) / (abs({b}) + 1.5)"
    return f"({a}) {op} ({b})"


def _iexpr(rng: random.Random, reads, depth: int = 0) -> str:
    r = rng.random()
    if depth >= 2 or not reads or r < 0.3:
        if reads and r < 0.6:
            return rng.choice(reads)
        return str(rng.randint(-9, 9))
    a = _iexpr(rng, reads, depth + 1)
    b = _iexpr(rng, reads, depth + 1)
    op = rng.choice(("+", "-", "*", "/"))
    if op == "/":
        return f"({a}) / {rng.choice((3, 5, 7, 11))}"
    return f"({a}) {op} ({b})"


def _bexpr(rng: random.Random, freads, ireads, breads) -> str:
    r = rng.random()
    if breads and r < 0.3:
        b = rng.choice(breads)
        return f"!{b}" if rng.random() < 0.3 else b
    if freads and r < 0.65:
        op = rng.choice(("<", "<=", ">", ">=", "==", "!="))
        return f"{rng.choice(freads)} {op} {_flit(rng)}"
    lhs = _iexpr(rng, ireads, depth=2)
    op = rng.choice(("<", ">", "==", "!="))
    return f"({lhs}) {op} {rng.randint(-3, 3)}"


def _rhs(rng: random.Random, domain: str, freads, ireads, breads) -> str:
    if domain == "float":
        return _fexpr(rng, freads)
    if domain == "int":
        return _iexpr(rng, ireads)
    return _bexpr(rng, freads, ireads, breads)


def _pool(fields, names, p="p"):
    """Access strings grouped by domain for the given field names."""
    by_name = {f.name: f for f in fields}
    out = {"float": [], "int": [], "bool": []}
    for n in names:
        for suffix, dom in by_name[n].accesses:
            out[dom].append(f"{p}{suffix}")
    return out


def discard_case(seed: int) -> GenCase:
    """Kernel writing converted input-only fields; generated fresh per seed."""
    rng = random.Random(("discard", seed).__repr__())
    fields, nested = _gen_fields(rng)
    names = [f.name for f in fields]
    rng.shuffle(names)
    na = rng.randint(2, len(names))
    a = names[:na]
    # outputs overlap A or extend past it, but at least one A field stays out
    n_disc = rng.randint(1, na - 1)
    discard = a[:n_disc]
    rest = a[n_disc:] + names[na:]
    ahat = rng.sample(rest, rng.randint(1, len(rest)))
    reads = _pool(fields, a)
    reads["float"].append("dt")
    reads["int"].append("i")

    by_name = {f.name: f for f in fields}
    lines = []
    for n in ahat:
        for suffix, dom in by_name[n].accesses:
            lines.append(f"p{suffix} = {_rhs(rng, dom, **reads_kw(reads))};")
    first_discard = True
    for n in discard:
        for suffix, dom in by_name[n].accesses:
            if first_discard or rng.random() < 0.75:
                lines.append(f"p{suffix} = {_rhs(rng, dom, **reads_kw(reads))};")
                first_discard = False
    # a couple of compound updates on already-written numeric leaves
    numeric = [(s, d) for n in ahat + discard
               for s, d in by_name[n].accesses if d != "bool"]
    for _ in range(rng.randint(0, 2)):
        if not numeric:
            break
        suffix, dom = rng.choice(numeric)
        op = rng.choice(("+=", "-=", "*="))
        lines.append(f"p{suffix} {op} {_rhs(rng, dom, **reads_kw(reads))};")

    body = "\n".join(f"        {ln}" for ln in lines)
    src = _record_text("Rec", fields, nested) + f"""
void kernel(Rec *data, int64 n, float64 dt) {{
    [[clang::soa_conversion_target(data)]]
    [[clang::soa_conversion_target_size(n)]]
    [[clang::soa_conversion_inputs({", ".join(a)})]]
    [[clang::soa_conversion_outputs({", ".join(ahat)})]]
    for (int64 i = 0; i < n; i = i + 1) {{
        ref Rec p = data[i];
{body}
    }}
}}
"""
    return GenCase(src, "kernel", "Rec", "data", tuple(a), tuple(ahat),
                   tuple(n for n in discard if n not in ahat))


def reads_kw(reads):
    return {"freads": reads["float"], "ireads": reads["int"],
            "breads": reads["bool"]}


def inverse_case(seed: int) -> GenCase:
    """Matching input/output sets over an empty body."""
    rng = random.Random(("inverse", seed).__repr__())
    fields, nested = _gen_fields(rng)
    names = [f.name for f in fields]
    conv = rng.sample(names, rng.randint(1, len(names)))
    src = _record_text("Rec", fields, nested) + f"""
void kernel(Rec *data, int64 n) {{
    [[clang::soa_conversion_target(data)]]
    [[clang::soa_conversion_target_size(n)]]
    [[clang::soa_conversion_inputs({", ".join(conv)})]]
    [[clang::soa_conversion_outputs({", ".join(conv)})]]
    for (int64 i = 0; i < n; i = i + 1) {{
    }}
}}
"""
    return GenCase(src, "kernel", "Rec", "data", tuple(conv), tuple(conv))


def wide_program(seed: int) -> str:
    """Source exercising most of the grammar; only needs to parse."""
    rng = random.Random(("wide", seed).__repr__())
    fields, nested = _gen_fields(rng)
    parts = []
    if rng.random() < 0.15:
        parts.append("record Empty {\n};\n")
    parts.append(_record_text("Rec", fields, nested))

    for k in range(rng.randint(0, 2)):
        t = rng.choice(("float64", "float32", "int64", "bool"))
        if t == "bool":
            init = rng.choice(("true", "false"))
        elif t == "int64":
            init = str(rng.randint(-50, 50))
        elif rng.random() < 0.4:
            init = f"sqrt({_flit(rng)} + 2.0)"
        else:
            init = _flit(rng)
        parts.append(f"{t} g{k} = {init};\n")

    parts.append("""
float64 helper(float64 a, float64 b, int64 k) {
    float64 acc = 0.0;
    if (a < b) {
        acc = sqrt(b - a);
    } else if (k > 2) {
        acc = pow(a, 2.0) + 0.5f;
    } else {
        acc = max(a, b);
    }
    for (int64 t = 0; t < k; t = t + 1) {
        acc += a / (abs(b) + 1.5);
    }
    return acc;
}
""")

    a = [f.name for f in fields]
    rng.shuffle(a)
    half = a[:max(1, len(a) // 2)]
    reads = _pool(fields, half)
    reads["float"].append("dt")
    reads["int"].append("i")
    by_name = {f.name: f for f in fields}
    lines = []
    for n in half:
        for suffix, dom in by_name[n].accesses:
            lines.append(f"p{suffix} = {_rhs(rng, dom, **reads_kw(reads))};")
    if rng.random() < 0.6:
        lines.append(f"float64 w = helper(dt, {_flit(rng)}, i);")
        lines.append("scratch[0] = w;" if rng.random() < 0.5
                     else "scratch[1] = w * 2.0;")
    cond = _bexpr(rng, reads["float"], reads["int"], reads["bool"])
    lines.append(f"if ({cond}) {{ scratch[2] = 1.0; }} "
                 "else { scratch[2] = -1.0; }")
    body = "\n".join(f"        {ln}" for ln in lines)

    unknown = rng.choice((
        "[[clang::loop_unroll(4)]]",
        "[[myns::vectorize]]",
        "[[clang::profile_hint(hot, 2)]]",
    ))
    parts.append(f"""
void kernel(Rec *data, int64 n, float64 dt) {{
    float64 scratch[4];
    scratch[0] = 0.0;
    scratch[1] = 0.0;
    scratch[2] = 0.0;
    scratch[3] = 0.0;
    {unknown}
    [[clang::soa_conversion_target(data)]]
    [[clang::soa_conversion_target_size(n)]]
    [[clang::soa_conversion_inputs({", ".join(half)})]]
    [[clang::soa_conversion_outputs({", ".join(half)})]]
    for (int64 i = 0; i < n; i = i + 1) {{
        ref Rec p = data[i];
{body}
    }}
    free(scratch);
}}
""")
    return "".join(parts)
