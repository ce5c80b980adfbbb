"""The bundled kernel corpus: five particle loops over one 256-byte record.

Each corpus file is a self-contained translation unit with the Particle
record and a single annotated kernel. This module knows where the files
live, which view sets each kernel declares, and how to widen those views
to every field for the full-conversion measurement mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..layout import RecordLayout, record_layout
from ..nodes import Attribute, Ident, SourceUnit
from ..parser import parse, parse_file

_DIR = Path(__file__).resolve().parent.parent / "corpus"

#: name, complexity class, declared inputs (A), declared outputs (A-hat)
_CASES = (
    ("density", "quadratic",
     ("pos", "vel", "mass", "h", "density"),
     ("density", "h", "wcount", "neigh_count", "rot_v", "div_v")),
    ("force", "quadratic",
     ("pos", "vel", "mass", "h", "density", "pressure", "soundspeed"),
     ("acc", "h_dt")),
    ("kick1", "linear", ("vel", "acc"), ("vel",)),
    ("kick2", "linear", ("vel", "acc", "u"), ("vel", "v_pred", "u_pred")),
    ("drift", "linear", ("pos", "vel", "updated"), ("pos", "updated")),
)


@dataclass(frozen=True)
class KernelCase:
    """One corpus kernel: where it lives and what it converts."""

    name: str
    path: Path
    complexity: str     # "linear" or "quadratic"
    inputs: tuple       # field names listed in the inputs annotation
    outputs: tuple      # field names listed in the outputs annotation

    def load(self) -> SourceUnit:
        return parse_file(str(self.path))

    @property
    def scalar_args(self) -> tuple:
        return ("dt",) if self.name in ("kick1", "kick2", "drift") else ()


def corpus_dir() -> Path:
    return _DIR


def build_corpus() -> list[KernelCase]:
    return [KernelCase(name, _DIR / f"{name}.minic", cx, a, ahat)
            for name, cx, a, ahat in _CASES]


def kernel_case(name: str) -> KernelCase:
    for case in build_corpus():
        if case.name == name:
            return case
    raise KeyError(f"no corpus kernel named {name!r}")


def particle_layout() -> RecordLayout:
    return record_layout(build_corpus()[0].load(), "Particle")


_VIEW_ATTRS = ("soa_conversion_inputs", "soa_conversion_outputs",
               "aos_conversion_outputs")


def widen_views(unit: SourceUnit) -> SourceUnit:
    """Copy of unit with every conversion loop reading and writing all fields.

    This is the full-conversion mode: A = A-hat = every field of the
    loop's record, so the rewritten kernel pays the complete per-element
    copy both ways regardless of what the body touches.
    """
    from ..semantics import analyze

    copy = parse_like(unit)
    for spec in analyze(copy).specs:
        fields = list(spec.layout.slots)
        for i, attr in enumerate(spec.loop.attrs):
            if attr.known and attr.name in _VIEW_ATTRS:
                spec.loop.attrs[i] = Attribute(attr.ns, attr.name,
                                               [Ident(f) for f in fields],
                                               had_parens=True)
    return copy


def parse_like(unit: SourceUnit) -> SourceUnit:
    """Independent deep copy of a unit via its own source text."""
    from ..emit import emit
    return parse(emit(unit))
