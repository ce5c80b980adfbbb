"""Record memory layout.

Natural alignment: every scalar is aligned to its own size, a record to its
widest member, arrays are contiguous runs of their element. Record size is
padded up to the record alignment so arrays of records stay aligned.

A record flattens to an ordered list of scalar *leaves*. Leaf names mangle
the access path: array elements append their index (pos[0] -> pos0), nested
record members join with an underscore (vel.x -> vel_x). Name collisions
against earlier leaves get a numeric suffix.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import RecordRecursionError, SemanticError
from .nodes import RecordDef, SCALAR_SIZES, SourceUnit

#: one access-path step: (field name, element index or None)
Step = tuple[str, int | None]


@dataclass(frozen=True)
class Leaf:
    name: str
    path: tuple[Step, ...]
    type: str
    offset: int
    size: int


@dataclass(frozen=True)
class FieldSlot:
    """Placement of one declared field inside its record."""

    name: str
    offset: int
    count: int                      # 0 for scalar/record, >0 for arrays
    scalar: str | None              # scalar type name, None for record fields
    record: "RecordLayout | None"   # element layout for record fields
    elem_size: int
    align: int

    @property
    def size(self) -> int:
        return self.elem_size * (self.count or 1)


@dataclass(frozen=True)
class RecordLayout:
    name: str
    size: int
    align: int
    leaves: tuple[Leaf, ...]
    slots: dict[str, FieldSlot]

    @property
    def leaf_names(self) -> tuple[str, ...]:
        return tuple(l.name for l in self.leaves)

    def leaf(self, name: str) -> Leaf:
        for l in self.leaves:
            if l.name == name:
                return l
        raise KeyError(name)

    def leaves_under(self, field: str) -> list[Leaf]:
        """All leaves whose path starts at the named declared field."""
        return [l for l in self.leaves if l.path[0][0] == field]


def _align_up(n: int, a: int) -> int:
    return (n + a - 1) // a * a


def _mangle(path: tuple[Step, ...]) -> str:
    parts = []
    for name, idx in path:
        parts.append(name if idx is None else f"{name}{idx}")
    return "_".join(parts)


class _Builder:
    def __init__(self, unit: SourceUnit):
        self.unit = unit
        self.done: dict[str, RecordLayout] = {}
        self.in_progress: list[str] = []

    def layout(self, name: str) -> RecordLayout:
        if name in self.done:
            return self.done[name]
        if name in self.in_progress:
            chain = " -> ".join(self.in_progress + [name])
            rec = self.unit.record(name)
            raise RecordRecursionError(f"record nesting cycle: {chain}", rec.loc if rec else None)
        rec = self.unit.record(name)
        if rec is None:
            raise SemanticError(f"unknown record type {name!r}")
        self.in_progress.append(name)
        built = self._build(rec)
        self.in_progress.pop()
        self.done[name] = built
        return built

    def _build(self, rec: RecordDef) -> RecordLayout:
        offset = 0
        align = 1
        slots: dict[str, FieldSlot] = {}
        leaves: list[Leaf] = []
        used: set[str] = set()

        for f in rec.fields:
            if f.name in slots:
                raise SemanticError(f"duplicate field {f.name!r} in record {rec.name!r}", f.loc)
            if f.type.name in SCALAR_SIZES:
                elem_size = SCALAR_SIZES[f.type.name]
                elem_align = elem_size
                sub = None
                scalar = f.type.name
            else:
                sub = self.layout(f.type.name)
                elem_size = sub.size
                elem_align = sub.align
                scalar = None
            offset = _align_up(offset, elem_align)
            slot = FieldSlot(f.name, offset, f.type.count, scalar, sub, elem_size, elem_align)
            slots[f.name] = slot
            self._add_leaves(slot, leaves, used)
            offset += slot.size
            align = max(align, elem_align)

        size = _align_up(offset, align)
        return RecordLayout(rec.name, size, align, tuple(leaves), slots)

    def _add_leaves(self, slot: FieldSlot, leaves: list[Leaf], used: set[str]) -> None:
        indices = [None] if slot.count == 0 else list(range(slot.count))
        for idx in indices:
            base = slot.offset + (idx or 0) * slot.elem_size
            step: Step = (slot.name, idx)
            if slot.scalar is not None:
                self._emit_leaf((step,), slot.scalar, base, leaves, used)
            else:
                for sub in slot.record.leaves:
                    self._emit_leaf((step,) + sub.path, sub.type, base + sub.offset, leaves, used)

    def _emit_leaf(self, path, type_name, offset, leaves, used) -> None:
        name = _mangle(path)
        if name in used:
            k = 2
            while f"{name}_{k}" in used:
                k += 1
            name = f"{name}_{k}"
        used.add(name)
        leaves.append(Leaf(name, path, type_name, offset, SCALAR_SIZES[type_name]))


def build_layouts(unit: SourceUnit) -> dict[str, RecordLayout]:
    """Layouts for every record in the unit, keyed by record name."""
    b = _Builder(unit)
    for rec in unit.records:
        b.layout(rec.name)
    return b.done


def record_layout(unit: SourceUnit, name: str) -> RecordLayout:
    return _Builder(unit).layout(name)


def element_footprint(layout: RecordLayout, leaf_names: list[str] | tuple[str, ...]) -> int:
    """Bytes of one element restricted to the named leaves, no padding."""
    per = {l.name: l.size for l in layout.leaves}
    return sum(per[n] for n in leaf_names)


def view_footprint(layout: RecordLayout, leaf_names, n: int) -> int:
    """Total temp bytes a conversion over n elements of the named leaves needs."""
    return element_footprint(layout, leaf_names) * n
