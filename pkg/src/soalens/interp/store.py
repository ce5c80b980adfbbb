"""Runtime memory: byte buffers, seeded inputs, snapshots.

Arrays live as little-endian byte buffers so both interpreter engines (and
any future native path) observe the exact same object layout the record
layout model computes. Scalar array buffers allocated at runtime carry a
per-element init mask: reading an unwritten slot is poison, which `check`
mode turns into a PoisonRead trap while `run` mode reads the zero fill.
Buffers created by seeding are fully initialized and carry no mask.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from ..layout import RecordLayout
from ..nodes import SCALAR_SIZES

NP_DTYPES = {
    "float64": "<f8",
    "float32": "<f4",
    "int64": "<i8",
    "int32": "<i4",
    "bool": "|u1",
}

STRUCT_CODES = {
    "float64": "<d",
    "float32": "<f",
    "int64": "<q",
    "int32": "<i",
    "bool": "<B",
}

#: int scalar parameters with these names receive the element count when a
#: store is seeded for an entry function
SIZE_PARAM_NAMES = ("size", "n", "count", "num")


@dataclass
class Buffer:
    name: str
    scalar: str | None            # scalar type for flat arrays, None for records
    record: RecordLayout | None   # layout for record arrays, None for flat
    esize: int                    # bytes per element
    length: int                   # elements
    data: bytearray
    mask: bytearray | None = None  # per-element init state, None = all set
    alive: bool = True
    plan: int = -1                 # conversion ordinal for temps, -1 otherwise

    @property
    def nbytes(self) -> int:
        return self.esize * self.length

    def type_name(self) -> str:
        base = self.record.name if self.record is not None else self.scalar
        return f"{base}[{self.length}]"


@dataclass
class RuntimeStore:
    buffers: list = dc_field(default_factory=list)
    names: dict = dc_field(default_factory=dict)    # entry param -> buffer id
    scalars: dict = dc_field(default_factory=dict)  # entry param -> value
    globals: dict = dc_field(default_factory=dict)  # final global values

    def add_buffer(self, buf: Buffer, name: str | None = None) -> int:
        self.buffers.append(buf)
        bid = len(self.buffers) - 1
        if name is not None:
            self.names[name] = bid
        return bid

    def buffer(self, name: str) -> Buffer:
        return self.buffers[self.names[name]]

    def named_buffers(self):
        for name in self.names:
            yield name, self.buffers[self.names[name]]


def record_dtype(layout: RecordLayout) -> np.dtype:
    """Structured dtype mirroring the record's leaves and padding."""
    return np.dtype({
        "names": [l.name for l in layout.leaves],
        "formats": [NP_DTYPES[l.type] for l in layout.leaves],
        "offsets": [l.offset for l in layout.leaves],
        "itemsize": layout.size,
    })


def _fill(rs: np.random.RandomState, scalar: str, n: int) -> np.ndarray:
    if scalar == "float64":
        return rs.uniform(-1.0, 1.0, n)
    if scalar == "float32":
        return rs.uniform(-1.0, 1.0, n).astype("<f4")
    if scalar == "int64":
        return rs.randint(-100, 101, size=n, dtype="<i8")
    if scalar == "int32":
        return rs.randint(-100, 101, size=n, dtype="<i4")
    return rs.randint(0, 2, size=n).astype("|u1")  # bool


def seed_record_buffer(layout: RecordLayout, n: int, rs: np.random.RandomState,
                       name: str = "data") -> Buffer:
    if layout.leaves:
        arr = np.zeros(n, dtype=record_dtype(layout))
        for leaf in layout.leaves:
            arr[leaf.name] = _fill(rs, leaf.type, n)
        data = bytearray(arr.tobytes())
    else:
        data = bytearray(0)
    return Buffer(name, None, layout, layout.size, n, data)


def seed_flat_buffer(scalar: str, n: int, rs: np.random.RandomState,
                     name: str = "data") -> Buffer:
    data = bytearray(_fill(rs, scalar, n).tobytes())
    return Buffer(name, scalar, None, SCALAR_SIZES[scalar], n, data)


def seed_store(layout: RecordLayout, n: int, seed: int,
               name: str = "data") -> RuntimeStore:
    """Deterministic random store holding one n-element record array."""
    if n < 0:
        raise ValueError("element count must be non-negative")
    rs = np.random.RandomState(seed)
    store = RuntimeStore()
    store.add_buffer(seed_record_buffer(layout, n, rs, name), name)
    return store


def make_input_store(unit, entry: str, n: int, seed: int,
                     overrides: dict | None = None) -> RuntimeStore:
    """Seeded store providing every parameter of the entry function.

    Record and flat array parameters become n-element seeded buffers. Int
    scalars named like a size receive n; every other scalar is seeded.
    Explicit overrides win.
    """
    from ..layout import build_layouts

    fn = unit.function(entry)
    if fn is None:
        raise KeyError(f"no function named {entry!r}")
    layouts = build_layouts(unit)
    rs = np.random.RandomState(seed)
    overrides = overrides or {}
    store = RuntimeStore()
    for p in fn.params:
        if p.name in overrides and not p.is_array_base:
            store.scalars[p.name] = overrides[p.name]
            continue
        if p.is_array_base:
            if p.type.name in SCALAR_SIZES:
                buf = seed_flat_buffer(p.type.name, n, rs, p.name)
            else:
                buf = seed_record_buffer(layouts[p.type.name], n, rs, p.name)
            store.add_buffer(buf, p.name)
        elif p.type.name in SCALAR_SIZES:
            store.scalars[p.name] = _seed_scalar(p, n, rs)
        else:
            raise ValueError(
                f"entry parameter {p.name!r} has record value type; "
                "seeded stores support scalars and arrays")
    return store


def _seed_scalar(p, n: int, rs: np.random.RandomState):
    t = p.type.name
    if t in ("int64", "int32"):
        if p.name in SIZE_PARAM_NAMES:
            return n
        return int(rs.randint(0, 9))
    if t == "bool":
        return bool(rs.randint(0, 2))
    v = float(rs.uniform(-1.0, 1.0))
    if t == "float32":
        v = float(np.float32(v))
    return v


# ---- text serialization ----

def _format_value(scalar: str, raw: bytes) -> str:
    v = struct.unpack(STRUCT_CODES[scalar], raw)[0]
    if scalar == "bool":
        return "true" if v else "false"
    if scalar in ("float64", "float32"):
        return repr(float(v))
    return str(int(v))


def _leaf_value(buf: Buffer, elem: int, offset: int, scalar: str) -> str:
    base = elem * buf.esize + offset
    return _format_value(scalar, bytes(buf.data[base:base + SCALAR_SIZES[scalar]]))


def dump_text(store: RuntimeStore) -> str:
    """Key/value snapshot; floats use repr so the text is bit-faithful."""
    lines = []
    for name in sorted(store.scalars):
        v = store.scalars[name]
        if isinstance(v, bool):
            lines.append(f"scalar {name} = {'true' if v else 'false'}")
        elif isinstance(v, float):
            lines.append(f"scalar {name} = {v!r}")
        else:
            lines.append(f"scalar {name} = {v}")
    for name in sorted(store.globals):
        v = store.globals[name]
        if isinstance(v, bool):
            lines.append(f"global {name} = {'true' if v else 'false'}")
        elif isinstance(v, float):
            lines.append(f"global {name} = {v!r}")
        else:
            lines.append(f"global {name} = {v}")
    for name, buf in sorted(store.named_buffers()):
        lines.append(f"buffer {name} {buf.type_name()}")
        for i in range(buf.length):
            if buf.record is not None:
                for leaf in buf.record.leaves:
                    lines.append(
                        f"{name}[{i}].{leaf.name} = "
                        f"{_leaf_value(buf, i, leaf.offset, leaf.type)}")
            else:
                lines.append(f"{name}[{i}] = {_leaf_value(buf, i, 0, buf.scalar)}")
    return "\n".join(lines) + "\n"


# ---- comparison ----

@dataclass(frozen=True)
class Mismatch:
    buffer: str
    element: int
    leaf: str | None      # leaf name for record buffers, None for flat/global
    left: str
    right: str

    def __str__(self) -> str:
        where = f"{self.buffer}[{self.element}]"
        if self.leaf:
            where += f".{self.leaf}"
        return f"{where}: {self.left} != {self.right}"


def _bits(v) -> bytes:
    if isinstance(v, bool):
        return b"\x01" if v else b"\x00"
    if isinstance(v, float):
        return struct.pack("<d", v)
    return struct.pack("<q", int(v))


def compare_buffers(name: str, a: Buffer, b: Buffer,
                    byte_mask: np.ndarray | None = None,
                    limit: int = 32) -> list:
    """Bitwise comparison of two same-shaped buffers under an optional mask."""
    out: list = []
    da = np.frombuffer(bytes(a.data), dtype=np.uint8)
    db = np.frombuffer(bytes(b.data), dtype=np.uint8)
    if da.shape != db.shape:
        out.append(Mismatch(name, -1, None, f"{a.nbytes} bytes", f"{b.nbytes} bytes"))
        return out
    diff = da != db
    if byte_mask is not None:
        diff &= byte_mask
    if not diff.any():
        return out
    seen = set()
    for byte_idx in np.flatnonzero(diff):
        elem = int(byte_idx) // a.esize
        off = int(byte_idx) % a.esize
        leaf = None
        scalar = a.scalar
        loff = 0
        if a.record is not None:
            for l in a.record.leaves:
                if l.offset <= off < l.offset + l.size:
                    leaf, scalar, loff = l.name, l.type, l.offset
                    break
            if leaf is None:
                scalar = None  # padding byte
        key = (elem, leaf, off if leaf is None else loff)
        if key in seen:
            continue
        seen.add(key)
        if scalar is None:
            la = f"pad byte {off}: {a.data[byte_idx]:#04x}"
            rb = f"{b.data[byte_idx]:#04x}"
        else:
            la = _leaf_value(a, elem, loff, scalar)
            rb = _leaf_value(b, elem, loff, scalar)
        out.append(Mismatch(name, elem, leaf, la, rb))
        if len(out) >= limit:
            break
    return out


def compare_stores(a: RuntimeStore, b: RuntimeStore,
                   byte_masks: dict | None = None, limit: int = 32) -> list:
    """Mismatches between two stores; byte_masks maps buffer name -> bool array."""
    byte_masks = byte_masks or {}
    out: list = []
    for name in a.names:
        if name not in b.names:
            out.append(Mismatch(name, -1, None, "present", "missing"))
            continue
        out.extend(compare_buffers(name, a.buffer(name), b.buffer(name),
                                   byte_masks.get(name), limit - len(out)))
        if len(out) >= limit:
            return out
    for g in a.globals:
        va, vb = a.globals[g], b.globals.get(g)
        if vb is None or _bits(va) != _bits(vb):
            out.append(Mismatch(f"global {g}", -1, None, repr(va), repr(vb)))
            if len(out) >= limit:
                return out
    return out
