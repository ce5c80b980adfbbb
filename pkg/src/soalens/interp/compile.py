"""AST to bytecode.

Both engines execute the same register bytecode: instructions are rows of
an int32 (n, 6) array [op, a, b, c, d, e], with float64 and int64 register
banks per frame. The numeric semantics are fixed here once so the engines
cannot drift apart:

  - floats compute in IEEE float64, left to right, no reassociation;
    float32 is a storage format — values round to float32 at stores into
    float32 slots (locals, globals, array elements, returns, arguments)
    and widen exactly on load; divide by zero follows IEEE (inf/nan, no
    trap), and any arithmetic nan result is the canonical positive quiet
    nan so bit patterns cannot depend on hardware propagation order;
  - ints compute in wrapping int64; int32 is a storage format with
    sign-extending loads and wrapping stores; division truncates toward
    zero, trapping on zero divisors (INT64_MIN / -1 wraps to INT64_MIN);
  - bools are 0/1 in the int bank;
  - every array access is bounds-checked; reference bindings capture
    (buffer, element) at bind time and are checked then too.

Scalar locals zero-initialize. Array locals allocate zero-filled but
poison-tracked: `check` mode traps reads of never-written elements, `run`
mode reads the zero fill. That models reading a conversion output leaf
that the loop has not written yet.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ..errors import InternalError, raise_first
from ..layout import RecordLayout
from ..nodes import (
    Assign,
    Binary,
    Block,
    BoolLit,
    BUILTINS,
    Call,
    Expr,
    ExprStmt,
    Field,
    FloatLit,
    For,
    Free,
    FunctionDef,
    Ident,
    If,
    Index,
    IntLit,
    RefBind,
    Return,
    SCALAR_SIZES,
    SourceUnit,
    Stmt,
    Unary,
    VarDecl,
    walk_exprs,
)
from ..semantics import Analysis, analyze

# ---- opcodes (both engines mirror these numbers) ----

RET = 0
F_CONST = 1
I_CONST = 2
F_MOV = 3
I_MOV = 4
F_ADD = 5
F_SUB = 6
F_MUL = 7
F_DIV = 8
F_NEG = 9
F_SQRT = 10
F_POW = 11
F_ABS = 12
F_MIN = 13
F_MAX = 14
F_RND32 = 15
I_ADD = 16
I_SUB = 17
I_MUL = 18
I_DIV = 19
I_NEG = 20
I_ABS = 21
I_MIN = 22
I_MAX = 23
I_WRAP32 = 24
I2F = 25
B_NOT = 26
FLT = 27
FLE = 28
FGT = 29
FGE = 30
FEQ = 31
FNE = 32
ILT = 33
ILE = 34
IGT = 35
IGE = 36
IEQ = 37
INE = 38
JMP = 39
JZ = 40
JNZ = 41
LD = 42
ST = 43
LDX = 44
STX = 45
CHKR = 46
ALLOC = 47
FREE = 48
CHKIDX = 49
GF_LD = 50
GF_ST = 51
GI_LD = 52
GI_ST = 53
CALL = 54
RETF = 55
RETI = 56
STMT = 57
RENTER = 58
REXIT = 59

OP_NAMES = {v: k for k, v in list(globals().items()) if isinstance(v, int) and k.isupper()}

# scalar codes used by LD/ST
SC_F64 = 0
SC_F32 = 1
SC_I64 = 2
SC_I32 = 3
SC_BOOL = 4

SCALAR_CODE = {"float64": SC_F64, "float32": SC_F32, "int64": SC_I64,
               "int32": SC_I32, "bool": SC_BOOL}

# region kind codes
RG_PROLOGUE = 0
RG_BODY = 1
RG_EPILOGUE = 2
_RG_CODE = {"prologue": RG_PROLOGUE, "body": RG_BODY, "epilogue": RG_EPILOGUE}

# argument/parameter kinds
PK_F = 0
PK_I = 1
PK_BUF = 2
PK_REC = 3

_FLOATS = ("float64", "float32")


@dataclass
class FnCode:
    name: str
    code: np.ndarray = None           # int32 (n, 6)
    fpool: np.ndarray = None          # float64
    ipool: np.ndarray = None          # int64
    nf: int = 0
    ni: int = 0
    params: np.ndarray = None         # int32 (n, 2): kind, extra (rec size)
    param_scalars: list = dc_field(default_factory=list)
    allocs: np.ndarray = None         # int32 (n, 3): scode, plan, esize
    alloc_names: list = dc_field(default_factory=list)
    regions: list = dc_field(default_factory=list)   # (kind, plan, direction)
    region_codes: np.ndarray = None   # int32 (n, 2): kind code, plan
    argtab_data: np.ndarray = None    # int32 (n, 3): kind, r1, r2
    argtab_index: np.ndarray = None   # int32 (n, 2): start, count


@dataclass
class CompiledProgram:
    unit: SourceUnit
    analysis: Analysis
    functions: list
    fn_index: dict
    ginit: FnCode
    global_slots: dict                # name -> (bank 0/1, slot, scalar type)
    global_order: list
    ngf: int = 0
    ngi: int = 0


@dataclass
class _Sym:
    kind: str          # scalar | buf | rec | ref
    bank: str = ""     # F | I for scalars
    reg: int = 0
    scalar: str = ""   # declared scalar type / element type
    record: RecordLayout | None = None
    reg2: int = 0      # ref: captured element index register


@dataclass
class _Addr:
    bufreg: int
    idxreg: int
    scode: int
    off: int = 0
    offreg: int = -1   # >= 0: dynamic byte offset register (replaces off)


class _FnCompiler:
    def __init__(self, pc: "_ProgramCompiler", fn: FunctionDef | None, name: str):
        self.pc = pc
        self.fn = fn
        self.name = name
        self.code: list = []
        self.fpool: list = []
        self.fpool_map: dict = {}
        self.ipool: list = []
        self.ipool_map: dict = {}
        self.nf = 0
        self.ni = 0
        self.maxf = 0
        self.maxi = 0
        self.scopes: list = [{}]
        self.params: list = []
        self.param_scalars: list = []
        self.allocs: list = []
        self.alloc_names: list = []
        self.regions: list = []
        self.argtabs: list = []

    # ---- machinery ----

    def emit(self, op, a=0, b=0, c=0, d=0, e=0) -> int:
        self.code.append([op, a, b, c, d, e])
        return len(self.code) - 1

    def patch(self, at: int, field: int, value: int) -> None:
        self.code[at][field] = value

    def here(self) -> int:
        return len(self.code)

    def fconst(self, v: float) -> int:
        import struct

        key = struct.pack("<d", v)
        if key not in self.fpool_map:
            self.fpool_map[key] = len(self.fpool)
            self.fpool.append(v)
        return self.fpool_map[key]

    def iconst(self, v: int) -> int:
        if v not in self.ipool_map:
            self.ipool_map[v] = len(self.ipool)
            self.ipool.append(v)
        return self.ipool_map[v]

    def falloc(self) -> int:
        r = self.nf
        self.nf += 1
        self.maxf = max(self.maxf, self.nf)
        return r

    def ialloc(self) -> int:
        r = self.ni
        self.ni += 1
        self.maxi = max(self.maxi, self.ni)
        return r

    def mark(self):
        return (self.nf, self.ni)

    def release(self, m) -> None:
        self.nf, self.ni = m

    def push_scope(self) -> None:
        self.scopes.append({})

    def pop_scope(self) -> None:
        self.scopes.pop()

    def bind(self, name: str, sym: _Sym) -> None:
        self.scopes[-1][name] = sym

    def lookup(self, name: str) -> _Sym | None:
        for s in reversed(self.scopes):
            if name in s:
                return s[name]
        return None

    def ty(self, e: Expr):
        return self.pc.analysis.expr_types[id(e)]

    def layout_of(self, name: str) -> RecordLayout:
        return self.pc.analysis.layouts[name]

    # ---- entry ----

    def compile_function(self) -> FnCode:
        fn = self.fn
        for p in fn.params:
            self.bind_param(p)
        self.block(fn.body)
        self.emit(RET)
        return self.finish()

    def compile_ginit(self, unit: SourceUnit) -> FnCode:
        for g in unit.globals:
            bank, slot, scalar = self.pc.global_slots[g.name]
            if g.init is not None:
                vb, vr = self.expr(g.init)
            elif scalar in _FLOATS:
                vb, vr = "F", self.ftempc(0.0)
            else:
                vb, vr = "I", self.itempc(0)
            self.store_global(g.name, vb, vr)
        self.emit(RET)
        return self.finish()

    def finish(self) -> FnCode:
        f = FnCode(self.name)
        f.code = np.array(self.code or [[RET, 0, 0, 0, 0, 0]], dtype=np.int32)
        f.fpool = np.array(self.fpool or [0.0], dtype=np.float64)
        f.ipool = np.array(self.ipool or [0], dtype=np.int64)
        f.nf = max(self.maxf, 1)
        f.ni = max(self.maxi, 1)
        f.params = np.array(self.params or np.zeros((0, 2)), dtype=np.int32).reshape(-1, 2)
        f.param_scalars = self.param_scalars
        f.allocs = np.array(self.allocs or np.zeros((0, 3)), dtype=np.int32).reshape(-1, 3)
        f.alloc_names = self.alloc_names
        f.regions = self.regions
        f.region_codes = np.array(
            [[_RG_CODE[k], p] for k, p, _ in self.regions] or np.zeros((0, 2)),
            dtype=np.int32).reshape(-1, 2)
        data = []
        index = []
        for tab in self.argtabs:
            index.append([len(data), len(tab)])
            data.extend(tab)
        f.argtab_data = np.array(data or np.zeros((0, 3)), dtype=np.int32).reshape(-1, 3)
        f.argtab_index = np.array(index or np.zeros((0, 2)), dtype=np.int32).reshape(-1, 2)
        return f

    def bind_param(self, p) -> None:
        t = p.type.name
        if t in SCALAR_SIZES and not p.is_array_base:
            if t in _FLOATS:
                self.bind(p.name, _Sym("scalar", "F", self.falloc(), t))
                self.params.append([PK_F, 0])
            else:
                self.bind(p.name, _Sym("scalar", "I", self.ialloc(), t))
                self.params.append([PK_I, 0])
            self.param_scalars.append(t)
        elif p.is_array_base:
            if t in SCALAR_SIZES:
                self.bind(p.name, _Sym("buf", "I", self.ialloc(), t))
            else:
                self.bind(p.name, _Sym("buf", "I", self.ialloc(), "",
                                       self.layout_of(t)))
            self.params.append([PK_BUF, 0])
            self.param_scalars.append(None)
        else:
            lay = self.layout_of(t)
            self.bind(p.name, _Sym("rec", "I", self.ialloc(), "", lay))
            self.params.append([PK_REC, lay.size])
            self.param_scalars.append(None)

    # ---- helpers producing values ----

    def ftempc(self, v: float) -> int:
        r = self.falloc()
        self.emit(F_CONST, r, self.fconst(v))
        return r

    def itempc(self, v: int) -> int:
        r = self.ialloc()
        self.emit(I_CONST, r, self.iconst(v))
        return r

    def to_f(self, bank: str, reg: int) -> int:
        if bank == "F":
            return reg
        r = self.falloc()
        self.emit(I2F, r, reg)
        return r

    # ---- statements ----

    def block(self, b: Block) -> None:
        self.push_scope()
        for s in b.stmts:
            self.stmt(s)
        self.pop_scope()

    def stmt(self, s: Stmt) -> None:
        if isinstance(s, Block):
            self.block(s)
            return
        self.emit(STMT)
        m = self.mark()
        if isinstance(s, VarDecl):
            self.var_decl(s)
            return  # var registers persist; no release
        if isinstance(s, RefBind):
            self.ref_bind(s)
            return
        if isinstance(s, Assign):
            self.assign(s)
        elif isinstance(s, If):
            self.if_stmt(s)
        elif isinstance(s, For):
            self.for_stmt(s)
        elif isinstance(s, Return):
            self.ret(s)
        elif isinstance(s, ExprStmt):
            self.expr(s.expr)
        elif isinstance(s, Free):
            sym = self.lookup(s.name)
            self.emit(FREE, sym.reg)
        else:
            raise InternalError(f"cannot compile statement {type(s).__name__}")
        self.release(m)

    def var_decl(self, d: VarDecl) -> None:
        t = d.type.name
        if d.length is not None:
            m = self.mark()
            lb, lr = self.expr(d.length)
            aid = len(self.allocs)
            plan = d.temp_plan if d.is_conversion_temp else -1
            self.allocs.append([SCALAR_CODE[t], plan, SCALAR_SIZES[t]])
            self.alloc_names.append(d.name)
            # the buffer register outlives the length temporaries; anything
            # allocated between m and reg stays retired, which only costs slots
            reg = self.ialloc()
            self.emit(ALLOC, reg, lr, aid)
            self.nf = m[0]
            self.bind(d.name, _Sym("buf", "I", reg, t))
            return
        if t in _FLOATS:
            reg = self.falloc()
            if d.init is not None:
                m = (self.nf, self.ni)
                vb, vr = self.expr(d.init)
                self.emit(F_RND32 if t == "float32" else F_MOV, reg, self.to_f(vb, vr))
                self.release(m)
            else:
                self.emit(F_CONST, reg, self.fconst(0.0))
            self.bind(d.name, _Sym("scalar", "F", reg, t))
        else:
            reg = self.ialloc()
            if d.init is not None:
                m = (self.nf, self.ni)
                vb, vr = self.expr(d.init)
                self.emit(I_WRAP32 if t == "int32" else I_MOV, reg, vr)
                self.release(m)
            else:
                self.emit(I_CONST, reg, self.iconst(0))
            self.bind(d.name, _Sym("scalar", "I", reg, t))

    def ref_bind(self, s: RefBind) -> None:
        base = self.lookup(s.target.base.name)
        m = self.mark()
        ib, ir = self.expr(s.target.index)
        bufreg = self.ialloc()
        idxreg = self.ialloc()
        self.emit(CHKIDX, base.reg, ir)
        self.emit(I_MOV, bufreg, base.reg)
        self.emit(I_MOV, idxreg, ir)
        self.nf = m[0]
        lay = self.layout_of(s.record)
        sym = _Sym("ref", "I", bufreg, "", lay)
        sym.reg2 = idxreg
        self.bind(s.name, sym)

    def assign(self, s: Assign) -> None:
        lv = s.lvalue
        if isinstance(lv, Ident):
            sym = self.lookup(lv.name)
            if sym is None:
                self.assign_global(s, lv.name)
                return
            self.assign_scalar(s, sym)
            return
        addr = self.address(lv)
        slot_t = self.ty(lv).name
        if s.op == "=":
            vb, vr = self.expr(s.value)
            self.store_addr(addr, slot_t, vb, vr)
        else:
            ob, orr = self.load_addr(addr)
            vb, vr = self.expr(s.value)
            rb, rr = self.binop(s.op[0], slot_t, ob, orr,
                                self.ty(s.value).name, vb, vr)
            self.store_addr(addr, slot_t, rb, rr)

    def assign_scalar(self, s: Assign, sym: _Sym) -> None:
        t = sym.scalar
        if s.op == "=":
            vb, vr = self.expr(s.value)
        else:
            vb0, vr0 = sym.bank, sym.reg
            b1, r1 = self.expr(s.value)
            vb, vr = self.binop(s.op[0], t, vb0, vr0, self.ty(s.value).name, b1, r1)
        if t in _FLOATS:
            self.emit(F_RND32 if t == "float32" else F_MOV, sym.reg, self.to_f(vb, vr))
        else:
            self.emit(I_WRAP32 if t == "int32" else I_MOV, sym.reg, vr)

    def assign_global(self, s: Assign, name: str) -> None:
        bank, slot, t = self.pc.global_slots[name]
        if s.op == "=":
            vb, vr = self.expr(s.value)
        else:
            ob, orr = self.load_global(name)
            b1, r1 = self.expr(s.value)
            vb, vr = self.binop(s.op[0], t, ob, orr, self.ty(s.value).name, b1, r1)
        self.store_global(name, vb, vr)

    def load_global(self, name: str):
        bank, slot, t = self.pc.global_slots[name]
        if bank == 0:
            r = self.falloc()
            self.emit(GF_LD, r, slot)
            return "F", r
        r = self.ialloc()
        self.emit(GI_LD, r, slot)
        return "I", r

    def store_global(self, name: str, vb: str, vr: int) -> None:
        bank, slot, t = self.pc.global_slots[name]
        if bank == 0:
            fr = self.to_f(vb, vr)
            if t == "float32":
                r2 = self.falloc()
                self.emit(F_RND32, r2, fr)
                fr = r2
            self.emit(GF_ST, fr, slot)
        else:
            if t == "int32":
                r2 = self.ialloc()
                self.emit(I_WRAP32, r2, vr)
                vr = r2
            self.emit(GI_ST, vr, slot)

    def if_stmt(self, s: If) -> None:
        m = self.mark()
        cb, cr = self.expr(s.cond)
        j_else = self.emit(JZ, cr, 0)
        self.release(m)
        self.block(s.then)
        if s.orelse is not None:
            j_end = self.emit(JMP, 0)
            self.patch(j_else, 2, self.here())
            self.block(s.orelse)
            self.patch(j_end, 1, self.here())
        else:
            self.patch(j_else, 2, self.here())

    def for_stmt(self, s: For) -> None:
        rid = -1
        if s.region is not None:
            rid = len(self.regions)
            self.regions.append(s.region)
            self.emit(RENTER, rid)
        self.push_scope()
        if s.init is not None:
            self.stmt(s.init)
        top = self.here()
        j_end = -1
        if s.cond is not None:
            m = self.mark()
            cb, cr = self.expr(s.cond)
            j_end = self.emit(JZ, cr, 0)
            self.release(m)
        self.block(s.body)
        if s.step is not None:
            self.stmt(s.step)
        self.emit(JMP, top)
        if j_end >= 0:
            self.patch(j_end, 2, self.here())
        self.pop_scope()
        if rid >= 0:
            self.emit(REXIT, rid)

    def ret(self, s: Return) -> None:
        rt = self.fn.return_type if self.fn else "void"
        if s.value is None or rt == "void":
            self.emit(RET)
            return
        vb, vr = self.expr(s.value)
        if rt in _FLOATS:
            fr = self.to_f(vb, vr)
            if rt == "float32":
                r2 = self.falloc()
                self.emit(F_RND32, r2, fr)
                fr = r2
            self.emit(RETF, fr)
        else:
            if rt == "int32":
                r2 = self.ialloc()
                self.emit(I_WRAP32, r2, vr)
                vr = r2
            self.emit(RETI, vr)

    # ---- addressing ----

    def address(self, e: Expr) -> _Addr:
        chain: list = []
        node = e
        while isinstance(node, (Field, Index)):
            if isinstance(node, Field):
                chain.append(("field", node.name))
            else:
                chain.append(("index", node.index))
            node = node.base
        if not isinstance(node, Ident):
            raise InternalError("unsupported address expression")
        sym = self.lookup(node.name)
        chain.reverse()

        if sym.kind == "buf" and sym.record is None:
            # flat scalar array: single index step
            _, idx_expr = chain[0]
            ib, ir = self.expr(idx_expr)
            return _Addr(sym.reg, ir, SCALAR_CODE[sym.scalar])

        if sym.kind == "buf":
            _, idx_expr = chain[0]
            ib, ir = self.expr(idx_expr)
            bufreg, idxreg = sym.reg, ir
            lay = sym.record
            steps = chain[1:]
        elif sym.kind == "ref":
            bufreg, idxreg = sym.reg, sym.reg2
            lay = sym.record
            steps = chain
        elif sym.kind == "rec":
            bufreg = sym.reg
            idxreg = self.itempc(0)
            lay = sym.record
            steps = chain
        else:
            raise InternalError(f"cannot address through {sym.kind}")

        off = 0
        offreg = -1
        scode = -1
        i = 0
        while i < len(steps):
            kind, payload = steps[i]
            if kind != "field":
                raise InternalError("malformed access chain")
            slot = lay.slots[payload]
            off += slot.offset
            if slot.count > 0:
                _, idx_expr = steps[i + 1]
                i += 2
                if isinstance(idx_expr, IntLit):
                    off += idx_expr.value * slot.elem_size
                else:
                    kb, kr = self.expr(idx_expr)
                    self.emit(CHKR, kr, slot.count)
                    stride = self.itempc(slot.elem_size)
                    prod = self.ialloc()
                    self.emit(I_MUL, prod, kr, stride)
                    if offreg < 0:
                        offreg = self.ialloc()
                        base = self.itempc(off)
                        self.emit(I_ADD, offreg, base, prod)
                        off = 0
                    else:
                        self.emit(I_ADD, offreg, offreg, prod)
            else:
                i += 1
            if slot.record is not None:
                lay = slot.record
            else:
                scode = SCALAR_CODE[slot.scalar]
        if scode < 0:
            raise InternalError("address does not resolve to a scalar")
        if offreg >= 0 and off:
            extra = self.itempc(off)
            self.emit(I_ADD, offreg, offreg, extra)
            off = 0
        return _Addr(bufreg, idxreg, scode, off, offreg)

    def load_addr(self, a: _Addr):
        if a.scode in (SC_F64, SC_F32):
            r = self.falloc()
            bank = "F"
        else:
            r = self.ialloc()
            bank = "I"
        if a.offreg >= 0:
            self.emit(LDX, r, a.bufreg, a.idxreg, a.scode, a.offreg)
        else:
            self.emit(LD, r, a.bufreg, a.idxreg, a.scode, a.off)
        return bank, r

    def store_addr(self, a: _Addr, slot_t: str, vb: str, vr: int) -> None:
        if slot_t in _FLOATS:
            vr = self.to_f(vb, vr)
        if a.offreg >= 0:
            self.emit(STX, vr, a.bufreg, a.idxreg, a.scode, a.offreg)
        else:
            self.emit(ST, vr, a.bufreg, a.idxreg, a.scode, a.off)

    # ---- expressions ----

    def expr(self, e: Expr):
        if isinstance(e, IntLit):
            return "I", self.itempc(e.value)
        if isinstance(e, FloatLit):
            v = float(np.float32(e.value)) if e.is_f32 else float(e.value)
            return "F", self.ftempc(v)
        if isinstance(e, BoolLit):
            return "I", self.itempc(1 if e.value else 0)
        if isinstance(e, Ident):
            sym = self.lookup(e.name)
            if sym is None:
                return self.load_global(e.name)
            if sym.kind == "scalar":
                return sym.bank, sym.reg
            if sym.kind in ("buf", "rec"):
                return "I", sym.reg
            raise InternalError(f"reference {e.name!r} used as a value")
        if isinstance(e, (Index, Field)):
            addr = self.address(e)
            return self.load_addr(addr)
        if isinstance(e, Unary):
            return self.unary(e)
        if isinstance(e, Binary):
            return self.binary(e)
        if isinstance(e, Call):
            return self.call(e)
        raise InternalError(f"cannot compile expression {type(e).__name__}")

    def unary(self, e: Unary):
        ob, orr = self.expr(e.operand)
        if e.op == "!":
            r = self.ialloc()
            self.emit(B_NOT, r, orr)
            return "I", r
        if ob == "F":
            r = self.falloc()
            self.emit(F_NEG, r, orr)
            return "F", r
        r = self.ialloc()
        self.emit(I_NEG, r, orr)
        return "I", r

    _F_BIN = {"+": F_ADD, "-": F_SUB, "*": F_MUL, "/": F_DIV}
    _I_BIN = {"+": I_ADD, "-": I_SUB, "*": I_MUL, "/": I_DIV}
    _F_CMP = {"<": FLT, "<=": FLE, ">": FGT, ">=": FGE, "==": FEQ, "!=": FNE}
    _I_CMP = {"<": ILT, "<=": ILE, ">": IGT, ">=": IGE, "==": IEQ, "!=": INE}

    def binop(self, op: str, lt: str, lb: str, lr: int, rt: str, rb: str, rr: int):
        """Arithmetic in the promoted domain; lt/rt are static scalar types."""
        if lt in _FLOATS or rt in _FLOATS:
            fa = self.to_f(lb, lr)
            fb = self.to_f(rb, rr)
            r = self.falloc()
            self.emit(self._F_BIN[op], r, fa, fb)
            return "F", r
        r = self.ialloc()
        self.emit(self._I_BIN[op], r, lr, rr)
        return "I", r

    def binary(self, e: Binary):
        op = e.op
        if op in ("&&", "||"):
            return self.logic(e)
        lt = self.ty(e.lhs).name
        rt = self.ty(e.rhs).name
        if op in self._F_CMP:
            is_f = lt in _FLOATS or rt in _FLOATS
            lb, lr = self.expr(e.lhs)
            rb, rr = self.expr(e.rhs)
            r = self.ialloc()
            if is_f:
                self.emit(self._F_CMP[op], r, self.to_f(lb, lr), self.to_f(rb, rr))
            else:
                self.emit(self._I_CMP[op], r, lr, rr)
            return "I", r
        lb, lr = self.expr(e.lhs)
        rb, rr = self.expr(e.rhs)
        return self.binop(op, lt, lb, lr, rt, rb, rr)

    def logic(self, e: Binary):
        dst = self.ialloc()
        m = self.mark()
        cb, cr = self.expr(e.lhs)
        if e.op == "&&":
            j1 = self.emit(JZ, cr, 0)
        else:
            j1 = self.emit(JNZ, cr, 0)
        self.release(m)
        m = self.mark()
        db, dr = self.expr(e.rhs)
        if e.op == "&&":
            j2 = self.emit(JZ, dr, 0)
        else:
            j2 = self.emit(JNZ, dr, 0)
        self.release(m)
        if e.op == "&&":
            self.emit(I_CONST, dst, self.iconst(1))
            j3 = self.emit(JMP, 0)
            short = self.here()
            self.emit(I_CONST, dst, self.iconst(0))
        else:
            self.emit(I_CONST, dst, self.iconst(0))
            j3 = self.emit(JMP, 0)
            short = self.here()
            self.emit(I_CONST, dst, self.iconst(1))
        self.patch(j1, 2, short)
        self.patch(j2, 2, short)
        self.patch(j3, 1, self.here())
        return "I", dst

    def call(self, e: Call):
        if e.name in BUILTINS:
            return self.builtin(e)
        fidx = self.pc.fn_index[e.name]
        callee = self.pc.unit.function(e.name)
        tab: list = []
        for a, p in zip(e.args, callee.params):
            t = p.type.name
            if t in SCALAR_SIZES and not p.is_array_base:
                vb, vr = self.expr(a)
                if t in _FLOATS:
                    fr = self.to_f(vb, vr)
                    if t == "float32":
                        r2 = self.falloc()
                        self.emit(F_RND32, r2, fr)
                        fr = r2
                    tab.append([PK_F, fr, 0])
                else:
                    if t == "int32":
                        r2 = self.ialloc()
                        self.emit(I_WRAP32, r2, vr)
                        vr = r2
                    tab.append([PK_I, vr, 0])
            elif p.is_array_base:
                vb, vr = self.expr(a)
                tab.append([PK_BUF, vr, 0])
            else:
                bufreg, offreg = self.rec_arg(a)
                tab.append([PK_REC, bufreg, offreg])
        tabidx = len(self.argtabs)
        self.argtabs.append(tab)
        rt = callee.return_type
        if rt == "void":
            self.emit(CALL, fidx, tabidx, 0, 0)
            return "I", self.itempc(0)
        if rt in _FLOATS:
            dst = self.falloc()
            self.emit(CALL, fidx, tabidx, dst, 1)
            return "F", dst
        dst = self.ialloc()
        self.emit(CALL, fidx, tabidx, dst, 2)
        return "I", dst

    def rec_arg(self, a: Expr):
        """Byte base of a record-valued argument: (buffer reg, offset reg)."""
        chain: list = []
        node = a
        while isinstance(node, (Field, Index)):
            if isinstance(node, Field):
                chain.append(("field", node.name))
            else:
                chain.append(("index", node.index))
            node = node.base
        sym = self.lookup(node.name)
        chain.reverse()
        off = 0
        offreg = -1
        if sym.kind == "buf":
            _, idx_expr = chain[0]
            ib, ir = self.expr(idx_expr)
            self.emit(CHKIDX, sym.reg, ir)
            stride = self.itempc(sym.record.size)
            offreg = self.ialloc()
            self.emit(I_MUL, offreg, ir, stride)
            lay = sym.record
            steps = chain[1:]
            bufreg = sym.reg
        elif sym.kind == "ref":
            stride = self.itempc(sym.record.size)
            offreg = self.ialloc()
            self.emit(I_MUL, offreg, sym.reg2, stride)
            lay = sym.record
            steps = chain
            bufreg = sym.reg
        else:  # record-value parameter
            lay = sym.record
            steps = chain
            bufreg = sym.reg
            offreg = self.itempc(0)
        i = 0
        while i < len(steps):
            kind, payload = steps[i]
            slot = lay.slots[payload]
            off += slot.offset
            if slot.count > 0:
                _, idx_expr = steps[i + 1]
                i += 2
                if isinstance(idx_expr, IntLit):
                    off += idx_expr.value * slot.elem_size
                else:
                    kb, kr = self.expr(idx_expr)
                    self.emit(CHKR, kr, slot.count)
                    stride = self.itempc(slot.elem_size)
                    prod = self.ialloc()
                    self.emit(I_MUL, prod, kr, stride)
                    self.emit(I_ADD, offreg, offreg, prod)
            else:
                i += 1
            lay = slot.record
        if off:
            extra = self.itempc(off)
            self.emit(I_ADD, offreg, offreg, extra)
        return bufreg, offreg

    def builtin(self, e: Call):
        args = [self.expr(a) for a in e.args]
        types = [self.ty(a).name for a in e.args]
        any_f = any(t in _FLOATS for t in types)
        if e.name == "sqrt":
            r = self.falloc()
            self.emit(F_SQRT, r, self.to_f(*args[0]))
            return "F", r
        if e.name == "pow":
            r = self.falloc()
            self.emit(F_POW, r, self.to_f(*args[0]), self.to_f(*args[1]))
            return "F", r
        if e.name == "abs":
            if any_f:
                r = self.falloc()
                self.emit(F_ABS, r, self.to_f(*args[0]))
                return "F", r
            r = self.ialloc()
            self.emit(I_ABS, r, args[0][1])
            return "I", r
        op_f = F_MIN if e.name == "min" else F_MAX
        op_i = I_MIN if e.name == "min" else I_MAX
        if any_f:
            r = self.falloc()
            self.emit(op_f, r, self.to_f(*args[0]), self.to_f(*args[1]))
            return "F", r
        r = self.ialloc()
        self.emit(op_i, r, args[0][1], args[1][1])
        return "I", r


class _ProgramCompiler:
    def __init__(self, unit: SourceUnit, analysis: Analysis):
        self.unit = unit
        self.analysis = analysis
        self.fn_index = {f.name: i for i, f in enumerate(unit.functions)}
        self.global_slots: dict = {}
        ngf = ngi = 0
        for g in unit.globals:
            if g.type.name in _FLOATS:
                self.global_slots[g.name] = (0, ngf, g.type.name)
                ngf += 1
            else:
                self.global_slots[g.name] = (1, ngi, g.type.name)
                ngi += 1
        self.ngf, self.ngi = ngf, ngi

    def compile(self) -> CompiledProgram:
        fns = []
        for f in self.unit.functions:
            c = _FnCompiler(self, f, f.name)
            fns.append(c.compile_function())
        ginit = _FnCompiler(self, None, "@globals").compile_ginit(self.unit)
        return CompiledProgram(self.unit, self.analysis, fns, dict(self.fn_index),
                               ginit, dict(self.global_slots),
                               [g.name for g in self.unit.globals],
                               self.ngf, self.ngi)


def compile_unit(unit: SourceUnit, analysis: Analysis | None = None) -> CompiledProgram:
    """Bytecode for a unit; analysis must be clean (no diagnostics)."""
    if analysis is None:
        analysis = analyze(unit)
    raise_first(analysis.diagnostics)
    return _ProgramCompiler(unit, analysis).compile()


def disassemble(fn: FnCode) -> str:
    """Debug listing, one instruction per line."""
    lines = [f"function {fn.name}  (f={fn.nf} i={fn.ni})"]
    for i, row in enumerate(fn.code):
        op = OP_NAMES.get(int(row[0]), str(row[0]))
        args = " ".join(str(int(x)) for x in row[1:])
        lines.append(f"  {i:4d}  {op:8s} {args}")
    return "\n".join(lines)
