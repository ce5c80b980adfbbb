"""Pure-Python bytecode engine.

Reference implementation. The compiled engine must match it bit for bit,
so every opcode here is written against the numeric rules in compile.py:
float64 arithmetic with explicit IEEE handling where Python would raise
(division by zero, pow overflow/domain, sqrt of negatives), wrapping
int64/int32, truncating integer division, and min/max that skip nans and
return the right operand on ties. Arithmetic that yields a nan is
canonicalized to the positive quiet nan so the bit pattern never depends
on hardware nan-propagation order.
"""

from __future__ import annotations

import math
import struct
from time import perf_counter

from ..errors import (
    BoundsError,
    DeadBufferError,
    DivisionByZero,
    InternalError,
    MiniRuntimeError,
    NegativeSize,
    PoisonRead,
)
from .compile import (
    ALLOC, B_NOT, CALL, CHKIDX, CHKR, CompiledProgram, F_ABS, F_ADD, F_CONST,
    F_DIV, F_MAX, F_MIN, F_MOV, F_MUL, F_NEG, F_POW, F_RND32, F_SQRT, F_SUB,
    FEQ, FGE, FGT, FLE, FLT, FNE, FnCode, FREE, GF_LD, GF_ST, GI_LD, GI_ST,
    I2F, I_ABS, I_ADD, I_CONST, I_DIV, I_MAX, I_MIN, I_MOV, I_MUL, I_NEG,
    I_SUB, I_WRAP32, IEQ, IGE, IGT, ILE, ILT, INE, JMP, JNZ, JZ, LD, LDX,
    PK_BUF, PK_F, PK_I, PK_REC, RENTER, RET, RETF, RETI, REXIT, ST, STMT,
    STX,
)
from .store import Buffer, RuntimeStore

_SF = struct.Struct("<f")
_SD = struct.Struct("<d")
_SI = struct.Struct("<i")
_SQ = struct.Struct("<q")

_U64 = 1 << 64
_S64 = 1 << 63
_U32 = 1 << 32
_S32 = 1 << 31


def wrap64(v: int) -> int:
    v &= _U64 - 1
    return v - _U64 if v >= _S64 else v


def wrap32(v: int) -> int:
    v &= _U32 - 1
    return v - _U32 if v >= _S32 else v


def f32(v: float) -> float:
    """Round to float32 and widen back; overflow becomes an infinity."""
    try:
        return _SF.unpack(_SF.pack(v))[0]
    except OverflowError:
        return math.inf if v > 0 else -math.inf


def fdiv(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or a != a:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    r = a / b
    return r if r == r else math.nan


def fpow(a: float, b: float) -> float:
    try:
        r = math.pow(a, b)
        return r if r == r else math.nan
    except OverflowError:
        odd = math.isfinite(b) and b == int(b) and int(b) % 2 != 0
        return -math.inf if (a < 0.0 and odd) else math.inf
    except ValueError:
        if a == 0.0:
            odd = math.isfinite(b) and b == int(b) and int(b) % 2 != 0
            if math.copysign(1.0, a) < 0.0 and odd:
                return -math.inf
            return math.inf
        return math.nan


def fsqrt(v: float) -> float:
    return math.sqrt(v) if v >= 0.0 else math.nan


def fmin(a: float, b: float) -> float:
    if a != a:
        return b
    if b != b:
        return a
    return a if a < b else b


def fmax(a: float, b: float) -> float:
    if a != a:
        return b
    if b != b:
        return a
    return a if a > b else b


def idiv(a: int, b: int) -> int:
    if b == 0:
        raise DivisionByZero("integer division by zero")
    q = -(-a // b) if (a < 0) != (b < 0) else a // b
    return wrap64(q)


def _prep(fn: FnCode):
    p = getattr(fn, "_py", None)
    if p is None:
        code = [tuple(int(x) for x in row) for row in fn.code]
        argtabs = []
        for s, c in fn.argtab_index.tolist():
            argtabs.append([tuple(int(x) for x in r)
                            for r in fn.argtab_data[s:s + c]])
        allocs = [tuple(int(x) for x in r) for r in fn.allocs]
        rcodes = [tuple(int(x) for x in r) for r in fn.region_codes]
        p = (code, fn.fpool.tolist(), fn.ipool.tolist(), argtabs, allocs,
             rcodes, fn.nf, fn.ni,
             [tuple(int(x) for x in r) for r in fn.params], fn.name,
             fn.alloc_names)
        fn._py = p
    return p


def build_entry_frame(program: CompiledProgram, fn: FnCode, store: RuntimeStore):
    """Registers for the entry call, marshalled from a runtime store."""
    src = program.unit.function(fn.name)
    fregs = [0.0] * fn.nf
    iregs = [0] * fn.ni
    fi = ii = 0
    for p, row, scalar in zip(src.params, fn.params, fn.param_scalars):
        kind = int(row[0])
        if kind == PK_F:
            if p.name not in store.scalars:
                raise InternalError(f"store has no value for parameter {p.name!r}")
            v = float(store.scalars[p.name])
            fregs[fi] = f32(v) if scalar == "float32" else v
            fi += 1
        elif kind == PK_I:
            if p.name not in store.scalars:
                raise InternalError(f"store has no value for parameter {p.name!r}")
            v = int(store.scalars[p.name])
            iregs[ii] = wrap32(v) if scalar == "int32" else wrap64(v)
            ii += 1
        elif kind == PK_BUF:
            if p.name not in store.names:
                raise InternalError(f"store has no buffer for parameter {p.name!r}")
            iregs[ii] = store.names[p.name]
            ii += 1
        else:
            raise InternalError(
                f"entry function takes record {p.name!r} by value; call it "
                "through a wrapper instead")
    return fregs, iregs


def execute(program: CompiledProgram, entry: str, store: RuntimeStore,
            mode: str = "run", max_statements: int = 0):
    """Run ginit then the entry function; returns (value, stats dict)."""
    if entry not in program.fn_index:
        raise InternalError(f"unknown entry function {entry!r}")
    check = mode == "check"
    bufs = store.buffers
    gF = [0.0] * max(program.ngf, 1)
    gI = [0] * max(program.ngi, 1)
    counters = [0, 0, 0]  # statements, prologue copies, epilogue copies
    plan_cur: dict = {}
    plan_peak: dict = {}
    totals = [0, 0]  # current temp bytes, peak temp bytes
    region_seconds: dict = {}

    gfn = program.ginit
    _run(program, gfn, [0.0] * gfn.nf, [0] * gfn.ni, bufs, gF, gI, check,
         max_statements, counters, plan_cur, plan_peak, totals,
         region_seconds)
    fn = program.functions[program.fn_index[entry]]
    fregs, iregs = build_entry_frame(program, fn, store)
    ret = _run(program, fn, fregs, iregs, bufs, gF, gI, check,
               max_statements, counters, plan_cur, plan_peak, totals,
               region_seconds)

    for name in program.global_order:
        bank, slot, t = program.global_slots[name]
        if bank == 0:
            store.globals[name] = gF[slot]
        else:
            v = gI[slot]
            store.globals[name] = bool(v) if t == "bool" else v

    stats = {
        "statements": counters[0],
        "prologue_copies": counters[1],
        "epilogue_copies": counters[2],
        "plan_peaks": dict(plan_peak),
        "peak_temp_bytes": totals[1],
        "region_seconds": dict(region_seconds),
    }
    return ret, stats


def _kill(buf: Buffer, plan_cur, totals) -> None:
    nb = len(buf.data)
    buf.alive = False
    buf.data = bytearray()
    buf.mask = None
    if buf.plan >= 0:
        plan_cur[buf.plan] -= nb
        totals[0] -= nb


def _run(program, fn0, fregs, iregs, bufs, gF, gI, check, max_statements,
         counters, plan_cur, plan_peak, totals, region_seconds):
    (code, fpool, ipool, argtabs, allocs, rcodes, _nf, _ni, _params, fname,
     alloc_names) = _prep(fn0)
    fns = program.functions
    ip = 0
    bufmark = len(bufs)
    rkstack: list = []   # region kind codes
    rtstack: list = []   # (region id, t0)
    frames: list = []
    ret_dst = 0
    ret_bank = 0

    while True:
        row = code[ip]
        op = row[0]
        ip += 1

        if op == LD:
            buf = bufs[iregs[row[2]]]
            idx = iregs[row[3]]
            if not buf.alive:
                raise DeadBufferError(f"use of freed array {buf.name!r}")
            if idx < 0 or idx >= buf.length:
                raise BoundsError(
                    f"index {idx} out of range for {buf.name}[{buf.length}]")
            m = buf.mask
            if m is not None and not m[idx]:
                raise PoisonRead(
                    f"read of uninitialized element {buf.name}[{idx}]")
            byte = idx * buf.esize + row[5]
            sc = row[4]
            if sc == 0:
                fregs[row[1]] = _SD.unpack_from(buf.data, byte)[0]
            elif sc == 1:
                fregs[row[1]] = _SF.unpack_from(buf.data, byte)[0]
            elif sc == 2:
                iregs[row[1]] = _SQ.unpack_from(buf.data, byte)[0]
            elif sc == 3:
                iregs[row[1]] = _SI.unpack_from(buf.data, byte)[0]
            else:
                iregs[row[1]] = buf.data[byte]
        elif op == ST:
            buf = bufs[iregs[row[2]]]
            idx = iregs[row[3]]
            if not buf.alive:
                raise DeadBufferError(f"use of freed array {buf.name!r}")
            if idx < 0 or idx >= buf.length:
                raise BoundsError(
                    f"index {idx} out of range for {buf.name}[{buf.length}]")
            if buf.mask is not None:
                buf.mask[idx] = 1
            if rkstack:
                k = rkstack[-1]
                if k == 0:
                    counters[1] += 1
                elif k == 2:
                    counters[2] += 1
            byte = idx * buf.esize + row[5]
            sc = row[4]
            if sc == 0:
                _SD.pack_into(buf.data, byte, fregs[row[1]])
            elif sc == 1:
                v = fregs[row[1]]
                try:
                    _SF.pack_into(buf.data, byte, v)
                except OverflowError:
                    _SF.pack_into(buf.data, byte,
                                  math.inf if v > 0 else -math.inf)
            elif sc == 2:
                _SQ.pack_into(buf.data, byte, iregs[row[1]])
            elif sc == 3:
                _SI.pack_into(buf.data, byte, wrap32(iregs[row[1]]))
            else:
                buf.data[byte] = 1 if iregs[row[1]] else 0
        elif op == F_ADD:
            v = fregs[row[2]] + fregs[row[3]]
            fregs[row[1]] = v if v == v else math.nan
        elif op == F_MUL:
            v = fregs[row[2]] * fregs[row[3]]
            fregs[row[1]] = v if v == v else math.nan
        elif op == F_SUB:
            v = fregs[row[2]] - fregs[row[3]]
            fregs[row[1]] = v if v == v else math.nan
        elif op == F_DIV:
            fregs[row[1]] = fdiv(fregs[row[2]], fregs[row[3]])
        elif op == I_ADD:
            iregs[row[1]] = wrap64(iregs[row[2]] + iregs[row[3]])
        elif op == STMT:
            counters[0] += 1
            if max_statements and counters[0] > max_statements:
                raise MiniRuntimeError(
                    f"statement budget of {max_statements} exceeded")
        elif op == JZ:
            if iregs[row[1]] == 0:
                ip = row[2]
        elif op == JMP:
            ip = row[1]
        elif op == JNZ:
            if iregs[row[1]] != 0:
                ip = row[2]
        elif op == ILT:
            iregs[row[1]] = 1 if iregs[row[2]] < iregs[row[3]] else 0
        elif op == FLT:
            iregs[row[1]] = 1 if fregs[row[2]] < fregs[row[3]] else 0
        elif op == F_CONST:
            fregs[row[1]] = fpool[row[2]]
        elif op == I_CONST:
            iregs[row[1]] = ipool[row[2]]
        elif op == F_MOV:
            fregs[row[1]] = fregs[row[2]]
        elif op == I_MOV:
            iregs[row[1]] = iregs[row[2]]
        elif op == I_MUL:
            iregs[row[1]] = wrap64(iregs[row[2]] * iregs[row[3]])
        elif op == I_SUB:
            iregs[row[1]] = wrap64(iregs[row[2]] - iregs[row[3]])
        elif op == F_SQRT:
            fregs[row[1]] = fsqrt(fregs[row[2]])
        elif op == F_NEG:
            fregs[row[1]] = -fregs[row[2]]
        elif op == FLE:
            iregs[row[1]] = 1 if fregs[row[2]] <= fregs[row[3]] else 0
        elif op == FGT:
            iregs[row[1]] = 1 if fregs[row[2]] > fregs[row[3]] else 0
        elif op == FGE:
            iregs[row[1]] = 1 if fregs[row[2]] >= fregs[row[3]] else 0
        elif op == FEQ:
            iregs[row[1]] = 1 if fregs[row[2]] == fregs[row[3]] else 0
        elif op == FNE:
            iregs[row[1]] = 1 if fregs[row[2]] != fregs[row[3]] else 0
        elif op == ILE:
            iregs[row[1]] = 1 if iregs[row[2]] <= iregs[row[3]] else 0
        elif op == IGT:
            iregs[row[1]] = 1 if iregs[row[2]] > iregs[row[3]] else 0
        elif op == IGE:
            iregs[row[1]] = 1 if iregs[row[2]] >= iregs[row[3]] else 0
        elif op == IEQ:
            iregs[row[1]] = 1 if iregs[row[2]] == iregs[row[3]] else 0
        elif op == INE:
            iregs[row[1]] = 1 if iregs[row[2]] != iregs[row[3]] else 0
        elif op == LDX or op == STX:
            buf = bufs[iregs[row[2]]]
            idx = iregs[row[3]]
            if not buf.alive:
                raise DeadBufferError(f"use of freed array {buf.name!r}")
            if idx < 0 or idx >= buf.length:
                raise BoundsError(
                    f"index {idx} out of range for {buf.name}[{buf.length}]")
            byte = idx * buf.esize + iregs[row[5]]
            sc = row[4]
            w = 8 if sc in (0, 2) else (4 if sc in (1, 3) else 1)
            if byte < 0 or byte + w > len(buf.data):
                raise BoundsError(
                    f"embedded access at byte {byte} escapes {buf.name!r}")
            if op == LDX:
                if sc == 0:
                    fregs[row[1]] = _SD.unpack_from(buf.data, byte)[0]
                elif sc == 1:
                    fregs[row[1]] = _SF.unpack_from(buf.data, byte)[0]
                elif sc == 2:
                    iregs[row[1]] = _SQ.unpack_from(buf.data, byte)[0]
                elif sc == 3:
                    iregs[row[1]] = _SI.unpack_from(buf.data, byte)[0]
                else:
                    iregs[row[1]] = buf.data[byte]
            else:
                if buf.mask is not None:
                    buf.mask[idx] = 1
                if rkstack:
                    k = rkstack[-1]
                    if k == 0:
                        counters[1] += 1
                    elif k == 2:
                        counters[2] += 1
                if sc == 0:
                    _SD.pack_into(buf.data, byte, fregs[row[1]])
                elif sc == 1:
                    v = fregs[row[1]]
                    try:
                        _SF.pack_into(buf.data, byte, v)
                    except OverflowError:
                        _SF.pack_into(buf.data, byte,
                                      math.inf if v > 0 else -math.inf)
                elif sc == 2:
                    _SQ.pack_into(buf.data, byte, iregs[row[1]])
                elif sc == 3:
                    _SI.pack_into(buf.data, byte, wrap32(iregs[row[1]]))
                else:
                    buf.data[byte] = 1 if iregs[row[1]] else 0
        elif op == F_POW:
            fregs[row[1]] = fpow(fregs[row[2]], fregs[row[3]])
        elif op == F_ABS:
            fregs[row[1]] = math.fabs(fregs[row[2]])
        elif op == F_MIN:
            fregs[row[1]] = fmin(fregs[row[2]], fregs[row[3]])
        elif op == F_MAX:
            fregs[row[1]] = fmax(fregs[row[2]], fregs[row[3]])
        elif op == F_RND32:
            fregs[row[1]] = f32(fregs[row[2]])
        elif op == I_DIV:
            iregs[row[1]] = idiv(iregs[row[2]], iregs[row[3]])
        elif op == I_NEG:
            iregs[row[1]] = wrap64(-iregs[row[2]])
        elif op == I_ABS:
            iregs[row[1]] = wrap64(abs(iregs[row[2]]))
        elif op == I_MIN:
            iregs[row[1]] = min(iregs[row[2]], iregs[row[3]])
        elif op == I_MAX:
            iregs[row[1]] = max(iregs[row[2]], iregs[row[3]])
        elif op == I_WRAP32:
            iregs[row[1]] = wrap32(iregs[row[2]])
        elif op == I2F:
            fregs[row[1]] = float(iregs[row[2]])
        elif op == B_NOT:
            iregs[row[1]] = 0 if iregs[row[2]] else 1
        elif op == CHKR:
            v = iregs[row[1]]
            if v < 0 or v >= row[2]:
                raise BoundsError(
                    f"embedded array index {v} outside [0, {row[2]})")
        elif op == CHKIDX:
            buf = bufs[iregs[row[1]]]
            if not buf.alive:
                raise DeadBufferError(f"use of freed array {buf.name!r}")
            idx = iregs[row[2]]
            if idx < 0 or idx >= buf.length:
                raise BoundsError(
                    f"index {idx} out of range for {buf.name}[{buf.length}]")
        elif op == ALLOC:
            ln = iregs[row[2]]
            if ln < 0:
                raise NegativeSize(f"array length {ln} is negative")
            sc, plan, es = allocs[row[3]]
            nb = ln * es
            buf = Buffer(alloc_names[row[3]],
                         {0: "float64", 1: "float32", 2: "int64",
                          3: "int32", 4: "bool"}[sc],
                         None, es, ln, bytearray(nb),
                         bytearray(ln) if check else None, True, plan)
            bufs.append(buf)
            iregs[row[1]] = len(bufs) - 1
            if plan >= 0:
                cur = plan_cur.get(plan, 0) + nb
                plan_cur[plan] = cur
                if cur > plan_peak.get(plan, 0):
                    plan_peak[plan] = cur
                totals[0] += nb
                if totals[0] > totals[1]:
                    totals[1] = totals[0]
        elif op == FREE:
            buf = bufs[iregs[row[1]]]
            if not buf.alive:
                raise DeadBufferError(f"double free of {buf.name!r}")
            _kill(buf, plan_cur, totals)
        elif op == GF_LD:
            fregs[row[1]] = gF[row[2]]
        elif op == GF_ST:
            gF[row[2]] = fregs[row[1]]
        elif op == GI_LD:
            iregs[row[1]] = gI[row[2]]
        elif op == GI_ST:
            gI[row[2]] = iregs[row[1]]
        elif op == RENTER:
            rid = row[1]
            rkstack.append(rcodes[rid][0])
            rtstack.append((rid, perf_counter()))
        elif op == REXIT:
            rkstack.pop()
            rid, t0 = rtstack.pop()
            key = (fname, rid)
            region_seconds[key] = (region_seconds.get(key, 0.0)
                                   + perf_counter() - t0)
        elif op == CALL:
            callee = fns[row[1]]
            (ccode, cfpool, cipool, cargtabs, callocs, crcodes, cnf, cni,
             cparams, cname, calloc_names) = _prep(callee)
            mark = len(bufs)
            nfregs = [0.0] * cnf
            niregs = [0] * cni
            fi = ii = 0
            for (kind, r1, r2), prow in zip(argtabs[row[2]], cparams):
                if kind == PK_F:
                    nfregs[fi] = fregs[r1]
                    fi += 1
                elif kind == PK_I or kind == PK_BUF:
                    niregs[ii] = iregs[r1]
                    ii += 1
                else:
                    src = bufs[iregs[r1]]
                    if not src.alive:
                        raise DeadBufferError(
                            f"use of freed array {src.name!r}")
                    off = iregs[r2]
                    size = prow[1]
                    if off < 0 or off + size > len(src.data):
                        raise BoundsError(
                            f"record copy at byte {off} escapes {src.name!r}")
                    bufs.append(Buffer("byval", None, None, size, 1,
                                       bytearray(src.data[off:off + size])))
                    niregs[ii] = len(bufs) - 1
                    ii += 1
            if row[4] == 1:
                fregs[row[3]] = 0.0
            elif row[4] == 2:
                iregs[row[3]] = 0
            frames.append((code, ip, fregs, iregs, fpool, ipool, argtabs,
                           allocs, rcodes, fname, alloc_names, bufmark,
                           rkstack, rtstack, ret_dst, ret_bank))
            code, fpool, ipool, argtabs, allocs = (ccode, cfpool, cipool,
                                                   cargtabs, callocs)
            rcodes, fname, alloc_names = crcodes, cname, calloc_names
            fregs, iregs = nfregs, niregs
            ip = 0
            bufmark = mark
            rkstack = []
            rtstack = []
            ret_dst = row[3]
            ret_bank = row[4]
        elif op == RET or op == RETF or op == RETI:
            if op == RETF:
                retv = fregs[row[1]]
                bank = 1
            elif op == RETI:
                retv = iregs[row[1]]
                bank = 2
            else:
                retv = None
                bank = 0
            for b in bufs[bufmark:]:
                if b.alive:
                    _kill(b, plan_cur, totals)
            del bufs[bufmark:]
            if not frames:
                return retv
            dst, dbank = ret_dst, ret_bank
            (code, ip, fregs, iregs, fpool, ipool, argtabs, allocs, rcodes,
             fname, alloc_names, bufmark, rkstack, rtstack, ret_dst,
             ret_bank) = frames.pop()
            if retv is not None:
                if dbank == 1 and bank == 1:
                    fregs[dst] = retv
                elif dbank == 2 and bank == 2:
                    iregs[dst] = retv
        else:
            raise InternalError(f"bad opcode {op} in {fname}")
