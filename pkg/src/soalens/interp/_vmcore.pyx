# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bytecode engine.

Twin of vm.py: same opcode table, same numeric edge handling, bit-equal
results. Integer overflow wraps through unsigned casts (signed overflow
would be undefined in C), division by zero and pow/sqrt domain errors are
reconstructed with the same formulas the pure engine uses, and float32
narrowing is a hardware cast on both sides. If the engines ever disagree
on a store byte, that is a bug here, not in the program under test.
"""

from libc.stdlib cimport free as cfree, malloc, realloc
from libc.string cimport memset
from libc.math cimport INFINITY, NAN, copysign, fabs, pow as cpow, sqrt as csqrt
from cpython.bytearray cimport PyByteArray_AS_STRING

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
from .store import Buffer
from .vm import build_entry_frame

cdef enum:
    OP_RET = 0
    OP_F_CONST = 1
    OP_I_CONST = 2
    OP_F_MOV = 3
    OP_I_MOV = 4
    OP_F_ADD = 5
    OP_F_SUB = 6
    OP_F_MUL = 7
    OP_F_DIV = 8
    OP_F_NEG = 9
    OP_F_SQRT = 10
    OP_F_POW = 11
    OP_F_ABS = 12
    OP_F_MIN = 13
    OP_F_MAX = 14
    OP_F_RND32 = 15
    OP_I_ADD = 16
    OP_I_SUB = 17
    OP_I_MUL = 18
    OP_I_DIV = 19
    OP_I_NEG = 20
    OP_I_ABS = 21
    OP_I_MIN = 22
    OP_I_MAX = 23
    OP_I_WRAP32 = 24
    OP_I2F = 25
    OP_B_NOT = 26
    OP_FLT = 27
    OP_FLE = 28
    OP_FGT = 29
    OP_FGE = 30
    OP_FEQ = 31
    OP_FNE = 32
    OP_ILT = 33
    OP_ILE = 34
    OP_IGT = 35
    OP_IGE = 36
    OP_IEQ = 37
    OP_INE = 38
    OP_JMP = 39
    OP_JZ = 40
    OP_JNZ = 41
    OP_LD = 42
    OP_ST = 43
    OP_LDX = 44
    OP_STX = 45
    OP_CHKR = 46
    OP_ALLOC = 47
    OP_FREE = 48
    OP_CHKIDX = 49
    OP_GF_LD = 50
    OP_GF_ST = 51
    OP_GI_LD = 52
    OP_GI_ST = 53
    OP_CALL = 54
    OP_RETF = 55
    OP_RETI = 56
    OP_STMT = 57
    OP_RENTER = 58
    OP_REXIT = 59

cdef enum:
    K_F = 0
    K_I = 1
    K_BUF = 2
    K_REC = 3


cdef inline long long _wrap64_add(long long a, long long b) noexcept:
    return <long long> (<unsigned long long> a + <unsigned long long> b)


cdef inline long long _wrap64_sub(long long a, long long b) noexcept:
    return <long long> (<unsigned long long> a - <unsigned long long> b)


cdef inline long long _wrap64_mul(long long a, long long b) noexcept:
    return <long long> (<unsigned long long> a * <unsigned long long> b)


cdef inline long long _wrap32(long long v) noexcept:
    cdef unsigned int u = <unsigned int> (<unsigned long long> v)
    return <long long> (<int> u)


cdef inline double _canon(double v) noexcept:
    # arithmetic nans are canonicalized; see vm.py
    return v if v == v else NAN


cdef inline double _fdiv(double a, double b) noexcept:
    if b == 0.0:
        if a == 0.0 or a != a:
            return NAN
        return copysign(INFINITY, a) * copysign(1.0, b)
    return _canon(a / b)


cdef inline double _fsqrt(double v) noexcept:
    if v >= 0.0:
        return csqrt(v)
    return NAN


cdef inline double _fmin(double a, double b) noexcept:
    if a != a:
        return b
    if b != b:
        return a
    return a if a < b else b


cdef inline double _fmax(double a, double b) noexcept:
    if a != a:
        return b
    if b != b:
        return a
    return a if a > b else b


cdef class FnPrep:
    cdef int[:, ::1] code
    cdef double[::1] fpool
    cdef long long[::1] ipool
    cdef int[:, ::1] params
    cdef int[:, ::1] allocs
    cdef int[:, ::1] rcodes
    cdef int[:, ::1] argdata
    cdef int[:, ::1] argindex
    cdef int nf, ni
    cdef str name
    cdef list alloc_names


cdef FnPrep _prep_fn(fn):
    cdef FnPrep p = FnPrep()
    p.code = fn.code
    p.fpool = fn.fpool
    p.ipool = fn.ipool.astype("int64") if fn.ipool.dtype.char != "q" else fn.ipool
    p.params = fn.params
    p.allocs = fn.allocs
    p.rcodes = fn.region_codes
    p.argdata = fn.argtab_data
    p.argindex = fn.argtab_index
    p.nf = fn.nf
    p.ni = fn.ni
    p.name = fn.name
    p.alloc_names = fn.alloc_names
    return p


def _prep_program(program):
    preps = getattr(program, "_native_prep", None)
    if preps is None:
        preps = [_prep_fn(f) for f in program.functions]
        preps.append(_prep_fn(program.ginit))
        program._native_prep = preps
    return preps


cdef class _Ctx:
    cdef double* fstack
    cdef long long* istack
    cdef Py_ssize_t fcap, icap
    cdef char** bdata
    cdef char** bmask
    cdef long long* blen
    cdef long long* besz
    cdef char* balive
    cdef long long* bplan
    cdef Py_ssize_t bcap
    cdef Py_ssize_t nbuf
    cdef double* gf
    cdef long long* gi
    cdef object store
    cdef bint check
    cdef long long statements, pro, epi
    cdef long long max_statements
    cdef long long tcur, tpeak
    cdef dict plan_cur, plan_peak, region_seconds

    def __cinit__(self, store, bint check, long long max_statements,
                  Py_ssize_t ngf, Py_ssize_t ngi):
        self.fcap = 4096
        self.icap = 4096
        self.fstack = <double*> malloc(self.fcap * sizeof(double))
        self.istack = <long long*> malloc(self.icap * sizeof(long long))
        self.bcap = 64
        self.bdata = <char**> malloc(self.bcap * sizeof(char*))
        self.bmask = <char**> malloc(self.bcap * sizeof(char*))
        self.blen = <long long*> malloc(self.bcap * sizeof(long long))
        self.besz = <long long*> malloc(self.bcap * sizeof(long long))
        self.balive = <char*> malloc(self.bcap)
        self.bplan = <long long*> malloc(self.bcap * sizeof(long long))
        self.gf = <double*> malloc(max(ngf, 1) * sizeof(double))
        self.gi = <long long*> malloc(max(ngi, 1) * sizeof(long long))
        if (self.fstack == NULL or self.istack == NULL or self.bdata == NULL
                or self.bmask == NULL or self.blen == NULL
                or self.besz == NULL or self.balive == NULL
                or self.bplan == NULL or self.gf == NULL or self.gi == NULL):
            raise MemoryError()
        memset(self.gf, 0, max(ngf, 1) * sizeof(double))
        memset(self.gi, 0, max(ngi, 1) * sizeof(long long))
        self.nbuf = 0
        self.store = store
        self.check = check
        self.max_statements = max_statements
        self.statements = 0
        self.pro = 0
        self.epi = 0
        self.tcur = 0
        self.tpeak = 0
        self.plan_cur = {}
        self.plan_peak = {}
        self.region_seconds = {}

    def __dealloc__(self):
        cfree(self.fstack)
        cfree(self.istack)
        cfree(self.bdata)
        cfree(self.bmask)
        cfree(self.blen)
        cfree(self.besz)
        cfree(self.balive)
        cfree(self.bplan)
        cfree(self.gf)
        cfree(self.gi)

    cdef int grow_regs(self, Py_ssize_t fneed, Py_ssize_t ineed) except -1:
        while self.fcap < fneed:
            self.fcap *= 2
        while self.icap < ineed:
            self.icap *= 2
        self.fstack = <double*> realloc(self.fstack,
                                        self.fcap * sizeof(double))
        self.istack = <long long*> realloc(self.istack,
                                           self.icap * sizeof(long long))
        if self.fstack == NULL or self.istack == NULL:
            raise MemoryError()
        return 0

    cdef Py_ssize_t register(self, buf) except -1:
        cdef Py_ssize_t i
        if self.nbuf >= self.bcap:
            self.bcap *= 2
            self.bdata = <char**> realloc(self.bdata,
                                          self.bcap * sizeof(char*))
            self.bmask = <char**> realloc(self.bmask,
                                          self.bcap * sizeof(char*))
            self.blen = <long long*> realloc(self.blen,
                                             self.bcap * sizeof(long long))
            self.besz = <long long*> realloc(self.besz,
                                             self.bcap * sizeof(long long))
            self.balive = <char*> realloc(self.balive, self.bcap)
            self.bplan = <long long*> realloc(self.bplan,
                                              self.bcap * sizeof(long long))
            if (self.bdata == NULL or self.bmask == NULL or self.blen == NULL
                    or self.besz == NULL or self.balive == NULL
                    or self.bplan == NULL):
                raise MemoryError()
        data = buf.data
        if not isinstance(data, bytearray):
            raise InternalError("buffer payloads must be bytearrays")
        i = self.nbuf
        self.bdata[i] = PyByteArray_AS_STRING(data)
        mask = buf.mask
        if mask is None:
            self.bmask[i] = NULL
        else:
            self.bmask[i] = PyByteArray_AS_STRING(mask)
        self.blen[i] = buf.length
        self.besz[i] = buf.esize
        self.balive[i] = 1 if buf.alive else 0
        self.bplan[i] = buf.plan
        self.nbuf += 1
        return i


cdef object _run(object program, list preps, FnPrep F0, _Ctx ctx,
                 list fregs0, list iregs0):
    cdef FnPrep F = F0
    cdef int[:, ::1] code = F.code
    cdef double[::1] fpool = F.fpool
    cdef long long[::1] ipool = F.ipool
    cdef Py_ssize_t ip = 0
    cdef Py_ssize_t fbase = 0, ibase = 0, ftop, itop
    cdef double* fr
    cdef long long* ir
    cdef Py_ssize_t bufmark = ctx.nbuf
    cdef int cur_rk = -1
    cdef list rk = []
    cdef list rt = []
    cdef list frames = []
    cdef int ret_dst = 0, ret_bank = 0
    cdef int op, sc, a
    cdef long long bid, idx, iv, iw, ln, nb, es, plan
    cdef float f32tmp
    cdef char* p
    cdef char* cm
    cdef Py_ssize_t i, n, mark, start, count
    cdef object retv, buf, src
    cdef FnPrep callee
    cdef int fi, ii, kind, r1, r2

    ftop = F.nf
    itop = F.ni
    ctx.grow_regs(ftop, itop)
    fr = ctx.fstack + fbase
    ir = ctx.istack + ibase
    memset(fr, 0, F.nf * sizeof(double))
    memset(ir, 0, F.ni * sizeof(long long))
    n = len(fregs0)
    for i in range(n):
        fr[i] = fregs0[i]
    n = len(iregs0)
    for i in range(n):
        ir[i] = iregs0[i]

    while True:
        op = code[ip, 0]
        ip += 1

        if op == OP_LD:
            bid = ir[code[ip - 1, 2]]
            if bid < 0 or bid >= ctx.nbuf:
                raise InternalError("buffer id out of range")
            if not ctx.balive[bid]:
                buf = ctx.store.buffers[bid]
                raise DeadBufferError(f"use of freed array {buf.name!r}")
            idx = ir[code[ip - 1, 3]]
            if idx < 0 or idx >= ctx.blen[bid]:
                buf = ctx.store.buffers[bid]
                raise BoundsError(
                    f"index {idx} out of range for {buf.name}[{buf.length}]")
            cm = ctx.bmask[bid]
            if cm != NULL and cm[idx] == 0:
                buf = ctx.store.buffers[bid]
                raise PoisonRead(
                    f"read of uninitialized element {buf.name}[{idx}]")
            p = ctx.bdata[bid] + idx * ctx.besz[bid] + code[ip - 1, 5]
            sc = code[ip - 1, 4]
            a = code[ip - 1, 1]
            if sc == 0:
                fr[a] = (<double*> p)[0]
            elif sc == 1:
                fr[a] = (<float*> p)[0]
            elif sc == 2:
                ir[a] = (<long long*> p)[0]
            elif sc == 3:
                ir[a] = (<int*> p)[0]
            else:
                ir[a] = (<unsigned char*> p)[0]
        elif op == OP_ST:
            bid = ir[code[ip - 1, 2]]
            if bid < 0 or bid >= ctx.nbuf:
                raise InternalError("buffer id out of range")
            if not ctx.balive[bid]:
                buf = ctx.store.buffers[bid]
                raise DeadBufferError(f"use of freed array {buf.name!r}")
            idx = ir[code[ip - 1, 3]]
            if idx < 0 or idx >= ctx.blen[bid]:
                buf = ctx.store.buffers[bid]
                raise BoundsError(
                    f"index {idx} out of range for {buf.name}[{buf.length}]")
            cm = ctx.bmask[bid]
            if cm != NULL:
                cm[idx] = 1
            if cur_rk == 0:
                ctx.pro += 1
            elif cur_rk == 2:
                ctx.epi += 1
            p = ctx.bdata[bid] + idx * ctx.besz[bid] + code[ip - 1, 5]
            sc = code[ip - 1, 4]
            a = code[ip - 1, 1]
            if sc == 0:
                (<double*> p)[0] = fr[a]
            elif sc == 1:
                f32tmp = <float> fr[a]
                (<float*> p)[0] = f32tmp
            elif sc == 2:
                (<long long*> p)[0] = ir[a]
            elif sc == 3:
                (<int*> p)[0] = <int> _wrap32(ir[a])
            else:
                (<unsigned char*> p)[0] = 1 if ir[a] else 0
        elif op == OP_F_ADD:
            fr[code[ip - 1, 1]] = _canon(fr[code[ip - 1, 2]]
                                         + fr[code[ip - 1, 3]])
        elif op == OP_F_MUL:
            fr[code[ip - 1, 1]] = _canon(fr[code[ip - 1, 2]]
                                         * fr[code[ip - 1, 3]])
        elif op == OP_F_SUB:
            fr[code[ip - 1, 1]] = _canon(fr[code[ip - 1, 2]]
                                         - fr[code[ip - 1, 3]])
        elif op == OP_F_DIV:
            fr[code[ip - 1, 1]] = _fdiv(fr[code[ip - 1, 2]],
                                        fr[code[ip - 1, 3]])
        elif op == OP_I_ADD:
            ir[code[ip - 1, 1]] = _wrap64_add(ir[code[ip - 1, 2]],
                                              ir[code[ip - 1, 3]])
        elif op == OP_STMT:
            ctx.statements += 1
            if ctx.max_statements and ctx.statements > ctx.max_statements:
                raise MiniRuntimeError(
                    f"statement budget of {ctx.max_statements} exceeded")
        elif op == OP_JZ:
            if ir[code[ip - 1, 1]] == 0:
                ip = code[ip - 1, 2]
        elif op == OP_JMP:
            ip = code[ip - 1, 1]
        elif op == OP_JNZ:
            if ir[code[ip - 1, 1]] != 0:
                ip = code[ip - 1, 2]
        elif op == OP_ILT:
            ir[code[ip - 1, 1]] = 1 if ir[code[ip - 1, 2]] < ir[code[ip - 1, 3]] else 0
        elif op == OP_FLT:
            ir[code[ip - 1, 1]] = 1 if fr[code[ip - 1, 2]] < fr[code[ip - 1, 3]] else 0
        elif op == OP_F_CONST:
            fr[code[ip - 1, 1]] = fpool[code[ip - 1, 2]]
        elif op == OP_I_CONST:
            ir[code[ip - 1, 1]] = ipool[code[ip - 1, 2]]
        elif op == OP_F_MOV:
            fr[code[ip - 1, 1]] = fr[code[ip - 1, 2]]
        elif op == OP_I_MOV:
            ir[code[ip - 1, 1]] = ir[code[ip - 1, 2]]
        elif op == OP_I_MUL:
            ir[code[ip - 1, 1]] = _wrap64_mul(ir[code[ip - 1, 2]],
                                              ir[code[ip - 1, 3]])
        elif op == OP_I_SUB:
            ir[code[ip - 1, 1]] = _wrap64_sub(ir[code[ip - 1, 2]],
                                              ir[code[ip - 1, 3]])
        elif op == OP_F_SQRT:
            fr[code[ip - 1, 1]] = _fsqrt(fr[code[ip - 1, 2]])
        elif op == OP_F_NEG:
            fr[code[ip - 1, 1]] = -fr[code[ip - 1, 2]]
        elif op == OP_FLE:
            ir[code[ip - 1, 1]] = 1 if fr[code[ip - 1, 2]] <= fr[code[ip - 1, 3]] else 0
        elif op == OP_FGT:
            ir[code[ip - 1, 1]] = 1 if fr[code[ip - 1, 2]] > fr[code[ip - 1, 3]] else 0
        elif op == OP_FGE:
            ir[code[ip - 1, 1]] = 1 if fr[code[ip - 1, 2]] >= fr[code[ip - 1, 3]] else 0
        elif op == OP_FEQ:
            ir[code[ip - 1, 1]] = 1 if fr[code[ip - 1, 2]] == fr[code[ip - 1, 3]] else 0
        elif op == OP_FNE:
            ir[code[ip - 1, 1]] = 1 if fr[code[ip - 1, 2]] != fr[code[ip - 1, 3]] else 0
        elif op == OP_ILE:
            ir[code[ip - 1, 1]] = 1 if ir[code[ip - 1, 2]] <= ir[code[ip - 1, 3]] else 0
        elif op == OP_IGT:
            ir[code[ip - 1, 1]] = 1 if ir[code[ip - 1, 2]] > ir[code[ip - 1, 3]] else 0
        elif op == OP_IGE:
            ir[code[ip - 1, 1]] = 1 if ir[code[ip - 1, 2]] >= ir[code[ip - 1, 3]] else 0
        elif op == OP_IEQ:
            ir[code[ip - 1, 1]] = 1 if ir[code[ip - 1, 2]] == ir[code[ip - 1, 3]] else 0
        elif op == OP_INE:
            ir[code[ip - 1, 1]] = 1 if ir[code[ip - 1, 2]] != ir[code[ip - 1, 3]] else 0
        elif op == OP_LDX or op == OP_STX:
            bid = ir[code[ip - 1, 2]]
            if bid < 0 or bid >= ctx.nbuf:
                raise InternalError("buffer id out of range")
            if not ctx.balive[bid]:
                buf = ctx.store.buffers[bid]
                raise DeadBufferError(f"use of freed array {buf.name!r}")
            idx = ir[code[ip - 1, 3]]
            if idx < 0 or idx >= ctx.blen[bid]:
                buf = ctx.store.buffers[bid]
                raise BoundsError(
                    f"index {idx} out of range for {buf.name}[{buf.length}]")
            iv = idx * ctx.besz[bid] + ir[code[ip - 1, 5]]
            sc = code[ip - 1, 4]
            iw = 8 if sc == 0 or sc == 2 else (4 if sc == 1 or sc == 3 else 1)
            if iv < 0 or iv + iw > ctx.blen[bid] * ctx.besz[bid]:
                buf = ctx.store.buffers[bid]
                raise BoundsError(
                    f"embedded access at byte {iv} escapes {buf.name!r}")
            p = ctx.bdata[bid] + iv
            a = code[ip - 1, 1]
            if op == OP_LDX:
                if sc == 0:
                    fr[a] = (<double*> p)[0]
                elif sc == 1:
                    fr[a] = (<float*> p)[0]
                elif sc == 2:
                    ir[a] = (<long long*> p)[0]
                elif sc == 3:
                    ir[a] = (<int*> p)[0]
                else:
                    ir[a] = (<unsigned char*> p)[0]
            else:
                cm = ctx.bmask[bid]
                if cm != NULL:
                    cm[idx] = 1
                if cur_rk == 0:
                    ctx.pro += 1
                elif cur_rk == 2:
                    ctx.epi += 1
                if sc == 0:
                    (<double*> p)[0] = fr[a]
                elif sc == 1:
                    f32tmp = <float> fr[a]
                    (<float*> p)[0] = f32tmp
                elif sc == 2:
                    (<long long*> p)[0] = ir[a]
                elif sc == 3:
                    (<int*> p)[0] = <int> _wrap32(ir[a])
                else:
                    (<unsigned char*> p)[0] = 1 if ir[a] else 0
        elif op == OP_F_POW:
            fr[code[ip - 1, 1]] = _canon(cpow(fr[code[ip - 1, 2]],
                                              fr[code[ip - 1, 3]]))
        elif op == OP_F_ABS:
            fr[code[ip - 1, 1]] = fabs(fr[code[ip - 1, 2]])
        elif op == OP_F_MIN:
            fr[code[ip - 1, 1]] = _fmin(fr[code[ip - 1, 2]],
                                        fr[code[ip - 1, 3]])
        elif op == OP_F_MAX:
            fr[code[ip - 1, 1]] = _fmax(fr[code[ip - 1, 2]],
                                        fr[code[ip - 1, 3]])
        elif op == OP_F_RND32:
            f32tmp = <float> fr[code[ip - 1, 2]]
            fr[code[ip - 1, 1]] = f32tmp
        elif op == OP_I_DIV:
            iv = ir[code[ip - 1, 2]]
            iw = ir[code[ip - 1, 3]]
            if iw == 0:
                raise DivisionByZero("integer division by zero")
            if iw == -1:
                ir[code[ip - 1, 1]] = <long long> (
                    0 - <unsigned long long> iv)
            else:
                ir[code[ip - 1, 1]] = iv / iw
        elif op == OP_I_NEG:
            ir[code[ip - 1, 1]] = <long long> (
                0 - <unsigned long long> ir[code[ip - 1, 2]])
        elif op == OP_I_ABS:
            iv = ir[code[ip - 1, 2]]
            if iv < 0:
                ir[code[ip - 1, 1]] = <long long> (0 - <unsigned long long> iv)
            else:
                ir[code[ip - 1, 1]] = iv
        elif op == OP_I_MIN:
            iv = ir[code[ip - 1, 2]]
            iw = ir[code[ip - 1, 3]]
            ir[code[ip - 1, 1]] = iv if iv < iw else iw
        elif op == OP_I_MAX:
            iv = ir[code[ip - 1, 2]]
            iw = ir[code[ip - 1, 3]]
            ir[code[ip - 1, 1]] = iv if iv > iw else iw
        elif op == OP_I_WRAP32:
            ir[code[ip - 1, 1]] = _wrap32(ir[code[ip - 1, 2]])
        elif op == OP_I2F:
            fr[code[ip - 1, 1]] = <double> ir[code[ip - 1, 2]]
        elif op == OP_B_NOT:
            ir[code[ip - 1, 1]] = 0 if ir[code[ip - 1, 2]] else 1
        elif op == OP_CHKR:
            iv = ir[code[ip - 1, 1]]
            if iv < 0 or iv >= code[ip - 1, 2]:
                raise BoundsError(
                    f"embedded array index {iv} outside [0, {code[ip - 1, 2]})")
        elif op == OP_CHKIDX:
            bid = ir[code[ip - 1, 1]]
            if bid < 0 or bid >= ctx.nbuf:
                raise InternalError("buffer id out of range")
            if not ctx.balive[bid]:
                buf = ctx.store.buffers[bid]
                raise DeadBufferError(f"use of freed array {buf.name!r}")
            idx = ir[code[ip - 1, 2]]
            if idx < 0 or idx >= ctx.blen[bid]:
                buf = ctx.store.buffers[bid]
                raise BoundsError(
                    f"index {idx} out of range for {buf.name}[{buf.length}]")
        elif op == OP_ALLOC:
            ln = ir[code[ip - 1, 2]]
            if ln < 0:
                raise NegativeSize(f"array length {ln} is negative")
            sc = F.allocs[code[ip - 1, 3], 0]
            plan = F.allocs[code[ip - 1, 3], 1]
            es = F.allocs[code[ip - 1, 3], 2]
            nb = ln * es
            buf = Buffer(F.alloc_names[code[ip - 1, 3]],
                         ("float64", "float32", "int64", "int32", "bool")[sc],
                         None, es, ln, bytearray(nb),
                         bytearray(ln) if ctx.check else None, True, plan)
            ctx.store.buffers.append(buf)
            ir[code[ip - 1, 1]] = ctx.register(buf)
            if plan >= 0:
                iv = ctx.plan_cur.get(plan, 0) + nb
                ctx.plan_cur[plan] = iv
                if iv > ctx.plan_peak.get(plan, 0):
                    ctx.plan_peak[plan] = iv
                ctx.tcur += nb
                if ctx.tcur > ctx.tpeak:
                    ctx.tpeak = ctx.tcur
        elif op == OP_FREE:
            bid = ir[code[ip - 1, 1]]
            if bid < 0 or bid >= ctx.nbuf:
                raise InternalError("buffer id out of range")
            buf = ctx.store.buffers[bid]
            if not ctx.balive[bid]:
                raise DeadBufferError(f"double free of {buf.name!r}")
            ctx.balive[bid] = 0
            nb = ctx.blen[bid] * ctx.besz[bid]
            buf.alive = False
            buf.data = bytearray()
            buf.mask = None
            if ctx.bplan[bid] >= 0:
                ctx.plan_cur[ctx.bplan[bid]] -= nb
                ctx.tcur -= nb
        elif op == OP_GF_LD:
            fr[code[ip - 1, 1]] = ctx.gf[code[ip - 1, 2]]
        elif op == OP_GF_ST:
            ctx.gf[code[ip - 1, 2]] = fr[code[ip - 1, 1]]
        elif op == OP_GI_LD:
            ir[code[ip - 1, 1]] = ctx.gi[code[ip - 1, 2]]
        elif op == OP_GI_ST:
            ctx.gi[code[ip - 1, 2]] = ir[code[ip - 1, 1]]
        elif op == OP_RENTER:
            rk.append(cur_rk)
            cur_rk = F.rcodes[code[ip - 1, 1], 0]
            rt.append((code[ip - 1, 1], perf_counter()))
        elif op == OP_REXIT:
            cur_rk = rk.pop()
            rid_t0 = rt.pop()
            key = (F.name, rid_t0[0])
            ctx.region_seconds[key] = (ctx.region_seconds.get(key, 0.0)
                                       + perf_counter() - rid_t0[1])
        elif op == OP_CALL:
            callee = <FnPrep> preps[code[ip - 1, 1]]
            mark = ctx.nbuf
            start = F.argindex[code[ip - 1, 2], 0]
            count = F.argindex[code[ip - 1, 2], 1]
            ctx.grow_regs(ftop + callee.nf, itop + callee.ni)
            fr = ctx.fstack + fbase
            ir = ctx.istack + ibase
            memset(ctx.fstack + ftop, 0, callee.nf * sizeof(double))
            memset(ctx.istack + itop, 0, callee.ni * sizeof(long long))
            fi = 0
            ii = 0
            for i in range(count):
                kind = F.argdata[start + i, 0]
                r1 = F.argdata[start + i, 1]
                if kind == K_F:
                    ctx.fstack[ftop + fi] = fr[r1]
                    fi += 1
                elif kind == K_I or kind == K_BUF:
                    ctx.istack[itop + ii] = ir[r1]
                    ii += 1
                else:
                    r2 = F.argdata[start + i, 2]
                    bid = ir[r1]
                    if bid < 0 or bid >= ctx.nbuf:
                        raise InternalError("buffer id out of range")
                    if not ctx.balive[bid]:
                        src = ctx.store.buffers[bid]
                        raise DeadBufferError(
                            f"use of freed array {src.name!r}")
                    iv = ir[r2]
                    iw = callee.params[i, 1]
                    if iv < 0 or iv + iw > ctx.blen[bid] * ctx.besz[bid]:
                        src = ctx.store.buffers[bid]
                        raise BoundsError(
                            f"record copy at byte {iv} escapes {src.name!r}")
                    src = ctx.store.buffers[bid]
                    buf = Buffer("byval", None, None, iw, 1,
                                 bytearray(src.data[iv:iv + iw]))
                    ctx.store.buffers.append(buf)
                    ctx.istack[itop + ii] = ctx.register(buf)
                    ii += 1
            r1 = code[ip - 1, 3]
            r2 = code[ip - 1, 4]
            if r2 == 1:
                fr[r1] = 0.0
            elif r2 == 2:
                ir[r1] = 0
            frames.append((F, ip, fbase, ibase, bufmark, ret_dst, ret_bank,
                           cur_rk, rk, rt))
            F = callee
            code = F.code
            fpool = F.fpool
            ipool = F.ipool
            fbase = ftop
            ibase = itop
            ftop = fbase + F.nf
            itop = ibase + F.ni
            fr = ctx.fstack + fbase
            ir = ctx.istack + ibase
            ip = 0
            bufmark = mark
            cur_rk = -1
            rk = []
            rt = []
            ret_dst = r1
            ret_bank = r2
        elif op == OP_RET or op == OP_RETF or op == OP_RETI:
            if op == OP_RETF:
                retv = fr[code[ip - 1, 1]]
                a = 1
            elif op == OP_RETI:
                retv = ir[code[ip - 1, 1]]
                a = 2
            else:
                retv = None
                a = 0
            for i in range(bufmark, ctx.nbuf):
                if ctx.balive[i]:
                    ctx.balive[i] = 0
                    buf = ctx.store.buffers[i]
                    buf.alive = False
                    if ctx.bplan[i] >= 0:
                        nb = ctx.blen[i] * ctx.besz[i]
                        ctx.plan_cur[ctx.bplan[i]] -= nb
                        ctx.tcur -= nb
            if ctx.nbuf > bufmark:
                del ctx.store.buffers[bufmark:]
                ctx.nbuf = bufmark
            if not frames:
                return retv
            r1 = ret_dst
            r2 = ret_bank
            ftop = fbase
            itop = ibase
            (F, ip, fbase, ibase, bufmark, ret_dst, ret_bank, cur_rk, rk,
             rt) = frames.pop()
            code = F.code
            fpool = F.fpool
            ipool = F.ipool
            fr = ctx.fstack + fbase
            ir = ctx.istack + ibase
            if retv is not None:
                if r2 == 1 and a == 1:
                    fr[r1] = <double> retv
                elif r2 == 2 and a == 2:
                    ir[r1] = <long long> retv
        else:
            raise InternalError(f"bad opcode {op} in {F.name}")


def execute(program, entry, store, mode="run", max_statements=0):
    """Run ginit then the entry function; returns (value, stats dict).

    Same contract and result shape as vm.execute.
    """
    if entry not in program.fn_index:
        raise InternalError(f"unknown entry function {entry!r}")
    preps = _prep_program(program)
    cdef _Ctx ctx = _Ctx(store, mode == "check", max_statements,
                         program.ngf, program.ngi)
    for buf in store.buffers:
        ctx.register(buf)

    _run(program, preps, <FnPrep> preps[len(preps) - 1], ctx, [], [])
    fn = program.functions[program.fn_index[entry]]
    fregs, iregs = build_entry_frame(program, fn, store)
    ret = _run(program, preps, <FnPrep> preps[program.fn_index[entry]], ctx,
               fregs, iregs)

    for name in program.global_order:
        bank, slot, t = program.global_slots[name]
        if bank == 0:
            store.globals[name] = ctx.gf[slot]
        else:
            v = ctx.gi[slot]
            store.globals[name] = bool(v) if t == "bool" else v

    stats = {
        "statements": ctx.statements,
        "prologue_copies": ctx.pro,
        "epilogue_copies": ctx.epi,
        "plan_peaks": dict(ctx.plan_peak),
        "peak_temp_bytes": ctx.tpeak,
        "region_seconds": dict(ctx.region_seconds),
    }
    return ret, stats


def _check_opcodes():
    # Both engines decode the same table; refuse to load on drift.
    from . import compile as c
    pairs = [
        (OP_RET, c.RET), (OP_F_CONST, c.F_CONST), (OP_I_CONST, c.I_CONST),
        (OP_F_MOV, c.F_MOV), (OP_I_MOV, c.I_MOV), (OP_F_ADD, c.F_ADD),
        (OP_F_SUB, c.F_SUB), (OP_F_MUL, c.F_MUL), (OP_F_DIV, c.F_DIV),
        (OP_F_NEG, c.F_NEG), (OP_F_SQRT, c.F_SQRT), (OP_F_POW, c.F_POW),
        (OP_F_ABS, c.F_ABS), (OP_F_MIN, c.F_MIN), (OP_F_MAX, c.F_MAX),
        (OP_F_RND32, c.F_RND32), (OP_I_ADD, c.I_ADD), (OP_I_SUB, c.I_SUB),
        (OP_I_MUL, c.I_MUL), (OP_I_DIV, c.I_DIV), (OP_I_NEG, c.I_NEG),
        (OP_I_ABS, c.I_ABS), (OP_I_MIN, c.I_MIN), (OP_I_MAX, c.I_MAX),
        (OP_I_WRAP32, c.I_WRAP32), (OP_I2F, c.I2F), (OP_B_NOT, c.B_NOT),
        (OP_FLT, c.FLT), (OP_FLE, c.FLE), (OP_FGT, c.FGT), (OP_FGE, c.FGE),
        (OP_FEQ, c.FEQ), (OP_FNE, c.FNE), (OP_ILT, c.ILT), (OP_ILE, c.ILE),
        (OP_IGT, c.IGT), (OP_IGE, c.IGE), (OP_IEQ, c.IEQ), (OP_INE, c.INE),
        (OP_JMP, c.JMP), (OP_JZ, c.JZ), (OP_JNZ, c.JNZ), (OP_LD, c.LD),
        (OP_ST, c.ST), (OP_LDX, c.LDX), (OP_STX, c.STX), (OP_CHKR, c.CHKR),
        (OP_ALLOC, c.ALLOC), (OP_FREE, c.FREE), (OP_CHKIDX, c.CHKIDX),
        (OP_GF_LD, c.GF_LD), (OP_GF_ST, c.GF_ST), (OP_GI_LD, c.GI_LD),
        (OP_GI_ST, c.GI_ST), (OP_CALL, c.CALL), (OP_RETF, c.RETF),
        (OP_RETI, c.RETI), (OP_STMT, c.STMT), (OP_RENTER, c.RENTER),
        (OP_REXIT, c.REXIT),
        (K_F, c.PK_F), (K_I, c.PK_I), (K_BUF, c.PK_BUF), (K_REC, c.PK_REC),
    ]
    for mine, theirs in pairs:
        if mine != theirs:
            raise ImportError("engine opcode tables diverged; rebuild")


_check_opcodes()
