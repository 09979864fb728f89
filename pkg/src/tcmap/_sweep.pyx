# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tape interpreter.

Rationals as long long num/den pairs, intermediates widened to 128 bits.
Any value whose magnitude reaches 2**62 flags the row as overflowed and
the caller re-runs it on the pure backend, so results never go wrong,
only slower.
"""

from libc.stdlib cimport free, malloc

cdef extern from *:
    ctypedef long long lll "__int128"

cdef enum:
    OP_PUSH_SYM = 0
    OP_PUSH_CONST = 1
    OP_ADD = 2
    OP_MUL = 3
    OP_MAX = 4
    OP_MIN = 5
    OP_DIVC = 6
    OP_CEILDIV = 7
    OP_OUT = 8

cdef long long LIMIT = (<long long>1) << 62


cdef bint reduce_pair(lll num, lll den, long long* out_n,
                      long long* out_d) noexcept nogil:
    # normalize sign, reduce by gcd, reject anything outside 62 bits
    cdef lll g, h, tmp
    if den < 0:
        num = -num
        den = -den
    g = num if num >= 0 else -num
    h = den
    while h != 0:
        tmp = g % h
        g = h
        h = tmp
    if g > 1:
        num = num // g
        den = den // g
    if num >= <lll>LIMIT or num <= -(<lll>LIMIT) or den >= <lll>LIMIT:
        return False
    out_n[0] = <long long>num
    out_d[0] = <long long>den
    return True


cdef class CTape:
    cdef int n_ops
    cdef int n_out
    cdef int max_stack
    cdef int* ops
    cdef long long* args
    cdef long long* cnum
    cdef long long* cden

    def __cinit__(self, program, consts, int n_out, int max_stack):
        cdef int i
        self.n_ops = len(program)
        self.n_out = n_out
        self.max_stack = max_stack if max_stack > 0 else 1
        self.ops = <int*>malloc(self.n_ops * sizeof(int))
        self.args = <long long*>malloc(self.n_ops * sizeof(long long))
        self.cnum = <long long*>malloc(max(len(consts), 1) * sizeof(long long))
        self.cden = <long long*>malloc(max(len(consts), 1) * sizeof(long long))
        if not self.ops or not self.args or not self.cnum or not self.cden:
            raise MemoryError()
        i = 0
        for op, arg in program:
            self.ops[i] = op
            self.args[i] = arg
            i += 1
        i = 0
        for n, d in consts:
            self.cnum[i] = n
            self.cden[i] = d
            i += 1

    def __dealloc__(self):
        free(self.ops)
        free(self.args)
        free(self.cnum)
        free(self.cden)

    cdef bint _run(self, long long* syms, long long* on,
                   long long* od) noexcept nogil:
        cdef int pc, op
        cdef int sp = 0
        cdef long long arg
        cdef lll num, den, an, ad, bn, bd, lhs, rhs
        cdef long long rn, rd
        cdef bint ok = True
        cdef long long* sn = <long long*>malloc(self.max_stack * sizeof(long long))
        cdef long long* sd = <long long*>malloc(self.max_stack * sizeof(long long))
        if sn == NULL or sd == NULL:
            free(sn)
            free(sd)
            return False
        for pc in range(self.n_ops):
            op = self.ops[pc]
            arg = self.args[pc]
            if op == OP_PUSH_SYM:
                sn[sp] = syms[arg]
                sd[sp] = 1
                sp += 1
            elif op == OP_PUSH_CONST:
                sn[sp] = self.cnum[arg]
                sd[sp] = self.cden[arg]
                sp += 1
            elif op == OP_ADD or op == OP_MUL:
                sp -= 1
                an = sn[sp - 1]
                ad = sd[sp - 1]
                bn = sn[sp]
                bd = sd[sp]
                if op == OP_ADD:
                    num = an * bd + bn * ad
                    den = ad * bd
                else:
                    num = an * bn
                    den = ad * bd
                if not reduce_pair(num, den, &rn, &rd):
                    ok = False
                    break
                sn[sp - 1] = rn
                sd[sp - 1] = rd
            elif op == OP_MAX or op == OP_MIN:
                sp -= 1
                lhs = (<lll>sn[sp - 1]) * sd[sp]
                rhs = (<lll>sn[sp]) * sd[sp - 1]
                if (rhs > lhs) == (op == OP_MAX):
                    sn[sp - 1] = sn[sp]
                    sd[sp - 1] = sd[sp]
            elif op == OP_DIVC or op == OP_CEILDIV:
                an = sn[sp - 1]
                ad = sd[sp - 1]
                num = an * self.cden[arg]
                den = ad * self.cnum[arg]
                if not reduce_pair(num, den, &rn, &rd):
                    ok = False
                    break
                if op == OP_CEILDIV and rd != 1:
                    if rn >= 0:
                        rn = rn // rd + (1 if rn % rd != 0 else 0)
                    else:
                        # C division truncates toward zero, which is
                        # already the ceiling for a negative quotient
                        rn = rn // rd
                    rd = 1
                sn[sp - 1] = rn
                sd[sp - 1] = rd
            elif op == OP_OUT:
                sp -= 1
                on[arg] = sn[sp]
                od[arg] = sd[sp]
            else:
                ok = False
                break
        free(sn)
        free(sd)
        return ok

    def run(self, syms):
        """Evaluate one symbol row; (num, den) pairs, or None on overflow."""
        cdef int i
        cdef int n = len(syms)
        cdef long long* cs = <long long*>malloc(max(n, 1) * sizeof(long long))
        cdef long long* on = <long long*>malloc(max(self.n_out, 1) * sizeof(long long))
        cdef long long* od = <long long*>malloc(max(self.n_out, 1) * sizeof(long long))
        if cs == NULL or on == NULL or od == NULL:
            free(cs)
            free(on)
            free(od)
            raise MemoryError()
        try:
            for i in range(n):
                cs[i] = syms[i]
            if not self._run(cs, on, od):
                return None
            return [(on[i], od[i]) for i in range(self.n_out)]
        finally:
            free(cs)
            free(on)
            free(od)

    def run_batch(self, rows):
        return [self.run(r) for r in rows]


def make_tape(program, consts, n_out, max_stack):
    return CTape(program, consts, n_out, max_stack)
