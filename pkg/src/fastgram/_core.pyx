# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: the choice stream and every production loop.

Each runner produces ``inputs`` inputs, appending ``sep`` to each and
passing it to ``sink.write`` as one ``bytes`` object, and returns
``(total_bytes, stack_high_water)``. Outputs are byte-identical to the
pure-Python implementations given a ``CoreStream`` with the same seed.
"""

from libc.stdint cimport int32_t, uint8_t, uint32_t, uint64_t
from libc.stdlib cimport free
from cpython.bytes cimport PyBytes_FromStringAndSize

cdef extern from "_vmcore.h":
    int FG_OK, FG_NOMEM, FG_STACK
    int FG_THREADED_NATIVE

    ctypedef struct fg_stream:
        uint64_t s[4]
        uint8_t *buf
        size_t size
        size_t cursor
        int reuse
        uint64_t consumed
        uint64_t words_drawn

    ctypedef struct fg_out:
        uint8_t *data
        size_t len
        size_t cap

    ctypedef struct fg_stack:
        int32_t *data
        size_t len
        size_t cap

    ctypedef struct fg_pools:
        const uint8_t *arena
        const int32_t *off
        const int32_t *len
        const int32_t *base
        const int32_t *count

    ctypedef struct fg_lits:
        const uint8_t *arena
        const int32_t *off
        const int32_t *len

    ctypedef struct fg_ir:
        const int32_t *body_start
        const int32_t *body_len
        const int32_t *body_steps
        const int32_t *kind
        const int32_t *a
        const int32_t *b
        const int32_t *c
        const int32_t *arms
        fg_lits lits
        fg_pools pools

    ctypedef struct fg_keymeta:
        int32_t rule_off

    ctypedef struct fg_program:
        const int32_t *ops
        const int32_t *args
        int32_t ncode
        const fg_keymeta *keys
        const int32_t *entries
        fg_lits lits
        const uint8_t *pool_arena
        const int32_t *pool_off
        const int32_t *pool_len
        void **thread

    int fg_grow(fg_out *o, size_t need)
    int fg_stream_init(fg_stream *st, uint64_t seed, size_t size, int reuse)
    void fg_fill(fg_stream *st)
    uint32_t fg_byte(fg_stream *st) nogil
    uint32_t fg_choice(fg_stream *st, uint32_t n) nogil
    int fg_put(fg_out *o, const uint8_t *src, size_t n) nogil
    int fg_run_ir(const fg_ir *ir, int32_t entry, int32_t base0, int32_t threshold,
                  fg_stream *st, fg_out *out, fg_stack *work) nogil
    int fg_vm_switch(const fg_program *p, int32_t start, int32_t max_depth, int32_t *stack,
                     int32_t limit, int32_t *high, fg_stream *st, fg_out *out) nogil
    int fg_vm_threaded(fg_program *p, int32_t start, int32_t max_depth, void ***stack,
                       int32_t limit, int32_t *high, fg_stream *st, fg_out *out) nogil

from cpython.mem cimport PyMem_Malloc, PyMem_Free

cdef uint64_t MASK64 = 0xFFFFFFFFFFFFFFFF


def threaded_native():
    return bool(FG_THREADED_NATIVE)


cdef class CoreStream:
    """Compiled twin of ``ChoiceStream``; same seed, same choices."""

    cdef fg_stream st
    cdef readonly str policy

    def __cinit__(self, seed=0, buffer_size=65536, policy="refill"):
        self.st.buf = NULL
        if policy not in ("refill", "reuse"):
            raise ValueError(f"unknown random policy {policy!r}")
        if buffer_size < 8 or buffer_size % 8:
            raise ValueError("buffer size must be a positive multiple of 8")
        self.policy = policy
        if fg_stream_init(&self.st, <uint64_t>(seed & MASK64), buffer_size, policy == "reuse") != FG_OK:
            raise MemoryError()

    def __dealloc__(self):
        free(self.st.buf)

    @property
    def consumed(self):
        return self.st.consumed

    @property
    def words_drawn(self):
        return self.st.words_drawn

    @property
    def words_consumed(self):
        return (self.st.consumed + 7) // 8

    @property
    def cursor(self):
        return self.st.cursor

    @property
    def state(self):
        return (self.st.s[0], self.st.s[1], self.st.s[2], self.st.s[3])

    @property
    def buffer(self):
        return PyBytes_FromStringAndSize(<char *>self.st.buf, self.st.size)

    def next_byte(self):
        return fg_byte(&self.st)

    def next_u64_le(self):
        cdef uint64_t x = 0
        cdef int i
        for i in range(8):
            x |= (<uint64_t>fg_byte(&self.st)) << (8 * i)
        return x

    def next_choice(self, n):
        if n < 1:
            raise ValueError("choice among zero options")
        if n <= 0xFFFFFFFF:
            return fg_choice(&self.st, <uint32_t>n)
        return (self.next_u64_le() * n) >> 64


cdef inline const int32_t *_ip(const int[::1] m):
    return <const int32_t *>&m[0] if m.shape[0] else NULL


cdef inline const uint8_t *_bp(const unsigned char[::1] m):
    return &m[0] if m.shape[0] else NULL


cdef fg_pools _pools(p):
    cdef fg_pools out
    out.arena = _bp(p.arena)
    out.off = _ip(p.entry_off)
    out.len = _ip(p.entry_len)
    out.base = _ip(p.key_base)
    out.count = _ip(p.key_count)
    return out


cdef fg_lits _lits(t):
    cdef fg_lits out
    out.arena = _bp(t.lit_arena)
    out.off = _ip(t.lit_off)
    out.len = _ip(t.lit_len)
    return out


cdef _check(int rc):
    if rc == FG_NOMEM:
        raise MemoryError()
    if rc == FG_STACK:
        from .vm import VMError
        raise VMError("return stack overflow")


cdef inline int _finish_input(fg_out *out, bytes sep) except -1:
    if fg_put(out, <const uint8_t *><char *>sep, len(sep)) != FG_OK:
        raise MemoryError()
    return 0


def run_ir(flat, int max_depth, int inputs, bytes sep, CoreStream cs, sink):
    """IR interpreter over ``codegen.run.FlatIR``."""
    cdef fg_ir ir
    ir.body_start = _ip(flat.body_start)
    ir.body_len = _ip(flat.body_len)
    ir.body_steps = _ip(flat.body_steps)
    ir.kind = _ip(flat.kind)
    ir.a = _ip(flat.a)
    ir.b = _ip(flat.b)
    ir.c = _ip(flat.c)
    ir.arms = _ip(flat.arms)
    ir.lits = _lits(flat)
    ir.pools = _pools(flat.pools)
    cdef int32_t entry = flat.entry
    cdef int32_t base0 = -max_depth if flat.rebased else 0
    cdef int32_t threshold = 0 if flat.rebased else max_depth
    cdef fg_out out = fg_out(NULL, 0, 0)
    cdef fg_stack work = fg_stack(NULL, 0, 0)
    cdef Py_ssize_t total = 0
    cdef int i, rc
    write = sink.write
    try:
        for i in range(inputs):
            out.len = 0
            with nogil:
                rc = fg_run_ir(&ir, entry, base0, threshold, &cs.st, &out, &work)
            _check(rc)
            _finish_input(&out, sep)
            write(PyBytes_FromStringAndSize(<char *>out.data, out.len))
            total += out.len
    finally:
        free(out.data)
        free(work.data)
    return total, 0


def run_vm(flat, int start, int limit, int max_depth, int inputs, bytes sep, CoreStream cs, sink,
           bint threaded):
    """Production machine over ``vm.FlatProgram``, switch or direct-threaded."""
    cdef fg_program p
    p.ops = _ip(flat.ops)
    p.args = _ip(flat.args)
    p.ncode = len(flat.ops)
    p.keys = <const fg_keymeta *>_ip(flat.key_meta)
    p.entries = _ip(flat.entries)
    p.lits = _lits(flat)
    p.pool_arena = _bp(flat.pool_arena)
    p.pool_off = _ip(flat.pool_off)
    p.pool_len = _ip(flat.pool_len)
    p.thread = NULL
    threaded = threaded and FG_THREADED_NATIVE
    cdef void *stack = PyMem_Malloc(sizeof(void *) * (limit + 1))
    if stack == NULL:
        raise MemoryError()
    cdef fg_out out = fg_out(NULL, 0, 0)
    if fg_grow(&out, 1 << 16) != FG_OK:
        PyMem_Free(stack)
        raise MemoryError()
    cdef Py_ssize_t total = 0
    cdef int32_t high = 0
    cdef int i, rc
    write = sink.write
    try:
        for i in range(inputs):
            out.len = 0
            with nogil:
                if threaded:
                    rc = fg_vm_threaded(&p, start, max_depth, <void ***>stack, limit, &high, &cs.st, &out)
                else:
                    rc = fg_vm_switch(&p, start, max_depth, <int32_t *>stack, limit, &high, &cs.st, &out)
            _check(rc)
            _finish_input(&out, sep)
            write(PyBytes_FromStringAndSize(<char *>out.data, out.len))
            total += out.len
    finally:
        free(out.data)
        free(p.thread)
        PyMem_Free(stack)
    return total, max(high, 1)
