/* Hot kernels behind fastgram._core: the choice stream, the output buffer,
 * the IR interpreter and both VM
 * dispatch loops. Every function here produces exactly one input; the
 * Cython layer loops over inputs and hands each one to the Python sink. */

#ifndef FASTGRAM_VMCORE_H
#define FASTGRAM_VMCORE_H

#include <stdint.h>
#include <stdlib.h>
#include <string.h>

#define FG_OK 0
#define FG_NOMEM (-1)
#define FG_STACK (-2)

#if defined(__GNUC__)
#define FG_THREADED_NATIVE 1
#else
#define FG_THREADED_NATIVE 0
#endif

/* ---- choice stream ---------------------------------------------------- */

typedef struct {
    uint64_t s[4];
    uint8_t *buf;
    size_t size;
    size_t cursor;
    int reuse;
    uint64_t consumed;
    uint64_t words_drawn;
} fg_stream;

static inline uint64_t fg_rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

static inline uint64_t fg_splitmix(uint64_t *x) {
    uint64_t z = (*x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

static void fg_fill(fg_stream *st) {
    uint64_t s0 = st->s[0], s1 = st->s[1], s2 = st->s[2], s3 = st->s[3];
    uint8_t *p = st->buf;
    size_t words = st->size / 8;
    for (size_t i = 0; i < words; i++) {
        uint64_t r = fg_rotl(s1 * 5, 7) * 9;
        uint64_t t = s1 << 17;
        s2 ^= s0;
        s3 ^= s1;
        s1 ^= s2;
        s0 ^= s3;
        s2 ^= t;
        s3 = fg_rotl(s3, 45);
        for (int b = 0; b < 8; b++) p[b] = (uint8_t)(r >> (8 * b));
        p += 8;
    }
    st->s[0] = s0; st->s[1] = s1; st->s[2] = s2; st->s[3] = s3;
    st->words_drawn += words;
    st->cursor = 0;
}

static int fg_stream_init(fg_stream *st, uint64_t seed, size_t size, int reuse) {
    uint64_t x = seed;
    for (int i = 0; i < 4; i++) st->s[i] = fg_splitmix(&x);
    if (!(st->s[0] | st->s[1] | st->s[2] | st->s[3])) st->s[0] = 1;
    st->buf = (uint8_t *)malloc(size);
    if (!st->buf) return FG_NOMEM;
    st->size = size;
    st->reuse = reuse;
    st->consumed = 0;
    st->words_drawn = 0;
    fg_fill(st);
    return FG_OK;
}

static inline uint32_t fg_byte(fg_stream *st) {
    if (st->cursor == st->size) {
        if (st->reuse) st->cursor = 0;
        else fg_fill(st);
    }
    st->consumed++;
    return st->buf[st->cursor++];
}

static inline uint32_t fg_choice(fg_stream *st, uint32_t n) {
    if (n <= 1) return 0;
    if (n <= 256) return (fg_byte(st) * n) >> 8;
    uint64_t x = 0;
    for (int i = 0; i < 8; i++) x |= (uint64_t)fg_byte(st) << (8 * i);
    uint64_t hi = x >> 32, lo = x & 0xFFFFFFFFULL;
    return (uint32_t)((hi * n + ((lo * n) >> 32)) >> 32);
}

/* ---- output buffer ---------------------------------------------------- */

typedef struct {
    uint8_t *data;
    size_t len;
    size_t cap;
} fg_out;

static int fg_grow(fg_out *o, size_t need) {
    size_t cap = o->cap ? o->cap : 4096;
    while (cap < need) cap *= 2;
    uint8_t *p = (uint8_t *)realloc(o->data, cap);
    if (!p) return FG_NOMEM;
    o->data = p;
    o->cap = cap;
    return FG_OK;
}

static inline int fg_put(fg_out *o, const uint8_t *src, size_t n) {
    if (o->len + n > o->cap && fg_grow(o, o->len + n)) return FG_NOMEM;
    memcpy(o->data + o->len, src, n);
    o->len += n;
    return FG_OK;
}

/* growable int32 work stack */
typedef struct {
    int32_t *data;
    size_t len;
    size_t cap;
} fg_stack;

static inline int fg_push2(fg_stack *s, int32_t a, int32_t b) {
    if (s->len + 2 > s->cap) {
        size_t cap = s->cap ? s->cap * 2 : 1024;
        int32_t *p = (int32_t *)realloc(s->data, cap * sizeof(int32_t));
        if (!p) return FG_NOMEM;
        s->data = p;
        s->cap = cap;
    }
    s->data[s->len++] = a;
    s->data[s->len++] = b;
    return FG_OK;
}

/* ---- shared tables ---------------------------------------------------- */

typedef struct {
    const uint8_t *arena;
    const int32_t *off, *len, *base, *count; /* count < 0: overflowed */
} fg_pools;

typedef struct {
    const uint8_t *arena;
    const int32_t *off, *len;
} fg_lits;

static inline int fg_pool_emit(const fg_pools *p, int32_t key, fg_stream *st, fg_out *out) {
    int32_t e = p->base[key] + (int32_t)fg_choice(st, (uint32_t)p->count[key]);
    return fg_put(out, p->arena + p->off[e], (size_t)p->len[e]);
}

/* ---- IR interpreter --------------------------------------------------- */

enum { FG_K_EMIT, FG_K_CHOOSE, FG_K_CALL, FG_K_POOL, FG_K_CHECK };

typedef struct {
    const int32_t *body_start, *body_len, *body_steps;
    const int32_t *kind, *a, *b, *c, *arms;
    fg_lits lits;
    fg_pools pools;
} fg_ir;

static inline int fg_push_body(fg_stack *w, const fg_ir *ir, int32_t body, int32_t base) {
    const int32_t *steps = ir->body_steps + ir->body_start[body];
    for (int32_t i = ir->body_len[body] - 1; i >= 0; i--)
        if (fg_push2(w, steps[i], base)) return FG_NOMEM;
    return FG_OK;
}

static int fg_run_ir(const fg_ir *ir, int32_t entry, int32_t base0, int32_t threshold,
                     fg_stream *st, fg_out *out, fg_stack *work) {
    work->len = 0;
    if (fg_push_body(work, ir, entry, base0)) return FG_NOMEM;
    while (work->len) {
        int32_t base = work->data[--work->len];
        int32_t s = work->data[--work->len];
        int32_t a = ir->a[s];
        int rc = FG_OK;
        switch (ir->kind[s]) {
        case FG_K_EMIT:
            rc = fg_put(out, ir->lits.arena + ir->lits.off[a], (size_t)ir->lits.len[a]);
            break;
        case FG_K_POOL:
            rc = fg_pool_emit(&ir->pools, a, st, out);
            break;
        case FG_K_CALL:
            rc = fg_push_body(work, ir, a, base + ir->b[s]);
            break;
        case FG_K_CHECK:
            rc = fg_push_body(work, ir, base + a >= threshold ? ir->c[s] : ir->b[s], base);
            break;
        default: /* FG_K_CHOOSE */
            rc = fg_push_body(work, ir, ir->arms[a + (int32_t)fg_choice(st, (uint32_t)ir->b[s])], base);
            break;
        }
        if (rc) return rc;
    }
    return FG_OK;
}

/* ---- production machine ----------------------------------------------- */

enum { FG_EMIT, FG_INVOKE, FG_RET, FG_HALT };

/* Short copies move FG_PAD bytes at once; literal and pool arenas carry
 * FG_PAD bytes of padding so the over-read stays in bounds. */
#define FG_PAD 16

typedef struct {
    int32_t rule_off, rule_n; /* slice of entries */
    int32_t min_off, min_n;
    int32_t pool_base, pool_n; /* pool_n < 0: overflowed */
} fg_keymeta;

typedef struct {
    const int32_t *ops, *args;
    int32_t ncode;
    const fg_keymeta *keys;
    const int32_t *entries;
    fg_lits lits;
    const uint8_t *pool_arena;
    const int32_t *pool_off, *pool_len;
    void **thread; /* direct-threaded image, built on first use */
} fg_program;

/* The dispatch loops keep the random cursor and the output cursor in
 * locals and write them back only on refill, growth and exit. */
#define VM_LOCALS                                                          \
    const uint8_t *rb = st->buf + st->cursor, *rbase = rb;                  \
    const uint8_t *rend = st->buf + st->size;                               \
    uint8_t *o = out->data + out->len, *oend = out->data + out->cap

#define VM_SYNC()                                                          \
    do {                                                                   \
        st->consumed += (uint64_t)(rb - rbase);                            \
        rbase = rb;                                                        \
        st->cursor = (size_t)(rb - st->buf);                               \
        out->len = (size_t)(o - out->data);                                \
    } while (0)

#define VM_BYTE(v)                                                         \
    do {                                                                   \
        if (rb == rend) {                                                  \
            st->consumed += (uint64_t)(rb - rbase);                        \
            if (!st->reuse) fg_fill(st);                                   \
            rb = rbase = st->buf;                                          \
        }                                                                  \
        (v) = *rb++;                                                       \
    } while (0)

#define VM_CHOICE(n, v)                                                    \
    do {                                                                   \
        uint32_t n_ = (uint32_t)(n);                                       \
        if (n_ <= 1) {                                                     \
            (v) = 0;                                                       \
        } else if (n_ <= 256) {                                            \
            uint32_t b_;                                                   \
            VM_BYTE(b_);                                                   \
            (v) = (int32_t)((b_ * n_) >> 8);                               \
        } else {                                                           \
            uint64_t x_ = 0;                                               \
            for (int i_ = 0; i_ < 8; i_++) {                               \
                uint32_t b_;                                               \
                VM_BYTE(b_);                                               \
                x_ |= (uint64_t)b_ << (8 * i_);                            \
            }                                                              \
            (v) = (int32_t)(((x_ >> 32) * n_ + (((x_ & 0xFFFFFFFFULL) * n_) >> 32)) >> 32); \
        }                                                                  \
    } while (0)

#define VM_COPY(src, n)                                                    \
    do {                                                                   \
        size_t n_ = (size_t)(n);                                           \
        if ((size_t)(oend - o) < n_ + FG_PAD) {                            \
            VM_SYNC();                                                     \
            if (fg_grow(out, out->len + n_ + FG_PAD)) return FG_NOMEM;     \
            o = out->data + out->len;                                      \
            oend = out->data + out->cap;                                   \
        }                                                                  \
        if (n_ <= FG_PAD) memcpy(o, (src), FG_PAD);                        \
        else memcpy(o, (src), n_);                                         \
        o += n_;                                                           \
    } while (0)

static int fg_vm_switch(const fg_program *p, int32_t start, int32_t max_depth, int32_t *stack,
                        int32_t limit, int32_t *high, fg_stream *st, fg_out *out) {
    const int32_t *ops = p->ops, *args = p->args, *entries = p->entries;
    const fg_keymeta *keys = p->keys;
    int32_t sp = 0, hi = *high, c, pc;
    VM_LOCALS;
    stack[sp++] = -1;
    VM_CHOICE(keys[start].rule_n, c);
    pc = entries[keys[start].rule_off + c];
    for (;;) {
        int32_t arg = args[pc];
        switch (ops[pc]) {
        case FG_EMIT:
            VM_COPY(p->lits.arena + p->lits.off[arg], p->lits.len[arg]);
            pc++;
            break;
        case FG_INVOKE: {
            const fg_keymeta *k = keys + arg;
            if (sp >= max_depth) {
                if (k->pool_n >= 0) {
                    VM_CHOICE(k->pool_n, c);
                    c += k->pool_base;
                    VM_COPY(p->pool_arena + p->pool_off[c], p->pool_len[c]);
                    pc++;
                    break;
                }
                VM_CHOICE(k->min_n, c);
                c = entries[k->min_off + c];
            } else {
                VM_CHOICE(k->rule_n, c);
                c = entries[k->rule_off + c];
            }
            if (sp >= limit) {
                VM_SYNC();
                return FG_STACK;
            }
            stack[sp++] = pc + 1;
            if (sp > hi) hi = sp;
            pc = c;
            break;
        }
        case FG_RET:
            pc = stack[--sp];
            if (pc >= 0) break;
            /* fall through */
        default:
            VM_SYNC();
            *high = hi;
            return FG_OK;
        }
    }
}

#if FG_THREADED_NATIVE

/* Direct threading: thread[pc] holds the label of the handler for code[pc],
 * and the return stack holds thread addresses, so control moves from
 * handler to handler without decoding an opcode. The label table is only
 * valid inside this function, hence noinline/noclone. */
__attribute__((noinline, noclone)) static int fg_vm_threaded(fg_program *p, int32_t start, int32_t max_depth,
                                                             void ***stack, int32_t limit, int32_t *high,
                                                             fg_stream *st, fg_out *out) {
    static void *labels[] = {&&op_emit, &&op_invoke, &&op_ret, &&op_halt};
    if (!p->thread) {
        void **t = (void **)malloc(sizeof(void *) * (size_t)(p->ncode + 1));
        if (!t) return FG_NOMEM;
        for (int32_t i = 0; i < p->ncode; i++) t[i] = labels[p->ops[i]];
        t[p->ncode] = &&op_halt;
        p->thread = t;
    }
    void **base = p->thread;
    const int32_t *args = p->args, *entries = p->entries;
    const fg_keymeta *keys = p->keys;
    const fg_keymeta *k;
    int32_t sp = 0, hi = *high, c, arg;
    VM_LOCALS;
    stack[sp++] = NULL;
    VM_CHOICE(keys[start].rule_n, c);
    void **ip = base + entries[keys[start].rule_off + c];
#define FG_NEXT goto **ip
    FG_NEXT;
op_emit:
    arg = args[ip - base];
    VM_COPY(p->lits.arena + p->lits.off[arg], p->lits.len[arg]);
    ip++;
    FG_NEXT;
op_invoke:
    k = keys + args[ip - base];
    if (sp >= max_depth) {
        if (k->pool_n >= 0) {
            VM_CHOICE(k->pool_n, c);
            c += k->pool_base;
            VM_COPY(p->pool_arena + p->pool_off[c], p->pool_len[c]);
            ip++;
            FG_NEXT;
        }
        VM_CHOICE(k->min_n, c);
        c = entries[k->min_off + c];
    } else {
        VM_CHOICE(k->rule_n, c);
        c = entries[k->rule_off + c];
    }
    if (sp >= limit) {
        VM_SYNC();
        return FG_STACK;
    }
    stack[sp++] = ip + 1;
    if (sp > hi) hi = sp;
    ip = base + c;
    FG_NEXT;
op_ret:
    ip = stack[--sp];
    if (ip) FG_NEXT;
op_halt:
    VM_SYNC();
    *high = hi;
    return FG_OK;
#undef FG_NEXT
}

#else

/* no labels-as-values: callers fall back to fg_vm_switch */
static int fg_vm_threaded(fg_program *p, int32_t start, int32_t max_depth, void ***stack, int32_t limit,
                          int32_t *high, fg_stream *st, fg_out *out) {
    (void)p; (void)start; (void)max_depth; (void)stack; (void)limit; (void)high; (void)st; (void)out;
    return FG_STACK;
}

#endif

#endif
