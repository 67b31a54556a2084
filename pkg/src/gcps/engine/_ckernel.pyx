# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernel; statement-for-statement mirror of ``_pykernel.run_chunk``."""

from libc.math cimport log
from libc.stdlib cimport calloc, free

cdef enum:
    SEQUENTIAL = 0
    EQUIPROBABLE = 1
    SSA_DIRECT = 2
    SSA_FIRST_REACTION = 3

cdef enum:
    RUNNING = 0
    HALTED = 1
    TIME_LIMIT = 2
    OVERFLOW = 3

cdef long long INT64_MAX = 9223372036854775807


cdef inline double _h(long long s0, long long s1, const long long[::1] counts) noexcept nogil:
    cdef double n, a, b
    if s0 == s1:
        if s0 < 0:
            return 1.0
        n = <double>counts[s0]
        return n * (n - 1.0)
    a = 1.0 if s0 < 0 else <double>counts[s0]
    b = 1.0 if s1 < 0 else <double>counts[s1]
    return a * b


def run_chunk(int mode, long long[::1] counts, const long long[:, ::1] src,
              const long long[:, ::1] dst, const double[::1] consts,
              const long long[::1] dep_ptr, const long long[::1] dep_idx,
              const long long[::1] klass, long long n_classes,
              const long long[::1] cls_ptr, const long long[::1] cls_idx,
              const double[::1] uniforms, long long max_steps, long long step0,
              double t0, double t_max, long long stride,
              double[::1] out_times, long long[::1] out_rules, long long[:, ::1] out_states):
    cdef Py_ssize_t n_rules = consts.shape[0]
    cdef Py_ssize_t n_species = counts.shape[0]
    cdef Py_ssize_t k
    cdef bint ssa = mode == SSA_DIRECT or mode == SSA_FIRST_REACTION
    cdef char* app = <char*>calloc(n_rules + 1, sizeof(char))
    cdef double* w = <double*>calloc(n_rules + 1, sizeof(double))
    cdef long long* cc = <long long*>calloc(n_classes + 1, sizeof(long long))
    cdef long long n_app = 0, n_pos = 0, n_active = 0
    cdef double total = 0.0, h, tau, target, acc, cand, nw, t = t0
    cdef long long steps = 0, n_rec = 0, last_rule = -1, pick, chosen
    cdef long long s0, s1, d0, d1, c
    cdef Py_ssize_t r, p, base, sp
    cdef int status = RUNNING
    cdef char now

    if app == NULL or w == NULL or cc == NULL:
        free(app); free(w); free(cc)
        raise MemoryError()

    if mode == SSA_FIRST_REACTION:
        k = n_rules if n_rules > 0 else 1
    elif mode == SEQUENTIAL:
        k = 1
    else:
        k = 2

    with nogil:
        for r in range(n_rules):
            h = _h(src[r, 0], src[r, 1], counts)
            if h > 0.0:
                app[r] = 1
                n_app += 1
                if cc[klass[r]] == 0:
                    n_active += 1
                cc[klass[r]] += 1
            if ssa:
                w[r] = consts[r] * h
                if w[r] > 0.0:
                    n_pos += 1
                total += w[r]

        while steps < max_steps:
            base = steps * k
            if ssa:
                if n_pos == 0:
                    status = HALTED
                    break
                if mode == SSA_DIRECT:
                    tau = -log(1.0 - uniforms[base]) / total
                    target = uniforms[base + 1] * total
                    acc = 0.0
                    chosen = -1
                    for r in range(n_rules):
                        if w[r] > 0.0:
                            chosen = r
                            acc += w[r]
                            if acc > target:
                                break
                else:
                    tau = -1.0
                    chosen = -1
                    for r in range(n_rules):
                        if w[r] > 0.0:
                            cand = -log(1.0 - uniforms[base + r]) / w[r]
                            if chosen < 0 or cand < tau:
                                tau = cand
                                chosen = r
                if t + tau > t_max:
                    status = TIME_LIMIT
                    break
                t += tau
            else:
                if n_app == 0:
                    status = HALTED
                    break
                if mode == SEQUENTIAL:
                    pick = <long long>(uniforms[base] * n_app)
                    if pick >= n_app:
                        pick = n_app - 1
                    chosen = -1
                    for r in range(n_rules):
                        if app[r]:
                            if pick == 0:
                                chosen = r
                                break
                            pick -= 1
                else:
                    pick = <long long>(uniforms[base] * n_active)
                    if pick >= n_active:
                        pick = n_active - 1
                    c = 0
                    while c < n_classes:
                        if cc[c] > 0:
                            if pick == 0:
                                break
                            pick -= 1
                        c += 1
                    pick = <long long>(uniforms[base + 1] * cc[c])
                    if pick >= cc[c]:
                        pick = cc[c] - 1
                    chosen = -1
                    for p in range(cls_ptr[c], cls_ptr[c + 1]):
                        r = cls_idx[p]
                        if app[r]:
                            if pick == 0:
                                chosen = r
                                break
                            pick -= 1
                t += 1.0

            s0 = src[chosen, 0]
            s1 = src[chosen, 1]
            d0 = dst[chosen, 0]
            d1 = dst[chosen, 1]
            if (d0 >= 0 and counts[d0] >= INT64_MAX - 1) or (d1 >= 0 and counts[d1] >= INT64_MAX - 1):
                status = OVERFLOW
                break
            if s0 >= 0:
                counts[s0] -= 1
            if s1 >= 0:
                counts[s1] -= 1
            if d0 >= 0:
                counts[d0] += 1
            if d1 >= 0:
                counts[d1] += 1

            for p in range(dep_ptr[chosen], dep_ptr[chosen + 1]):
                r = dep_idx[p]
                h = _h(src[r, 0], src[r, 1], counts)
                now = 1 if h > 0.0 else 0
                if now != app[r]:
                    c = klass[r]
                    if now:
                        n_app += 1
                        if cc[c] == 0:
                            n_active += 1
                        cc[c] += 1
                    else:
                        n_app -= 1
                        cc[c] -= 1
                        if cc[c] == 0:
                            n_active -= 1
                    app[r] = now
                if ssa:
                    nw = consts[r] * h
                    if (nw > 0.0) != (w[r] > 0.0):
                        n_pos += 1 if nw > 0.0 else -1
                    total += nw - w[r]
                    w[r] = nw

            steps += 1
            last_rule = chosen
            if stride > 0 and (step0 + steps) % stride == 0:
                out_times[n_rec] = t
                out_rules[n_rec] = chosen
                for sp in range(n_species):
                    out_states[n_rec, sp] = counts[sp]
                n_rec += 1

    free(app)
    free(w)
    free(cc)
    return steps, n_rec, t, status, last_rule
