"""Pure-Python simulation kernel.

Reference implementation of ``run_chunk``; ``_ckernel.pyx`` mirrors it
statement for statement so both backends produce bit-identical trajectories
from the same stream of uniforms.

Every step consumes a fixed number of uniforms (see ``draws_per_step``) from
``uniforms``, which the caller fills in advance. Weights are maintained
incrementally through the rule-dependency index and rebuilt from scratch at
the start of every chunk.
"""

from math import log

SEQUENTIAL = 0
EQUIPROBABLE = 1
SSA_DIRECT = 2
SSA_FIRST_REACTION = 3

RUNNING = 0
HALTED = 1
TIME_LIMIT = 2
OVERFLOW = 3

INT64_MAX = 9223372036854775807


def draws_per_step(mode, n_rules):
    if mode == SSA_FIRST_REACTION:
        return max(n_rules, 1)
    if mode == SEQUENTIAL:
        return 1
    return 2


def _h(s0, s1, counts):
    if s0 == s1:
        if s0 < 0:
            return 1.0
        n = float(counts[s0])
        return n * (n - 1.0)
    a = 1.0 if s0 < 0 else float(counts[s0])
    b = 1.0 if s1 < 0 else float(counts[s1])
    return a * b


def run_chunk(mode, counts_arr, src_arr, dst_arr, consts_arr, dep_ptr_arr, dep_idx_arr,
              klass_arr, n_classes, cls_ptr_arr, cls_idx_arr, uniforms_arr,
              max_steps, step0, t0, t_max, stride,
              out_times, out_rules, out_states):
    """Advance ``counts_arr`` in place by at most ``max_steps`` events.

    Returns ``(steps, n_recorded, t, status, last_rule)``. Events whose
    1-based global index is a multiple of ``stride`` (``stride > 0``) are
    written to the ``out_*`` buffers.
    """
    counts = counts_arr.tolist()
    src = src_arr.tolist()
    dst = dst_arr.tolist()
    consts = consts_arr.tolist()
    dep_ptr = dep_ptr_arr.tolist()
    dep_idx = dep_idx_arr.tolist()
    klass = klass_arr.tolist()
    cls_ptr = cls_ptr_arr.tolist()
    cls_idx = cls_idx_arr.tolist()
    uniforms = uniforms_arr.tolist()
    n_rules = len(consts)
    k = draws_per_step(mode, n_rules)
    ssa = mode == SSA_DIRECT or mode == SSA_FIRST_REACTION

    app = [0] * n_rules
    w = [0.0] * n_rules
    cc = [0] * n_classes
    n_app = 0
    n_pos = 0
    n_active = 0
    total = 0.0
    for r in range(n_rules):
        h = _h(src[r][0], src[r][1], counts)
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

    t = t0
    steps = 0
    n_rec = 0
    status = RUNNING
    last_rule = -1
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
                pick = int(uniforms[base] * n_app)
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
                pick = int(uniforms[base] * n_active)
                if pick >= n_active:
                    pick = n_active - 1
                c = 0
                while c < n_classes:
                    if cc[c] > 0:
                        if pick == 0:
                            break
                        pick -= 1
                    c += 1
                pick = int(uniforms[base + 1] * cc[c])
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

        s0, s1 = src[chosen]
        d0, d1 = dst[chosen]
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
            h = _h(src[r][0], src[r][1], counts)
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
            out_states[n_rec, :] = counts
            n_rec += 1

    counts_arr[:] = counts
    return steps, n_rec, t, status, last_rule
