# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping loop; mirrors _kernel_py line for line.

Token semantics are signed 64-bit with two's-complement wraparound,
implemented over uint64 so native C overflow rules never apply.
"""

from array import array

from libc.stdint cimport int64_t, uint64_t

BACKEND = "compiled"

DEF OP_ADD = 0
DEF OP_SUB = 1
DEF OP_MUL = 2
DEF OP_DIV = 3
DEF OP_SQRT = 4
DEF OP_CONST = 5
DEF OP_PASS = 6
DEF OP_TABLE = 7
DEF OP_LOADIN = 8

DEF FUNC_PROG = 0
DEF FUNC_MIX = 1
DEF FUNC_GEN = 2
DEF FUNC_PASS = 3

DEF IN_ALL = 0
DEF IN_RR = 1
DEF OUT_BC = 0
DEF OUT_RR = 1

cdef uint64_t GOLD = 0x9E3779B97F4A7C15UL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9UL
cdef uint64_t MIX2 = 0x94D049BB133111EBUL
cdef uint64_t FNV_OFFSET = 0xCBF29CE484222325UL
cdef uint64_t FNV_PRIME = 0x100000001B3UL
cdef int64_t I64_MIN = <int64_t>0x8000000000000000UL


cdef inline uint64_t splitmix64(uint64_t u) nogil:
    cdef uint64_t z = u + GOLD
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline int64_t mix_out(uint64_t h, int64_t port, int64_t index) nogil:
    cdef uint64_t salt = (<uint64_t>port * 0x10001UL
                          + <uint64_t>index * 0x101UL + 1UL)
    return <int64_t>splitmix64(h ^ (salt * GOLD))


cdef inline int64_t gen_out(int64_t salt, int64_t firing, int64_t port,
                            int64_t index) nogil:
    cdef uint64_t h = splitmix64(<uint64_t>salt * 0x1000001UL
                                 + <uint64_t>firing)
    return mix_out(h, port, index)


cdef inline int64_t trunc_div(int64_t a, int64_t b) nogil:
    if b == 0:
        return 0
    if a == I64_MIN and b == -1:
        return I64_MIN
    return a / b


cdef inline int64_t isqrt_abs(int64_t a) nogil:
    cdef uint64_t x
    if a >= 0:
        x = <uint64_t>a
    else:
        x = <uint64_t>0 - <uint64_t>a
    if x < 2:
        return <int64_t>x
    cdef uint64_t r0 = x
    cdef uint64_t r1 = (r0 + x / r0) >> 1
    while r1 < r0:
        r0 = r1
        r1 = (r0 + x / r0) >> 1
    return <int64_t>r0


def run(m):
    """Execute a flattened machine (MachineArrays); returns a result dict."""
    cdef Py_ssize_t n_inst = m.n_inst
    cdef Py_ssize_t n_wires = m.n_wires
    cdef int64_t guard = m.guard

    cdef long long[:] ii = m.ii
    cdef long long[:] lat = m.lat
    cdef long long[:] fkind = m.fkind
    cdef long long[:] prog = m.prog
    cdef long long[:] cap = m.cap
    cdef long long[:] salt = m.salt
    cdef long long[:] in_mode = m.in_mode
    cdef long long[:] in_start = m.in_start
    cdef long long[:] in_wire = m.in_wire
    cdef long long[:] in_rate = m.in_rate
    cdef long long[:] out_start = m.out_start
    cdef long long[:] out_mode = m.out_mode
    cdef long long[:] out_rate = m.out_rate
    cdef long long[:] och_start = m.och_start
    cdef long long[:] och_wire = m.och_wire
    cdef long long[:] w_cap = m.w_cap
    cdef long long[:] w_ring_start = m.w_ring_start
    cdef long long[:] w_wink = m.w_wink
    cdef long long[:] w_rec = m.w_rec
    cdef long long[:] rec_start = m.rec_start
    cdef long long[:] p_start = m.p_start
    cdef long long[:] code = m.code
    cdef long long[:] pp_start = m.pp_start
    cdef long long[:] pr_start = m.pr_start
    cdef long long[:] pregs = m.pregs
    cdef long long[:] tables = m.tables
    cdef long long[:] order = m.order

    ring_total = m.w_ring_start[n_wires]
    vals_a = array("q", bytes(8 * max(1, ring_total)))
    stamps_a = array("q", bytes(8 * max(1, ring_total)))
    head_a = array("q", bytes(8 * max(1, n_wires)))
    count_a = array("q", bytes(8 * max(1, n_wires)))
    w_count_a = array("q", bytes(8 * max(1, n_wires)))
    w_consumed_a = array("q", bytes(8 * max(1, n_wires)))
    w_cyck_a = array("q", [-1] * max(1, n_wires))
    w_cyclast_a = array("q", [-1] * max(1, n_wires))
    rec_total = m.rec_start[n_wires]
    rec_vals_a = array("q", bytes(8 * max(1, rec_total)))
    next_free_a = array("q", bytes(8 * max(1, n_inst)))
    fired_a = array("q", bytes(8 * max(1, n_inst)))

    cdef int64_t t = 0
    cdef bint any_fired
    cdef Py_ssize_t oi, i, p, q, ci, x
    cdef int64_t ip0, ip1, op0, op1, n_ports, sel, w, c0, c1, need
    cdef int64_t base, capw, idx, rate, pj, pc, r, a, b, cc
    cdef int64_t t_ready, nxt, s, off, pu0, u, nv, vi, kind
    cdef uint64_t h
    cdef bint ok
    cdef int deadlock = 0

    max_nregs = 1
    for x in range(len(m.p_nregs)):
        if m.p_nregs[x] > max_nregs:
            max_nregs = m.p_nregs[x]
    regs_a = array("q", bytes(8 * max_nregs))

    max_ports = 1
    max_batch = 1
    for i in range(n_inst):
        ports = m.in_start[i + 1] - m.in_start[i]
        if ports > max_ports:
            max_ports = ports
        total = 0
        for p in range(m.in_start[i], m.in_start[i + 1]):
            total += m.in_rate[p]
        if total > max_batch:
            max_batch = total
    batch_a = array("q", bytes(8 * max_batch))
    port_off_a = array("q", bytes(8 * (max_ports + 1)))
    values_a = array("q", bytes(8 * max(1, max(m.out_rate) if len(m.out_rate) else 1)))

    cdef long long[:] vals = vals_a
    cdef long long[:] stamps = stamps_a
    cdef long long[:] head = head_a
    cdef long long[:] count = count_a
    cdef long long[:] w_count = w_count_a
    cdef long long[:] w_consumed = w_consumed_a
    cdef long long[:] w_cyck = w_cyck_a
    cdef long long[:] w_cyclast = w_cyclast_a
    cdef long long[:] rec_vals = rec_vals_a
    cdef long long[:] next_free = next_free_a
    cdef long long[:] fired = fired_a
    cdef long long[:] regs = regs_a
    cdef long long[:] batch = batch_a
    cdef long long[:] port_off = port_off_a
    cdef long long[:] values = values_a

    while True:
        any_fired = False
        for oi in range(n_inst):
            i = order[oi]
            if next_free[i] > t:
                continue
            if cap[i] >= 0 and fired[i] >= cap[i]:
                continue
            ip0 = in_start[i]
            ip1 = in_start[i + 1]
            n_ports = ip1 - ip0
            if in_mode[i] == IN_RR:
                sel = ip0 + fired[i] % n_ports
                w = in_wire[sel]
                if count[w] < 1:
                    continue
                base = w_ring_start[w]
                capw = w_cap[w]
                if stamps[base + head[w] % capw] > t:
                    continue
            else:
                ok = True
                for p in range(ip0, ip1):
                    w = in_wire[p]
                    need = in_rate[p]
                    if count[w] < need:
                        ok = False
                        break
                    base = w_ring_start[w]
                    capw = w_cap[w]
                    if stamps[base + (head[w] + need - 1) % capw] > t:
                        ok = False
                        break
                if not ok:
                    continue
            op0 = out_start[i]
            op1 = out_start[i + 1]
            ok = True
            for q in range(op0, op1):
                c0 = och_start[q]
                c1 = och_start[q + 1]
                if c1 == c0:
                    continue
                rate = out_rate[q]
                if out_mode[q] == OUT_RR:
                    w = och_wire[c0 + fired[i] % (c1 - c0)]
                    if count[w] + rate > w_cap[w]:
                        ok = False
                        break
                else:
                    for ci in range(c0, c1):
                        w = och_wire[ci]
                        if count[w] + rate > w_cap[w]:
                            ok = False
                            break
                    if not ok:
                        break
            if not ok:
                continue

            # consume
            kind = fkind[i]
            nv = 0
            if in_mode[i] == IN_RR:
                sel = ip0 + fired[i] % n_ports
                w = in_wire[sel]
                base = w_ring_start[w]
                capw = w_cap[w]
                batch[0] = vals[base + head[w]]
                head[w] = (head[w] + 1) % capw
                count[w] -= 1
                w_consumed[w] += 1
                nv = 1
                port_off[0] = 0
                port_off[1] = 1
            else:
                port_off[0] = 0
                for p in range(ip0, ip1):
                    w = in_wire[p]
                    base = w_ring_start[w]
                    capw = w_cap[w]
                    need = in_rate[p]
                    for x in range(need):
                        batch[nv] = vals[base + head[w]]
                        head[w] = (head[w] + 1) % capw
                        count[w] -= 1
                        nv += 1
                    w_consumed[w] += need
                    port_off[p - ip0 + 1] = nv

            t_ready = t + lat[i]
            if kind == FUNC_PROG:
                pj = prog[i]
                c0 = p_start[pj]
                c1 = p_start[pj + 1]
                r = 0
                pc = c0
                while pc < c1:
                    a = code[pc + 1]
                    b = code[pc + 2]
                    cc = code[pc + 3]
                    x = code[pc]
                    if x == OP_ADD:
                        regs[r] = <int64_t>(<uint64_t>regs[a] + <uint64_t>regs[b])
                    elif x == OP_SUB:
                        regs[r] = <int64_t>(<uint64_t>regs[a] - <uint64_t>regs[b])
                    elif x == OP_MUL:
                        regs[r] = <int64_t>(<uint64_t>regs[a] * <uint64_t>regs[b])
                    elif x == OP_DIV:
                        regs[r] = trunc_div(regs[a], regs[b])
                    elif x == OP_SQRT:
                        regs[r] = isqrt_abs(regs[a])
                    elif x == OP_CONST:
                        regs[r] = a
                    elif x == OP_PASS:
                        regs[r] = regs[a]
                    elif x == OP_TABLE:
                        idx = regs[a] % cc
                        if idx < 0:
                            idx += cc
                        regs[r] = tables[b + idx]
                    else:
                        regs[r] = batch[port_off[a] + b]
                    r += 1
                    pc += 5
                pu0 = pp_start[pj]
                for q in range(op0, op1):
                    u = pu0 + (q - op0)
                    vi = 0
                    for x in range(pr_start[u], pr_start[u + 1]):
                        values[vi] = regs[pregs[x]]
                        vi += 1
                    _write_port(q, values, vi, fired[i], t_ready, t,
                                och_start, och_wire, out_mode,
                                w_ring_start, w_cap, vals, stamps, head,
                                count, w_count, w_wink, w_cyck, w_cyclast,
                                w_rec, rec_start, rec_vals)
            elif kind == FUNC_MIX:
                h = FNV_OFFSET
                for x in range(nv):
                    h = (h ^ <uint64_t>batch[x]) * FNV_PRIME
                for q in range(op0, op1):
                    vi = 0
                    for x in range(out_rate[q]):
                        values[vi] = mix_out(h, q - op0, x)
                        vi += 1
                    _write_port(q, values, vi, fired[i], t_ready, t,
                                och_start, och_wire, out_mode,
                                w_ring_start, w_cap, vals, stamps, head,
                                count, w_count, w_wink, w_cyck, w_cyclast,
                                w_rec, rec_start, rec_vals)
            elif kind == FUNC_GEN:
                for q in range(op0, op1):
                    vi = 0
                    for x in range(out_rate[q]):
                        values[vi] = gen_out(salt[i], fired[i], q - op0, x)
                        vi += 1
                    _write_port(q, values, vi, fired[i], t_ready, t,
                                och_start, och_wire, out_mode,
                                w_ring_start, w_cap, vals, stamps, head,
                                count, w_count, w_wink, w_cyck, w_cyclast,
                                w_rec, rec_start, rec_vals)
            else:
                values[0] = batch[0] if nv > 0 else 0
                for q in range(op0, op1):
                    _write_port(q, values, 1, fired[i], t_ready, t,
                                och_start, och_wire, out_mode,
                                w_ring_start, w_cap, vals, stamps, head,
                                count, w_count, w_wink, w_cyck, w_cyclast,
                                w_rec, rec_start, rec_vals)

            fired[i] += 1
            next_free[i] = t + ii[i]
            any_fired = True

        if any_fired:
            t += 1
            if t > guard:
                deadlock = 2
                break
            continue

        nxt = -1
        for w in range(n_wires):
            if count[w] > 0:
                s = stamps[w_ring_start[w] + head[w]]
                if s > t and (nxt < 0 or s < nxt):
                    nxt = s
        for i in range(n_inst):
            if next_free[i] > t and (cap[i] < 0 or fired[i] < cap[i]):
                if nxt < 0 or next_free[i] < nxt:
                    nxt = next_free[i]
        if nxt < 0:
            break
        t = nxt
        if t > guard:
            deadlock = 2
            break

    if deadlock == 0:
        for i in range(n_inst):
            if cap[i] >= 0 and fired[i] >= cap[i]:
                continue
            ip0 = in_start[i]
            ip1 = in_start[i + 1]
            if ip1 == ip0:
                if cap[i] >= 0:
                    deadlock = 1
                continue
            if in_mode[i] == IN_RR:
                sel = ip0 + fired[i] % (ip1 - ip0)
                w = in_wire[sel]
                if count[w] >= 1 and stamps[w_ring_start[w] + head[w]] <= t:
                    deadlock = 1
            else:
                ok = True
                for p in range(ip0, ip1):
                    w = in_wire[p]
                    need = in_rate[p]
                    if count[w] < need:
                        ok = False
                        break
                    if stamps[w_ring_start[w] + (head[w] + need - 1) % w_cap[w]] > t:
                        ok = False
                        break
                if ok:
                    deadlock = 1

    return {"t_end": t, "deadlock": deadlock, "w_count": w_count_a,
            "w_consumed": w_consumed_a, "w_cyck": w_cyck_a,
            "w_cyclast": w_cyclast_a, "rec_vals": rec_vals_a,
            "fired": fired_a, "residual": count_a}


cdef inline void _write_port(Py_ssize_t q, long long[:] values, int64_t nv,
                             int64_t fired_i, int64_t t_ready, int64_t t_now,
                             long long[:] och_start, long long[:] och_wire,
                             long long[:] out_mode, long long[:] w_ring_start,
                             long long[:] w_cap, long long[:] vals,
                             long long[:] stamps, long long[:] head,
                             long long[:] count, long long[:] w_count,
                             long long[:] w_wink, long long[:] w_cyck,
                             long long[:] w_cyclast, long long[:] w_rec,
                             long long[:] rec_start,
                             long long[:] rec_vals) noexcept nogil:
    cdef int64_t c0 = och_start[q]
    cdef int64_t c1 = och_start[q + 1]
    cdef int64_t w, ci, vi, base, capw, idx, off
    if c1 == c0:
        return
    if out_mode[q] == OUT_RR:
        w = och_wire[c0 + fired_i % (c1 - c0)]
        base = w_ring_start[w]
        capw = w_cap[w]
        for vi in range(nv):
            idx = base + (head[w] + count[w]) % capw
            vals[idx] = values[vi]
            stamps[idx] = t_ready
            count[w] += 1
            if w_count[w] == w_wink[w]:
                w_cyck[w] = t_now
            w_count[w] += 1
            w_cyclast[w] = t_now
            if w_rec[w]:
                off = rec_start[w] + w_count[w] - 1
                if off < rec_start[w + 1]:
                    rec_vals[off] = values[vi]
    else:
        for ci in range(c0, c1):
            w = och_wire[ci]
            base = w_ring_start[w]
            capw = w_cap[w]
            for vi in range(nv):
                idx = base + (head[w] + count[w]) % capw
                vals[idx] = values[vi]
                stamps[idx] = t_ready
                count[w] += 1
                if w_count[w] == w_wink[w]:
                    w_cyck[w] = t_now
                w_count[w] += 1
                w_cyclast[w] = t_now
                if w_rec[w]:
                    off = rec_start[w] + w_count[w] - 1
                    if off < rec_start[w + 1]:
                        rec_vals[off] = values[vi]
