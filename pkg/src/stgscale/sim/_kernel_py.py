"""Pure-Python fallback stepping loop.

Must be observably identical to the compiled kernel: same firing rules, same
64-bit token semantics, same measurements. Kept dependency-free and simple;
the compiled kernel mirrors this code line for line.
"""

from __future__ import annotations

from stgscale.sim import ops as O

BACKEND = "python"


def run(m):
    """Execute a flattened machine; returns a result dict.

    ``m`` is a MachineArrays instance (see stgscale.sim.engine). State and
    measurement buffers are allocated here.
    """
    n_inst = m.n_inst
    n_wires = m.n_wires
    ii = m.ii
    lat = m.lat
    fkind = m.fkind
    prog = m.prog
    cap = m.cap
    salt = m.salt
    in_mode = m.in_mode
    in_start = m.in_start
    in_wire = m.in_wire
    in_rate = m.in_rate
    out_start = m.out_start
    out_mode = m.out_mode
    out_rate = m.out_rate
    och_start = m.och_start
    och_wire = m.och_wire
    w_cap = m.w_cap
    w_ring_start = m.w_ring_start
    w_wink = m.w_wink
    w_rec = m.w_rec
    rec_start = m.rec_start
    p_start = m.p_start
    code = m.code
    pp_start = m.pp_start
    pr_start = m.pr_start
    pregs = m.pregs
    tables = m.tables
    order = m.order

    ring_total = w_ring_start[n_wires]
    vals = [0] * ring_total
    stamps = [0] * ring_total
    head = [0] * n_wires
    count = [0] * n_wires
    w_count = [0] * n_wires
    w_consumed = [0] * n_wires
    w_cyck = [-1] * n_wires
    w_cyclast = [-1] * n_wires
    rec_vals = [0] * rec_start[n_wires]
    next_free = [0] * n_inst
    fired = [0] * n_inst

    regs_scratch = [0] * (max(m.p_nregs) if m.p_nregs else 1)

    def readable(w, need, t):
        if count[w] < need:
            return False
        base = w_ring_start[w]
        c = w_cap[w]
        idx = base + (head[w] + need - 1) % c
        return stamps[idx] <= t

    def pop(w):
        base = w_ring_start[w]
        c = w_cap[w]
        v = vals[base + head[w]]
        head[w] = (head[w] + 1) % c
        count[w] -= 1
        w_consumed[w] += 1
        return v

    def push(w, value, t_ready, t_now):
        base = w_ring_start[w]
        c = w_cap[w]
        idx = base + (head[w] + count[w]) % c
        vals[idx] = value
        stamps[idx] = t_ready
        count[w] += 1
        if w_count[w] == w_wink[w]:
            w_cyck[w] = t_now
        w_count[w] += 1
        w_cyclast[w] = t_now
        if w_rec[w]:
            off = rec_start[w] + w_count[w] - 1
            if off < rec_start[w + 1]:
                rec_vals[off] = value

    t = 0
    guard = m.guard
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
            # input availability
            if in_mode[i] == O.IN_RR:
                sel = ip0 + fired[i] % n_ports
                if not readable(in_wire[sel], 1, t):
                    continue
            else:
                ok = True
                for p in range(ip0, ip1):
                    if not readable(in_wire[p], in_rate[p], t):
                        ok = False
                        break
                if not ok:
                    continue
            # output space
            op0 = out_start[i]
            op1 = out_start[i + 1]
            ok = True
            for q in range(op0, op1):
                c0 = och_start[q]
                c1 = och_start[q + 1]
                if c1 == c0:
                    continue
                rate = out_rate[q]
                if out_mode[q] == O.OUT_RR:
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
            if in_mode[i] == O.IN_RR:
                sel = ip0 + fired[i] % n_ports
                token = pop(in_wire[sel])
                batch_flat = [token]
                batches = None
            else:
                batch_flat = []
                batches = []
                for p in range(ip0, ip1):
                    port_vals = [pop(in_wire[p]) for _ in range(in_rate[p])]
                    batches.append(port_vals)
                    batch_flat.extend(port_vals)

            # evaluate
            t_ready = t + lat[i]
            if kind == O.FUNC_PROG:
                pj = prog[i]
                c0 = p_start[pj]
                c1 = p_start[pj + 1]
                regs = regs_scratch
                r = 0
                pc = c0
                while pc < c1:
                    opc = code[pc]
                    a = code[pc + 1]
                    b = code[pc + 2]
                    cc = code[pc + 3]
                    if opc == O.OP_ADD:
                        regs[r] = O.wrap_add(regs[a], regs[b])
                    elif opc == O.OP_SUB:
                        regs[r] = O.wrap_sub(regs[a], regs[b])
                    elif opc == O.OP_MUL:
                        regs[r] = O.wrap_mul(regs[a], regs[b])
                    elif opc == O.OP_DIV:
                        regs[r] = O.trunc_div(regs[a], regs[b])
                    elif opc == O.OP_SQRT:
                        regs[r] = O.isqrt_abs(regs[a])
                    elif opc == O.OP_CONST:
                        regs[r] = a
                    elif opc == O.OP_PASS:
                        regs[r] = regs[a]
                    elif opc == O.OP_TABLE:
                        idx = regs[a] % cc
                        regs[r] = tables[b + idx]
                    else:  # OP_LOADIN
                        regs[r] = batches[a][b]
                    r += 1
                    pc += 5
                pu0 = pp_start[pj]
                for q in range(op0, op1):
                    u = pu0 + (q - op0)
                    port_values = [regs[pregs[x]]
                                   for x in range(pr_start[u], pr_start[u + 1])]
                    _write_port(m, q, port_values, fired[i], t_ready, t,
                                push, och_start, och_wire, out_mode)
            elif kind == O.FUNC_MIX:
                h = O.mix_init()
                for tok in batch_flat:
                    h = O.mix_feed(h, tok)
                for q in range(op0, op1):
                    k = q - op0
                    port_values = [O.mix_out(h, k, x)
                                   for x in range(out_rate[q])]
                    _write_port(m, q, port_values, fired[i], t_ready, t,
                                push, och_start, och_wire, out_mode)
            elif kind == O.FUNC_GEN:
                for q in range(op0, op1):
                    k = q - op0
                    port_values = [O.gen_out(salt[i], fired[i], k, x)
                                   for x in range(out_rate[q])]
                    _write_port(m, q, port_values, fired[i], t_ready, t,
                                push, och_start, och_wire, out_mode)
            else:  # FUNC_PASS
                value = batch_flat[0] if batch_flat else 0
                for q in range(op0, op1):
                    _write_port(m, q, [value], fired[i], t_ready, t,
                                push, och_start, och_wire, out_mode)

            fired[i] += 1
            next_free[i] = t + ii[i]
            any_fired = True

        if any_fired:
            t += 1
            if t > guard:
                return {"t_end": t, "deadlock": 2, "w_count": w_count,
                        "w_consumed": w_consumed, "w_cyck": w_cyck,
                        "w_cyclast": w_cyclast, "rec_vals": rec_vals,
                        "fired": fired, "residual": count}
            continue

        # nothing fired: jump to the next enabling event
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
            return {"t_end": t, "deadlock": 2, "w_count": w_count,
                    "w_consumed": w_consumed, "w_cyck": w_cyck,
                    "w_cyclast": w_cyclast, "rec_vals": rec_vals,
                    "fired": fired, "residual": count}

    # quiescent: anything able to consume but not fired is output-blocked
    deadlock = 0
    for i in range(n_inst):
        if cap[i] >= 0 and fired[i] >= cap[i]:
            continue
        ip0 = in_start[i]
        ip1 = in_start[i + 1]
        if ip1 == ip0:
            if cap[i] >= 0:  # capped source with budget left
                deadlock = 1
            continue
        if in_mode[i] == O.IN_RR:
            sel = ip0 + fired[i] % (ip1 - ip0)
            if readable(in_wire[sel], 1, t):
                deadlock = 1
        else:
            if all(readable(in_wire[p], in_rate[p], t) for p in range(ip0, ip1)):
                deadlock = 1

    return {"t_end": t, "deadlock": deadlock, "w_count": w_count,
            "w_consumed": w_consumed, "w_cyck": w_cyck,
            "w_cyclast": w_cyclast, "rec_vals": rec_vals,
            "fired": fired, "residual": count}


def _write_port(m, q, values, fired_i, t_ready, t_now, push,
                och_start, och_wire, out_mode):
    c0 = och_start[q]
    c1 = och_start[q + 1]
    if c1 == c0:
        return
    if out_mode[q] == O.OUT_RR:
        w = och_wire[c0 + fired_i % (c1 - c0)]
        for v in values:
            push(w, v, t_ready, t_now)
    else:
        for ci in range(c0, c1):
            w = och_wire[ci]
            for v in values:
                push(w, v, t_ready, t_now)
