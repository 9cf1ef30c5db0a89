"""LM1/LM2 decoders with single-value messages (MB) and as peeling decoders (NB).

SW1 is the same algorithm as LM2-MB, and SW2 the same as LMP with unbounded
lists, so neither has a separate code path.
"""

from __future__ import annotations

import numba
import numpy as np

from .ensemble import TannerGraph
from .galois import nb_mul
from .lmp_decoder import DecodeReport, make_report

_REASONS = ("max_iterations", "all_verified", "stalled")


# ---------------------------------------------------------------------------
# Message-based (value, U/V) decoders
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _mb_rule(var_edges, a, b, skip, yv, cst, cval, lm2):
    """Variable rule over inputs var_edges[a:b] except ``skip``.

    Returns (verified, value). Verified inputs take precedence; a clash
    between them falls back to the channel value.
    """
    have = False
    clash = False
    val = np.uint64(0)
    for t in range(a, b):
        f = var_edges[t]
        if f == skip or cst[f] != 2:
            continue
        if not have:
            have = True
            val = cval[f]
        elif cval[f] != val:
            clash = True
    if have:
        return (not clash), (yv if clash else val)
    if not lm2:
        for t in range(a, b):
            f = var_edges[t]
            if f != skip and cval[f] == yv:
                return True, yv
        return False, yv
    # LM2: any value seen twice among inputs and the channel value
    n_rep = 0
    rep = np.uint64(0)
    for t in range(a - 1, b):
        x = yv if t < a else cval[var_edges[t]]
        if t >= a and var_edges[t] == skip:
            continue
        dup = False
        for u in range(t + 1, b):
            g = var_edges[u]
            if g != skip and cval[g] == x:
                dup = True
                break
        if dup:
            # count each repeated value once (first occurrence only)
            first = True
            for u in range(a - 1, t):
                z = yv if u < a else cval[var_edges[u]]
                if u >= a and var_edges[u] == skip:
                    continue
                if z == x:
                    first = False
                    break
            if first:
                if n_rep == 0:
                    rep = x
                n_rep += 1
    if n_rep == 1:
        return True, rep
    return False, yv


@numba.njit(cache=True)
def _mb_kernel(chk_ptr, chk_edges, var_ptr, var_edges, edge_var, weight, winv, y, max_iter, lm2,
               m, poly):
    E = weight.size
    n = y.size
    vst = np.ones(E, dtype=np.int8)
    vval = np.empty(E, dtype=np.uint64)
    for e in range(E):
        vval[e] = y[edge_var[e]]
    cst = np.ones(E, dtype=np.int8)
    cval = np.zeros(E, dtype=np.uint64)
    node_ver = np.zeros(n, dtype=np.bool_)
    node_val = y.copy()
    traj = np.zeros(max_iter)
    reason = 0
    it = 0
    for it in range(1, max_iter + 1):
        for c in range(chk_ptr.size - 1):
            a, b = chk_ptr[c], chk_ptr[c + 1]
            total = np.uint64(0)
            nver = 0
            for t in range(a, b):
                e = chk_edges[t]
                total ^= nb_mul(weight[e], vval[e], m, poly)
                if vst[e] == 2:
                    nver += 1
            for t in range(a, b):
                e = chk_edges[t]
                s = total ^ nb_mul(weight[e], vval[e], m, poly)
                cval[e] = nb_mul(s, winv[e], m, poly)
                others_ver = nver - (1 if vst[e] == 2 else 0)
                cst[e] = 2 if others_ver == b - a - 1 else 1
        changed = False
        nv = 0
        for v in range(n):
            a, b = var_ptr[v], var_ptr[v + 1]
            for t in range(a, b):
                e = var_edges[t]
                ok, val = _mb_rule(var_edges, a, b, e, y[v], cst, cval, lm2)
                st = 2 if ok else 1
                if st != vst[e] or val != vval[e]:
                    changed = True
                vst[e] = st
                vval[e] = val
            ok, val = _mb_rule(var_edges, a, b, -1, y[v], cst, cval, lm2)
            node_ver[v] = ok
            node_val[v] = val
            if ok:
                nv += 1
        traj[it - 1] = 1.0 - nv / n
        if nv == n:
            reason = 1
            break
        if not changed:
            reason = 2
            break
    return node_val, node_ver, it, reason, traj[:it]


def _mb_decode(graph: TannerGraph, received, max_iterations: int, lm2: bool, truth) -> DecodeReport:
    y = np.ascontiguousarray(received, dtype=np.uint64)
    if y.size != graph.n:
        raise ValueError("received word length differs from graph size")
    fld = graph.field
    est, ver, it, reason, traj = _mb_kernel(
        graph.chk_ptr, graph.chk_edges, graph.var_ptr, graph.var_edges, graph.var, graph.weight,
        graph.weight_inv, y, int(max_iterations), bool(lm2), fld.m, np.uint64(fld.poly))
    return make_report(est, ver, it, _REASONS[reason], truth, traj.tolist())


def lm1_mb_decode(graph: TannerGraph, received, max_iterations: int = 200, truth=None) -> DecodeReport:
    """LM1-MB: a variable output is verified if an input is verified or an
    input value matches the channel value."""
    return _mb_decode(graph, received, max_iterations, False, truth)


def lm2_mb_decode(graph: TannerGraph, received, max_iterations: int = 200, truth=None) -> DecodeReport:
    """LM2-MB: LM1-MB plus verification when two input values match."""
    return _mb_decode(graph, received, max_iterations, True, truth)


# ---------------------------------------------------------------------------
# Node-based peeling decoders
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _push(queue, inq, head, count, c, randomize):
    if inq[c]:
        return count
    inq[c] = True
    if randomize:
        queue[count] = c
    else:
        queue[(head + count) % queue.size] = c
    return count + 1


@numba.njit(cache=True)
def _remove(v, x, var_ptr, var_edges, edge_chk, weight, y, truth, removed, value, live, syn, n_bad,
            queue, inq, head, count, randomize, m, poly):
    """Verify variable v with value x and peel it off the residual graph."""
    removed[v] = True
    value[v] = x
    delta = x ^ y[v]
    bad = y[v] != truth[v]
    for t in range(var_ptr[v], var_ptr[v + 1]):
        f = var_edges[t]
        c = edge_chk[f]
        live[c] -= 1
        if bad:
            n_bad[c] -= 1
        if delta != 0:
            syn[c] ^= nb_mul(weight[f], delta, m, poly)
        count = _push(queue, inq, head, count, c, randomize)
    return count


@numba.njit(cache=True)
def _peel_kernel(chk_ptr, chk_edges, var_ptr, var_edges, edge_var, edge_chk, weight, winv, y, truth,
                 lm2, genie, randomize, seed, m, poly):
    n = y.size
    n_chk = chk_ptr.size - 1
    if randomize:
        np.random.seed(seed)
    removed = np.zeros(n, dtype=np.bool_)
    value = y.copy()
    live = np.empty(n_chk, dtype=np.int64)
    syn = np.zeros(n_chk, dtype=np.uint64)
    n_bad = np.zeros(n_chk, dtype=np.int64)
    for c in range(n_chk):
        live[c] = chk_ptr[c + 1] - chk_ptr[c]
        for t in range(chk_ptr[c], chk_ptr[c + 1]):
            e = chk_edges[t]
            v = edge_var[e]
            syn[c] ^= nb_mul(weight[e], y[v], m, poly)
            if y[v] != truth[v]:
                n_bad[c] += 1
    maxdeg = 1
    for v in range(n):
        maxdeg = max(maxdeg, var_ptr[v + 1] - var_ptr[v])
    prop = np.zeros(maxdeg, dtype=np.uint64)
    queue = np.arange(n_chk)
    inq = np.ones(n_chk, dtype=np.bool_)
    head = 0
    count = n_chk
    moves = 0
    conflicts = 0
    while count > 0:
        if randomize:
            i = np.random.randint(0, count)
            c = queue[i]
            queue[i] = queue[count - 1]
        else:
            c = queue[head]
            head = (head + 1) % n_chk
        count -= 1
        inq[c] = False
        if live[c] == 0:
            continue
        a, b = chk_ptr[c], chk_ptr[c + 1]
        cer = n_bad[c] == 0 if genie else syn[c] == 0
        if cer:
            # every live neighbour keeps its channel value
            for t in range(a, b):
                v = edge_var[chk_edges[t]]
                if not removed[v]:
                    count = _remove(v, y[v], var_ptr, var_edges, edge_chk, weight, y, truth,
                                    removed, value, live, syn, n_bad, queue, inq, head, count,
                                    randomize, m, poly)
                    moves += 1
            continue
        if live[c] == 1:
            for t in range(a, b):
                e = chk_edges[t]
                v = edge_var[e]
                if not removed[v]:
                    x = truth[v] if genie else y[v] ^ nb_mul(syn[c], winv[e], m, poly)
                    count = _remove(v, x, var_ptr, var_edges, edge_chk, weight, y, truth,
                                    removed, value, live, syn, n_bad, queue, inq, head, count,
                                    randomize, m, poly)
                    moves += 1
                    break
            continue
        if not lm2:
            continue
        for t in range(a, b):
            v = edge_var[chk_edges[t]]
            if removed[v]:
                continue
            va, vb = var_ptr[v], var_ptr[v + 1]
            if genie:
                if y[v] == truth[v]:
                    continue
                k = 0
                for u in range(va, vb):
                    c2 = edge_chk[var_edges[u]]
                    if live[c2] > 0 and n_bad[c2] == 1:
                        k += 1
                if k >= 2:
                    count = _remove(v, truth[v], var_ptr, var_edges, edge_chk, weight, y, truth,
                                    removed, value, live, syn, n_bad, queue, inq, head, count,
                                    randomize, m, poly)
                    moves += 1
                continue
            k = 0
            for u in range(va, vb):
                f = var_edges[u]
                c2 = edge_chk[f]
                if live[c2] > 0 and syn[c2] != 0:
                    prop[k] = y[v] ^ nb_mul(syn[c2], winv[f], m, poly)
                    k += 1
            n_rep = 0
            rep = np.uint64(0)
            for i in range(k):
                seen = False
                for j in range(i):
                    if prop[j] == prop[i]:
                        seen = True
                        break
                if seen:
                    continue
                for j in range(i + 1, k):
                    if prop[j] == prop[i]:
                        if n_rep == 0:
                            rep = prop[i]
                        n_rep += 1
                        break
            if n_rep == 1:
                count = _remove(v, rep, var_ptr, var_edges, edge_chk, weight, y, truth,
                                removed, value, live, syn, n_bad, queue, inq, head, count,
                                randomize, m, poly)
                moves += 1
            elif n_rep > 1:
                conflicts += 1
    return removed, value, moves, conflicts


def _peel_decode(graph: TannerGraph, received, lm2: bool, truth, order: str, seed, genie: bool):
    y = np.ascontiguousarray(received, dtype=np.uint64)
    if y.size != graph.n:
        raise ValueError("received word length differs from graph size")
    if order not in ("fifo", "random"):
        raise ValueError("order must be 'fifo' or 'random'")
    if genie and truth is None:
        raise ValueError("genie mode needs the transmitted word")
    tr = np.zeros_like(y) if truth is None else np.ascontiguousarray(truth, dtype=np.uint64)
    fld = graph.field
    seed_val = 0 if seed is None else int(np.random.SeedSequence(seed).generate_state(1)[0] >> 1)
    removed, value, moves, conflicts = _peel_kernel(
        graph.chk_ptr, graph.chk_edges, graph.var_ptr, graph.var_edges, graph.var, graph.chk,
        graph.weight, graph.weight_inv, y, tr, bool(lm2), bool(genie), order == "random",
        seed_val, fld.m, np.uint64(fld.poly))
    reason = "all_verified" if removed.all() else "no_moves"
    log = [f"ier2_conflicts={conflicts}"] if conflicts else []
    return make_report(value, removed, moves, reason, truth, [], log)


def lm1_nb_decode(graph: TannerGraph, received, truth=None, order: str = "fifo", seed=None,
                  genie: bool = False) -> DecodeReport:
    """LM1 peeling: satisfied-check removal (CER) and degree-1 pinning (IER1).

    ``iterations`` in the report counts verified nodes (peeling moves).
    """
    return _peel_decode(graph, received, False, truth, order, seed, genie)


def lm2_nb_decode(graph: TannerGraph, received, truth=None, order: str = "fifo", seed=None,
                  genie: bool = False) -> DecodeReport:
    """LM2 peeling: CER, IER1 and IER2 (two checks proposing the same value)."""
    return _peel_decode(graph, received, True, truth, order, seed, genie)
