"""LMP-Smax list-message-passing decoder.

Messages carry a status (erasure / unverified / verified) and a sorted,
duplicate-free symbol list. Two routes are provided: the pure functions
``check_update`` / ``variable_update`` (reference semantics, used by
``decode_reference``) and a compiled flooding decoder (``decode``) working on
edge-indexed arrays.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numba
import numpy as np

from .ensemble import TannerGraph
from .galois import GF2m, nb_mul

ERASURE, UNVERIFIED, VERIFIED = 0, 1, 2


class Status(enum.IntEnum):
    ERASURE = ERASURE
    UNVERIFIED = UNVERIFIED
    VERIFIED = VERIFIED


@dataclass(frozen=True)
class ListMessage:
    status: Status
    symbols: tuple[int, ...] = ()

    def __post_init__(self):
        syms = tuple(sorted(set(int(s) for s in self.symbols)))
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "status", Status(self.status))
        if self.status == Status.ERASURE and syms:
            raise ValueError("erasure carries no symbols")
        if self.status == Status.VERIFIED and len(syms) != 1:
            raise ValueError("verified message carries exactly one symbol")
        if self.status == Status.UNVERIFIED and not syms:
            raise ValueError("unverified message needs at least one symbol")

    @classmethod
    def erasure(cls) -> "ListMessage":
        return cls(Status.ERASURE, ())

    @classmethod
    def verified(cls, v: int) -> "ListMessage":
        return cls(Status.VERIFIED, (v,))

    @classmethod
    def unverified(cls, syms) -> "ListMessage":
        return cls(Status.UNVERIFIED, tuple(syms))


@dataclass(frozen=True)
class DecoderConfig:
    s_max: int = 1
    max_iterations: int = 200
    schedule: str = "flooding"

    def __post_init__(self):
        if self.s_max < 1:
            raise ValueError("s_max must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.schedule != "flooding":
            raise ValueError("only the flooding schedule is supported")


@dataclass
class DecodeReport:
    estimates: np.ndarray
    verified: np.ndarray
    n_verified: int
    n_false_verified: int
    n_unverified: int
    n_symbol_errors: int
    iterations: int
    termination: str
    trajectory: list = field(default_factory=list)  # unverified node fraction per iteration
    log: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(self.estimates.size)

    @property
    def frame_error(self) -> bool:
        return self.n_symbol_errors > 0 or self.n_unverified > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimates"] = [int(v) for v in self.estimates]
        d["verified"] = [bool(v) for v in self.verified]
        return d


def make_report(estimates, verified, iterations, termination, truth=None,
                trajectory=None, log=None) -> DecodeReport:
    estimates = np.asarray(estimates, dtype=np.uint64)
    verified = np.asarray(verified, dtype=bool)
    if truth is None:
        truth = np.zeros_like(estimates)
    truth = np.asarray(truth, dtype=np.uint64)
    wrong = estimates != truth
    return DecodeReport(
        estimates=estimates,
        verified=verified,
        n_verified=int(verified.sum()),
        n_false_verified=int((verified & wrong).sum()),
        n_unverified=int((~verified).sum()),
        n_symbol_errors=int(wrong.sum()),
        iterations=int(iterations),
        termination=termination,
        trajectory=list(trajectory or []),
        log=list(log or []),
    )


# ---------------------------------------------------------------------------
# Reference update rules
# ---------------------------------------------------------------------------

def check_update(inputs: Sequence[ListMessage], weights: Sequence[int], s_max: int,
                 field: GF2m) -> ListMessage:
    """Output toward edge ``len(inputs)``.

    ``weights`` has one entry per input followed by the output edge's weight;
    the output value x solves sum_j w_j x_j + w_out x = 0.
    """
    if len(weights) != len(inputs) + 1:
        raise ValueError("need one weight per input plus the output weight")
    w_out_inv = field.inv(weights[-1])
    if all(m.status == Status.VERIFIED for m in inputs):
        s = 0
        for m, w in zip(inputs, weights):
            s ^= field.mul(w, m.symbols[0])
        return ListMessage.verified(field.mul(s, w_out_inv))
    if any(m.status == Status.ERASURE for m in inputs):
        return ListMessage.erasure()
    sums = {0}
    for m, w in zip(inputs, weights):
        sums = {s ^ field.mul(w, x) for s in sums for x in m.symbols}
        if len(sums) > s_max:
            return ListMessage.erasure()
    return ListMessage.unverified(field.mul(s, w_out_inv) for s in sums)


def variable_update(inputs: Sequence[ListMessage], channel_value: int, s_max: int) -> ListMessage:
    """Output of a variable node given the other incoming messages.

    Precedence: verified inputs first (disagreement falls back to the channel
    value); otherwise a unique symbol seen at least twice among the input
    lists and the channel value is verified; otherwise the union, truncated to
    the channel value when longer than ``s_max``.
    """
    ver = {m.symbols[0] for m in inputs if m.status == Status.VERIFIED}
    if len(ver) == 1:
        return ListMessage.verified(next(iter(ver)))
    if len(ver) > 1:
        return ListMessage.unverified((channel_value,))
    counts: dict[int, int] = {channel_value: 1}
    for m in inputs:
        for s in m.symbols:
            counts[s] = counts.get(s, 0) + 1
    repeated = [s for s, c in counts.items() if c >= 2]
    if len(repeated) == 1:
        return ListMessage.verified(repeated[0])
    if len(repeated) > 1:
        return ListMessage.unverified((channel_value,))
    if len(counts) > s_max:
        return ListMessage.unverified((channel_value,))
    return ListMessage.unverified(counts.keys())


def decode_reference(graph: TannerGraph, received, cfg: DecoderConfig, truth=None) -> DecodeReport:
    """Slow decoder built directly on ``check_update`` / ``variable_update``."""
    fld = graph.field
    y = [int(v) for v in np.asarray(received, dtype=np.uint64)]
    E = graph.n_edges
    w = [int(x) for x in graph.weight]
    vc = [ListMessage.unverified((y[graph.var[e]],)) for e in range(E)]
    chk_edges = [graph.chk_edges[graph.chk_ptr[c]:graph.chk_ptr[c + 1]] for c in range(graph.m)]
    var_edges = [graph.var_edges[graph.var_ptr[v]:graph.var_ptr[v + 1]] for v in range(graph.n)]
    traj = []
    reason = "max_iterations"
    est = np.array(y, dtype=np.uint64)
    ver = np.zeros(graph.n, dtype=bool)
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        cv = [None] * E
        for edges in chk_edges:
            for e in edges:
                others = [f for f in edges if f != e]
                cv[e] = check_update([vc[f] for f in others], [w[f] for f in others] + [w[e]],
                                     cfg.s_max, fld)
        new_vc = [None] * E
        for v, edges in enumerate(var_edges):
            for e in edges:
                new_vc[e] = variable_update([cv[f] for f in edges if f != e], y[v], cfg.s_max)
            node = _node_decision([cv[f] for f in edges], y[v])
            ver[v] = node is not None
            est[v] = y[v] if node is None else node
        traj.append(float(1.0 - ver.mean()))
        if ver.all():
            reason = "all_verified"
            break
        if new_vc == vc:
            reason = "stalled"
            break
        vc = new_vc
    return make_report(est, ver, it, reason, truth, traj)


def _node_decision(inputs, channel_value):
    ver = {m.symbols[0] for m in inputs if m.status == Status.VERIFIED}
    if ver:
        return next(iter(ver)) if len(ver) == 1 else None
    counts = {channel_value: 1}
    for m in inputs:
        for s in m.symbols:
            counts[s] = counts.get(s, 0) + 1
    rep = [s for s, c in counts.items() if c >= 2]
    return rep[0] if len(rep) == 1 else None


# ---------------------------------------------------------------------------
# Compiled decoder
# ---------------------------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _insertion_sort(buf, n):
    for i in range(1, n):
        x = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > x:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = x


@numba.njit(cache=True)
def _sort_unique(buf, n):
    """Sort buf[:n] in place and drop duplicates; returns the new length."""
    if n <= 1:
        return n
    if n <= 64:
        _insertion_sort(buf, n)
    else:
        buf[:n] = np.sort(buf[:n])
    k = 1
    for i in range(1, n):
        if buf[i] != buf[k - 1]:
            buf[k] = buf[i]
            k += 1
    return k


@numba.njit(cache=True)
def _check_pass(chk_ptr, chk_edges, weight, winv, vst, vlen, vval, cst, clen, cval, S, m, poly,
                cur, nxt):
    n_chk = chk_ptr.size - 1
    for c in range(n_chk):
        a, b = chk_ptr[c], chk_ptr[c + 1]
        n_er = 0
        n_ver = 0
        all_single = True
        total = np.uint64(0)
        for t in range(a, b):
            e = chk_edges[t]
            if vst[e] == 0:
                n_er += 1
            elif vst[e] == 2:
                n_ver += 1
            if vlen[e] != 1:
                all_single = False
            else:
                total ^= nb_mul(weight[e], vval[e, 0], m, poly)
        deg = b - a
        for t in range(a, b):
            e = chk_edges[t]
            er_o = n_er - (1 if vst[e] == 0 else 0)
            ver_o = n_ver - (1 if vst[e] == 2 else 0)
            if ver_o == deg - 1:
                # all other inputs verified
                s = np.uint64(0)
                for u in range(a, b):
                    f = chk_edges[u]
                    if f != e:
                        s ^= nb_mul(weight[f], vval[f, 0], m, poly)
                cst[e] = 2
                clen[e] = 1
                cval[e, 0] = nb_mul(s, winv[e], m, poly)
                continue
            if er_o > 0:
                cst[e] = 0
                clen[e] = 0
                continue
            if all_single:
                s = total ^ nb_mul(weight[e], vval[e, 0], m, poly)
                cst[e] = 1
                clen[e] = 1
                cval[e, 0] = nb_mul(s, winv[e], m, poly)
                continue
            # general sumset with early overflow exit
            ncur = 1
            cur[0] = np.uint64(0)
            over = False
            for u in range(a, b):
                f = chk_edges[u]
                if f == e:
                    continue
                k = 0
                for i in range(ncur):
                    for j in range(vlen[f]):
                        nxt[k] = cur[i] ^ nb_mul(weight[f], vval[f, j], m, poly)
                        k += 1
                k = _sort_unique(nxt, k)
                if k > S:
                    over = True
                    break
                for i in range(k):
                    cur[i] = nxt[i]
                ncur = k
            if over:
                cst[e] = 0
                clen[e] = 0
                continue
            for i in range(ncur):
                nxt[i] = nb_mul(cur[i], winv[e], m, poly)
            ncur = _sort_unique(nxt, ncur)
            cst[e] = 1
            clen[e] = ncur
            for i in range(ncur):
                cval[e, i] = nxt[i]


@numba.njit(cache=True)
def _combine(var_edges, a, b, skip, y, cst, clen, cval, buf):
    """Apply the variable rule to inputs var_edges[a:b] except edge ``skip``.

    Returns (kind, value, length): kind 2 = verified(value); kind 1 with
    length 0 = fall back to the channel value; kind 1 with length L = union of
    L symbols left sorted in buf[:L].
    """
    have = False
    val = np.uint64(0)
    clash = False
    for t in range(a, b):
        f = var_edges[t]
        if f == skip or cst[f] != 2:
            continue
        if not have:
            have = True
            val = cval[f, 0]
        elif cval[f, 0] != val:
            clash = True
    if have:
        if clash:
            return 1, y, 0
        return 2, val, 1
    n = 0
    buf[n] = y
    n += 1
    for t in range(a, b):
        f = var_edges[t]
        if f == skip or cst[f] != 1:
            continue
        for j in range(clen[f]):
            buf[n] = cval[f, j]
            n += 1
    if n <= 64:
        _insertion_sort(buf, n)
    else:
        buf[:n] = np.sort(buf[:n])
    srt = buf
    n_rep = 0
    rep = np.uint64(0)
    k = 0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and srt[j + 1] == srt[i]:
            j += 1
        if j > i:
            if n_rep == 0:
                rep = srt[i]
            n_rep += 1
        buf[k] = srt[i]
        k += 1
        i = j + 1
    if n_rep == 1:
        return 2, rep, 1
    if n_rep > 1:
        return 1, y, 0
    return 1, y, k


@numba.njit(cache=True)
def _variable_pass(var_ptr, var_edges, y, cst, clen, cval, vst, vlen, vval, S, node_ver, node_val, buf):
    changed = False
    n_var = var_ptr.size - 1
    for v in range(n_var):
        a, b = var_ptr[v], var_ptr[v + 1]
        for t in range(a, b):
            e = var_edges[t]
            kind, val, ln = _combine(var_edges, a, b, e, y[v], cst, clen, cval, buf)
            if kind == 2:
                st, L = 2, 1
                buf[0] = val
            elif ln == 0 or ln > S:
                st, L = 1, 1
                buf[0] = y[v]
            else:
                st, L = 1, ln
            if vst[e] != st or vlen[e] != L:
                changed = True
            else:
                for j in range(L):
                    if vval[e, j] != buf[j]:
                        changed = True
                        break
            vst[e] = st
            vlen[e] = L
            for j in range(L):
                vval[e, j] = buf[j]
        kind, val, ln = _combine(var_edges, a, b, -1, y[v], cst, clen, cval, buf)
        node_ver[v] = kind == 2
        node_val[v] = val if kind == 2 else y[v]
    return changed


@numba.njit(cache=True)
def _lmp_kernel(chk_ptr, chk_edges, var_ptr, var_edges, edge_var, weight, winv, y, S, max_iter,
                m, poly):
    E = weight.size
    n = y.size
    maxdeg = 1
    for v in range(n):
        maxdeg = max(maxdeg, var_ptr[v + 1] - var_ptr[v])
    vst = np.ones(E, dtype=np.int8)
    vlen = np.ones(E, dtype=np.int32)
    vval = np.zeros((E, S), dtype=np.uint64)
    for e in range(E):
        vval[e, 0] = y[edge_var[e]]
    cst = np.zeros(E, dtype=np.int8)
    clen = np.zeros(E, dtype=np.int32)
    cval = np.zeros((E, S), dtype=np.uint64)
    cur = np.zeros(S * S + 1, dtype=np.uint64)
    nxt = np.zeros(S * S + 1, dtype=np.uint64)
    buf = np.zeros(maxdeg * S + 1, dtype=np.uint64)
    node_ver = np.zeros(n, dtype=np.bool_)
    node_val = y.copy()
    traj = np.zeros(max_iter, dtype=np.float64)
    reason = 0  # 0 max_iterations, 1 all_verified, 2 stalled
    it = 0
    for it in range(1, max_iter + 1):
        _check_pass(chk_ptr, chk_edges, weight, winv, vst, vlen, vval, cst, clen, cval, S, m, poly,
                    cur, nxt)
        changed = _variable_pass(var_ptr, var_edges, y, cst, clen, cval, vst, vlen, vval, S,
                                 node_ver, node_val, buf)
        nv = 0
        for v in range(n):
            if node_ver[v]:
                nv += 1
        traj[it - 1] = 1.0 - nv / n
        if nv == n:
            reason = 1
            break
        if not changed:
            reason = 2
            break
    return node_val, node_ver, it, reason, traj[:it]


_REASONS = ("max_iterations", "all_verified", "stalled")


def decode(graph: TannerGraph, received, cfg: DecoderConfig, truth=None) -> DecodeReport:
    """Flooding LMP decoding of ``received`` on ``graph``."""
    y = np.ascontiguousarray(received, dtype=np.uint64)
    if y.size != graph.n:
        raise ValueError("received word length differs from graph size")
    fld = graph.field
    est, ver, it, reason, traj = _lmp_kernel(
        graph.chk_ptr, graph.chk_edges, graph.var_ptr, graph.var_edges, graph.var, graph.weight,
        graph.weight_inv, y, int(cfg.s_max), int(cfg.max_iterations), fld.m, np.uint64(fld.poly))
    return make_report(est, ver, it, _REASONS[reason], truth, traj.tolist())
