"""Holistic response-time kernels shared by LEFT-RS and the baselines.

Two interchangeable backends compute one full-system pass
``R -> C + F + interference + E + B``:

* ``numba``: explicit loops, compiled.
* ``numpy``: vectorised over (task, core, value, resource); MSRP-FT's
  per-request grouping still loops in Python.

Both are integer-exact, so they must agree bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import HAVE_NUMBA, njit
from .model import SystemSpec

LEFTRS, MSRPFT, CHECKPOINTING = 0, 1, 2

CONVERGED, DEADLINE_EXCEEDED, NOT_CONVERGED = 0, 1, 2


@dataclass
class KernelInput:
    ids: np.ndarray
    C: np.ndarray
    T: np.ndarray
    D: np.ndarray
    core: np.ndarray
    nval: np.ndarray  # f + 1
    Nacc: np.ndarray  # (n, K)
    c: np.ndarray
    is_global: np.ndarray
    lhp: np.ndarray  # (n, n) int8, lhp[i, h] = h in lhp(i)
    FA: np.ndarray  # (n, K) int8, resource can impose arrival blocking on i
    alpha: np.ndarray  # (n, K) largest n over llp(i) requesters
    F: np.ndarray
    M: int
    VMAX: int
    proto: int
    o_pair: int  # o_wrap + o_replica
    o_self: int


def prepare(system: SystemSpec, proto: int, o_wrap: int = 0, o_replica: int = 0, o_self_wrap: int = 0) -> KernelInput:
    tasks = system.tasks
    n, K = len(tasks), len(system.resources)
    i64 = np.int64
    C = np.array([t.C for t in tasks], i64)
    T = np.array([t.T for t in tasks], i64)
    D = np.array([t.D for t in tasks], i64)
    P = np.array([t.P for t in tasks], i64)
    core = np.array([t.core for t in tasks], i64)
    f = np.array([t.f for t in tasks], i64)
    Nacc = np.zeros((n, K), i64)
    for a, t in enumerate(tasks):
        for x, k in t.accesses.items():
            Nacc[a, x] = k
    c = np.array([system.resource(x).c for x in range(K)], i64)
    used = Nacc > 0
    is_global = np.array([len(set(core[used[:, x]].tolist())) >= 2 for x in range(K)], np.int8)
    same = core[:, None] == core[None, :]
    lhp = (same & (P[None, :] > P[:, None])).astype(np.int8)
    llp = same & (P[None, :] < P[:, None])

    FA = np.zeros((n, K), np.int8)
    alpha = np.zeros((n, K), i64)
    for a in range(n):
        for x in range(K):
            users = llp[a] & used[:, x]
            if not users.any():
                continue
            if is_global[x]:
                FA[a, x] = 1
            else:
                ceiling = P[same[a] & used[:, x]].max()
                FA[a, x] = int(ceiling >= P[a])
            if FA[a, x]:
                alpha[a, x] = (f[users] + 1).max()

    cmax = np.where(used, c[None, :], 0).max(axis=1) if K else np.zeros(n, i64)
    if proto == MSRPFT:
        F = f * C
    else:
        F = f * np.maximum(C, cmax)
    return KernelInput(
        ids=np.array([t.id for t in tasks], i64),
        C=C, T=T, D=D, core=core, nval=f + 1, Nacc=Nacc, c=c,
        is_global=is_global, lhp=lhp, FA=FA, alpha=alpha, F=F.astype(i64),
        M=max(system.num_cores, int(core.max()) + 1 if n else 1),
        VMAX=int(f.max()) + 1 if n else 1,
        proto=proto, o_pair=int(o_wrap + o_replica), o_self=int(o_self_wrap),
    )


# -- shared scalar helpers -------------------------------------------------


@njit
def _ceil_div(a, b):
    return -((-a) // b)


@njit
def _value_at(hist_k, VMAX, pos):
    """Value at 0-based position ``pos`` of a non-increasing list stored as a histogram."""
    acc = 0
    for v in range(VMAX, 0, -1):
        acc += hist_k[v]
        if acc > pos:
            return v
    return 0


@njit
def _msrp_units(hist, cap, nloc, M, VMAX, bps, vals):
    """Sum over ``nloc`` local requests of (1 + S_r), S_r from the r-th head entry of every remote core.

    Returns (units, charged) where ``charged`` counts remote entries used.
    """
    nb = 1
    bps[0] = 0
    charged = 0
    for k in range(M):
        if cap[k] == 0:
            continue
        charged += cap[k]
        acc = 0
        for v in range(VMAX, 0, -1):
            if hist[k, v] > 0:
                acc += hist[k, v]
                if acc >= cap[k]:
                    bps[nb] = cap[k]
                    nb += 1
                    break
                bps[nb] = acc
                nb += 1
    b = np.sort(bps[:nb])
    units = nloc
    prev = 0
    for q in range(nb):
        end = b[q]
        if end <= prev:
            continue
        cnt = 0
        for k in range(M):
            if prev < cap[k]:
                vals[cnt] = _value_at(hist[k], VMAX, prev)
                cnt += 1
        s = np.sort(vals[:cnt])[::-1]
        S = 0
        for p in range(cnt):
            S += _ceil_div(s[p], p + 2)
        units += (end - prev) * S
        prev = end
    return units, charged


@njit
def _msrp_single(n_i, vals, cnt):
    s = np.sort(vals[:cnt])[::-1]
    S = 0
    for p in range(cnt):
        S += _ceil_div(s[p], p + 2)
    return n_i + S


# -- numba pass ------------------------------------------------------------


@njit
def _pass_loops(R, C, T, core, nval, Nacc, c, is_global, lhp, FA, alpha, F,
                proto, o_pair, o_self, M, VMAX, Rout, Eout, Bout):
    n = R.shape[0]
    K = c.shape[0]
    hist = np.zeros((M, VMAX + 1), np.int64)
    tot = np.zeros(M, np.int64)
    cap = np.zeros(M, np.int64)
    vals = np.zeros(M, np.int64)
    bps = np.zeros(M * (VMAX + 1) + 1, np.int64)
    for i in range(n):
        Ri = R[i]
        interf = 0
        for h in range(n):
            if lhp[i, h]:
                interf += _ceil_div(Ri, T[h]) * (C[h] + F[h])
        E = 0
        B = 0
        for x in range(K):
            nloc = Nacc[i, x]
            for h in range(n):
                if lhp[i, h] and Nacc[h, x] > 0:
                    nloc += _ceil_div(Ri, T[h]) * Nacc[h, x]
            if nloc == 0 and FA[i, x] == 0:
                continue
            hist[:, :] = 0
            for j in range(n):
                if core[j] != core[i] and Nacc[j, x] > 0:
                    hist[core[j], nval[j]] += _ceil_div(Ri + R[j], T[j]) * Nacc[j, x]
            for k in range(M):
                s = 0
                for v in range(VMAX + 1):
                    s += hist[k, v]
                tot[k] = s
                cap[k] = min(nloc, s)
            cx = c[x]
            if nloc > 0:
                if proto == 0:
                    esize = 0
                    big = 0
                    for k in range(M):
                        esize += cap[k]
                        big += min(cap[k], tot[k] - hist[k, 1])
                    E += (nloc + esize + min(big, nloc)) * cx
                elif proto == 2:
                    hs = 0
                    for k in range(M):
                        take = cap[k]
                        for v in range(VMAX, 0, -1):
                            if take == 0:
                                break
                            t = min(take, hist[k, v])
                            hs += t * v
                            take -= t
                    E += (nloc + hs) * cx
                else:
                    units, charged = _msrp_units(hist, cap, nloc, M, VMAX, bps, vals)
                    E += units * cx
                    if is_global[x]:
                        E += charged * o_pair + nloc * o_self
            if FA[i, x]:
                cnt = 0
                bsum = 0
                bbig = 0
                for k in range(M):
                    if tot[k] > cap[k]:
                        v = _value_at(hist[k], VMAX, cap[k])
                        vals[cnt] = v
                        cnt += 1
                        bsum += v
                        if v > 1:
                            bbig = 1
                a = alpha[i, x]
                if proto == 0:
                    b = (a + cnt + bbig) * cx
                elif proto == 2:
                    b = (a + bsum) * cx
                else:
                    b = _msrp_single(a, vals, cnt) * cx
                    if is_global[x]:
                        b += cnt * o_pair + o_self
                if b > B:
                    B = b
        Eout[i] = E
        Bout[i] = B
        Rout[i] = C[i] + F[i] + interf + E + B


@njit
def _fixed_point_loops(C, T, D, core, nval, Nacc, c, is_global, lhp, FA, alpha, F,
                       proto, o_pair, o_self, M, VMAX, max_iter, R, E, B):
    n = C.shape[0]
    for i in range(n):
        R[i] = C[i] + F[i]
    Rn = np.zeros(n, np.int64)
    for it in range(1, max_iter + 1):
        _pass_loops(R, C, T, core, nval, Nacc, c, is_global, lhp, FA, alpha, F,
                    proto, o_pair, o_self, M, VMAX, Rn, E, B)
        same = True
        over = False
        for i in range(n):
            if Rn[i] != R[i]:
                same = False
            R[i] = Rn[i]
            if R[i] > D[i]:
                over = True
        if same:
            return it, 0
        if over:
            return it, 1
    return max_iter, 2


# -- numpy pass ------------------------------------------------------------


def _cdiv(a, b):
    return -((-a) // b)


def _pass_numpy(R, k: KernelInput):
    n, K = k.Nacc.shape
    M, V = k.M, k.VMAX
    lhp = k.lhp.astype(bool)
    W = np.where(lhp, _cdiv(R[:, None], k.T[None, :]), 0)
    interf = W @ (k.C + k.F)
    Nloc = k.Nacc + W @ k.Nacc  # (n, K)

    remote = k.core[:, None] != k.core[None, :]
    G = np.where(remote, _cdiv(R[:, None] + R[None, :], k.T[None, :]), 0)  # (i, j)
    Ocore = np.zeros((n, M), np.int64)
    Ocore[np.arange(n), k.core] = 1
    # values ordered descending: slot q holds value V - q
    Oval = np.zeros((n, V), np.int64)
    Oval[np.arange(n), V - k.nval] = 1
    hist = np.einsum("ij,jk,jq,jx->ikqx", G, Ocore, Oval, k.Nacc, optimize=True)  # (i, k, q, x)
    vdesc = np.arange(V, 0, -1, dtype=np.int64)

    cum = np.cumsum(hist, axis=2)
    tot = cum[:, :, -1, :]  # (i, k, x)
    cap = np.minimum(Nloc[:, None, :], tot)
    taken = np.clip(cap[:, :, None, :] - (cum - hist), 0, hist)
    c = k.c[None, :]

    if k.proto == LEFTRS:
        esize = cap.sum(axis=1)
        big = (cap - taken[:, :, -1, :]).sum(axis=1)
        Ex = (Nloc + esize + np.minimum(big, Nloc)) * c
    elif k.proto == CHECKPOINTING:
        hs = (taken * vdesc[None, None, :, None]).sum(axis=(1, 2))
        Ex = (Nloc + hs) * c
    else:
        Ex = np.zeros((n, K), np.int64)
        bps = np.zeros(M * (V + 1) + 1, np.int64)
        vals = np.zeros(M, np.int64)
        for i in range(n):
            for x in range(K):
                nl = int(Nloc[i, x])
                if nl == 0:
                    continue
                h = np.zeros((M, V + 1), np.int64)
                h[:, 1:] = hist[i, :, ::-1, x]
                units, charged = _msrp_units(h, cap[i, :, x].copy(), nl, M, V, bps, vals)
                Ex[i, x] = units * k.c[x]
                if k.is_global[x]:
                    Ex[i, x] += charged * k.o_pair + nl * k.o_self
    Ex = np.where(Nloc > 0, Ex, 0)
    E = Ex.sum(axis=1)

    # beta: the (cap+1)-th entry of each remote list, when present
    exists = tot > cap
    pos = np.argmax(cum > cap[:, :, None, :], axis=2)  # (i, k, x)
    bval = np.where(exists, vdesc[pos], 0)
    bcnt = exists.sum(axis=1)
    FA = k.FA.astype(bool)
    if k.proto == LEFTRS:
        Bx = (k.alpha + bcnt + (bval > 1).any(axis=1)) * c
    elif k.proto == CHECKPOINTING:
        Bx = (k.alpha + bval.sum(axis=1)) * c
    else:
        Bx = np.zeros((n, K), np.int64)
        for i, x in zip(*np.nonzero(FA)):
            vs = np.sort(bval[i, :, x][exists[i, :, x]])[::-1]
            S = sum(_cdiv(int(v), p + 2) for p, v in enumerate(vs))
            Bx[i, x] = (k.alpha[i, x] + S) * k.c[x]
            if k.is_global[x]:
                Bx[i, x] += len(vs) * k.o_pair + k.o_self
    B = np.where(FA, Bx, 0).max(axis=1) if K else np.zeros(n, np.int64)
    Rn = k.C + k.F + interf + E + B
    return Rn.astype(np.int64), E.astype(np.int64), B.astype(np.int64)


def one_pass(R, k: KernelInput, backend: str):
    R = np.asarray(R, np.int64)
    if backend == "numpy":
        return _pass_numpy(R, k)
    n = R.shape[0]
    Rn, E, B = np.zeros(n, np.int64), np.zeros(n, np.int64), np.zeros(n, np.int64)
    _pass_loops(R, k.C, k.T, k.core, k.nval, k.Nacc, k.c, k.is_global, k.lhp, k.FA, k.alpha, k.F,
                k.proto, k.o_pair, k.o_self, k.M, k.VMAX, Rn, E, B)
    return Rn, E, B


def default_backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def fixed_point(k: KernelInput, backend: str = "auto", max_iter: int = 10_000):
    """Return (R, E, B, iterations, status)."""
    if backend == "auto":
        backend = default_backend()
    n = k.C.shape[0]
    if backend == "numba":
        R, E, B = np.zeros(n, np.int64), np.zeros(n, np.int64), np.zeros(n, np.int64)
        it, status = _fixed_point_loops(k.C, k.T, k.D, k.core, k.nval, k.Nacc, k.c, k.is_global, k.lhp,
                                        k.FA, k.alpha, k.F, k.proto, k.o_pair, k.o_self, k.M, k.VMAX,
                                        max_iter, R, E, B)
        return R, E, B, int(it), int(status)
    R = k.C + k.F
    E = B = np.zeros(n, np.int64)
    for it in range(1, max_iter + 1):
        Rn, E, B = one_pass(R, k, backend)
        same = np.array_equal(Rn, R)
        R = Rn
        if same:
            return R, E, B, it, CONVERGED
        if (R > k.D).any():
            return R, E, B, it, DEADLINE_EXCEEDED
    return R, E, B, max_iter, NOT_CONVERGED


def iterates(k: KernelInput, backend: str = "auto", max_iter: int = 10_000):
    """Yield every iterate of the holistic fixed point, starting from C + F."""
    if backend == "auto":
        backend = default_backend()
    R = k.C + k.F
    yield R
    for _ in range(max_iter):
        Rn, _, _ = one_pass(R, k, backend)
        yield Rn
        if np.array_equal(Rn, R) or (Rn > k.D).any():
            return
        R = Rn
