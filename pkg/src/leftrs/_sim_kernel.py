"""Event-loop kernels for the simulator and the exhaustive access-time probe.

Everything here works on flat integer arrays so it compiles under numba.
The per-resource queue machinery (``q_join``/``q_process``) is shared by the
full scheduler loop and by the probe, so both exercise the same rules.

Queue layout, per resource x:

* ``qh[x, 0]`` queue length, ``qh[x, 1]`` attempt-serial counter,
  ``qh[x, 2:]`` FIFO order as slot indices (slot = core index, since a core
  has at most one task inside a global access at a time);
* ``qs[x, slot, F_*]`` member fields;
* ``qw[x, slot, other]`` attempt serial of ``other`` that ``slot`` waits on, or -1.
"""

import numpy as np

from ._accel import njit

(RELEASE, START_NORMAL, CHECKPOINT_PASS, CHECKPOINT_FAIL, REQUEST_RESOURCE, ENTER_SYNC,
 START_CS_ATTEMPT, CS_FAULT, CS_SUCCESS_WAIT, RESOURCE_UPDATE, DATA_INDUCED_RESTART,
 LEAVE_FIFO, RESUME_NORMAL, COMPLETE, DEADLINE_MISS, ATTEMPT_OK) = range(16)

EVENT_NAMES = (
    "release", "start_normal", "checkpoint_pass", "checkpoint_fail", "request_resource",
    "enter_sync", "start_cs_attempt", "cs_fault", "cs_success_wait", "resource_update",
    "data_induced_restart", "leave_fifo", "resume_normal", "complete", "deadline_miss", "attempt_ok",
)

EMPTY, SYNC, RUN, WAIT_UPD, WAIT_RETRY, SPIN = range(6)
F_TASK, F_ST, F_START, F_SER, F_ATT, F_JOB = range(6)
NF = 6
H_LEN, H_SER = 0, 1

SEG_NORMAL, SEG_LOCAL, SEG_GLOBAL = 0, 1, 2
PROTO_LEFTRS, PROTO_CHECKPOINTING = 0, 1

EV_COLS = 7  # time, kind, task, resource, attempt, job, aux
INF = np.int64(2**62)
PRIO_NP = np.int64(2**40)  # effective priority inside a global access


@njit
def _emit(ev, evn, t, kind, task, res, att, job, aux):
    k = evn[0]
    if k >= ev.shape[0]:
        evn[1] = 1
        return
    ev[k, 0] = t
    ev[k, 1] = kind
    ev[k, 2] = task
    ev[k, 3] = res
    ev[k, 4] = att
    ev[k, 5] = job
    ev[k, 6] = aux
    evn[0] = k + 1


# -- queue ------------------------------------------------------------------


@njit
def q_start(qh, qs, x, k, t, ev, evn):
    qs[x, k, F_ATT] += 1
    qh[x, H_SER] += 1
    qs[x, k, F_SER] = qh[x, H_SER]
    qs[x, k, F_START] = t
    qs[x, k, F_ST] = RUN
    _emit(ev, evn, t, START_CS_ATTEMPT, qs[x, k, F_TASK], x, qs[x, k, F_ATT], qs[x, k, F_JOB], qs[x, k, F_SER])


@njit
def q_join(qh, qs, qw, x, k, task, job, t, fleft, proto, fault_off, ev, evn):
    L = qh[x, H_LEN]
    qh[x, 2 + L] = k
    qh[x, H_LEN] = L + 1
    qs[x, k, F_TASK] = task
    qs[x, k, F_JOB] = job
    qs[x, k, F_ATT] = 0
    qs[x, k, F_ST] = EMPTY
    qw[x, k, :] = -1
    _emit(ev, evn, t, REQUEST_RESOURCE, task, x, 0, job, 0)
    if L == 0:
        q_start(qh, qs, x, k, t, ev, evn)
        return
    if proto == PROTO_CHECKPOINTING:
        qs[x, k, F_ST] = SPIN
        return
    if fault_off:
        q_start(qh, qs, x, k, t, ev, evn)
        return
    # sync is pointless when no member ahead can still fault
    risky = False
    for p in range(L):
        if fleft[qs[x, qh[x, 2 + p], F_TASK]] > 0:
            risky = True
            break
    h = qh[x, 2]
    if risky and qs[x, h, F_ST] == RUN and qs[x, h, F_START] < t:
        qs[x, k, F_ST] = SYNC
        qw[x, k, h] = qs[x, h, F_SER]
        _emit(ev, evn, t, ENTER_SYNC, task, x, 0, job, qs[x, h, F_SER])
    else:
        q_start(qh, qs, x, k, t, ev, evn)


@njit
def q_next_end(qh, qs, x, c):
    best = INF
    for p in range(qh[x, H_LEN]):
        k = qh[x, 2 + p]
        if qs[x, k, F_ST] == RUN:
            e = qs[x, k, F_START] + c
            if e < best:
                best = e
    return best


@njit
def _awaited_done(qs, qw, x, k):
    for o in range(qw.shape[2]):
        s = qw[x, k, o]
        if s >= 0 and qs[x, o, F_ST] == RUN and qs[x, o, F_SER] == s:
            return False
    return True


@njit
def _remove(qh, x, pos):
    L = qh[x, H_LEN]
    for p in range(pos, L - 1):
        qh[x, 2 + p] = qh[x, 3 + p]
    qh[x, H_LEN] = L - 1


@njit
def q_process(qh, qs, qw, x, t, c, fail, proto, ev, evn):
    """Resolve every attempt of resource ``x`` that ends at ``t``.

    ``fail[slot]`` says whether that slot's ending attempt is faulty (the
    caller owns fault budgets). Returns the slot that updated and left, or -1.
    """
    L = qh[x, H_LEN]
    if proto == PROTO_CHECKPOINTING:
        k = qh[x, 2]
        if qs[x, k, F_ST] != RUN or qs[x, k, F_START] + c != t:
            return -1
        task = qs[x, k, F_TASK]
        job = qs[x, k, F_JOB]
        if fail[k]:
            _emit(ev, evn, t, CS_FAULT, task, x, qs[x, k, F_ATT], job, qs[x, k, F_SER])
            q_start(qh, qs, x, k, t, ev, evn)
            return -1
        _emit(ev, evn, t, RESOURCE_UPDATE, task, x, qs[x, k, F_ATT], job, qs[x, k, F_SER])
        _emit(ev, evn, t, LEAVE_FIFO, task, x, qs[x, k, F_ATT], job, 0)
        qs[x, k, F_ST] = EMPTY
        _remove(qh, x, 0)
        if L > 1:
            q_start(qh, qs, x, qh[x, 2], t, ev, evn)
        return k

    # attempts ending now, in FIFO order
    for p in range(L):
        k = qh[x, 2 + p]
        if qs[x, k, F_ST] != RUN or qs[x, k, F_START] + c != t:
            continue
        task = qs[x, k, F_TASK]
        if fail[k]:
            _emit(ev, evn, t, CS_FAULT, task, x, qs[x, k, F_ATT], qs[x, k, F_JOB], qs[x, k, F_SER])
            qs[x, k, F_ST] = WAIT_RETRY
            qw[x, k, :] = -1
            for p2 in range(L):
                o = qh[x, 2 + p2]
                if o != k and qs[x, o, F_ST] == RUN and qs[x, o, F_START] + c != t:
                    qw[x, k, o] = qs[x, o, F_SER]
        else:
            _emit(ev, evn, t, ATTEMPT_OK, task, x, qs[x, k, F_ATT], qs[x, k, F_JOB], qs[x, k, F_SER])
            qs[x, k, F_ST] = WAIT_UPD

    # at most one update: the first successful member, if everyone ahead faulted
    leaver = -1
    for p in range(L):
        k = qh[x, 2 + p]
        if qs[x, k, F_ST] == WAIT_UPD:
            ok = True
            for p2 in range(p):
                if qs[x, qh[x, 2 + p2], F_ST] != WAIT_RETRY:
                    ok = False
                    break
            if ok:
                leaver = k
                task = qs[x, k, F_TASK]
                job = qs[x, k, F_JOB]
                _emit(ev, evn, t, RESOURCE_UPDATE, task, x, qs[x, k, F_ATT], job, qs[x, k, F_SER])
                _emit(ev, evn, t, LEAVE_FIFO, task, x, qs[x, k, F_ATT], job, 0)
                qs[x, k, F_ST] = EMPTY
                _remove(qh, x, p)
                L -= 1
            break
    if leaver >= 0:
        for p in range(L):
            k = qh[x, 2 + p]
            st = qs[x, k, F_ST]
            if st == RUN or st == WAIT_UPD:
                _emit(ev, evn, t, DATA_INDUCED_RESTART, qs[x, k, F_TASK], x, qs[x, k, F_ATT] + 1,
                      qs[x, k, F_JOB], qs[x, k, F_SER])
                q_start(qh, qs, x, k, t, ev, evn)

    # synchronisation periods and retries whose awaited attempts have all ended
    for p in range(L):
        k = qh[x, 2 + p]
        st = qs[x, k, F_ST]
        if (st == SYNC or st == WAIT_RETRY) and _awaited_done(qs, qw, x, k):
            q_start(qh, qs, x, k, t, ev, evn)

    for p in range(L):
        k = qh[x, 2 + p]
        if qs[x, k, F_ST] == WAIT_UPD:
            _emit(ev, evn, t, CS_SUCCESS_WAIT, qs[x, k, F_TASK], x, qs[x, k, F_ATT], qs[x, k, F_JOB], 0)
    return leaver


# -- scheduler loop ---------------------------------------------------------


@njit
def _fault_now(i, job, s, a, fleft, fseg, fatt, fused, fcount):
    """Consume a planned fault for attempt ``a`` of segment ``s`` if one applies.

    A plan entry with attempt 0 hits the next attempt of its segment to finish.
    """
    if fleft[i] <= 0:
        return False
    hit = -1
    for q in range(fcount[i, job]):
        if fused[i, job, q] == 0 and fseg[i, job, q] == s:
            if fatt[i, job, q] == a:
                hit = q
                break
            if fatt[i, job, q] == 0 and hit < 0:
                hit = q
    if hit < 0:
        return False
    fused[i, job, hit] = 1
    fleft[i] -= 1
    return True


@njit
def _enter_next(i, t, seg, rem, att, started, active, done, nr, fleft, t_f, nseg, seg_len, comp, ev, evn):
    """Advance task i past its current segment, completing and re-activating jobs as needed."""
    while True:
        seg[i] += 1
        if seg[i] < nseg[i]:
            rem[i] = seg_len[i, seg[i]]
            att[i] = 1
            started[i] = 0
            return
        job = done[i]
        comp[i, job] = t
        _emit(ev, evn, t, COMPLETE, i, -1, 0, job, 0)
        done[i] += 1
        active[i] = 0
        if done[i] >= nr[i]:
            return
        active[i] = 1
        seg[i] = -1
        fleft[i] = t_f[i]


@njit
def simulate_kernel(M, t_core, t_P, t_f, nseg, seg_kind, seg_len, seg_res, seg_prio,
                    rel, nrel, fseg, fatt, fcount, c, proto, fault_off, t_stop, ev, evn, comp):
    n = t_core.shape[0]
    per_core = np.zeros(M, np.int64)
    for i in range(n):
        per_core[t_core[i]] += 1
    ctask = -np.ones((M, max(1, per_core.max())), np.int64)
    per_core[:] = 0
    for i in range(n):
        ctask[t_core[i], per_core[t_core[i]]] = i
        per_core[t_core[i]] += 1
    K = c.shape[0]
    Q = M
    qh = np.zeros((max(K, 1), 2 + Q), np.int64)
    qs = np.zeros((max(K, 1), Q, NF), np.int64)
    qw = -np.ones((max(K, 1), Q, Q), np.int64)
    fused = np.zeros(fseg.shape, np.int8)

    nr = np.zeros(n, np.int64)
    done = np.zeros(n, np.int64)
    active = np.zeros(n, np.int64)
    seg = np.zeros(n, np.int64)
    rem = np.zeros(n, np.int64)
    att = np.zeros(n, np.int64)
    fleft = np.zeros(n, np.int64)
    started = np.zeros(n, np.int64)
    inq = np.zeros(n, np.int64)  # resource + 1 while inside a global access
    running = -np.ones(M, np.int64)
    fail = np.zeros(Q, np.bool_)
    qend = np.full(max(K, 1), INF, np.int64)  # next attempt end per resource
    nextrel = np.full(n, INF, np.int64)
    for i in range(n):
        if nrel[i] > 0:
            nextrel[i] = rel[i, 0]
    dirty = np.zeros(M, np.bool_)  # cores whose dispatch decision may change this tick
    joiners = np.zeros(M, np.int64)

    relmin = INF
    for i in range(n):
        if nextrel[i] < relmin:
            relmin = nextrel[i]

    t = np.int64(0)
    while True:
        tn = relmin
        for k in range(M):
            r = running[k]
            if r >= 0 and inq[r] == 0 and t + rem[r] < tn:
                tn = t + rem[r]
        for x in range(K):
            if qend[x] < tn:
                tn = qend[x]
        if tn == INF or tn > t_stop:
            break
        dt = tn - t
        for k in range(M):
            r = running[k]
            if r >= 0 and inq[r] == 0:
                rem[r] -= dt
        t = tn

        # releases
        scan = relmin == t
        if scan:
            relmin = INF
        for i in range(n if scan else 0):
            while nextrel[i] <= t:
                _emit(ev, evn, t, RELEASE, i, -1, 0, nr[i], 0)
                nr[i] += 1
                nextrel[i] = rel[i, nr[i]] if nr[i] < nrel[i] else INF
                dirty[t_core[i]] = True
                if active[i] == 0:
                    active[i] = 1
                    seg[i] = -1
                    fleft[i] = t_f[i]
                    _enter_next(i, t, seg, rem, att, started, active, done, nr, fleft, t_f, nseg, seg_len,
                                comp, ev, evn)
            if nextrel[i] < relmin:
                relmin = nextrel[i]

        # global resources: updates, departures, restarts, retries
        for x in range(K):
            if qend[x] != t:
                continue
            for p in range(qh[x, H_LEN]):
                k = qh[x, 2 + p]
                fail[k] = False
                if qs[x, k, F_ST] == RUN and qs[x, k, F_START] + c[x] == t:
                    i = qs[x, k, F_TASK]
                    fail[k] = _fault_now(i, qs[x, k, F_JOB], seg[i], qs[x, k, F_ATT], fleft,
                                         fseg, fatt, fused, fcount)
            leaver = q_process(qh, qs, qw, x, t, c[x], fail, proto, ev, evn)
            qend[x] = q_next_end(qh, qs, x, c[x])
            if leaver >= 0:
                i = qs[x, leaver, F_TASK]
                inq[i] = 0
                dirty[leaver] = True
                _enter_next(i, t, seg, rem, att, started, active, done, nr, fleft, t_f, nseg, seg_len,
                            comp, ev, evn)
                if active[i] == 1 and seg_kind[i, seg[i]] != SEG_GLOBAL:
                    _emit(ev, evn, t, RESUME_NORMAL, i, x, 0, done[i], 0)

        # checkpoints at the end of normal sections and local critical sections
        for k in range(M):
            r = running[k]
            if r < 0 or inq[r] != 0 or rem[r] != 0 or active[r] == 0:
                continue
            dirty[k] = True
            s = seg[r]
            res = seg_res[r, s]
            if _fault_now(r, done[r], s, att[r], fleft, fseg, fatt, fused, fcount):
                _emit(ev, evn, t, CHECKPOINT_FAIL, r, res, att[r], done[r], s)
                att[r] += 1
                rem[r] = seg_len[r, s]
            else:
                _emit(ev, evn, t, CHECKPOINT_PASS, r, res, att[r], done[r], s)
                _enter_next(r, t, seg, rem, att, started, active, done, nr, fleft, t_f, nseg, seg_len,
                            comp, ev, evn)

        # dispatch first, so a task between two critical sections passes a
        # preemption point; then the tasks now holding a core issue their
        # requests in task-id order
        nj = 0
        for k in range(M):
            if not dirty[k]:
                continue
            dirty[k] = False
            best = -1
            bp = np.int64(-1)
            for q in range(per_core[k]):
                i = ctask[k, q]
                if active[i] == 0:
                    continue
                pr = PRIO_NP if inq[i] != 0 else seg_prio[i, seg[i]]
                if pr > bp:
                    bp = pr
                    best = i
            running[k] = best
            if best < 0 or inq[best] != 0:
                continue
            s = seg[best]
            if seg_kind[best, s] == SEG_GLOBAL:
                # insertion keeps joiners sorted by task id
                q = nj
                while q > 0 and joiners[q - 1] > best:
                    joiners[q] = joiners[q - 1]
                    q -= 1
                joiners[q] = best
                nj += 1
            elif started[best] == 0:
                started[best] = 1
                if seg_kind[best, s] == SEG_NORMAL:
                    _emit(ev, evn, t, START_NORMAL, best, -1, att[best], done[best], s)
                else:
                    _emit(ev, evn, t, START_CS_ATTEMPT, best, seg_res[best, s], att[best], done[best], s)
        for q in range(nj):
            i = joiners[q]
            x = seg_res[i, seg[i]]
            inq[i] = x + 1
            q_join(qh, qs, qw, x, t_core[i], i, done[i], t, fleft, proto, fault_off, ev, evn)
            qend[x] = q_next_end(qh, qs, x, c[x])
    return t, nr, done


# -- exhaustive probe -------------------------------------------------------


@njit
def probe_run(join_t, budget, c, faults, nfaults, ev, evn):
    """Replay one probe scenario on a single resource.

    Task ``m = len(join_t) - 1`` is the observed request; tasks 0..m-1 are
    its predecessors. ``faults[:nfaults]`` lists attempt serials that fail.
    Returns (leave time of task m, members ahead of it at its join, its faults).
    """
    n = join_t.shape[0]
    obs = n - 1
    qh = np.zeros((1, 2 + n), np.int64)
    qs = np.zeros((1, n, NF), np.int64)
    qw = -np.ones((1, n, n), np.int64)
    fleft = budget.copy()
    fail = np.zeros(n, np.bool_)
    joined = np.zeros(n, np.int64)
    left = -np.ones(n, np.int64)
    ahead = 0
    own_faults = 0
    t = join_t.min()
    while True:
        if qh[0, H_LEN] > 0 and q_next_end(qh, qs, 0, c) == t:
            for p in range(qh[0, H_LEN]):
                k = qh[0, 2 + p]
                fail[k] = False
                if qs[0, k, F_ST] == RUN and qs[0, k, F_START] + c == t and fleft[k] > 0:
                    s = qs[0, k, F_SER]
                    for q in range(nfaults):
                        if faults[q] == s:
                            fail[k] = True
                            fleft[k] -= 1
                            if k == obs:
                                own_faults += 1
                            break
            lv = q_process(qh, qs, qw, 0, t, c, fail, PROTO_LEFTRS, ev, evn)
            if lv >= 0:
                left[lv] = t
                if lv == obs:
                    return t, ahead, own_faults
        for k in range(n):
            if joined[k] == 0 and join_t[k] == t:
                joined[k] = 1
                if k == obs:
                    ahead = qh[0, H_LEN]
                q_join(qh, qs, qw, 0, k, k, 0, t, fleft, PROTO_LEFTRS, False, ev, evn)
        tn = INF
        if qh[0, H_LEN] > 0:
            tn = q_next_end(qh, qs, 0, c)
        for k in range(n):
            if joined[k] == 0 and join_t[k] < tn:
                tn = join_t[k]
        if tn == INF:
            return -1, ahead, own_faults
        t = tn


@njit
def probe_search(join_t, budget, c, max_nodes):
    """Depth-first search over every admissible fault set for one arrival pattern.

    Children of a fault set add one more fault on a successful attempt that
    ends no earlier than the set's latest fault, by a task with budget left.
    Returns (max duration, worst excess over the per-pattern bound, nodes
    visited, budget_exhausted flag). The per-pattern bound counts the observed
    task's actual faults: (k_obs + 1 + ahead + 1) * c.
    """
    n = join_t.shape[0]
    obs = n - 1
    W = join_t[obs]
    maxf = 0
    for k in range(n):
        maxf += budget[k]
    cap = 4096
    stack = np.zeros((cap, maxf + 1), np.int64)
    slen = np.zeros(cap, np.int64)
    sp = 1
    ev = np.zeros((64 * (maxf + 2) * n + 64, 7), np.int64)
    evn = np.zeros(2, np.int64)
    best = np.int64(-1)
    excess = np.int64(-(2**62))
    nodes = 0
    while sp > 0:
        sp -= 1
        nf = slen[sp]
        cur = stack[sp, :nf].copy()
        nodes += 1
        if nodes > max_nodes:
            return best, excess, nodes, True
        evn[0] = 0
        evn[1] = 0
        leave, ahead, kf = probe_run(join_t, budget, c, cur, nf, ev, evn)
        if evn[1] != 0 or leave < 0:
            return best, excess, nodes, True
        d = leave - W
        if d > best:
            best = d
        b = (kf + 1 + ahead + 1) * c
        if d - b > excess:
            excess = d - b
        if nf >= maxf:
            continue
        last = -1
        if nf > 0:
            last = cur[nf - 1]
        # faults consumed per task in this run, to respect budgets
        used = np.zeros(n, np.int64)
        for e in range(evn[0]):
            if ev[e, 1] == CS_FAULT:
                used[ev[e, 2]] += 1
        for e in range(evn[0]):
            if ev[e, 1] != ATTEMPT_OK:
                continue
            s = ev[e, 6]
            k = ev[e, 2]
            if s <= last or used[k] >= budget[k]:
                continue
            if sp >= cap:
                return best, excess, nodes, True
            stack[sp, :nf] = cur
            stack[sp, nf] = s
            slen[sp] = nf + 1
            sp += 1
    return best, excess, nodes, False
