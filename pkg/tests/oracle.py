"""Straight-from-the-formulas analysis oracle, written independently of leftrs.analysis_*.

Slow and small-system only. Returns (R list, status) with status
"converged" / "deadline-exceeded" / "non-converged".
"""

import math


def _ceil(a, b):
    return -(-a // b)


def analyse(system, proto, o=(1, 6, 1), max_iter=10_000):
    ts = list(system.tasks)
    c = {r.id: r.c for r in system.resources}
    cores = {}
    for t in ts:
        cores.setdefault(t.core, []).append(t)
    glob = {x for x in c if len({t.core for t in ts if t.accesses.get(x, 0) > 0}) >= 2}

    def F(t):
        if proto == "msrpft" or proto == "msrpft-of":
            return t.f * t.C
        cm = max([c[x] for x, k in t.accesses.items() if k > 0], default=0)
        return t.f * max(t.C, cm)

    def access(n, ns, x):
        if proto == "checkpointing":
            return (n + sum(ns)) * c[x]
        s = sorted(ns, reverse=True)
        a = (n + sum(_ceil(v, p + 2) for p, v in enumerate(s))) * c[x]
        if proto == "msrpft" and x in glob:
            a += len(ns) * (o[0] + o[1]) + o[2]
        return a

    def step(t, R):
        Ri = R[t.id]
        hp = [h for h in cores[t.core] if h.P > t.P]
        lp = [l for l in cores[t.core] if l.P < t.P]
        total = t.C + F(t) + sum(_ceil(Ri, h.T) * (h.C + F(h)) for h in hp)
        E = 0
        B = 0
        for x in sorted(c):
            nloc = t.accesses.get(x, 0) + sum(_ceil(Ri, h.T) * h.accesses.get(x, 0) for h in hp)
            lists = []
            for k in sorted(cores):
                if k == t.core:
                    continue
                xi = []
                for j in cores[k]:
                    xi += [j.f + 1] * (_ceil(Ri + R[j.id], j.T) * j.accesses.get(x, 0))
                xi.sort(reverse=True)
                lists.append((xi, min(nloc, len(xi))))
            heads = [xi[:cap] for xi, cap in lists]
            if proto == "leftrs":
                if nloc:
                    allh = [v for h in heads for v in h]
                    E += (nloc + len(allh) + min(sum(v > 1 for v in allh), nloc)) * c[x]
            else:
                for r in range(nloc):
                    E += access(1, [h[r] for h in heads if r < len(h)], x)
            users_lp = [l for l in lp if l.accesses.get(x, 0) > 0]
            if not users_lp:
                continue
            ceil_ = max(u.P for u in cores[t.core] if u.accesses.get(x, 0) > 0)
            if x not in glob and ceil_ < t.P:
                continue
            alpha = max(l.f + 1 for l in users_lp)
            beta = [xi[cap] for xi, cap in lists if cap < len(xi)]
            if proto == "leftrs":
                b = (alpha + len(beta) + (1 if any(v > 1 for v in beta) else 0)) * c[x]
            else:
                b = access(alpha, beta, x)
            B = max(B, b)
        return total + E + B

    R = {t.id: t.C + F(t) for t in ts}
    for _ in range(max_iter):
        new = {t.id: step(t, R) for t in ts}
        if new == R:
            return [R[t.id] for t in ts], "converged"
        R = new
        if any(R[t.id] > t.D for t in ts):
            return [R[t.id] for t in ts], "deadline-exceeded"
    return [R[t.id] for t in ts], "non-converged"
