"""Synthetic task-system generator.

Draw order and stream layout (all from ``numpy.random.SeedSequence(seed)``):

* child 0 is the system stream: utilisations (UUniFast), the choice of
  sharing tasks, critical-section lengths;
* child 1+i is task i's stream: period, fault budget, resource subset and
  access counts (including redraws).

Adding a task therefore never perturbs the draws of earlier tasks.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .model import ResourceSpec, SystemSpec, TaskSpec

MAX_REDRAWS = 100


@dataclass(frozen=True)
class GenConfig:
    M: int = 10
    N: int = 5
    rsf: float = 0.5
    K: int | None = None  # None -> M
    A: int = 10
    cs_range: tuple[int, int] = (1, 100)
    f_max: int = 3
    period_range: tuple[int, int] = (1_000, 1_000_000)
    util_per_task_slot: float = 0.04
    seed: int = 0

    @property
    def num_resources(self) -> int:
        return self.M if self.K is None else self.K

    @property
    def u_total(self) -> float:
        return self.util_per_task_slot * self.M * self.N

    def check(self) -> list[str]:
        errs = []
        if self.M < 1 or self.N < 1:
            errs.append("M and N must be >= 1")
        if not 0 <= self.rsf <= 1:
            errs.append(f"rsf = {self.rsf} outside [0, 1]")
        if self.period_range[0] < 1 or self.period_range[0] > self.period_range[1]:
            errs.append(f"bad period_range {self.period_range}")
        if self.cs_range[0] < 1 or self.cs_range[0] > self.cs_range[1]:
            errs.append(f"bad cs_range {self.cs_range}")
        if self.A < 1:
            errs.append("A must be >= 1")
        if self.f_max < 0:
            errs.append("f_max must be >= 0")
        if self.num_resources < 1 and self.rsf > 0:
            errs.append("rsf > 0 needs at least one resource")
        return errs

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        d = dict(d)
        for key in ("cs_range", "period_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def with_(self, **kw) -> "GenConfig":
        return replace(self, **kw)


@dataclass
class GenMeta:
    clamps: int = 0  # tasks whose C was clamped to 0 after MAX_REDRAWS
    slack: float = 0.0  # utilisation added by clamping
    redraws: int = 0
    u_target: float = 0.0
    u_draw: list[float] = field(default_factory=list)


def uunifast(n: int, u_total: float, rng: np.random.Generator) -> list[float]:
    """Bini & Buttazzo's UUniFast: n utilisations, uniformly distributed on the simplex."""
    if n < 1:
        raise ValueError("uunifast needs n >= 1")
    if u_total <= 0:
        raise ValueError("uunifast needs u_total > 0")
    out = []
    s = u_total
    for k in range(1, n):
        nxt = s * rng.random() ** (1.0 / (n - k))
        out.append(s - nxt)
        s = nxt
    out.append(s)
    return out


def log_uniform_period(rng: np.random.Generator, lo: int, hi: int) -> int:
    return max(1, int(round(math.exp(rng.uniform(math.log(lo), math.log(hi))))))


def worst_fit(utils: list[float], M: int, cap: int) -> list[int]:
    """Worst-fit decreasing with at most ``cap`` tasks per core; ties go to the lower core index.

    Returns the core of each task (indexed like ``utils``).
    """
    if len(utils) > M * cap:
        raise ValueError(f"{len(utils)} tasks do not fit on {M} cores x {cap} slots")
    load = [0.0] * M
    count = [0] * M
    core = [0] * len(utils)
    for i in sorted(range(len(utils)), key=lambda i: (-utils[i], i)):
        k = min((k for k in range(M) if count[k] < cap), key=lambda k: (load[k], k))
        core[i] = k
        load[k] += utils[i]
        count[k] += 1
    return core


def dm_priorities(deadlines: list[int], cores: list[int]) -> list[int]:
    """Deadline-monotonic, unique per core: shorter D gets the larger P, ties to the lower id."""
    P = [0] * len(deadlines)
    for k in set(cores):
        mine = sorted((i for i in range(len(cores)) if cores[i] == k), key=lambda i: (deadlines[i], i))
        for rank, i in enumerate(mine):
            P[i] = len(mine) - rank
    return P


def _draw_accesses(rng, K, A, Ksub):
    size = int(rng.integers(1, Ksub + 1))
    subset = np.sort(rng.choice(K, size=size, replace=False))
    return {int(x): int(rng.integers(1, A + 1)) for x in subset}


def generate_with_meta(cfg: GenConfig) -> tuple[SystemSpec, GenMeta]:
    errs = cfg.check()
    if errs:
        raise ValueError("invalid GenConfig: " + "; ".join(errs))
    n = cfg.M * cfg.N
    K = cfg.num_resources
    sys_ss, *task_ss = np.random.SeedSequence(cfg.seed).spawn(n + 1)
    srng = np.random.default_rng(sys_ss)
    utils = uunifast(n, cfg.u_total, srng)
    n_share = math.floor(cfg.rsf * n)
    sharing = set(int(i) for i in srng.permutation(n)[:n_share])
    cs = [int(v) for v in srng.integers(cfg.cs_range[0], cfg.cs_range[1] + 1, size=K)] if K else []

    meta = GenMeta(u_target=cfg.u_total, u_draw=utils)
    periods, fs, Cs, accs = [], [], [], []
    for i in range(n):
        rng = np.random.default_rng(task_ss[i])
        T = log_uniform_period(rng, *cfg.period_range)
        f = int(rng.integers(0, cfg.f_max + 1))
        budget = math.floor(utils[i] * T)
        acc: dict[int, int] = {}
        C = budget
        if i in sharing and K:
            for attempt in range(MAX_REDRAWS):
                acc = _draw_accesses(rng, K, cfg.A, K)
                C = budget - sum(k * cs[x] for x, k in acc.items())
                if C >= 0:
                    break
                meta.redraws += 1
            if C < 0:
                meta.clamps += 1
                meta.slack += -C / T
                C = 0
        periods.append(T)
        fs.append(f)
        Cs.append(C)
        accs.append(acc)

    cores = worst_fit(utils, cfg.M, cfg.N)
    P = dm_priorities(periods, cores)
    tasks = tuple(
        TaskSpec(id=i, core=cores[i], C=Cs[i], T=periods[i], D=periods[i], P=P[i], f=fs[i], accesses=accs[i])
        for i in range(n)
    )
    return SystemSpec(cfg.M, tasks, tuple(ResourceSpec(x, cs[x]) for x in range(K))), meta


def generate(cfg: GenConfig) -> SystemSpec:
    return generate_with_meta(cfg)[0]
