"""Discrete-event simulation of partitioned fixed-priority scheduling with LEFT-RS
or sequential checkpointing on global resources.

Each job runs as a sequence of segments: normal sections interleaved with
its critical sections (requests in ascending resource order, C split evenly
around them). Checkpoints sit at every segment end; a fault detected there
rolls the segment back. Checkpoint, detection and update costs are zero.

Within one tick the order is fixed: releases, global-resource resolution
(updates, departures, restarts, retries), checkpoints of running segments,
then dispatch and new requests (task-id order) until stable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _sim_kernel as SK
from .model import SystemSpec, TaskSpec, validate

PROTOCOLS = ("leftrs", "checkpointing")
EVENT_NAMES = SK.EVENT_NAMES


@dataclass(frozen=True)
class Segment:
    kind: str  # "normal" | "local" | "global"
    length: int
    resource: int = -1


def segments_of(system: SystemSpec, task: TaskSpec, global_ids: set[int] | None = None) -> list[Segment]:
    """Default layout: requests sorted by resource id, C split into k+1 near-equal normal parts."""
    if global_ids is None:
        global_ids = {r.id for r in system.resources if system.is_global(r.id)}
    reqs = [x for x in task.used for _ in range(task.N(x))]
    k = len(reqs)
    base, extra = divmod(task.C, k + 1)
    normal = [base + (1 if p < extra else 0) for p in range(k + 1)]
    out: list[Segment] = []
    for p in range(k + 1):
        if normal[p] > 0:
            out.append(Segment("normal", normal[p]))
        if p < k:
            x = reqs[p]
            kind = "global" if x in global_ids else "local"
            out.append(Segment(kind, system.resource(x).c, x))
    return out


# -- release patterns ---------------------------------------------------------


@dataclass(frozen=True)
class ReleasePattern:
    """``synchronous-periodic``, ``sporadic`` (seeded, gaps uniform in [T, 2T]) or ``scripted``."""

    kind: str = "synchronous-periodic"
    seed: int = 0
    times: Mapping[int, Sequence[int]] | None = None

    @classmethod
    def parse(cls, text: str) -> "ReleasePattern":
        if text in ("synchronous-periodic", "periodic"):
            return cls()
        if text.startswith("sporadic"):
            _, _, s = text.partition(":")
            return cls("sporadic", int(s or 0))
        raise ValueError(f"unknown release pattern {text!r}")

    def release_times(self, system: SystemSpec, horizon: int) -> list[list[int]]:
        out = []
        if self.kind == "scripted":
            for t in system.tasks:
                out.append(sorted(int(v) for v in (self.times or {}).get(t.id, []) if v < horizon))
            return out
        if self.kind == "synchronous-periodic":
            return [list(range(0, horizon, t.T)) for t in system.tasks]
        if self.kind == "sporadic":
            streams = np.random.SeedSequence(self.seed).spawn(len(system.tasks))
            for t, ss in zip(system.tasks, streams):
                rng = np.random.default_rng(ss)
                # gaps are >= T, so horizon // T + 1 of them always reach the horizon
                gaps = rng.integers(t.T, 2 * t.T + 1, size=horizon // t.T + 1)
                times = np.concatenate(([0], np.cumsum(gaps[:-1])))
                out.append(times[times < horizon].tolist())
            return out
        raise ValueError(f"unknown release pattern {self.kind!r}")


# -- fault schedules ------------------------------------------------------------


@dataclass(frozen=True)
class FaultSchedule:
    """Which attempts fail.

    ``scripted`` entries are (task, release index, segment index, attempt),
    attempts counted from 1 within the segment (restarts included).
    ``randomized`` draws k ~ U{0..f_i} per release and puts each fault on a
    segment picked with probability proportional to its length; the fault
    hits the next attempt of that segment to finish.
    """

    mode: str = "none"
    entries: tuple[tuple[int, int, int, int], ...] = ()
    seed: int = 0

    @classmethod
    def none(cls) -> "FaultSchedule":
        return cls()

    @classmethod
    def scripted(cls, entries: Iterable[Sequence[int]]) -> "FaultSchedule":
        es = tuple(tuple(int(v) for v in e) for e in entries)
        for e in es:
            if len(e) != 4:
                raise ValueError(f"fault entry {e} needs (task, release, segment, attempt)")
            if e[3] < 1:
                raise ValueError(f"fault entry {e}: attempt index must be >= 1")
        return cls("scripted", es)

    @classmethod
    def randomized(cls, seed: int) -> "FaultSchedule":
        return cls("randomized", (), int(seed))

    @classmethod
    def parse(cls, text: str) -> "FaultSchedule":
        rows = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append([int(v) for v in line.split()])
        return cls.scripted(rows)

    @classmethod
    def load(cls, spec: str) -> "FaultSchedule":
        """A path to a scripted file, or an integer seed for randomized faults."""
        p = Path(spec)
        if p.exists():
            return cls.parse(p.read_text())
        try:
            return cls.randomized(int(spec))
        except ValueError:
            raise ValueError(f"--faults {spec!r} is neither a file nor an integer seed") from None

    def check(self, system: SystemSpec):
        per_job: dict[tuple[int, int], int] = {}
        for task, rel, _, _ in self.entries:
            per_job[(task, rel)] = per_job.get((task, rel), 0) + 1
        for (task, rel), k in per_job.items():
            if k > system.task(task).f:
                raise ValueError(f"task {task} release {rel}: {k} scripted faults exceed f = {system.task(task).f}")


def _fault_arrays(system, faults: FaultSchedule, segs, nrel):
    n = len(system.tasks)
    J = max([1] + list(nrel))
    F = max([1] + [t.f for t in system.tasks])
    fseg = np.zeros((n, J, F), np.int64)
    fatt = np.zeros((n, J, F), np.int64)
    fcount = np.zeros((n, J), np.int64)
    if faults.mode == "scripted":
        faults.check(system)
        for task, rel, s, a in faults.entries:
            if rel >= nrel[task]:
                continue
            q = fcount[task, rel]
            fseg[task, rel, q] = s
            fatt[task, rel, q] = a
            fcount[task, rel] = q + 1
    elif faults.mode == "randomized":
        streams = np.random.SeedSequence(faults.seed).spawn(n)
        for i, t in enumerate(system.tasks):
            lens = np.array([s.length for s in segs[i]], float)
            if t.f == 0 or lens.sum() == 0 or nrel[i] == 0:
                continue
            rng = np.random.default_rng(streams[i])
            ks = rng.integers(0, t.f + 1, size=nrel[i])
            picks = rng.choice(len(lens), size=int(ks.sum()), p=lens / lens.sum())
            # slot q of job j is filled iff q < k_j
            mask = np.arange(F)[None, :] < ks[:, None]
            fseg[i, : nrel[i]][mask] = picks
            fcount[i, : nrel[i]] = ks
    elif faults.mode != "none":
        raise ValueError(f"unknown fault mode {faults.mode!r}")
    return fseg, fatt, fcount


# -- trace ----------------------------------------------------------------------


@dataclass(frozen=True)
class SimEvent:
    time: int
    kind: str
    task: int
    resource: int = -1
    attempt: int = 0
    job: int = 0

    def line(self) -> str:
        return f"{self.time} {self.kind} {self.task} {self.resource} {self.attempt}"


@dataclass
class JobRecord:
    task: int
    job: int
    release: int
    completion: int | None
    deadline: int

    @property
    def response(self) -> int | None:
        return None if self.completion is None else self.completion - self.release

    @property
    def missed(self) -> bool:
        return self.completion is None or self.completion > self.deadline


class SimTrace:
    """Outcome of one run: the event list (when recorded) and every job's release and completion."""

    def __init__(self, protocol: str, events: list[SimEvent], release: np.ndarray, completion: np.ndarray,
                 nrel: np.ndarray, deadlines: np.ndarray, end_time: int, raw: np.ndarray | None = None):
        self.protocol = protocol
        self.events = events
        self.end_time = end_time
        self.raw = raw  # kernel rows incl. internal events: time, kind, task, res, attempt, job, aux
        self._rel = release
        self._comp = completion
        self._nrel = nrel
        self._D = deadlines
        self._jobs: list[JobRecord] | None = None

    @property
    def jobs(self) -> list[JobRecord]:
        if self._jobs is None:
            self._jobs = [
                JobRecord(i, j, int(self._rel[i, j]), int(self._comp[i, j]) if self._comp[i, j] >= 0 else None,
                          int(self._rel[i, j] + self._D[i]))
                for i in range(len(self._nrel)) for j in range(int(self._nrel[i]))
            ]
        return self._jobs

    @property
    def in_flight(self) -> list[tuple[int, int]]:
        """(task, job) pairs released but unfinished when the run stopped."""
        return [(j.task, j.job) for j in self.jobs if j.completion is None]

    @property
    def verdict(self) -> bool:
        """True when no job missed its deadline."""
        return not any(j.missed for j in self.jobs)

    @property
    def response_times(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for j in self.jobs:
            if j.response is not None:
                out.setdefault(j.task, []).append(j.response)
        return out

    def max_response(self) -> dict[int, int]:
        return {i: max(v) for i, v in self.response_times.items()}

    def max_response_array(self) -> tuple[np.ndarray, int]:
        """Per-task max response (-1 when no job finished) and the number of unfinished jobs."""
        n, J = self._comp.shape
        valid = np.arange(J)[None, :] < self._nrel[:, None]
        finished = valid & (self._comp >= 0)
        resp = np.where(finished, self._comp - self._rel, -1)
        return resp.max(axis=1) if J else np.full(n, -1), int((valid & ~finished).sum())

    def of(self, kind: str, task: int | None = None) -> list[SimEvent]:
        return [e for e in self.events if e.kind == kind and (task is None or e.task == task)]

    def to_text(self) -> str:
        return "\n".join(e.line() for e in self.events) + ("\n" if self.events else "")

    def summary(self) -> dict:
        return {
            "protocol": self.protocol,
            "verdict": "no-deadline-miss" if self.verdict else "deadline-miss",
            "end_time_us": self.end_time,
            "in_flight": [list(p) for p in self.in_flight],
            "jobs": [
                {"task": j.task, "job": j.job, "release_us": j.release, "completion_us": j.completion,
                 "response_us": j.response, "deadline_miss": j.missed}
                for j in self.jobs
            ],
        }


def _seg_arrays(system, segs):
    n = len(system.tasks)
    S = max([1] + [len(s) for s in segs])
    kind = np.zeros((n, S), np.int64)
    length = np.zeros((n, S), np.int64)
    res = -np.ones((n, S), np.int64)
    prio = np.zeros((n, S), np.int64)
    code = {"normal": SK.SEG_NORMAL, "local": SK.SEG_LOCAL, "global": SK.SEG_GLOBAL}
    for i, t in enumerate(system.tasks):
        for s, sg in enumerate(segs[i]):
            kind[i, s] = code[sg.kind]
            length[i, s] = sg.length
            res[i, s] = sg.resource
            if sg.kind == "local":
                prio[i, s] = 2 * system.ceiling(sg.resource, t.core) + 1
            else:
                prio[i, s] = 2 * t.P
    return kind, length, res, prio


class Simulator:
    """A system prepared once for many runs (segment layout and static arrays)."""

    def __init__(self, system: SystemSpec, protocol: str = "leftrs", *,
                 segments: Mapping[int, Sequence[Segment]] | None = None, fault_mode_off: bool = False):
        if protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
        errs = validate(system)
        if errs:
            raise ValueError("invalid system: " + "; ".join(errs))
        if [t.id for t in system.tasks] != list(range(len(system.tasks))):
            raise ValueError("simulation needs task ids 0..n-1 in order")
        self.system = system
        self.protocol = protocol
        self.fault_mode_off = bool(fault_mode_off)
        glob = {r.id for r in system.resources if system.is_global(r.id)}
        self.segments = [
            list(segments[t.id]) if segments and t.id in segments else segments_of(system, t, glob)
            for t in system.tasks
        ]
        for t, sl in zip(system.tasks, self.segments):
            for sg in sl:
                if sg.kind != "normal" and (sg.resource < 0 or sg.length != system.resource(sg.resource).c):
                    raise ValueError(f"task {t.id}: critical-section segment must match its resource")
        self._seg = _seg_arrays(system, self.segments)
        i64 = lambda vals: np.array(vals, np.int64)
        self._core = i64([t.core for t in system.tasks])
        self._P = i64([t.P for t in system.tasks])
        self._f = i64([t.f for t in system.tasks])
        self._nseg = i64([len(s) for s in self.segments])
        self._c = i64([r.c for r in system.resources])
        self.max_D = max((t.D for t in system.tasks), default=1)

    def run(self, release_pattern: ReleasePattern | str = "synchronous-periodic",
            faults: FaultSchedule | None = None, horizon: int | None = None, *,
            record: bool = True, drain: int | None = None) -> SimTrace:
        system = self.system
        if isinstance(release_pattern, str):
            release_pattern = ReleasePattern.parse(release_pattern)
        faults = faults or FaultSchedule.none()
        if self.fault_mode_off and faults.mode != "none":
            raise ValueError("fault_mode_off runs take no fault schedule")
        horizon = self.max_D if horizon is None else horizon
        drain = 2 * self.max_D if drain is None else drain

        rels = release_pattern.release_times(system, horizon)
        n = len(system.tasks)
        nrel = np.array([len(r) for r in rels], np.int64)
        J = max(1, int(nrel.max()) if n else 1)
        rel = np.full((n, J), np.iinfo(np.int64).max // 4, np.int64)
        for i, r in enumerate(rels):
            rel[i, : len(r)] = r
        fseg, fatt, fcount = _fault_arrays(system, faults, self.segments, nrel)
        kind, length, res, prio = self._seg

        cap = 1
        if record:
            per_job = [2 + 10 * len(s) * (t.f + 2) for t, s in zip(system.tasks, self.segments)]
            cap = int(sum(int(k) * p for k, p in zip(nrel, per_job))) + 64
        while True:
            ev = np.zeros((cap, SK.EV_COLS), np.int64)
            evn = np.zeros(2, np.int64)
            comp = -np.ones((n, J), np.int64)
            end, _, _ = SK.simulate_kernel(
                system.num_cores, self._core, self._P, self._f, self._nseg, kind, length, res, prio,
                rel, nrel, fseg, fatt, fcount, self._c, 0 if self.protocol == "leftrs" else 1,
                self.fault_mode_off, np.int64(horizon + drain), ev, evn, comp,
            )
            if not record or evn[1] == 0:
                break
            cap *= 2

        D = np.array([t.D for t in system.tasks], np.int64)
        events: list[SimEvent] = []
        raw = None
        if record:
            raw = ev[: evn[0]].copy()
            for row in raw.tolist():
                if row[1] == SK.ATTEMPT_OK:
                    continue
                events.append(SimEvent(row[0], EVENT_NAMES[row[1]], row[2], row[3], row[4], row[5]))
        trace = SimTrace(self.protocol, events, rel, comp, nrel, D, int(end), raw)
        if record:
            misses = [SimEvent(j.deadline, "deadline_miss", j.task, -1, 0, j.job) for j in trace.jobs if j.missed]
            if misses:
                # stable sort keeps the kernel's within-tick order; misses go last in their tick
                trace.events = sorted(events + misses, key=lambda e: e.time)
        return trace

    def max_response(self, release_pattern, faults, horizon=None) -> tuple[np.ndarray, int]:
        """Fast path for campaigns: (per-task max response, -1 if none finished; unfinished job count)."""
        return self.run(release_pattern, faults, horizon, record=False).max_response_array()


def simulate(system: SystemSpec, protocol: str = "leftrs",
             release_pattern: ReleasePattern | str = "synchronous-periodic",
             faults: FaultSchedule | None = None, horizon: int | None = None, *,
             segments: Mapping[int, Sequence[Segment]] | None = None,
             fault_mode_off: bool = False, record: bool = True, drain: int | None = None) -> SimTrace:
    """Run one simulation.

    Releases happen strictly before ``horizon`` (default: max D). The run then
    continues until every released job finishes or ``horizon + drain`` passes
    (default drain: 2 * max D); unfinished jobs are listed in ``in_flight``.
    ``segments`` overrides the default segment layout per task id.
    ``fault_mode_off`` disables the synchronisation period and takes no faults.
    """
    sim = Simulator(system, protocol, segments=segments, fault_mode_off=fault_mode_off)
    return sim.run(release_pattern, faults, horizon, record=record, drain=drain)


# -- exhaustive probe --------------------------------------------------------------


class ProbeBoundExceeded(RuntimeError):
    pass


@dataclass
class ProbeResult:
    max_duration: int  # us, worst access duration of the observed request
    worst_excess: int  # max over patterns of duration - (k_obs + 1 + ahead + 1) * c
    patterns: int
    offsets: int

    def within_cap(self) -> bool:
        return self.worst_excess <= 0


def probe_instance(n_obs: int, pred_ns: Sequence[int], c: int, grid: int = 2,
                   window: int | None = None, max_nodes: int = 2_000_000) -> ProbeResult:
    """Exhaustive worst case for one request joining behind ``len(pred_ns)`` predecessors.

    Predecessor p joins ``d_p`` before the observed request, with d_0 >= d_1 >= ...
    (FIFO order follows list order) on a grid of ``c // grid`` up to ``window``
    (default (max n + m) * c). Every fault pattern within the n - 1 budgets is
    replayed for every offset vector. Raises ProbeBoundExceeded when one
    offset vector needs more than ``max_nodes`` search nodes.
    """
    m = len(pred_ns)
    if n_obs < 1 or any(v < 1 for v in pred_ns):
        raise ValueError("request counts n must be >= 1")
    step = max(1, c // grid)
    if window is None:
        window = (max([n_obs, *pred_ns]) + m) * c
    offs = range(0, window + 1, step)
    budget = np.array([v - 1 for v in pred_ns] + [n_obs - 1], np.int64)
    W = window + c
    best, excess, patterns, count = -1, -(2**62), 0, 0
    for ds in itertools.product(offs, repeat=m):
        if any(ds[p] < ds[p + 1] for p in range(m - 1)):
            continue
        join = np.array([W - d for d in ds] + [W], np.int64)
        b, e, nodes, over = SK.probe_search(join, budget, np.int64(c), max_nodes)
        if over:
            raise ProbeBoundExceeded(f"search bound exceeded at offsets {ds}")
        best, excess = max(best, int(b)), max(excess, int(e))
        patterns += int(nodes)
        count += 1
    return ProbeResult(best, excess, patterns, count)


def worst_case_probe(system: SystemSpec, i: int, x: int, fault_space_bound: int = 2_000_000, grid: int = 2) -> int:
    """Worst access time (us) of one request by task i to x against the remote users of x.

    One predecessor per remote core using x, each with its largest n = f + 1
    on that core.
    """
    ti = system.task(i)
    if ti.N(x) == 0:
        raise ValueError(f"task {i} does not access resource {x}")
    per_core: dict[int, int] = {}
    for t in system.users(x):
        if t.core != ti.core:
            per_core[t.core] = max(per_core.get(t.core, 0), t.f + 1)
    preds = [per_core[k] for k in sorted(per_core)]
    return probe_instance(ti.f + 1, preds, system.resource(x).c, grid, max_nodes=fault_space_bound).max_duration
