"""Worst-case response-time analysis for LEFT-RS.

The per-term functions below work on plain lists and mirror the analysis
one quantity at a time; they double as the ``reference`` backend, which is
slow but easy to audit. ``response_time`` normally runs the compiled or
vectorised kernel from :mod:`leftrs._analysis_kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

from . import _analysis_kernels as K
from .model import SystemSpec, TaskSpec, lhp, llp, request_charge, validate


@dataclass
class RemoteRequestList:
    """Non-increasing list of request charges from one remote core, plus its cap."""

    entries: list[int]
    cap: int

    @property
    def head(self) -> list[int]:
        return self.entries[: self.cap]

    @property
    def leftover(self) -> int | None:
        """The (cap+1)-th entry, if the list is long enough."""
        return self.entries[self.cap] if self.cap < len(self.entries) else None


@dataclass
class BlockingSet:
    entries: list[int] = field(default_factory=list)
    per_core: dict[int, RemoteRequestList] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)


@dataclass
class TaskResult:
    id: int
    R: int
    E: int
    B: int
    F: int
    schedulable: bool


@dataclass
class AnalysisResult:
    protocol: str
    tasks: list[TaskResult]
    schedulable: bool
    iterations: int
    converged: bool
    status: str = "converged"

    def task(self, i: int) -> TaskResult:
        return next(t for t in self.tasks if t.id == i)

    @property
    def R(self) -> dict[int, int]:
        return {t.id: t.R for t in self.tasks}

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "schedulable": self.schedulable,
            "iterations": self.iterations,
            "converged": self.converged,
            "status": self.status,
            "tasks": [
                {"id": t.id, "R_us": t.R, "E_us": t.E, "B_us": t.B, "F_us": t.F, "schedulable": t.schedulable}
                for t in self.tasks
            ],
        }

    def verdict_line(self) -> str:
        ok = sum(t.schedulable for t in self.tasks)
        word = "SCHEDULABLE" if self.schedulable else "UNSCHEDULABLE"
        return f"{self.protocol}: {word} ({ok}/{len(self.tasks)} tasks, {self.iterations} iterations, {self.status})"


# -- per-term operations ---------------------------------------------------


def eta(task_j: TaskSpec, resource_x: int, Ri: int, Rj: int) -> list[int]:
    """Charges of every request ``task_j`` can issue to ``resource_x`` in a window of Ri + Rj."""
    N = task_j.N(resource_x)
    if N == 0:
        return []
    n = request_charge(task_j, resource_x).n
    return [n] * (math.ceil((Ri + Rj) / task_j.T) * N)


def n_local(system: SystemSpec, i: int, x: int, Ri: int, R_of: Mapping[int, int] | None = None) -> int:
    """Requests to ``x`` from task i and its local higher-priority tasks while i is pending."""
    total = system.task(i).N(x)
    for h in lhp(system, i):
        th = system.task(h)
        total += math.ceil(Ri / th.T) * th.N(x)
    return total


def remote_request_list(system: SystemSpec, i: int, x: int, core: int, Ri: int,
                        R_of: Mapping[int, int], nloc: int | None = None) -> RemoteRequestList:
    if nloc is None:
        nloc = n_local(system, i, x, Ri, R_of)
    entries: list[int] = []
    for tj in system.on_core(core):
        entries.extend(eta(tj, x, Ri, R_of[tj.id]))
    entries.sort(reverse=True)
    return RemoteRequestList(entries, min(nloc, len(entries)))


def _remote_cores(system: SystemSpec, i: int) -> list[int]:
    own = system.task(i).core
    return [k for k in range(system.num_cores) if k != own]


def blocking_set(system: SystemSpec, i: int, x: int, Ri: int, R_of: Mapping[int, int]) -> BlockingSet:
    nloc = n_local(system, i, x, Ri, R_of)
    bs = BlockingSet()
    for k in _remote_cores(system, i):
        rl = remote_request_list(system, i, x, k, Ri, R_of, nloc)
        bs.per_core[k] = rl
        bs.entries.extend(rl.head)
    return bs


def syn_overhead(blocking: BlockingSet | list[int], n_local: int) -> int:
    entries = blocking.entries if isinstance(blocking, BlockingSet) else blocking
    return min(sum(1 for e in entries if e > 1), n_local)


def resource_term(system: SystemSpec, i: int, Ri: int, R_of: Mapping[int, int]) -> int:
    E = 0
    for r in system.resources:
        nloc = n_local(system, i, r.id, Ri, R_of)
        if nloc == 0:
            continue
        bs = blocking_set(system, i, r.id, Ri, R_of)
        E += (nloc + len(bs) + syn_overhead(bs, nloc)) * r.c
    return E


def blocking_resources(system: SystemSpec, i: int) -> list[int]:
    """Resources through which a local lower-priority task can block i at release."""
    ti = system.task(i)
    out = []
    for r in system.resources:
        if not any(system.task(l).N(r.id) > 0 for l in llp(system, i)):
            continue
        if system.is_global(r.id) or system.ceiling(r.id, ti.core) >= ti.P:
            out.append(r.id)
    return out


def alpha(system: SystemSpec, i: int, x: int) -> int:
    """Largest request charge among local lower-priority users of ``x`` (0 if none)."""
    ns = [request_charge(system.task(l), x).n for l in llp(system, i) if system.task(l).N(x) > 0]
    return max(ns, default=0)


def beta(system: SystemSpec, i: int, x: int, Ri: int, R_of: Mapping[int, int]) -> list[int]:
    bs = blocking_set(system, i, x, Ri, R_of)
    return [rl.leftover for rl in bs.per_core.values() if rl.leftover is not None]


def arrival_blocking(system: SystemSpec, i: int, Ri: int, R_of: Mapping[int, int]) -> int:
    B = 0
    for x in blocking_resources(system, i):
        b = beta(system, i, x, Ri, R_of)
        B = max(B, (alpha(system, i, x) + len(b) + int(any(n > 1 for n in b))) * system.resource(x).c)
    return B


def fault_term(system: SystemSpec, i: int) -> int:
    """All f_i faults land on the longest segment (normal part or one critical section)."""
    t = system.task(i)
    cmax = max((system.resource(x).c for x in t.used), default=0)
    return t.f * max(t.C, cmax)


# -- holistic fixed point --------------------------------------------------

_STATUS = {K.CONVERGED: "converged", K.DEADLINE_EXCEEDED: "deadline-exceeded", K.NOT_CONVERGED: "non-converged"}


def holistic(system: SystemSpec, step: Callable[[int, dict[int, int]], tuple[int, int, int, int]],
             max_iter: int = 10_000) -> tuple[dict, dict, int, int]:
    """Jacobi fixed point over all tasks.

    ``step(i, R)`` returns (R_i', E_i, B_i, F_i) for the current iterate ``R``.
    Starts from C_i + F_i and stops on convergence, on the first deadline
    overrun, or after ``max_iter`` passes.
    """
    R = {t.id: t.C + step_fault(step, t.id) for t in system.tasks}
    terms: dict[int, tuple[int, int, int]] = {}
    for it in range(1, max_iter + 1):
        new = {}
        for t in system.tasks:
            r, e, b, f = step(t.id, R)
            new[t.id] = r
            terms[t.id] = (e, b, f)
        same = new == R
        R = new
        if same:
            return R, terms, it, K.CONVERGED
        if any(R[t.id] > t.D for t in system.tasks):
            return R, terms, it, K.DEADLINE_EXCEEDED
    return R, terms, max_iter, K.NOT_CONVERGED


def step_fault(step, i):
    return getattr(step, "fault", lambda i: 0)(i)


def _leftrs_step(system: SystemSpec):
    def step(i, R):
        Ri = R[i]
        interf = sum(math.ceil(Ri / system.task(h).T) * (system.task(h).C + fault_term(system, h))
                     for h in lhp(system, i))
        E = resource_term(system, i, Ri, R)
        B = arrival_blocking(system, i, Ri, R)
        F = fault_term(system, i)
        return system.task(i).C + E + B + F + interf, E, B, F

    step.fault = lambda i: fault_term(system, i)
    return step


def build_result(system: SystemSpec, protocol: str, R, E, B, F, iterations: int, status: int) -> AnalysisResult:
    converged = status == K.CONVERGED
    tasks = []
    for a, t in enumerate(system.tasks):
        r = int(R[a])
        tasks.append(TaskResult(t.id, r, int(E[a]), int(B[a]), int(F[a]), converged and r <= t.D))
    return AnalysisResult(protocol, tasks, converged and all(t.schedulable for t in tasks),
                          iterations, converged, _STATUS[status])


def run_reference(system: SystemSpec, step, protocol: str, max_iter: int) -> AnalysisResult:
    R, terms, it, status = holistic(system, step, max_iter)
    ids = [t.id for t in system.tasks]
    return build_result(system, protocol, [R[i] for i in ids], [terms[i][0] for i in ids],
                        [terms[i][1] for i in ids], [terms[i][2] for i in ids], it, status)


def response_time(system: SystemSpec, backend: str = "auto", max_iter: int = 10_000) -> AnalysisResult:
    """LEFT-RS worst-case response times and verdict.

    ``backend`` is ``auto`` (numba when available, else numpy), ``numba``,
    ``numpy`` or ``reference``. Non-convergence is reported as unschedulable.
    """
    errs = validate(system)
    if errs:
        raise ValueError("invalid system: " + "; ".join(errs))
    if backend == "reference":
        return run_reference(system, _leftrs_step(system), "leftrs", max_iter)
    k = K.prepare(system, K.LEFTRS)
    R, E, B, it, status = K.fixed_point(k, backend, max_iter)
    return build_result(system, "leftrs", R, E, B, k.F, it, status)
