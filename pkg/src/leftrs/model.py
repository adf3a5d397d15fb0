"""Static domain types: cores, sporadic tasks, shared resources.

All durations are integer microseconds. Priorities are explicit and unique
per core; a larger value means a higher priority.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence


@dataclass(frozen=True)
class ResourceSpec:
    id: int
    c: int  # critical-section length, us


@dataclass(frozen=True)
class TaskSpec:
    id: int
    core: int
    C: int  # pure WCET, critical sections excluded
    T: int
    D: int
    P: int
    f: int = 0  # max transient faults per release
    accesses: Mapping[int, int] = field(default_factory=dict)

    def N(self, x: int) -> int:
        """Requests to resource ``x`` per release."""
        return self.accesses.get(x, 0)

    @property
    def used(self) -> list[int]:
        return sorted(x for x, k in self.accesses.items() if k > 0)


@dataclass(frozen=True)
class RequestCharge:
    n: int  # total executions of one request (faults + 1)
    resource: int
    task: int


@dataclass(frozen=True)
class SystemSpec:
    num_cores: int
    tasks: tuple[TaskSpec, ...]
    resources: tuple[ResourceSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "resources", tuple(self.resources))

    def task(self, i: int) -> TaskSpec:
        t = self.tasks[i] if 0 <= i < len(self.tasks) else None
        if t is None or t.id != i:
            t = next((t for t in self.tasks if t.id == i), None)
        if t is None:
            raise KeyError(f"unknown task id {i}")
        return t

    def resource(self, x: int) -> ResourceSpec:
        r = self.resources[x] if 0 <= x < len(self.resources) else None
        if r is None or r.id != x:
            r = next((r for r in self.resources if r.id == x), None)
        if r is None:
            raise KeyError(f"unknown resource id {x}")
        return r

    def on_core(self, k: int) -> list[TaskSpec]:
        return [t for t in self.tasks if t.core == k]

    def users(self, x: int) -> list[TaskSpec]:
        return [t for t in self.tasks if t.N(x) > 0]

    def is_global(self, x: int) -> bool:
        """A resource is global when tasks on two or more cores use it."""
        return len({t.core for t in self.users(x)}) >= 2

    def ceiling(self, x: int, core: int) -> int | None:
        """Highest priority among tasks on ``core`` that use ``x``."""
        ps = [t.P for t in self.on_core(core) if t.N(x) > 0]
        return max(ps) if ps else None

    # -- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "num_cores": self.num_cores,
            "resources": [{"id": r.id, "c_us": r.c} for r in self.resources],
            "tasks": [
                {
                    "id": t.id,
                    "core": t.core,
                    "C_us": t.C,
                    "T_us": t.T,
                    "D_us": t.D,
                    "priority": t.P,
                    "f_max": t.f,
                    "accesses": {str(x): int(k) for x, k in sorted(t.accesses.items())},
                }
                for t in self.tasks
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSpec":
        resources = [ResourceSpec(int(r["id"]), int(r["c_us"])) for r in d["resources"]]
        tasks = [
            TaskSpec(
                id=int(t["id"]),
                core=int(t["core"]),
                C=int(t["C_us"]),
                T=int(t["T_us"]),
                D=int(t["D_us"]),
                P=int(t["priority"]),
                f=int(t.get("f_max", 0)),
                accesses={int(x): int(k) for x, k in t.get("accesses", {}).items()},
            )
            for t in d["tasks"]
        ]
        return cls(int(d["num_cores"]), tuple(tasks), tuple(resources))

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "SystemSpec":
        return cls.from_dict(json.loads(text))


def validate(system: SystemSpec) -> list[str]:
    """Return one message per broken invariant; empty when the system is well formed."""
    errs: list[str] = []
    if system.num_cores < 1:
        errs.append(f"system: num_cores = {system.num_cores} < 1")

    rids = [r.id for r in system.resources]
    if sorted(rids) != list(range(len(rids))):
        errs.append(f"resources: ids {rids} are not unique and dense 0..{len(rids) - 1}")
    for r in system.resources:
        if r.c < 1:
            errs.append(f"resource {r.id}: c = {r.c} < 1")

    tids = [t.id for t in system.tasks]
    if len(set(tids)) != len(tids):
        errs.append("tasks: duplicate task ids")
    known = set(rids)
    for t in system.tasks:
        if t.D > t.T:
            errs.append(f"task {t.id}: D > T")
        if t.C < 0:
            errs.append(f"task {t.id}: C < 0")
        if t.T < 1:
            errs.append(f"task {t.id}: T < 1")
        if t.D < 1:
            errs.append(f"task {t.id}: D < 1")
        if t.f < 0:
            errs.append(f"task {t.id}: f < 0")
        if not 0 <= t.core < system.num_cores:
            errs.append(f"task {t.id}: core {t.core} outside 0..{system.num_cores - 1}")
        for x, k in sorted(t.accesses.items()):
            if x not in known:
                errs.append(f"task {t.id}: accesses unknown resource {x}")
            if k < 0:
                errs.append(f"task {t.id}: N^{x} = {k} < 0")

    seen: dict[tuple[int, int], int] = {}
    for t in system.tasks:
        key = (t.core, t.P)
        if key in seen:
            errs.append(f"task {t.id}: priority {t.P} duplicates task {seen[key]} on core {t.core}")
        else:
            seen[key] = t.id
    return errs


def lhp(system: SystemSpec, i: int) -> list[int]:
    ti = system.task(i)
    return [t.id for t in system.tasks if t.core == ti.core and t.P > ti.P]


def llp(system: SystemSpec, i: int) -> list[int]:
    ti = system.task(i)
    return [t.id for t in system.tasks if t.core == ti.core and t.P < ti.P]


def request_charge(task: TaskSpec, resource_id: int) -> RequestCharge:
    """Pessimistic per-request charge: every request may absorb the whole fault budget."""
    if task.N(resource_id) <= 0:
        raise ValueError(f"task {task.id} does not access resource {resource_id}")
    return RequestCharge(n=task.f + 1, resource=resource_id, task=task.id)


def make_system(num_cores: int, tasks: Sequence[TaskSpec], cs_lengths: Sequence[int]) -> SystemSpec:
    """Convenience constructor: resources are numbered by position in ``cs_lengths``."""
    return SystemSpec(num_cores, tuple(tasks), tuple(ResourceSpec(x, c) for x, c in enumerate(cs_lengths)))
