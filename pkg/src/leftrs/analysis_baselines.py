"""Response-time analyses for the comparison protocols: MSRP-FT, MSRP-FT-OF, Checkpointing.

All three reuse the LEFT-RS holistic fixed point and remote request lists;
only the per-request access term and the fault term change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import _analysis_kernels as K
from .analysis_leftrs import (
    AnalysisResult,
    alpha,
    blocking_resources,
    build_result,
    fault_term,
    n_local,
    remote_request_list,
    run_reference,
)
from .model import SystemSpec, lhp, validate

PROTOCOLS = ("msrpft", "msrpft-of", "checkpointing")


@dataclass(frozen=True)
class OverheadModel:
    """Per-request coordination cost of MSRP-FT's helping mechanism, in us."""

    o_wrap: int = 1
    o_replica: int = 6
    o_self_wrap: int = 1

    def __post_init__(self):
        for name in ("o_wrap", "o_replica", "o_self_wrap"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


ZERO_OVERHEAD = OverheadModel(0, 0, 0)


def msrpft_access(n_i: int, remote_ns: Sequence[int], c: int) -> int:
    """Worst-case access time of one request under MSRP-FT.

    The p-th largest remote request (1-based) is helped by p+1 cores, so it
    occupies the lock for ceil(n / (p+1)) units.
    """
    S = sum(-(-n // (p + 2)) for p, n in enumerate(sorted(remote_ns, reverse=True)))
    return (n_i + S) * c


def msrpft_overhead(m: int, model: OverheadModel) -> int:
    if m < 0:
        raise ValueError("m must be >= 0")
    return m * (model.o_wrap + model.o_replica) + model.o_self_wrap


def checkpointing_access(n_i: int, remote_ns: Sequence[int], c: int) -> int:
    """Each earlier holder re-executes all of its faults while holding the lock."""
    return (n_i + sum(remote_ns)) * c


def fault_term_msrpft(system: SystemSpec, i: int) -> int:
    t = system.task(i)
    return t.f * t.C


def _per_request_lists(system, i, x, Ri, R_of, nloc) -> list[list[int]]:
    """Remote list for each local request: its r-th entry from every remote core's head."""
    own = system.task(i).core
    heads = [remote_request_list(system, i, x, k, Ri, R_of, nloc).head
             for k in range(system.num_cores) if k != own]
    return [[h[r] for h in heads if r < len(h)] for r in range(nloc)]


def _leftovers(system, i, x, Ri, R_of) -> list[int]:
    nloc = n_local(system, i, x, Ri, R_of)
    own = system.task(i).core
    out = []
    for k in range(system.num_cores):
        if k != own:
            lo = remote_request_list(system, i, x, k, Ri, R_of, nloc).leftover
            if lo is not None:
                out.append(lo)
    return out


def _baseline_step(system: SystemSpec, protocol: str, model: OverheadModel):
    msrp = protocol != "checkpointing"
    ftm = fault_term_msrpft if msrp else fault_term

    def access(n, ns, c, x):
        if not msrp:
            return checkpointing_access(n, ns, c)
        a = msrpft_access(n, ns, c)
        if system.is_global(x):
            a += msrpft_overhead(len(ns), model)
        return a

    def step(i, R):
        Ri = R[i]
        interf = sum(math.ceil(Ri / system.task(h).T) * (system.task(h).C + ftm(system, h))
                     for h in lhp(system, i))
        E = 0
        for r in system.resources:
            nloc = n_local(system, i, r.id, Ri, R)
            for ns in _per_request_lists(system, i, r.id, Ri, R, nloc):
                E += access(1, ns, r.c, r.id)
        B = 0
        for x in blocking_resources(system, i):
            B = max(B, access(alpha(system, i, x), _leftovers(system, i, x, Ri, R), system.resource(x).c, x))
        F = ftm(system, i)
        return system.task(i).C + E + B + F + interf, E, B, F

    step.fault = lambda i: ftm(system, i)
    return step


def response_time_baseline(system: SystemSpec, protocol: str, model: OverheadModel | None = None,
                           backend: str = "auto", max_iter: int = 10_000) -> AnalysisResult:
    """Holistic WCRT under ``msrpft``, ``msrpft-of`` or ``checkpointing``.

    ``model`` only matters for ``msrpft`` (defaults to 1/6/1 us); ``msrpft-of``
    always uses the zero model.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    errs = validate(system)
    if errs:
        raise ValueError("invalid system: " + "; ".join(errs))
    if protocol == "msrpft-of":
        model = ZERO_OVERHEAD
    elif protocol == "msrpft" and model is None:
        model = OverheadModel()
    elif model is None:
        model = ZERO_OVERHEAD

    if backend == "reference":
        return run_reference(system, _baseline_step(system, protocol, model), protocol, max_iter)
    if protocol == "checkpointing":
        k = K.prepare(system, K.CHECKPOINTING)
    else:
        k = K.prepare(system, K.MSRPFT, model.o_wrap, model.o_replica, model.o_self_wrap)
    R, E, B, it, status = K.fixed_point(k, backend, max_iter)
    return build_result(system, protocol, R, E, B, k.F, it, status)


def analyze(system: SystemSpec, protocol: str, model: OverheadModel | None = None,
            backend: str = "auto", max_iter: int = 10_000) -> AnalysisResult:
    """Dispatch to the LEFT-RS engine or a baseline by protocol name."""
    if protocol == "leftrs":
        from .analysis_leftrs import response_time

        return response_time(system, backend, max_iter)
    return response_time_baseline(system, protocol, model, backend, max_iter)
