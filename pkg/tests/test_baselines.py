import pytest
from hypothesis import given
from hypothesis import strategies as st

from leftrs.analysis_baselines import (ZERO_OVERHEAD, OverheadModel, analyze, checkpointing_access,
                                       msrpft_access, msrpft_overhead, response_time_baseline)
from leftrs.analysis_leftrs import response_time
from leftrs.model import TaskSpec, make_system
from leftrs.taskgen import GenConfig, generate

from oracle import analyse
from test_analysis_leftrs import BACKENDS, small_cfgs

DEFAULT_OVERHEAD = OverheadModel(1, 6, 1)
ns_lists = st.lists(st.integers(1, 12), max_size=6)


def test_msrpft_access_vectors():
    assert msrpft_access(1, [6], 1) == 4
    assert msrpft_access(3, [], 5) == 15
    assert msrpft_access(2, [3, 3], 2) == 10


def test_helped_access_completion():
    # τ2 starts its access at t=1; helped by two cores, τ1's 6 executions take 3 units, then its own
    start = 1
    assert start + msrpft_access(1, [6], 1) == 5


def test_msrpft_overhead_vectors():
    assert msrpft_overhead(0, DEFAULT_OVERHEAD) == 1
    assert msrpft_overhead(2, DEFAULT_OVERHEAD) == 15
    assert msrpft_overhead(3, ZERO_OVERHEAD) == 0
    with pytest.raises(ValueError):
        msrpft_overhead(-1, DEFAULT_OVERHEAD)


def test_overhead_model_validation():
    with pytest.raises(ValueError):
        OverheadModel(-1, 0, 0)


def test_checkpointing_access_vectors():
    assert checkpointing_access(1, [6], 1) == 7
    assert checkpointing_access(1, [1, 1, 1], 4) == 16
    assert checkpointing_access(2, [], 3) == 6


def test_unknown_protocol():
    with pytest.raises(ValueError):
        response_time_baseline(make_system(1, [TaskSpec(0, 0, 1, 10, 10, 1)], []), "mrsp")


def test_micro_system_msrpft_vs_leftrs(parallel_scenario):
    of = response_time_baseline(parallel_scenario, "msrpft-of")
    lr = response_time(parallel_scenario)
    assert of.task(1).E == 4 * 1
    assert lr.task(1).E <= 3 * 1
    # with overhead: one remote entry, global resource
    assert response_time_baseline(parallel_scenario, "msrpft").task(1).E == 4 + msrpft_overhead(1, DEFAULT_OVERHEAD)


def test_msrpft_fault_term_normal_only():
    s = make_system(1, [TaskSpec(0, 0, 5, 1000, 1000, 1, f=2, accesses={0: 1})], [50])
    assert response_time_baseline(s, "msrpft").task(0).F == 10
    assert response_time_baseline(s, "checkpointing").task(0).F == 100


def test_local_resource_no_overhead():
    s = make_system(1, [TaskSpec(0, 0, 5, 1000, 1000, 2, accesses={0: 1}),
                        TaskSpec(1, 0, 5, 1000, 1000, 1, accesses={0: 1})], [3])
    assert response_time_baseline(s, "msrpft").task(0).E == 3


@pytest.mark.property
@given(ns_lists)
def test_access_permutation_invariant(ns):
    assert msrpft_access(1, ns, 3) == msrpft_access(1, list(reversed(ns)), 3) == msrpft_access(1, sorted(ns), 3)


@pytest.mark.property
@given(st.lists(st.integers(1, 12), min_size=2, max_size=6))
def test_msrpft_remote_delay_accumulates(ns):
    m = len(ns)
    S = msrpft_access(0, ns, 1)
    if sorted(ns, reverse=True)[1] >= 4:  # ⌈n/3⌉ > 1 for the second-largest entry
        assert S > m + 1
    assert S >= m


@pytest.mark.property
@given(st.integers(1, 6), st.lists(st.integers(1, 12), max_size=6))
def test_leftrs_units_below_msrpft_when_faulty(n_i, ns):
    s = sorted(ns, reverse=True)
    heavy = sum(-(-v // (p + 2)) > 1 for p, v in enumerate(s))
    if heavy >= 2:
        assert n_i + len(ns) + 1 <= msrpft_access(n_i, ns, 1)


@pytest.mark.property
@given(small_cfgs)
def test_baseline_backends_agree_with_oracle(cfg):
    s = generate(cfg)
    for proto in ("msrpft", "msrpft-of", "checkpointing"):
        want, status = analyse(s, proto)
        for b in BACKENDS:
            r = analyze(s, proto, backend=b)
            assert r.status == status, (proto, b)
            assert [t.R for t in r.tasks] == want, (proto, b)


@pytest.mark.property
@given(small_cfgs)
def test_of_equals_zero_model(cfg):
    s = generate(cfg)
    a = response_time_baseline(s, "msrpft-of").to_dict()
    b = response_time_baseline(s, "msrpft", ZERO_OVERHEAD).to_dict()
    b["protocol"] = a["protocol"]
    assert a == b


@pytest.mark.property
@given(small_cfgs.map(lambda c: c.with_(f_max=0)))
def test_fault_free_ordering(cfg):
    s = generate(cfg)
    lr, cp = response_time(s), response_time_baseline(s, "checkpointing")
    of, ms = response_time_baseline(s, "msrpft-of"), response_time_baseline(s, "msrpft")
    assert [t.R for t in lr.tasks] == [t.R for t in cp.tasks]
    assert [t.schedulable for t in lr.tasks] == [t.schedulable for t in cp.tasks]
    # verdicts can only get worse as overhead is added
    assert ms.schedulable <= of.schedulable <= cp.schedulable
    if ms.converged and of.converged and cp.converged:
        for a, b, c in zip(ms.tasks, of.tasks, cp.tasks):
            assert a.R >= b.R >= c.R


def test_analyze_dispatch():
    s = generate(GenConfig(M=2, N=2, seed=1))
    assert analyze(s, "leftrs").protocol == "leftrs"
    assert analyze(s, "checkpointing").protocol == "checkpointing"
