import pytest
from hypothesis import given
from hypothesis import strategies as st

from leftrs.analysis_leftrs import blocking_set, n_local, syn_overhead
from leftrs.model import TaskSpec, make_system
from leftrs.sim import ProbeBoundExceeded, probe_instance, worst_case_probe


def test_one_fault_free_predecessor():
    assert probe_instance(1, [1], 2).max_duration == 2 * 2


@pytest.mark.parametrize("n_pred", range(1, 7))
def test_one_predecessor_any_n(n_pred):
    assert probe_instance(1, [n_pred], 2).max_duration <= 3 * 2


def test_no_predecessors():
    assert probe_instance(2, [], 2).max_duration == 2 * 2


def test_search_bound():
    with pytest.raises(ProbeBoundExceeded):
        probe_instance(4, [4, 4, 4, 4], 2, max_nodes=1000)
    with pytest.raises(ValueError):
        probe_instance(0, [1], 2)


def test_worst_case_probe_on_system():
    s = make_system(3, [TaskSpec(0, 0, 1, 100, 100, 1, f=0, accesses={0: 1}),
                        TaskSpec(1, 1, 1, 100, 100, 1, f=3, accesses={0: 1}),
                        TaskSpec(2, 2, 1, 100, 100, 1, f=0, accesses={0: 1})], [2])
    got = worst_case_probe(s, 0, 0)
    assert got <= (1 + 2 + 1) * 2
    with pytest.raises(ValueError):
        worst_case_probe(make_system(1, [TaskSpec(0, 0, 1, 10, 10, 1)], [1]), 0, 0)


@pytest.mark.property
@given(st.integers(1, 3), st.lists(st.integers(1, 3), max_size=2))
def test_analysis_charge_covers_probe(n_i, preds):
    """One local request against one predecessor per remote core: the analysis charges
    (n_i + |E| + Syn) c with the request's own faults counted as n_i executions; that
    never falls below the exhaustive worst case."""
    c = 2
    tasks = [TaskSpec(0, 0, 1, 10_000, 10_000, 1, f=n_i - 1, accesses={0: 1})]
    tasks += [TaskSpec(k + 1, k + 1, 1, 10_000, 10_000, 1, f=n - 1, accesses={0: 1}) for k, n in enumerate(preds)]
    s = make_system(1 + len(preds), tasks, [c])
    R = {t.id: 10 for t in tasks}
    bs = blocking_set(s, 0, 0, 10, R)
    nloc = n_local(s, 0, 0, 10)
    units = n_i + len(bs) + syn_overhead(bs, nloc)
    assert units == n_i + len(preds) + (1 if any(n > 1 for n in preds) else 0)
    assert probe_instance(n_i, preds, c).max_duration <= units * c
