import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from leftrs.model import (ResourceSpec, SystemSpec, TaskSpec, lhp, llp, make_system, request_charge,
                          validate)


def two_core():
    return make_system(2, [TaskSpec(0, 0, 10, 100, 100, 1, accesses={0: 1}),
                           TaskSpec(1, 1, 10, 100, 100, 1, accesses={0: 2})], [5])


@st.composite
def systems(draw, valid=True):
    M = draw(st.integers(1, 3))
    K = draw(st.integers(0, 3))
    n = draw(st.integers(1, 6))
    tasks = []
    for i in range(n):
        T = draw(st.integers(1, 1000))
        acc = {x: draw(st.integers(0, 3)) for x in range(K) if draw(st.booleans())}
        tasks.append(TaskSpec(i, draw(st.integers(0, M - 1)), draw(st.integers(0, 50)), T,
                              draw(st.integers(1, T)), P=i + 1, f=draw(st.integers(0, 4)), accesses=acc))
    return make_system(M, tasks, [draw(st.integers(1, 20)) for _ in range(K)])


def test_validate_ok():
    assert validate(two_core()) == []


def test_validate_deadline():
    s = make_system(1, [TaskSpec(0, 0, 1, 10, 11, 1)], [])
    assert validate(s) == ["task 0: D > T"]


def test_validate_dangling_resource():
    s = make_system(1, [TaskSpec(0, 0, 1, 10, 10, 1, accesses={7: 1})], [3])
    errs = validate(s)
    assert len(errs) == 1 and "7" in errs[0] and "task 0" in errs[0]


@pytest.mark.parametrize("task,needle", [
    (TaskSpec(0, 0, -1, 10, 10, 1), "C < 0"),
    (TaskSpec(0, 0, 1, 0, 0, 1), "T < 1"),
    (TaskSpec(0, 0, 1, 10, 10, 1, f=-1), "f < 0"),
    (TaskSpec(0, 5, 1, 10, 10, 1), "core 5"),
])
def test_validate_each_field(task, needle):
    errs = validate(make_system(1, [task], []))
    assert any(needle in e for e in errs), errs


def test_validate_priorities_unique_per_core():
    s = make_system(2, [TaskSpec(0, 0, 1, 10, 10, 3), TaskSpec(1, 0, 1, 10, 10, 3), TaskSpec(2, 1, 1, 10, 10, 3)], [])
    errs = validate(s)
    assert len(errs) == 1 and "task 1" in errs[0]


def test_validate_resource_c_and_ids():
    s = SystemSpec(1, (), (ResourceSpec(0, 0), ResourceSpec(2, 1)))
    errs = validate(s)
    assert any("c = 0" in e for e in errs) and any("dense" in e for e in errs)


def test_lhp_llp_examples():
    s = make_system(2, [TaskSpec(0, 0, 1, 10, 10, 3), TaskSpec(1, 0, 1, 10, 10, 2),
                        TaskSpec(2, 0, 1, 10, 10, 1), TaskSpec(3, 1, 1, 10, 10, 9)], [])
    assert lhp(s, 1) == [0] and llp(s, 1) == [2]
    assert lhp(s, 3) == [] and llp(s, 3) == []
    with pytest.raises(KeyError):
        lhp(s, 99)


@pytest.mark.parametrize("f,n", [(0, 1), (2, 3), (5, 6)])
def test_request_charge(f, n):
    assert request_charge(TaskSpec(0, 0, 1, 10, 10, 1, f=f, accesses={0: 1}), 0).n == n


def test_request_charge_unaccessed():
    with pytest.raises(ValueError):
        request_charge(TaskSpec(0, 0, 1, 10, 10, 1), 0)


def test_json_keys_and_roundtrip():
    s = two_core()
    d = json.loads(s.to_json())
    assert set(d) == {"num_cores", "resources", "tasks"}
    assert set(d["resources"][0]) == {"id", "c_us"}
    assert set(d["tasks"][0]) == {"id", "core", "C_us", "T_us", "D_us", "priority", "f_max", "accesses"}
    assert SystemSpec.from_json(s.to_json()) == s


@pytest.mark.property
@given(systems())
def test_roundtrip_lossless(s):
    assert SystemSpec.from_json(s.to_json()) == s


@pytest.mark.property
@given(systems())
def test_validate_idempotent(s):
    assert validate(s) == validate(s)


@pytest.mark.property
@given(systems())
def test_lhp_llp_partition_core(s):
    for t in s.tasks:
        got = set(lhp(s, t.id)) | set(llp(s, t.id)) | {t.id}
        assert got == {u.id for u in s.on_core(t.core)}
        assert not set(lhp(s, t.id)) & set(llp(s, t.id))


@pytest.mark.property
@given(systems())
def test_request_charge_constant_per_task(s):
    for t in s.tasks:
        assert {request_charge(t, x).n for x in t.used} <= {t.f + 1}
