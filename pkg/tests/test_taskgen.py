import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leftrs.model import validate
from leftrs.taskgen import GenConfig, dm_priorities, generate, generate_with_meta, uunifast, worst_fit


def test_uunifast_single():
    assert uunifast(1, 0.5, np.random.default_rng(0)) == [0.5]


def test_uunifast_four():
    u = uunifast(4, 0.8, np.random.default_rng(1))
    assert len(u) == 4 and all(v > 0 for v in u) and math.isclose(sum(u), 0.8, rel_tol=1e-9)


def test_uunifast_errors():
    with pytest.raises(ValueError):
        uunifast(0, 1.0, np.random.default_rng(0))


def test_uunifast_many_draws_n2():
    rng = np.random.default_rng(5)
    first = []
    for _ in range(10_000):
        u = uunifast(2, 1.0, rng)
        assert u[0] > 0 and u[1] > 0
        assert math.isclose(sum(u), 1.0, rel_tol=1e-9)
        first.append(u[0])
    # for n=2 the first share is uniform on (0, 1)
    assert abs(np.mean(first) - 0.5) < 0.02


@pytest.mark.property
@given(st.integers(1, 60), st.floats(0.01, 20), st.integers(0, 2**32))
def test_uunifast_sum_positive(n, u, seed):
    out = uunifast(n, u, np.random.default_rng(seed))
    assert len(out) == n and min(out) >= 0
    assert math.isclose(sum(out), u, rel_tol=1e-9)


def test_rsf_zero():
    cfg = GenConfig(M=3, N=3, rsf=0, seed=4)
    s, meta = generate_with_meta(cfg)
    assert all(not t.accesses for t in s.tasks)
    # with no sharing, C is the whole budget
    for t, u in zip(s.tasks, meta.u_draw):
        assert t.C == math.floor(u * t.T)


def test_f_max_zero():
    assert all(t.f == 0 for t in generate(GenConfig(f_max=0, seed=2)).tasks)


def test_default_structure():
    s = generate(GenConfig(seed=11))
    assert len(s.tasks) == 50 and len(s.resources) == 10
    assert sum(1 for t in s.tasks if t.accesses) == 25
    assert validate(s) == []
    assert all(t.D == t.T and 1_000 <= t.T <= 1_000_000 for t in s.tasks)
    assert all(1 <= r.c <= 100 for r in s.resources)
    assert all(0 <= t.f <= 3 for t in s.tasks)
    assert all(1 <= k <= 10 for t in s.tasks for k in t.accesses.values())
    for k in range(10):
        assert len(s.on_core(k)) == 5


def test_invalid_config():
    with pytest.raises(ValueError):
        generate(GenConfig(rsf=1.5))


def test_stream_split_stable_prefix():
    # task i's period and fault budget come from its own stream
    a = generate(GenConfig(M=2, N=2, seed=9, rsf=0))
    b = generate(GenConfig(M=2, N=3, seed=9, rsf=0))
    assert [(t.T, t.f) for t in a.tasks] == [(t.T, t.f) for t in b.tasks[:4]]


def test_dm_priorities_ties():
    assert dm_priorities([10, 10, 5], [0, 0, 0]) == [2, 1, 3]


def test_worst_fit_cap():
    cores = worst_fit([0.5, 0.4, 0.3, 0.2], 2, 2)
    assert sorted(cores.count(k) for k in range(2)) == [2, 2]
    with pytest.raises(ValueError):
        worst_fit([0.1] * 5, 2, 2)


gen_cfgs = st.builds(GenConfig, M=st.integers(1, 4), N=st.integers(1, 4), rsf=st.floats(0, 0.8),
                     A=st.integers(1, 10), f_max=st.integers(0, 5), seed=st.integers(0, 2**31))


@pytest.mark.property
@given(gen_cfgs)
def test_generated_valid_and_deterministic(cfg):
    s = generate(cfg)
    assert validate(s) == []
    assert s.to_json() == generate(cfg).to_json()
    assert len(s.tasks) == cfg.M * cfg.N


@pytest.mark.property
@given(gen_cfgs)
def test_utilisation_budget(cfg):
    s, meta = generate_with_meta(cfg)
    assert math.isclose(sum(meta.u_draw), cfg.u_total, rel_tol=1e-9)
    used = sum((t.C + sum(k * s.resource(x).c for x, k in t.accesses.items())) / t.T for t in s.tasks)
    assert used <= cfg.u_total + meta.slack + 1e-9


@pytest.mark.property
@given(gen_cfgs)
def test_worst_fit_replay(cfg):
    """Replaying insertion order: each task went to a least-loaded non-full core."""
    s, meta = generate_with_meta(cfg)
    u = meta.u_draw
    load = [0.0] * cfg.M
    count = [0] * cfg.M
    for i in sorted(range(len(u)), key=lambda i: (-u[i], i)):
        k = s.task(i).core
        open_ = [j for j in range(cfg.M) if count[j] < cfg.N]
        assert k in open_
        assert load[k] <= min(load[j] for j in open_) + 1e-12
        load[k] += u[i]
        count[k] += 1


@pytest.mark.property
@given(gen_cfgs)
def test_dm_unique_per_core(cfg):
    s = generate(cfg)
    for k in range(cfg.M):
        ts = s.on_core(k)
        assert len({t.P for t in ts}) == len(ts)
        for a in ts:
            for b in ts:
                if a.D < b.D or (a.D == b.D and a.id < b.id):
                    assert a.P > b.P
