import pytest
from hypothesis import HealthCheck, settings

from leftrs.model import TaskSpec, make_system

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def sync_scenario():
    """Two cores, one resource with c=2; τ1 requests at t=1, τ2 at t=2."""
    from leftrs.sim import Segment

    s = make_system(2, [TaskSpec(0, 0, 4, 100, 100, 1, f=1, accesses={0: 1}),
                        TaskSpec(1, 1, 4, 100, 100, 1, f=1, accesses={0: 1})], [2])
    segs = {0: [Segment("normal", 1), Segment("global", 2, 0), Segment("normal", 3)],
            1: [Segment("normal", 2), Segment("global", 2, 0), Segment("normal", 2)]}
    return s, segs


@pytest.fixture
def parallel_scenario():
    """τ1 (n=6) and τ2 (n=1) on separate cores, both requesting a c=1 resource at t=1."""
    return make_system(2, [TaskSpec(0, 0, 2, 100, 100, 1, f=5, accesses={0: 1}),
                           TaskSpec(1, 1, 2, 100, 100, 1, f=0, accesses={0: 1})], [1])
