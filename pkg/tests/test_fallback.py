"""The pure-Python paths selected by LEFTRS_DISABLE_NUMBA=1 give the same answers."""

import json
import os
import subprocess
import sys

SNIPPET = """
import json
from leftrs import _accel
from leftrs.analysis_baselines import analyze
from leftrs.sim import FaultSchedule, ReleasePattern, simulate
from leftrs.taskgen import GenConfig, generate
s = generate(GenConfig(M=2, N=3, f_max=3, period_range=(500, 5000), seed=4))
R = {p: [t.R for t in analyze(s, p).tasks] for p in ("leftrs", "msrpft", "checkpointing")}
tr = simulate(s, "leftrs", ReleasePattern("sporadic", 1), FaultSchedule.randomized(1), horizon=5000)
print(json.dumps({"disabled": _accel.DISABLED, "R": R, "trace": tr.to_text()}))
"""


def run(flag):
    env = dict(os.environ, LEFTRS_DISABLE_NUMBA=flag)
    r = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True, text=True, check=True)
    return json.loads(r.stdout.strip().splitlines()[-1])


def test_fallback_matches_numba():
    a, b = run("0"), run("1")
    assert not a["disabled"] and b["disabled"]
    assert a["R"] == b["R"]
    assert a["trace"] == b["trace"] and a["trace"]
