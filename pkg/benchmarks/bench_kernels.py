"""Compare the numba kernels with their fallbacks.

Analysis: the ``numba`` and ``numpy`` backends run in this process.
Simulator: timed in two subprocesses, one with LEFTRS_DISABLE_NUMBA=1
(the interpreted kernel), since the switch is read at import time.

    python benchmarks/bench_kernels.py [--systems 30] [--sims 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

from leftrs.analysis_baselines import analyze
from leftrs.taskgen import GenConfig, generate

SIM_SNIPPET = """
import json, sys, time
from leftrs.sim import FaultSchedule, ReleasePattern, Simulator
from leftrs.taskgen import GenConfig, generate
n = int(sys.argv[1])
sim = Simulator(generate(GenConfig(M=4, N=3, seed=7)))
sim.max_response("synchronous-periodic", FaultSchedule.randomized(0), 20000)  # warm-up / compile
t = time.perf_counter()
for s in range(n):
    sim.max_response(ReleasePattern("sporadic", s), FaultSchedule.randomized(s), 20000)
print(json.dumps((time.perf_counter() - t) / n))
"""


def bench_analysis(n_systems: int) -> dict:
    systems = [generate(GenConfig(seed=k)) for k in range(n_systems)]
    out = {}
    for backend in ("numba", "numpy"):
        analyze(systems[0], "leftrs", backend=backend)  # compile
        t = time.perf_counter()
        for s in systems:
            for p in ("leftrs", "msrpft", "checkpointing"):
                analyze(s, p, backend=backend)
        out[backend] = (time.perf_counter() - t) / n_systems
    return out


def bench_sim(n: int) -> dict:
    out = {}
    for label, flag in (("numba", "0"), ("python", "1")):
        env = dict(os.environ, LEFTRS_DISABLE_NUMBA=flag)
        r = subprocess.run([sys.executable, "-c", SIM_SNIPPET, str(n)], env=env,
                           capture_output=True, text=True, check=True)
        out[label] = json.loads(r.stdout.strip().splitlines()[-1])
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--systems", type=int, default=30)
    ap.add_argument("--sims", type=int, default=5)
    args = ap.parse_args()

    a = bench_analysis(args.systems)
    print(f"analysis, 3 protocols per default system ({args.systems} systems)")
    for k, v in a.items():
        print(f"  {k:<8} {1e3 * v:9.2f} ms/system")
    print(f"  speedup  {a['numpy'] / a['numba']:9.1f}x")

    s = bench_sim(args.sims)
    print(f"simulator, M=4 N=3, 20 ms horizon ({args.sims} runs)")
    for k, v in s.items():
        print(f"  {k:<8} {1e3 * v:9.2f} ms/run")
    print(f"  speedup  {s['python'] / s['numba']:9.1f}x")


if __name__ == "__main__":
    main()
