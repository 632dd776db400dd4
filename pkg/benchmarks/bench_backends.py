"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is fixed at
import time. Usage: python3 benchmarks/bench_backends.py [--steps N] [--days D]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from adaptrhc import _accel
from adaptrhc.checks import equilibrium_scenario
from adaptrhc.nrhc import SimState, SweepWorkspace, nrhc_step
from adaptrhc.sim import builtin_scenarios, run_scenario

steps, days = int(sys.argv[1]), float(sys.argv[2])
case1 = builtin_scenarios()["case1"]
model, cfg = case1.model(), case1.cfg
state = SimState(50.0, [900.0, 20.0, 3000.0], [850.0, 25.0, 2900.0], [0.3, -2.0, 1.5], [30.0, 0.4, 450.0])
ws = SweepWorkspace(3, cfg.N_tau)

t0 = time.perf_counter()
nrhc_step(state, cfg, model, ws)
first = time.perf_counter() - t0

t0 = time.perf_counter()
for _ in range(steps):
    nrhc_step(state, cfg, model, ws)
per_step = (time.perf_counter() - t0) / steps

scenario = equilibrium_scenario(case1, duration=days)
t0 = time.perf_counter()
traj = run_scenario(scenario)
run = time.perf_counter() - t0
print(json.dumps({"numba": _accel.NUMBA_ENABLED, "first_call_s": first, "step_us": per_step * 1e6,
                  "run_s": run, "samples": len(traj)}))
"""


def measure(flag, steps, days):
    env = dict(os.environ, ADAPTRHC_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", CHILD, str(steps), str(days)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000, help="repeated solves at a fixed state")
    ap.add_argument("--days", type=float, default=10.0, help="closed-loop run length from equilibrium")
    args = ap.parse_args()

    rows = [measure(flag, args.steps, args.days) for flag in ("1", "0")]
    print(f"{'backend':<8} {'first call (s)':>15} {'solve (us)':>12} {'run (s)':>9} {'samples':>8}")
    for r in rows:
        name = "numba" if r["numba"] else "numpy"
        print(f"{name:<8} {r['first_call_s']:>15.3f} {r['step_us']:>12.1f} {r['run_s']:>9.2f} {r['samples']:>8}")
    if rows[0]["numba"] and not rows[1]["numba"]:
        print(f"speedup per solve: {rows[1]['step_us'] / rows[0]['step_us']:.1f}x, "
              f"per run: {rows[1]['run_s'] / rows[0]['run_s']:.1f}x")


if __name__ == "__main__":
    main()
