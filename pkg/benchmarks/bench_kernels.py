"""Time the hot kernels with numba and with the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is fixed at
import time by ``GEOBOUND_NUMBA``.

    python3 benchmarks/bench_kernels.py [--steps 2000] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from geobound import USE_NUMBA, catalog, flow, kernels
from geobound.curvature import scan_directions

steps, repeat = int(sys.argv[1]), int(sys.argv[2])
out = {"numba": USE_NUMBA}

def best(fn):
    fn()  # warm-up, also triggers compilation or cache load
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)

hd = catalog.get("hd", {"d": 4})
X = hd.direction("e0")
out["flow_hd4"] = best(lambda: flow.integrate_flow(hd.spec, X, t_end=1e-3 + steps * 1e-3))

sq = catalog.get("squashed-h3", {"c": 2.0})
g, dg, d2g = sq.spec.jet(sq.spec.base_point, sq.spec.param_array)
def curv():
    for _ in range(200):
        kernels.riemann(g, dg, d2g)
out["riemann_x200"] = best(curv)

h = catalog.get("h2xh2")
out["scan_h2xh2"] = best(lambda: scan_directions(h.spec, n=256))
print(json.dumps(out))
"""


def run(flag, steps, repeat):
    env = dict(os.environ, GEOBOUND_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, str(steps), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000, help="RK4 steps for the flow workload")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run("1", args.steps, args.repeat)
    slow = run("0", args.steps, args.repeat)
    print(f"{'workload':<16}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for key in ("flow_hd4", "riemann_x200", "scan_h2xh2"):
        print(f"{key:<16}{fast[key]:12.4f}{slow[key]:12.4f}{slow[key] / fast[key]:10.1f}")


if __name__ == "__main__":
    main()
