"""Compiled kernels against the pure-numpy fallback.

Each mode runs in a fresh interpreter (the JIT switch is read at import).
Timings exclude the first call, which pays for compilation or cache loading.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKLOAD = textwrap.dedent("""
    import json, time
    import numpy as np
    from reebspiral import builtin_model, geodesic, monodromy, periodic_orbit
    from reebspiral.spiral import initial_covector
    from reebspiral.models import ManifoldPoint

    def geodesic_s3():
        m = builtin_model("s3")
        q0 = ManifoldPoint(np.zeros(3), 0)
        p0 = initial_covector(m, q0, np.array([1.0, 0.0]), 20.0)
        return geodesic(m, q0, p0, 20.0)

    def geodesic_heisenberg():
        m = builtin_model("heisenberg")
        return geodesic(m, np.zeros(3), np.array([1.0, 0.0, -10.0]), 50.0)

    def transport_s3():
        m = builtin_model("s3")
        return monodromy(m, (ManifoldPoint(np.zeros(3), 0), np.pi), loops=4)

    out = {}
    for name, fn in [("geodesic s3 h0=20 T=20", geodesic_s3),
                     ("geodesic heisenberg T=50", geodesic_heisenberg),
                     ("transport s3 4 loops", transport_s3)]:
        t = time.perf_counter(); fn(); first = time.perf_counter() - t
        best = float("inf")
        for _ in range(REPEAT):
            t = time.perf_counter(); fn(); best = min(best, time.perf_counter() - t)
        out[name] = (first, best)
    print(json.dumps(out))
""")


def run(disable_jit: bool, repeat: int) -> dict:
    env = dict(os.environ)
    if disable_jit:
        env["REEBSPIRAL_DISABLE_JIT"] = "1"
    else:
        env.pop("REEBSPIRAL_DISABLE_JIT", None)
    code = f"REPEAT = {repeat}\n" + WORKLOAD
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jit = run(False, args.repeat)
    plain = run(True, args.repeat)
    print(f"{'workload':<28s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s} {'first call (numba)':>20s}")
    for name in jit:
        a, b = jit[name][1], plain[name][1]
        print(f"{name:<28s} {a:10.4f} {b:10.4f} {b / a:8.1f} {jit[name][0]:20.3f}")


if __name__ == "__main__":
    main()
