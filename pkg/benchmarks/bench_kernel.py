"""Compare the compiled kernel with the pure-Python fallback.

Usage::

    python benchmarks/bench_kernel.py [--repeat 3] [--json out.json]

Each case runs the same trajectory on both backends and reports the best
wall time and the speed-up.  Agreement is checked on a short prefix: the
two backends can differ by one ulp in the noise transform, and chaotic
cases amplify that over long runs.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from nesslab import backend
from nesslab.dynamics import advance, initial_state
from nesslab.kmp import kmp_initial, simulate_kmp
from nesslab.lattice import FPUBeta, Harmonic, LatticeSpec, QuarticOnsite
from nesslab.thermostats import GaussianIso, Langevin, NoseHoover


def _md_case(lattice, reservoir, steps, dt=0.01):
    st = initial_state(lattice, reservoir, seed=1)

    def run(short=False):
        new, rec = advance(st, lattice, reservoir, dt, 500 if short else steps, seed=1)
        return np.concatenate([new.q.ravel(), new.p.ravel(), rec.heat])
    return run


def _kmp_case(n, window, windows):
    st = kmp_initial(n, 2.0, 1.0, seed=3)

    def run(short=False):
        return simulate_kmp(st, window, 10 if short else windows).energies.ravel()
    return run


CASES = {
    "fpu64_langevin": _md_case(LatticeSpec((64,), pair=FPUBeta(1.0, 1.0), ends="fixed"),
                           Langevin(1.2, 0.8), 20_000),
    "pinned64_nose_hoover": _md_case(LatticeSpec((64,), pair=Harmonic(1.0), onsite=QuarticOnsite(0.0, 1.0)),
                                 NoseHoover(4.0, 2.0, theta=0.3), 20_000),
    "slab8x4_gaussian": _md_case(LatticeSpec((8, 4), pair=FPUBeta(1.0, 1.0), transverse="periodic"),
                             GaussianIso(1.2, 0.8), 10_000),
    "kmp32": _kmp_case(32, 10.0, 200),
}


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write the timings to this file")
    args = ap.parse_args(argv)
    if "compiled" not in backend.available():
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    prev = backend.name()
    rows = []
    try:
        print(f"{'case':24s} {'compiled [s]':>13s} {'python [s]':>11s} {'speed-up':>9s}  agree")
        for name, fn in CASES.items():
            times, outs = {}, {}
            for b in ("compiled", "python"):
                backend.use(b)
                times[b], _ = best_time(fn, args.repeat)
                outs[b] = fn(short=True)
            agree = bool(np.allclose(outs["compiled"], outs["python"], rtol=1e-12, atol=1e-14))
            speed = times["python"] / times["compiled"]
            rows.append({"case": name, "compiled_s": times["compiled"], "python_s": times["python"],
                         "speedup": speed, "agree": agree})
            print(f"{name:24s} {times['compiled']:13.4f} {times['python']:11.4f} {speed:9.1f}  {agree}")
    finally:
        backend.use(prev)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return rows


if __name__ == "__main__":
    main()
