"""Compare the compiled loop kernels against the numpy implementations.

    python benchmarks/bench_kernels.py [--samples 30649] [--repeats 7] [--csv out.csv]

Both variants are always importable, so one process can time both; the
first numba call is made outside the timed region so compilation is not
counted.  Each row also reports the max relative deviation between the two.
"""

from __future__ import annotations

import argparse
import csv
import statistics
import sys
import time

import numpy as np

from tgmp import _kernels as k
from tgmp.signals import OfdmConfig, ofdm_generate


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def _rel(a, b):
    if isinstance(a, tuple):
        return max(_rel(u, v) for u, v in zip(a, b))
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def cases(x, n, dims=(11, 10, 8)):
    rng = np.random.default_rng(1)
    m1, m2, p = dims

    def cplx(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    t0 = max(m1, m2)
    s = cplx(m1, m2, p)
    a, b, c = cplx(m1, 3), cplx(m2, 3), cplx(p, 3)
    ta, tb, tc = cplx(m1, 2), cplx(2, m2, 2), cplx(2, p)
    g, ka, kb, kc = cplx(2, 2, 2), cplx(m1, 2), cplx(m2, 2), cplx(p, 2)
    return [
        ("design", k.design_numba, k.design_numpy, (x, t0, n, m1, m2, p)),
        ("gmp", k.gmp_simulate_numba, k.gmp_simulate_numpy, (x, s, t0, n)),
        ("cp", k.cp_simulate_numba, k.cp_simulate_numpy, (x, a, b, c, t0, n)),
        ("tt", k.tt_simulate_numba, k.tt_simulate_numpy, (x, ta, tb, tc, t0, n)),
        ("tucker", k.tucker_simulate_numba, k.tucker_simulate_numpy, (x, g, ka, kb, kc, t0, n)),
    ]


def run(samples: int, repeats: int):
    x = ofdm_generate(OfdmConfig(seed=0))
    n = min(samples, x.size - 20)
    rows = []
    for name, fast, ref, args in cases(x, n):
        out_fast = fast(*args)  # compile
        out_ref = ref(*args)
        t_fast = _median_time(lambda: fast(*args), repeats)
        t_ref = _median_time(lambda: ref(*args), repeats)
        rows.append({"kernel": name, "samples": n, "numba_s": t_fast, "numpy_s": t_ref,
                     "speedup": t_ref / t_fast, "max_rel_diff": _rel(out_fast, out_ref)})
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=30649)
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    if not k.HAVE_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1
    rows = run(args.samples, args.repeats)
    print(f"{'kernel':<8}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>9}{'rel diff':>11}")
    for r in rows:
        print(f"{r['kernel']:<8}{1e3 * r['numba_s']:>12.3f}{1e3 * r['numpy_s']:>12.3f}"
              f"{r['speedup']:>9.2f}{r['max_rel_diff']:>11.1e}")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
