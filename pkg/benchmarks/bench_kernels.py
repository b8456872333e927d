"""Compiled vs. NumPy kernels on representative problem sizes.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Pair kernels are timed on random point clouds the size of a typical Hoelder
fit; the flux kernel on the element count of a 129x129 grid.  Each backend's
result is checked against the other before timing.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from schauderlab import kernels


def cases(rng):
    m = 3000
    vals, xs, ts = rng.normal(size=(m, 4)), rng.uniform(-1, 1, (m, 2)), rng.uniform(0, 1, m)
    grads = rng.normal(size=(2 * 128 * 128, 2, 2))
    coef = rng.uniform(1, 1.5, len(grads))
    return {
        "pair_quotient_max (m=3000)": lambda mod: mod.pair_quotient_max(vals, xs, ts, 2.0, 0.5, 0.01),
        "pair_envelope (m=3000)": lambda mod: mod.pair_envelope(vals, xs, ts, 2.0, 0.01, 3.0, 12),
        "element_flux (E=32768, k=2)": lambda mod: mod.element_flux(grads, coef, 0.0, 1.5),
    }


def _same(a, b):
    a, b = (x if isinstance(x, tuple) else (x,) for x in (a, b))
    return all(np.allclose(np.asarray(u), np.asarray(v), rtol=1e-12, atol=0) for u, v in zip(a, b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None, help="write timings to this file")
    args = ap.parse_args(argv)
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the NumPy backend is available", file=sys.stderr)
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':<30}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for label, fn in cases(rng).items():
        outs = {name: fn(mod) for name, mod in backends.items()}
        if len(outs) == 2 and not _same(outs["python"], outs["cython"]):
            raise SystemExit(f"backends disagree on {label}")
        best = {name: min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
                for name, mod in backends.items()}
        speed = best["python"] / best["cython"] if "cython" in best else float("nan")
        print(f"{label:<30}" + "".join(f"{best[n] * 1e3:>10.1f}ms" for n in backends) + f"{speed:>9.1f}x")
        rows.append({"kernel": label, "seconds": best, "speedup": speed})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
