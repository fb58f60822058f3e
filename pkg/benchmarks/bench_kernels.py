"""Compiled kernels vs the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints median wall time per call for each kernel and backend, and checks
that both backends agree.
"""

import argparse
import timeit

import numpy as np

from cfisac import _kernels_py

try:
    from cfisac import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def cases(rng):
    n_edges, n_nodes = 20_000, 600
    seg = rng.integers(0, n_nodes, n_edges)
    vals = rng.normal(size=(n_edges, 4))
    s = rng.normal(size=(4, 100_000)) + 1j * rng.normal(size=(4, 100_000))
    c = s + 0.1 * s * np.abs(s) ** 2
    p = np.sort(rng.uniform(-2, 2, 16))
    return {
        "segment_sum": lambda k: k.segment_sum(vals, seg, n_nodes),
        "segment_max": lambda k: k.segment_max(vals, seg, n_nodes),
        "repair_spacing": lambda k: k.repair_spacing(p, 0.2, -2.0, 2.0),
        "pa_sample_moments": lambda k: k.pa_sample_moments(s, c),
    }


def _flat(out):
    parts = out if isinstance(out, tuple) else (out,)
    return np.concatenate([np.ravel(np.asarray(x, dtype=complex)) for x in parts])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()
    backends = {"python": _kernels_py}
    if _kernels_c is not None:
        backends["cython"] = _kernels_c
    else:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<20}" + "".join(f"{b:>14}" for b in backends) + "   agree")
    for name, call in cases(np.random.default_rng(0)).items():
        times = []
        for mod in backends.values():
            number = 5
            t = timeit.repeat(lambda: call(mod), number=number, repeat=args.repeat)
            times.append(np.median(t) / number)
        outs = [call(mod) for mod in backends.values()]
        agree = all(np.allclose(_flat(o), _flat(outs[0])) for o in outs)
        print(f"{name:<20}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times) + f"   {agree}")


if __name__ == "__main__":
    main()
