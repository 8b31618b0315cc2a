"""Time the compiled kernels against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py [--pulses N] [--repeat R]``.
Outputs are checked for equality before timings are printed.
"""

import argparse
import timeit

import numpy as np

from acqkd import _kernels_py
from acqkd.linkmodel import preset
from acqkd.simengine import probability_table

try:
    from acqkd import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _cases(n_pulses, n_bits):
    ch, det = preset("10km")
    table = probability_table(ch, det)
    bits = np.random.default_rng(0).integers(0, 2, n_bits, dtype=np.uint8)
    return {
        "sample_pulses": lambda m: m.sample_pulses(12345, 0, n_pulses, table),
        "half_subset": lambda m: m.half_subset(777, n_bits),
        "subset_parities": lambda m: m.subset_parities(bits, 99, 200),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pulses", type=int, default=1_000_000)
    ap.add_argument("--bits", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = {"python": _kernels_py}
    if _ckernels is not None:
        backends["compiled"] = _ckernels
    else:
        print("compiled extension not available; timing the python backend only")

    print(f"{'kernel':<18}{'backend':<10}{'best (s)':>12}{'speedup':>10}")
    for name, fn in _cases(args.pulses, args.bits).items():
        ref = fn(_kernels_py)
        base = None
        for label, mod in backends.items():
            out = fn(mod)
            same = all(np.array_equal(a, b) for a, b in zip(np.atleast_1d(ref), np.atleast_1d(out))) \
                if isinstance(ref, tuple) else np.array_equal(ref, out)
            if not same:
                raise SystemExit(f"{name}: {label} output differs from python backend")
            best = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
            base = base or best
            print(f"{name:<18}{label:<10}{best:>12.4f}{base / best:>9.1f}x")


if __name__ == "__main__":
    main()
