"""Time the compiled and numpy kernel backends on codec-sized inputs.

Run with ``python benchmarks/bench_kernels.py``. Prints the best of
``--repeat`` runs for each kernel and backend, and the speed-up.
"""

import argparse
import timeit

import numpy as np

from sgeq import kernels


def cases(rng):
    x = rng.standard_normal((6000, 640))
    cb = rng.standard_normal((1024, 640))
    sq = np.einsum("ij,ij->i", cb, cb)
    labels = rng.integers(0, 1024, 6000)
    widths = [8] + [10] * 8
    fields = np.hstack([rng.integers(0, 256, (6000, 1)), rng.integers(0, 1024, (6000, 8))])
    packed = kernels.load_backend("python").pack_fields(fields, widths)
    return {
        "nearest 6000x1024x640": lambda b: b.nearest(x, cb, sq),
        "accumulate 6000x640 -> 1024": lambda b: b.accumulate(x, labels, 1024),
        "pack 6000 frames x 88 bits": lambda b: b.pack_fields(fields, widths),
        "unpack 6000 frames x 88 bits": lambda b: b.unpack_fields(packed, 6000, widths),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = {"python": kernels.load_backend("python")}
    try:
        backends["cython"] = kernels.load_backend("cython")
    except ImportError:
        print("compiled backend not built; timing the numpy fallback only")
    table = cases(np.random.default_rng(0))
    print(f"{'kernel':32s}" + "".join(f"{name:>12s}" for name in backends) + f"{'speed-up':>10s}")
    for label, fn in table.items():
        times = {}
        for name, b in backends.items():
            fn(b)
            times[name] = min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat))
        row = f"{label:32s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times.values())
        if "cython" in times:
            row += f"{times['python'] / times['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
