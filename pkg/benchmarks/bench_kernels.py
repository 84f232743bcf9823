"""Compare the compiled and pure-numpy GRU recurrence kernels.

Times the serial forward loop and the backward replay at a few
sequence/width shapes, reporting the median over repeats and the speedup
of the compiled extension. Run from a source checkout:

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --sizes 30x64 80x300 --repeats 50
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from convaffect.numkit.kernels import backend_module


def make_case(T: int, d: int, rng: np.random.Generator) -> dict:
    scale = 1.0 / np.sqrt(d)
    return {
        "AX": rng.normal(scale=scale, size=(T, 3 * d)),
        "h0": rng.normal(scale=scale, size=d),
        "Uz": rng.normal(scale=scale, size=(d, d)),
        "Ur": rng.normal(scale=scale, size=(d, d)),
        "Uh": rng.normal(scale=scale, size=(d, d)),
        "dH": rng.normal(scale=scale, size=(T, d)),
    }


def time_call(fn, repeats: int) -> float:
    fn()  # warm up
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def bench_backend(mod, case: dict, repeats: int) -> tuple[float, float]:
    fwd = lambda: mod.gru_recurrence_forward(
        case["AX"], case["h0"], case["Uz"], case["Ur"], case["Uh"]
    )
    H, Z, R, HB = fwd()
    bwd = lambda: mod.gru_recurrence_backward(
        case["Uz"], case["Ur"], case["Uh"], case["h0"], H, Z, R, HB, case["dH"]
    )
    return time_call(fwd, repeats), time_call(bwd, repeats)


def parse_size(text: str) -> tuple[int, int]:
    T, _, d = text.partition("x")
    return int(T), int(d)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", nargs="+", default=["30x64", "30x300", "80x300"],
                    metavar="TxD", help="sequence length x hidden width")
    ap.add_argument("--repeats", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    python_mod = backend_module("python")
    try:
        compiled_mod = backend_module("compiled")
    except Exception as exc:
        print(f"compiled backend unavailable ({exc}); timing python only")
        compiled_mod = None

    rng = np.random.default_rng(args.seed)
    header = f"{'shape':>10} {'pass':>8} {'python':>12} {'compiled':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for size in args.sizes:
        T, d = parse_size(size)
        case = make_case(T, d, rng)
        py_fwd, py_bwd = bench_backend(python_mod, case, args.repeats)
        if compiled_mod is None:
            print(f"{size:>10} {'forward':>8} {py_fwd * 1e3:>10.3f}ms {'-':>12} {'-':>8}")
            print(f"{size:>10} {'backward':>8} {py_bwd * 1e3:>10.3f}ms {'-':>12} {'-':>8}")
            continue
        c_fwd, c_bwd = bench_backend(compiled_mod, case, args.repeats)
        if not np.allclose(
            python_mod.gru_recurrence_forward(case["AX"], case["h0"], case["Uz"], case["Ur"], case["Uh"])[0],
            compiled_mod.gru_recurrence_forward(case["AX"], case["h0"], case["Uz"], case["Ur"], case["Uh"])[0],
            rtol=1e-12, atol=1e-12,
        ):
            raise SystemExit(f"backend outputs disagree at {size}")
        print(f"{size:>10} {'forward':>8} {py_fwd * 1e3:>10.3f}ms {c_fwd * 1e3:>10.3f}ms {py_fwd / c_fwd:>7.2f}x")
        print(f"{size:>10} {'backward':>8} {py_bwd * 1e3:>10.3f}ms {c_bwd * 1e3:>10.3f}ms {py_bwd / c_bwd:>7.2f}x")


if __name__ == "__main__":
    main()
