"""Time the pure-Python and compiled kernels side by side.

    python3 benchmarks/bench_kernels.py [--repeat N]

Reports the best-of-N wall time per call for a long tick walk and a batched
profitability margin, and the speedup of each backend over pure Python.
"""

import argparse
import math
import timeit

import numpy as np

from cfmmsim.kernels import available_backends


def walk_case(n_ticks=2001):
    ticks = 2.0 ** np.linspace(-10, 10, n_ticks)
    sqrt_ticks = np.sqrt(ticks)
    liquidity = np.full(n_ticks - 1, 1e3)
    start = n_ticks // 2
    s0 = math.sqrt(ticks[start] * ticks[start + 1])
    # sell asset 1 down to just above the bottom tick: crosses ~n_ticks/2 ranges
    target = math.sqrt(ticks[1] * 1.0001)
    amount = 1e3 / target - 1e3 / s0
    return sqrt_ticks, liquidity, start, s0, amount


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = available_backends()
    sqrt_ticks, liquidity, start, s0, amount = walk_case()
    dq = np.linspace(1e-3, 10.0, 100_000)
    cases = {
        "tick_walk (1000 crossings)": lambda k: k.tick_walk(
            sqrt_ticks, liquidity, start, s0, amount, True),
        "cmmm_profit_margin (1e5 sizes)": lambda k: k.cmmm_profit_margin(
            1000.0, 0.5, 0.5, 0.0025, 0.1, dq),
    }
    print(f"backends: {', '.join(backends)}")
    for name, fn in cases.items():
        times = {}
        for label, mod in backends.items():
            number = 3
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat))
            times[label] = best / number
        base = times["python"]
        cells = [f"{label} {t * 1e3:9.3f} ms ({base / t:5.1f}x)" for label, t in times.items()]
        print(f"{name:32s} " + "  ".join(cells))


if __name__ == "__main__":
    main()
