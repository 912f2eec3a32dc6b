"""Compiled versus pure-Python time-stepping kernels.

    python benchmarks/bench_kernels.py [--n 401] [--steps 2000] [--repeat 3]

Times ``advance_parabolic`` and ``advance_pde_ode`` on each available
backend from identical data, reports the best of ``--repeat`` runs in
microseconds per step, and checks that the backends agree.
"""
import argparse
import time

import numpy as np

from exochemo.kernels import available_backends


def _data(n):
    x = np.linspace(0.0, 1.0, n)
    u = 1.0 + 0.3 * np.cos(np.pi * x)
    v = 1.0 - 0.5 * np.sin(np.pi * x)
    return u, v


def _time(fn, n, steps, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        u, v = _data(n)
        t0 = time.perf_counter()
        fn(u, v, steps)
        best = min(best, time.perf_counter() - t0)
        out = (u, v)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=401)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    h, dt = 1.0 / (args.n - 1), 1e-4
    backends = available_backends()
    cases = {
        "parabolic": lambda m: (lambda u, v, k: m.advance_parabolic(u, v, k, dt, h, 0.1, 1.0)),
        "pde_ode": lambda m: (lambda u, v, k: m.advance_pde_ode(u, v, k, dt, h)),
    }
    print(f"n={args.n} steps={args.steps} repeat={args.repeat}")
    print(f"{'kernel':<10} {'backend':<8} {'us/step':>10} {'speedup':>8}")
    for case, make in cases.items():
        results = {name: _time(make(mod), args.n, args.steps, args.repeat) for name, mod in backends.items()}
        base = results["python"][0]
        for name, (sec, _) in sorted(results.items()):
            print(f"{case:<10} {name:<8} {1e6 * sec / args.steps:>10.2f} {base / sec:>7.1f}x")
        if len(results) > 1:
            (ua, va), (ub, vb) = (r[1] for r in results.values())
            diff = max(np.max(np.abs(ua - ub)), np.max(np.abs(va - vb)))
            print(f"{case:<10} max backend difference {diff:.1e}")


if __name__ == "__main__":
    main()
