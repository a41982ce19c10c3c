"""Time the compiled and pure-Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--n 64] [--repeat 5]

Also checks that both backends return bit-identical spectra.
"""

import argparse
import time

import numpy as np

from mastergen.kernels import backends
from mastergen.model import LevelSpec, truncate
from mastergen.secular import SecularContext


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    model = truncate(LevelSpec.affine(1.0, 2.0, 0.4, 1.0), args.n)
    ctx = SecularContext.from_model(model)
    cw = np.ascontiguousarray(ctx.deflated_weights)
    poles = np.ascontiguousarray(ctx.poles)
    a = np.ascontiguousarray(model.generator)
    y = np.zeros(args.n)
    y[0] = 1.0
    shifted = np.ascontiguousarray(a + 1.125 * float(np.max(-np.diag(a))) * np.eye(args.n))

    results = {}
    for name, mod in backends().items():
        def roots(mod=mod):
            return [mod.deflated_solve(cw, poles, k, 1e-3, 100) for k in range(2, args.n + 1)]

        def sums(mod=mod):
            return [mod.secular_sums(ctx.weights, poles, -1, -0.5 * (poles[k] + poles[k + 1]))
                    for k in range(args.n - 1)]

        def rk4(mod=mod):
            z = y
            for _ in range(200):
                z = mod.rk4_step(a, z, 0.1)
            return z

        def power(mod=mod):
            return mod.power_iterate(shifted, np.full(args.n, 1.0), 1e-12, 100_000)

        row = {}
        for label, fn in (("secular_solve", roots), ("secular_sums", sums), ("rk4_x200", rk4),
                          ("power_iterate", power)):
            row[label] = _best(fn, args.repeat)
        results[name] = row

    names = list(results)
    print(f"N = {args.n}, best of {args.repeat}")
    print(f"{'kernel':16}" + "".join(f"{n:>14}" for n in names) + ("    speedup" if len(names) > 1 else ""))
    for label in results[names[0]]:
        times = [results[n][label][0] for n in names]
        line = f"{label:16}" + "".join(f"{t * 1e3:12.3f}ms" for t in times)
        if len(names) > 1:
            line += f"{times[0] / times[1]:10.1f}x"
        print(line)
    if len(names) > 1:
        same = results["python"]["secular_solve"][1] == results["cython"]["secular_solve"][1]
        print(f"secular roots bit-identical across backends: {same}")


if __name__ == "__main__":
    main()
