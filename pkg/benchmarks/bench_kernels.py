"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each hot kernel on a representative workload under both backends and
prints a table of per-call times and the numba speedup. Numba functions are
called once before timing so compilation is not measured.

Usage:
    python3 benchmarks/bench_kernels.py [--rows 20000] [--dim 256] [--repeats 5]
"""

import argparse
import time

import numpy as np

from kgcomplete.kernels import available_backends, get_backend


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_cases(rows, dim, seed=0):
    """Return (name, setup) pairs; setup(impl) yields a zero-arg callable."""
    rng = np.random.default_rng(seed)
    n_ent, n_rel = 5000, 20
    ent = rng.normal(size=(n_ent, 2 * dim))
    rel = rng.normal(size=(n_rel, 2 * dim))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_rel, dim))
    h = rng.integers(0, n_ent, size=rows)
    r = rng.integers(0, n_rel, size=rows)
    t = rng.integers(0, n_ent, size=rows)
    coeff = rng.normal(size=rows)
    rows_idx = np.unique(np.concatenate([h, t]))

    cases = []

    def score_case(kind, rtable):
        def setup(impl):
            fn = getattr(impl, f"{kind}_scores")
            return lambda: fn(ent, rtable, h, r, t)
        return setup

    def grad_case(kind, rtable):
        def setup(impl):
            fn = getattr(impl, f"{kind}_grads")
            gent = np.zeros_like(ent)
            grel = np.zeros_like(rtable)
            return lambda: fn(ent, rtable, h, r, t, coeff, gent, grel)
        return setup

    for kind in ("transe", "distmult", "complex", "rotate"):
        rtable = phases if kind == "rotate" else rel
        cases.append((f"{kind}_scores", score_case(kind, rtable)))
        cases.append((f"{kind}_grads", grad_case(kind, rtable)))

    def l3_setup(impl):
        return lambda: impl.l3_penalty(ent, rows_idx)

    def l3_grad_setup(impl):
        gent = np.zeros_like(ent)
        return lambda: impl.l3_add_grad(ent, rows_idx, 1e-5, gent)

    def adam_setup(impl):
        param = ent.copy()
        grad = rng.normal(size=ent.shape)
        m = np.zeros_like(ent)
        v = np.zeros_like(ent)
        return lambda: impl.adam_update(param, grad, m, v, 1e-3, 0.9, 0.999, 1e-8, 3)

    a = rng.integers(97, 123, size=300).astype(np.int32)
    b = rng.integers(97, 123, size=300).astype(np.int32)

    def lev_setup(impl):
        return lambda: impl.levenshtein(a, b)

    vals = np.sort(rng.normal(size=rows))
    g = rng.normal(size=rows)
    hess = np.full(rows, 0.25)

    def split_setup(impl):
        return lambda: impl.split_scan(vals, g, hess, 1.0, 1.0)

    cases += [
        ("l3_penalty", l3_setup),
        ("l3_add_grad", l3_grad_setup),
        ("adam_update", adam_setup),
        ("levenshtein", lev_setup),
        ("split_scan", split_setup),
    ]
    return cases


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=20000,
                        help="batch rows for score/grad kernels")
    parser.add_argument("--dim", type=int, default=256,
                        help="embedding dimension (entity width is 2*dim)")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timed repeats per kernel; best is reported")
    args = parser.parse_args()

    backends = available_backends()
    if "numba" not in backends:
        print("numba is not installed; timing the numpy backend only")
    impls = {name: get_backend(name) for name in backends}

    cases = build_cases(args.rows, args.dim)
    width = max(len(name) for name, _ in cases)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{b + ' (ms)':>12}" for b in backends)
    if "numba" in backends:
        header += f"  {'speedup':>8}"
    print(f"rows={args.rows} dim={args.dim} repeats={args.repeats}")
    print(header)
    print("-" * len(header))

    for name, setup in cases:
        times = {}
        for backend in backends:
            fn = setup(impls[backend])
            if backend == "numba":
                fn()  # trigger compilation outside the timed region
            times[backend] = _time(fn, args.repeats)
        line = f"{name:<{width}}  " + "  ".join(f"{times[b] * 1e3:>12.3f}" for b in backends)
        if "numba" in backends:
            line += f"  {times['numpy'] / times['numba']:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
