"""Time the compiled kernels against their pure-Python fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best wall time of ``--repeat`` runs for both
implementations and the speedup of the compiled one.
"""

import argparse
import sys
import time

import numpy as np

from graphreg import _backend, _pykernels
from graphreg.graph import sbm_generate


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    g, _, _ = sbm_generate(10, 300, 0.05, 0.002, seed=0)
    A = g.adjacency
    n = g.n_nodes
    L = 5
    prev = rng.dirichlet(np.ones(L), size=n)
    num = rng.uniform(size=(n, L))
    den = rng.uniform(0.5, 1.0, size=n)
    out = np.empty_like(prev)
    perm = rng.permutation(g.n_edges)
    H = rng.normal(size=(n, 32))
    a = rng.integers(n, size=20000)
    b = rng.integers(n, size=20000)
    coef = rng.uniform(size=20000)

    yield (f"jacobi_sweep (n={n}, |E|={g.n_edges}, L={L})",
           lambda impl: _backend.jacobi_sweep(A.indptr, A.indices, A.data, prev, num, den, 2.0, out, impl=impl))
    yield (f"neighborhood_order (|E|={g.n_edges}, batch=64)",
           lambda impl: _backend.neighborhood_order(n, g.edges_u, g.edges_v, perm, 64, impl=impl))
    for metric in ("l1", "squared-l2", "cross-entropy"):
        code = _pykernels.METRIC_CODES[metric]
        yield (f"edge_distance {metric} (20000 pairs, dim 32)",
               lambda impl, code=code: _backend.edge_distance(H, a, b, coef, code, impl=impl))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _backend.compiled_available():
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`",
              file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<50} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for name, fn in cases(rng):
        t_py = best_time(lambda: fn(_pykernels), args.repeat)
        t_c = best_time(lambda: fn(None), args.repeat)
        print(f"{name:<50} {t_py * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms {t_py / t_c:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
