"""Time the Cython kernels against the numpy fallback on the same inputs.

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 5]

Every kernel is also checked for agreement between the two backends.
"""
import argparse
import timeit

import numpy as np
import scipy.sparse as sp

from bipcomm import _pykernels

try:
    from bipcomm import _ckernels
except ImportError:
    _ckernels = None


def random_csr(n, avg_degree, rng):
    m = n * avg_degree // 2
    u = rng.integers(0, n, m)
    v = rng.integers(0, n, m)
    keep = u != v
    w = rng.uniform(0.1, 3.0, keep.sum())
    A = sp.coo_matrix((w, (u[keep], v[keep])), shape=(n, n)).tocsr()
    A = (A + A.T).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data.astype(np.float64)


def cases(n, rng):
    indptr, indices, data = random_csr(n, 12, rng)
    X = rng.standard_normal((n, 8))
    order = rng.permutation(n).astype(np.int64)
    side = (rng.random(n) < 0.5).astype(np.int8)
    members = rng.choice(n, n // 3, replace=False).astype(np.int64)
    label = np.zeros(n, dtype=np.int8)
    label[members] = rng.integers(1, 3, len(members))
    f = rng.standard_normal(1 << 16)
    return {
        "csr_matmat": lambda K: K.csr_matmat(indptr, indices, data, X),
        "sweep_links": lambda K: K.sweep_links(indptr, indices, data, order, side),
        "pair_weights": lambda K: K.pair_weights(indptr, indices, data, members, label),
        "fwht": lambda K: K.fwht(f.copy()),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not available; only the numpy fallback can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, call in cases(args.n, rng).items():
        t_py = min(timeit.repeat(lambda: call(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<14}{t_py:>12.2f}{'-':>12}{'-':>10}")
            continue
        a, b = call(_pykernels), call(_ckernels)
        if name == "fwht":
            # fwht works in place and returns nothing; compare the transformed buffers
            fa, fb = np.arange(1 << 10, dtype=float), np.arange(1 << 10, dtype=float)
            _pykernels.fwht(fa)
            _ckernels.fwht(fb)
            a, b = fa, fb
        assert np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float)), name
        t_c = min(timeit.repeat(lambda: call(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<14}{t_py:>12.2f}{t_c:>12.2f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
