"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run on the workload it sees inside a test: one weighted-mean
solve per observation, i.e. an (n, n) weight matrix.
"""

import argparse
import timeit

import numpy as np

from frechet_infer import _pykernels
from frechet_infer.regression import fit
from frechet_infer.simulation import NetworkSimConfig, SphereSimConfig, gen_network_sample, gen_sphere_sample

try:
    from frechet_infer import _ckernels
except ImportError:
    _ckernels = None


def workloads(rng):
    net = gen_network_sample(NetworkSimConfig(n=300, m=10, beta=0.2, gamma=0.2), rng)
    S = fit(net).weight_matrix(net.X)
    A = np.tensordot(S / S.sum(axis=1, keepdims=True), net.Y, 1)
    sph = gen_sphere_sample(SphereSimConfig(n=200, beta=0.1, gamma=0.1), rng)
    Ss = fit(sph).weight_matrix(sph.X)
    Q = np.sort(rng.uniform(size=(300, 100)), axis=1)
    Wq = (S / S.sum(axis=1, keepdims=True)) @ Q
    return {
        "project_laplacians (300 x 10x10)": lambda k: k.project_laplacians(A, 3.0, 1e-10, 10000),
        "isotonic_rows (300 x 100)": lambda k: k.isotonic_rows(Wq),
        "sphere_means (200 x 200, r=3)": lambda k: k.sphere_means(sph.Y, Ss, 1e-9, 10000, 5),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"{'kernel':36s}" + "".join(f"{b:>14s}" for b in backends) + "   speedup")
    for name, run in workloads(np.random.default_rng(0)).items():
        times = {}
        for b, k in backends.items():
            number = 1 if b == "python" else 5
            times[b] = min(timeit.repeat(lambda: run(k), number=number, repeat=args.repeat)) / number
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:36s}" + "".join(f"{times[b] * 1e3:12.2f}ms" for b in backends)
              + f"   {speed:7.1f}x")


if __name__ == "__main__":
    main()
