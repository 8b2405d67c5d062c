"""Benchmark the compiled assembly kernels against the pure-numpy fallback.

Run: python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from nlafem.fem import build_space
from nlafem.kernels import BACKEND, _numpy
from nlafem.mesh import DomainSpec, create_initial_mesh, uniform_refine

try:
    from nlafem.kernels import _speedup
except ImportError:
    _speedup = None


def _bench(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    print(f"active backend: {BACKEND}")
    if _speedup is None:
        print("compiled extension not available; only the numpy path is timed")
    for levels in (4, 5, 6):
        mesh = uniform_refine(create_initial_mesh(DomainSpec.unit_square()), levels)
        for degree in (1, 2):
            sp = build_space(mesh, degree)
            w = np.ones((mesh.num_elements, len(sp.qweights)))
            args_k = (sp.basis_grad, sp.qweights, sp.jinv, sp.detj, 1.0)
            args_m = (sp.basis, sp.qweights, sp.detj, w)
            t_np = _bench(_numpy.stiffness_local, *args_k) + _bench(
                _numpy.weighted_mass_local, *args_m
            )
            line = f"elements {mesh.num_elements:6d}  P{degree}  numpy {t_np * 1e3:8.2f} ms"
            if _speedup is not None:
                t_cy = _bench(_speedup.stiffness_local, *args_k) + _bench(
                    _speedup.weighted_mass_local, *args_m
                )
                a = np.asarray(_speedup.stiffness_local(*args_k))
                b = _numpy.stiffness_local(*args_k)
                assert np.allclose(a, b, atol=1e-12), "backend results disagree"
                line += f"  cython {t_cy * 1e3:8.2f} ms  speedup {t_np / t_cy:5.2f}x"
            print(line)


if __name__ == "__main__":
    main()
