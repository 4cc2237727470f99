"""Compare the compiled and pure-Python column kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--pixels N] [--bands D] [--endmembers P] [--atoms L]

Both backends run the same inputs; the script reports wall time per
backend, the speed-up, and the largest absolute difference in the outputs.
"""
import argparse
import time

import numpy as np

from almm import _backend
from almm.model import SolverConfig
from almm.baselines import unmix_clsu, unmix_sunsal
from almm.su import unmix_image_almm
from almm.svdl import random_orthonormal
from almm.synthetic import SceneSpec, generate_scene


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pixels", type=int, default=400)
    ap.add_argument("--bands", type=int, default=100)
    ap.add_argument("--endmembers", type=int, default=5)
    ap.add_argument("--atoms", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    try:
        _backend.get("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e .` first") from None

    side = int(np.ceil(np.sqrt(args.pixels)))
    scene = generate_scene(SceneSpec(rows=side, cols=side, num_bands=args.bands,
                                     num_endmembers=args.endmembers, rng_seed=0))
    Y = scene.image.data[:, :args.pixels]
    A = scene.endmembers.data
    E = random_orthonormal(args.bands, args.atoms, 0)
    cfg = SolverConfig()

    cases = {
        "nnls (clsu)": lambda b: unmix_clsu(Y, A, backend=b).X.data,
        "admm (sunsal)": lambda b: unmix_sunsal(Y, A, backend=b).X.data,
        "admm (almm, fixed E)": lambda b: unmix_image_almm(Y, A, E, cfg, backend=b).X.data,
    }
    print(f"N={Y.shape[1]} D={args.bands} P={args.endmembers} L={args.atoms}")
    print(f"{'kernel':<22}{'compiled s':>12}{'python s':>12}{'speed-up':>10}{'max |diff|':>12}")
    for name, fn in cases.items():
        tc, xc = _time(lambda: fn("compiled"), args.repeat)
        tp, xp = _time(lambda: fn("python"), 1)
        print(f"{name:<22}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}{np.max(np.abs(xc - xp)):>12.2e}")


if __name__ == "__main__":
    main()
