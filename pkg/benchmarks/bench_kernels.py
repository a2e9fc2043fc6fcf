"""Time the numba and numpy kernel paths on identical inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--skip-e2e]

Kernels are called directly (nb_* vs np_*), so one process covers both
backends.  The end-to-end section re-runs a radial integration and a barrier
evaluation in subprocesses with SIGMAK_BACKEND set, which is how the package
selects its backend at import time.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from sigmak import _kernels as K
from sigmak.barriers import SphereData, make_barriers
from sigmak.radial import R_START, RadialParams, integrate_profile


def best_of(fn, repeat):
    out = None
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def max_diff(a, b):
    a = a[0] if isinstance(a, tuple) else a
    b = b[0] if isinstance(b, tuple) else b
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def radial_on(out, grid=np.geomspace(1e-2, 999.0, 400)):
    """Slope y on a fixed grid: the two integrators choose different steps."""
    rs, ys = out[0], out[1]
    return np.interp(grid, rs, ys)


def cases(rng):
    prof = integrate_profile(RadialParams(3, 2, C=2.0), r_max=1e3)
    tail = np.asarray(prof.tail, dtype=float)
    b = make_barriers(SphereData.harmonics(2, [0.0, 0.2, -0.1]), "soliton", 2, 2, M=0.5, C=2.0)
    shifts, consts = b.family(1)
    bp = b.profile
    btail = np.asarray(bp.tail, dtype=float)
    lam = rng.uniform(0.1, 3.0, (20000, 6))
    s = rng.uniform(0.0, 2e3, 200000)
    pts = rng.uniform(-6, 6, (20000, 2))
    xs = rng.uniform(-1, 1, (4000, 2))
    us = np.sqrt(1 + np.sum(xs ** 2, axis=1))
    xis = rng.uniform(-0.6, 0.6, (4000, 2))
    p = RadialParams(3, 2, C=2.0)
    y0 = p.slope0 * R_START
    rad = (R_START, y0, 0.5 * p.slope0 * R_START ** 2, 1e3, 3.0, 2.0, 2.0, p._target_const,
           p._mode, 1e-10, 1e-12, 1e-8, 400000)
    return [
        ("esp_all 20000x6", lambda: K.nb_esp_all(lam), lambda: K.np_esp_all(lam)),
        ("esp_excluded 20000x6", lambda: K.nb_esp_excluded(lam), lambda: K.np_esp_excluded(lam)),
        ("hermite_eval 2e5", lambda: K.nb_hermite_eval(s, prof.r, prof.z0, prof.y, tail),
         lambda: K.np_hermite_eval(s, prof.r, prof.z0, prof.y, tail)),
        (f"envelope 20000x{len(shifts)}",
         lambda: K.nb_envelope(pts, shifts, consts, bp.r, bp.z0, bp.y, btail, 1.0),
         lambda: K.np_envelope(pts, shifts, consts, bp.r, bp.z0, bp.y, btail, 1.0)),
        ("conjugate 4000x4000", lambda: K.nb_conjugate(xs, us, xis), lambda: K.np_conjugate(xs, us, xis)),
        ("integrate_radial r<=1e3", lambda: radial_on(K.nb_integrate_radial(*rad, K._A, K._C, K._E)),
         lambda: radial_on(K.np_integrate_radial(*rad))),
    ]


E2E = """
import time, numpy as np
from sigmak import BACKEND
from sigmak.radial import RadialParams, integrate_profile
from sigmak.barriers import SphereData, make_barriers
t0 = time.perf_counter()
for nkc in [(2, 1, 2.0), (3, 2, 2.0), (3, 1, 1.5), (3, 3, 2.0)]:
    integrate_profile(RadialParams(*nkc[:2], C=nkc[2]), r_max=1e3)
b = make_barriers(SphereData.zero(2), "soliton", 2, 2, M=0.1, C=2.0)
g = np.linspace(-8, 8, 161)
pts = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
b.evaluate(pts, 1)
print(BACKEND, time.perf_counter() - t0)
"""


def end_to_end():
    rows = []
    for backend in ("numba", "numpy"):
        env = dict(os.environ, SIGMAK_BACKEND=backend)
        for label in ("cold", "warm"):
            r = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True,
                               check=True)
            name, secs = r.stdout.split()
            rows.append((name, label, float(secs)))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, nb, npf in cases(rng):
        nb()  # compile
        t_nb, a = best_of(nb, args.repeat)
        t_np, b = best_of(npf, max(1, args.repeat // 2))
        print(f"{name:28s} {t_nb:11.4f} {t_np:11.4f} {t_np / t_nb:8.1f} {max_diff(a, b):11.2e}")
    if not args.skip_e2e:
        print("\nend to end (4 radial profiles to r=1e3 + barrier envelope on 161^2 points)")
        for backend, label, secs in end_to_end():
            print(f"  SIGMAK_BACKEND={backend:6s} {label:5s} {secs:8.3f} s")


if __name__ == "__main__":
    main()
