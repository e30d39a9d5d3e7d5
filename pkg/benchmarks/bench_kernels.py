"""Time the compiled and NumPy kernel backends on realistic inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Prints one line per kernel with the best-of-N time per backend and the
speed-up of the compiled one. Backends that are not built are skipped.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from edcnet import _kernels
from edcnet.acoustics import _image_positions, _lattice
from edcnet.recon import frame_bounds
from edcnet.roomgen import sample_room


def _splat_inputs():
    cfg = sample_room(0)
    n, order = _lattice(30)
    pos = _image_positions(n, cfg.dims, cfg.source_xyz)
    dist = np.linalg.norm(pos - np.asarray(cfg.receiver_xyz), axis=1)
    beta = np.sqrt(1.0 - np.asarray(cfg.absorption))
    table = np.ascontiguousarray(beta[:, None] ** np.arange(31)[None, :])
    delays = np.ascontiguousarray(dist / 343.0 * 16000)
    amps = np.ascontiguousarray(1.0 / dist)
    orders = np.ascontiguousarray(order, dtype=np.int64)
    return lambda k: k.splat_images(delays, amps, orders, table, np.zeros((24, 22000)))


def _tail_inputs():
    sig = np.random.default_rng(0).standard_normal(22000)
    return lambda k: k.tail_energy(sig)


def _signs_inputs():
    u = np.random.default_rng(0).random(10**6 - 1)
    return lambda k: k.sticky_signs(1.0, u, 0.9)


def _render_inputs():
    rng = np.random.default_rng(0)
    L = 1000
    env = np.concatenate((np.sqrt(rng.random(L - 1)), [0.0]))
    values = np.concatenate((env * np.sign(rng.standard_normal(L)), [0.0]))
    bounds = frame_bounds(L, 22.0)
    return lambda k: k.render_frames(values, env, bounds)


CASES = {
    "splat_images (order 30, 24x22000)": _splat_inputs,
    "tail_energy (22000 samples)": _tail_inputs,
    "sticky_signs (1e6 samples)": _signs_inputs,
    "render_frames (1000 frames, 22000 samples)": _render_inputs,
}


def run(repeat=5):
    results = []
    for name, make in CASES.items():
        call = make()
        row = {"kernel": name}
        for backend, module in _kernels.BACKENDS.items():
            call(module)  # warm-up
            number = 3
            row[backend] = min(timeit.repeat(lambda: call(module), number=number, repeat=repeat)) / number
        results.append(row)
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None, help="also write the results here")
    args = ap.parse_args(argv)
    if "cython" not in _kernels.BACKENDS:
        print("compiled backend not built; timing the NumPy backend only", file=sys.stderr)
    results = run(args.repeat)
    print(f"{'kernel':44} {'python ms':>10} {'cython ms':>10} {'speed-up':>9}")
    for r in results:
        py = r["python"] * 1e3
        cy = r.get("cython")
        cy_txt = f"{cy * 1e3:10.3f}" if cy is not None else f"{'n/a':>10}"
        sp_txt = f"{r['python'] / cy:8.1f}x" if cy else f"{'n/a':>9}"
        print(f"{r['kernel']:44} {py:10.3f} {cy_txt} {sp_txt}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
