"""Time the compiled core against the pure-Python fallback.

Each row times :func:`gsmdetect.core.detect_block` on fresh channel
realizations of one figure geometry, with all three detectors enabled,
and checks that both backends reach the same decisions.

    python benchmarks/bench_backends.py --blocks 5 --uses 100
"""

import argparse
import time

import numpy as np

from gsmdetect.channel import ChannelRealization, draw_correlated, draw_noise, snr_to_sigma2
from gsmdetect.cli import PRESETS
from gsmdetect.core import DETECTORS, HAVE_COMPILED, detect_block
from gsmdetect.detectors import PbldParams
from gsmdetect.gsm import SystemConfig


def _blocks(sysc, delta, snr, n_blocks, n_uses, seed):
    rng = np.random.default_rng(seed)
    sigma2 = snr_to_sigma2(snr, sysc.n_a)
    for _ in range(n_blocks):
        h = draw_correlated(sysc.n_r, sysc.n_t, delta, rng)
        s = np.zeros((n_uses, sysc.n_t), complex)
        for u in range(n_uses):
            s[u, sysc.table.combos[rng.integers(sysc.n_c)]] = sysc.constellation.points[
                rng.integers(0, sysc.order, sysc.n_a)]
        y = s @ h.T + draw_noise(sysc.n_r, sigma2, rng, size=n_uses)
        yield h, y, sigma2


def bench(name, snr, n_blocks, n_uses, seed=0):
    n_t, n_a, n_r, delta = PRESETS[name]
    sysc = SystemConfig(n_t, n_a, n_r)
    rule = PbldParams().rule(sysc.n_c, snr)
    times = {"compiled": 0.0, "python": 0.0}
    agree = True
    for h, y, sigma2 in _blocks(sysc, delta, snr, n_blocks, n_uses, seed):
        outs = {}
        for backend in times:
            # fresh realization so cached preprocessing is timed too
            chan = ChannelRealization(h, sysc.table)
            t0 = time.perf_counter()
            outs[backend], _, _ = detect_block(chan, sysc.constellation, y, sigma2, rule,
                                               DETECTORS, backend=backend)
            times[backend] += time.perf_counter() - t0
        for det in DETECTORS:
            agree &= np.array_equal(outs["compiled"][det]["k"], outs["python"][det]["k"])
            agree &= np.array_equal(outs["compiled"][det]["labels"],
                                    outs["python"][det]["labels"])
    per = {k: v / n_blocks for k, v in times.items()}
    return per, agree


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--blocks", type=int, default=3, help="channel realizations per geometry")
    ap.add_argument("--uses", type=int, default=100, help="channel uses per realization")
    ap.add_argument("--snr", type=float, default=8.0)
    ap.add_argument("--presets", default="fig2,fig3,fig4a,fig4b")
    args = ap.parse_args(argv)
    if not HAVE_COMPILED:
        raise SystemExit("compiled core not built; run `pip install -e .` first")

    print(f"{'preset':8s} {'compiled ms':>12s} {'python ms':>12s} {'speedup':>9s}  agree")
    for name in args.presets.split(","):
        per, agree = bench(name, args.snr, args.blocks, args.uses)
        print(f"{name:8s} {per['compiled'] * 1e3:12.2f} {per['python'] * 1e3:12.1f} "
              f"{per['python'] / per['compiled']:9.0f}  {agree}")


if __name__ == "__main__":
    main()
