"""Monte Carlo SNR sweeps.

A sweep is split into tasks, one per (run, SNR point). Each task owns a
random stream seeded from :func:`derive_trial_seed`, draws one channel
realization and all of its channel uses, and runs every enabled detector
on the same received vectors. Task results are integer tallies, so the
aggregate does not depend on how tasks are scheduled across threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .channel import ChannelRealization, draw_correlated, draw_noise, snr_to_sigma2
from .core import DETECTORS, detect_block
from .detectors import ML_GUARD, PbldParams
from .gsm import SystemConfig
from .lattice import LLL_DELTA

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "MissingBaseline",
    "PointStats",
    "SweepResult",
    "derive_trial_seed",
    "flop_ratio",
    "run_sweep",
]

log = logging.getLogger(__name__)

_MASK = (1 << 64) - 1


class ConfigError(ValueError):
    pass


class MissingBaseline(KeyError):
    pass


def _splitmix(z):
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_trial_seed(master_seed, run, use, snr_index):
    """Stateless 64-bit seed for one (run, use, SNR point) tuple."""
    h = _splitmix(int(master_seed) & _MASK)
    for v in (run, use, snr_index):
        h = _splitmix(h ^ (int(v) & _MASK))
    return h


@dataclass(frozen=True)
class ExperimentSpec:
    system: SystemConfig
    detectors: tuple = DETECTORS
    snr_grid_db: tuple = (0.0, 4.0, 8.0, 12.0, 16.0)
    runs: int = 2000
    uses_per_run: int = 100
    delta: float = 0.0
    delta_rx: float = None
    pbld: PbldParams = field(default_factory=PbldParams)
    master_seed: int = 0
    lll_delta: float = LLL_DELTA

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(self.detectors))
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.uses_per_run < 1:
            raise ConfigError("uses_per_run must be >= 1")
        if not self.snr_grid_db:
            raise ConfigError("snr grid is empty")
        if any(b <= a for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise ConfigError("snr grid must be strictly increasing")
        unknown = set(self.detectors) - set(DETECTORS)
        if unknown:
            raise ConfigError(f"unknown detectors {sorted(unknown)}; choose from {DETECTORS}")
        if len(set(self.detectors)) != len(self.detectors):
            raise ConfigError("duplicate detector names")
        for name, d in (("delta", self.delta), ("delta_rx", self.delta_rx)):
            if d is not None and not 0.0 <= d < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if "ml" in self.detectors:
            sysc = self.system
            n_cand = sysc.n_c * sysc.order ** sysc.n_a
            if n_cand > ML_GUARD:
                raise ConfigError(f"ML would enumerate {n_cand} candidates (guard {ML_GUARD})")


@dataclass(frozen=True)
class PointStats:
    """Integer tallies for one (detector, SNR) point, plus derived means."""

    detector: str
    snr_db: float
    trials: int
    bit_errors: int
    bits_sent: int
    flops: int
    examined: int
    final_len: int
    failures: int
    list_violations: int

    @property
    def ber(self):
        return self.bit_errors / self.bits_sent

    @property
    def noise_floor(self):
        return 1.0 / self.bits_sent

    @property
    def avg_flops(self):
        return self.flops / self.trials

    @property
    def avg_candidates(self):
        return self.examined / self.trials

    @property
    def avg_list_length(self):
        """Mean number of list candidates examined; defined for pbld only."""
        if self.detector != "pbld":
            return math.nan
        return self.examined / self.trials


@dataclass(frozen=True)
class SweepResult:
    spec: ExperimentSpec
    points: dict

    def get(self, detector, snr_db):
        return self.points[(detector, float(snr_db))]

    def series(self, detector, attr):
        return [getattr(self.get(detector, s), attr) for s in self.spec.snr_grid_db]

    def rows(self):
        """Points ordered by detector name, then ascending SNR."""
        return [self.points[key] for key in sorted(self.points)]


_TALLY_FIELDS = ("trials", "bit_errors", "bits_sent", "flops", "examined",
                 "final_len", "failures", "list_violations")


def _popcount(a):
    return np.bitwise_count(a.astype(np.uint64)).astype(np.int64)


def _weights(n):
    return 1 << np.arange(n - 1, -1, -1, dtype=np.int64)


def _run_task(spec, run, snr_index, backend):
    sysc = spec.system
    table, c = sysc.table, sysc.constellation
    snr_db = spec.snr_grid_db[snr_index]
    sigma2 = snr_to_sigma2(snr_db, sysc.n_a)
    rule = spec.pbld.rule(table.n_c, snr_db)
    n_uses = spec.uses_per_run

    rng = np.random.default_rng(derive_trial_seed(spec.master_seed, run, 0, snr_index))
    h = draw_correlated(sysc.n_r, sysc.n_t, spec.delta, rng, delta_rx=spec.delta_rx)
    bits = rng.integers(0, 2, size=(n_uses, sysc.bits_per_use), dtype=np.int64)
    noise = draw_noise(sysc.n_r, sigma2, rng, size=n_uses)

    sb, bps = table.spatial_bits, c.bits_per_symbol
    k = bits[:, :sb] @ _weights(sb)
    labels = bits[:, sb:].reshape(n_uses, sysc.n_a, bps) @ _weights(bps)
    s = np.zeros((n_uses, sysc.n_t), dtype=complex)
    np.put_along_axis(s, table.combo_array[k], c.points[labels], axis=1)
    y = s @ h.T + noise

    chan = ChannelRealization(h, table, lll_delta=spec.lll_delta)
    out, prep, _ = detect_block(chan, c, y, sigma2, rule, spec.detectors, backend=backend)

    tallies = {}
    for name in spec.detectors:
        d = out[name]
        errors = _popcount(k ^ d["k"]).sum() + _popcount(labels ^ d["labels"]).sum()
        tallies[name] = (
            n_uses,
            int(errors),
            n_uses * sysc.bits_per_use,
            int(d["flops"].sum()) + int(prep[name]),
            int(d["examined"].sum()),
            int(d["final_len"].sum()),
            int(n_uses - d["valid"].astype(np.int64).sum()),
            int(n_uses - d["monotone"].astype(np.int64).sum()),
        )
    return snr_index, tallies


def run_sweep(spec, threads=1, backend=None):
    """Run every (run, SNR point) task of ``spec`` and aggregate tallies."""
    totals = {(name, i): [0] * len(_TALLY_FIELDS)
              for name in spec.detectors for i in range(len(spec.snr_grid_db))}
    if not spec.detectors:
        return SweepResult(spec, {})
    tasks = [(run, i) for i in range(len(spec.snr_grid_db)) for run in range(spec.runs)]

    def work(task):
        return _run_task(spec, task[0], task[1], backend)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(work, tasks, chunksize=1)
            _accumulate(totals, results)
    else:
        _accumulate(totals, map(work, tasks))

    points = {}
    for (name, i), vals in totals.items():
        snr = spec.snr_grid_db[i]
        points[(name, snr)] = p = PointStats(name, snr, *vals)
        if p.failures:
            log.warning("%s at %g dB: %d degenerate detections", name, snr, p.failures)
    log.info("sweep done: %d tasks", len(tasks))
    return SweepResult(spec, points)


def _accumulate(totals, results):
    for snr_index, tallies in results:
        for name, vals in tallies.items():
            acc = totals[(name, snr_index)]
            for j, v in enumerate(vals):
                acc[j] += v


def flop_ratio(result, detector):
    """Average FLOPs of ``detector`` relative to ML at every SNR point."""
    if "ml" not in result.spec.detectors:
        raise MissingBaseline("the sweep did not include the ML detector")
    if detector not in result.spec.detectors:
        raise KeyError(f"detector {detector!r} not in sweep")
    return [(snr, result.get(detector, snr).avg_flops / result.get("ml", snr).avg_flops)
            for snr in result.spec.snr_grid_db]
