"""Command-line front end.

Subcommands::

    gsmdetect run --config exp.cfg --out result.csv [--threads N]
    gsmdetect preset --name fig2 --scale desk --out result.csv [--threads N]
    gsmdetect selftest

A config file is a flat list of ``key = value`` lines; ``#`` starts a
comment. Lists (``detectors``, ``snr_db``) are comma separated.
``delta_rx`` is optional and defaults to ``delta``. The
``GSMDETECT_SEED`` environment variable, when set, replaces the seed of
any config or preset.

Exit codes: 0 success, 1 invalid input, 2 runtime failure.
"""

import argparse
import csv
import logging
import math
import os
import sys

import numpy as np

from .channel import ChannelRealization, draw_iid
from .detectors import PbldParams
from .gsm import BadGeometry, SystemConfig
from .modulation import UnsupportedOrder
from .sim import ConfigError, ExperimentSpec, flop_ratio, run_sweep

__all__ = [
    "CSV_HEADER",
    "ParseError",
    "PRESETS",
    "ValidationError",
    "emit_csv",
    "main",
    "parse_config",
    "preset_spec",
]

log = logging.getLogger(__name__)

CSV_HEADER = ("detector", "snr_db", "ber", "bits_sent", "bit_errors", "avg_list_length",
              "avg_candidates", "avg_flops", "flop_ratio_vs_ml", "noise_floor")

SEED_ENV = "GSMDETECT_SEED"


class ParseError(ValueError):
    def __init__(self, msg, lineno=None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

# name -> (n_t, n_a, n_r, delta)
PRESETS = {
    "fig2": (4, 2, 4, 0.0),
    "fig3": (16, 2, 4, 0.0),
    "fig4a": (7, 4, 7, 0.0),
    "fig4b": (8, 3, 8, 0.0),
    "fig5": (7, 4, 7, 0.5),
}

FULL_RUNS = 20000
USES_PER_RUN = 100
SCALES = {
    "desk": (FULL_RUNS // 10, tuple(float(s) for s in range(0, 17, 4))),
    "full": (FULL_RUNS, tuple(float(s) for s in range(0, 25, 2))),
}


def preset_spec(name, scale="desk", seed=0):
    """ExperimentSpec for a named figure configuration."""
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if scale not in SCALES:
        raise ValidationError(f"unknown scale {scale!r}; choose from {', '.join(SCALES)}")
    n_t, n_a, n_r, delta = PRESETS[name]
    runs, grid = SCALES[scale]
    return ExperimentSpec(SystemConfig(n_t, n_a, n_r, 4), detectors=("ml", "pbld", "lrzf_single"),
                          snr_grid_db=grid, runs=runs, uses_per_run=USES_PER_RUN, delta=delta,
                          pbld=PbldParams(), master_seed=seed)


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_MODULATIONS = {"qpsk": 4, "4qam": 4, "4": 4, "16qam": 16, "16": 16, "64qam": 64, "64": 64}


def _int(v):
    return int(v, 0)


def _seed(v):
    s = int(v, 0)
    if not 0 <= s < 1 << 64:
        raise ValueError("seed must fit in 64 unsigned bits")
    return s


def _modulation(v):
    try:
        return _MODULATIONS[v.lower()]
    except KeyError:
        raise ValueError(f"unknown modulation {v!r}") from None


def _str_list(v):
    return tuple(t.strip() for t in v.split(",") if t.strip())


def _float_list(v):
    return tuple(float(t) for t in _str_list(v))


def _lmin_scale(v):
    if v not in ("db", "linear"):
        raise ValueError("lmin_scale must be 'db' or 'linear'")
    return v


_KEYS = {
    "n_t": _int, "n_a": _int, "n_r": _int, "modulation": _modulation,
    "detectors": _str_list, "snr_db": _float_list, "runs": _int, "uses_per_run": _int,
    "delta": float, "delta_rx": float, "c_lo_frac": float, "c_hi_frac": float, "rho_lo_db": float,
    "rho_hi_db": float, "lmin_scale": _lmin_scale, "seed": _seed,
}
_REQUIRED = ("n_t", "n_a", "n_r")


def parse_config_text(text):
    """Parse config text into a dict of typed values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = _KEYS[key](value)
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {exc}", lineno) from None
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ParseError(f"missing required keys: {', '.join(missing)}")
    return values


def spec_from_values(values):
    """Build a validated ExperimentSpec from parsed config values."""
    try:
        system = SystemConfig(values["n_t"], values["n_a"], values["n_r"],
                              values.get("modulation", 4))
        defaults = PbldParams()
        pbld = PbldParams(c_lo=values.get("c_lo_frac", defaults.c_lo),
                          c_hi=values.get("c_hi_frac", defaults.c_hi),
                          rho_lo_db=values.get("rho_lo_db", defaults.rho_lo_db),
                          rho_hi_db=values.get("rho_hi_db", defaults.rho_hi_db),
                          lmin_scale=values.get("lmin_scale", defaults.lmin_scale))
        kw = dict(system=system, pbld=pbld)
        for key, field in (("detectors", "detectors"), ("snr_db", "snr_grid_db"),
                           ("runs", "runs"), ("uses_per_run", "uses_per_run"),
                           ("delta", "delta"), ("delta_rx", "delta_rx"),
                           ("seed", "master_seed")):
            if key in values:
                kw[field] = values[key]
        return ExperimentSpec(**kw)
    except (BadGeometry, UnsupportedOrder, ConfigError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc


def parse_config(path):
    """Read and validate an experiment config file.

    Raises
    ------
    ParseError
        Malformed line, unknown or duplicate key (carries ``lineno``).
    ValidationError
        Well-formed values that violate a constraint.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return spec_from_values(parse_config_text(text))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def emit_csv(result, path):
    """Write one row per (detector, SNR), sorted by detector then SNR."""
    ratios = {}
    if "ml" in result.spec.detectors:
        for name in result.spec.detectors:
            ratios[name] = dict(flop_ratio(result, name))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in result.rows():
            ratio = ratios.get(p.detector, {}).get(p.snr_db, math.nan)
            w.writerow([p.detector, _fmt(p.snr_db), _fmt(p.ber), _fmt(p.bits_sent),
                        _fmt(p.bit_errors), _fmt(p.avg_list_length), _fmt(p.avg_candidates),
                        _fmt(p.avg_flops), _fmt(ratio), _fmt(p.noise_floor)])


# ---------------------------------------------------------------------------
# Selftest
# ---------------------------------------------------------------------------

def _check_captions():
    want = {(4, 2): (4, 6), (16, 2): (64, 10), (7, 4): (32, 13), (8, 3): (32, 11)}
    return all((SystemConfig(t, a, a).n_c, SystemConfig(t, a, a).bits_per_use) == v
               for (t, a), v in want.items())


def _check_noise_free(rng):
    from .detectors import lrzf_single_detect, ml_detect, pbld_detect
    from .gsm import encode
    sysc = SystemConfig(4, 2, 4)
    c, table = sysc.constellation, sysc.table
    rule = PbldParams().rule(table.n_c, 20.0)
    for _ in range(50):
        chan = ChannelRealization(draw_iid(4, 4, rng), table)
        bits = rng.integers(0, 2, sysc.bits_per_use)
        k, x, s = encode(table, c, bits)
        y = chan.h @ s
        for res in (ml_detect(y, chan, c), pbld_detect(y, chan, c, rule, 0.0),
                    lrzf_single_detect(y, chan, c)):
            if res.k_hat != k or not np.allclose(res.x_hat, x):
                return False
    return True


def _check_dominance(rng):
    from .detectors import lrzf_single_detect, ml_detect, pbld_detect
    sysc = SystemConfig(4, 2, 4)
    c, table = sysc.constellation, sysc.table
    rule = PbldParams().rule(table.n_c, 8.0)
    for _ in range(100):
        chan = ChannelRealization(draw_iid(4, 4, rng), table)
        y = draw_iid(4, 1, rng)[:, 0] * 2.0
        e_ml = ml_detect(y, chan, c).epsilon_min
        e_pb = pbld_detect(y, chan, c, rule, 0.5).epsilon_min
        e_lr = lrzf_single_detect(y, chan, c).epsilon_min
        if not e_ml <= e_pb <= e_lr:
            return False
    return True


def _check_lll(rng):
    from .lattice import LLL_DELTA, lll_reduce, verify_reduced
    for _ in range(50):
        rb = lll_reduce(draw_iid(7, 4, rng))
        if not verify_reduced(rb, LLL_DELTA):
            return False
        if abs(abs(np.linalg.det(rb.t)) - 1.0) > 1e-9:
            return False
    return True


def _check_backends(rng):
    from .core import HAVE_COMPILED, detect_block
    if not HAVE_COMPILED:
        return None
    sysc = SystemConfig(7, 4, 7)
    c, table = sysc.constellation, sysc.table
    rule = PbldParams().rule(table.n_c, 8.0)
    chan = ChannelRealization(draw_iid(7, 7, rng), table)
    y = draw_iid(7, 20, rng).T * 1.5
    dets = ("ml", "pbld", "lrzf_single")
    a, pa, _ = detect_block(chan, c, y, 0.8, rule, dets, backend="compiled")
    b, pb, _ = detect_block(chan, c, y, 0.8, rule, dets, backend="python")
    for name in dets:
        for key in ("k", "labels", "examined", "flops"):
            if not np.array_equal(a[name][key], b[name][key]):
                return False
        if pa[name] != pb[name]:
            return False
    return True


def selftest(seed=12345, out=None):
    """Run quick invariant checks; returns True when all pass."""
    out = sys.stdout if out is None else out
    rng = np.random.default_rng(seed)
    checks = [
        ("caption arithmetic", _check_captions),
        ("noise-free exactness", lambda: _check_noise_free(rng)),
        ("residual dominance", lambda: _check_dominance(rng)),
        ("lattice reduction", lambda: _check_lll(rng)),
        ("backend agreement", lambda: _check_backends(rng)),
    ]
    ok = True
    for name, fn in checks:
        verdict = fn()
        if verdict is None:
            print(f"SKIP {name} (compiled core not built)", file=out)
            continue
        ok &= bool(verdict)
        print(f"{'PASS' if verdict else 'FAIL'} {name}", file=out)
    return ok


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _parser():
    p = _Parser(prog="gsmdetect", description="GSM list-detection Monte Carlo sweeps.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="sweep from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--threads", type=int, default=1)

    pre = sub.add_parser("preset", help="sweep a named figure configuration")
    pre.add_argument("--name", required=True)
    pre.add_argument("--scale", default="desk")
    pre.add_argument("--out", required=True)
    pre.add_argument("--threads", type=int, default=1)

    sub.add_parser("selftest", help="check invariants on small instances")
    return p


def _env_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return _seed(raw.strip())
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an unsigned 64-bit integer, got {raw!r}")


def _with_seed(spec, seed):
    if seed is None:
        return spec
    kw = {f: getattr(spec, f) for f in spec.__dataclass_fields__}
    kw["master_seed"] = seed
    return ExperimentSpec(**kw)


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "selftest":
            return 0 if selftest() else 2
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        if args.command == "run":
            try:
                spec = parse_config(args.config)
            except OSError as exc:
                raise ValidationError(f"cannot read config: {exc}") from exc
        else:
            spec = preset_spec(args.name, args.scale)
        spec = _with_seed(spec, _env_seed())
        result = run_sweep(spec, threads=args.threads)
        emit_csv(result, args.out)
        return 0
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
