"""Per-realization detection, dispatched to the compiled core when available.

``detect_block`` runs every requested detector over all channel uses that
share one :class:`~gsmdetect.channel.ChannelRealization`. The compiled
extension ``gsmdetect._kernels`` is used when it imports and the
``GSMDETECT_PURE`` environment variable is unset; otherwise, or when the
compiled core reports a degenerate realization, the reference functions
in :mod:`gsmdetect.detectors` do the work.
"""

import os

import numpy as np

from .detectors import (UPDATE_COST, lrzf_single_detect, ml_candidate_cost,
                        ml_detect, pbld_detect, residual_cost,
                        stage1_combo_cost, stage2_cost)
from .lattice import mgs_cost
from .numerics import matvec_cost, zf_matrix_cost

try:
    from . import _kernels
except ImportError:  # pragma: no cover - depends on the build
    _kernels = None

__all__ = ["BACKEND", "DETECTORS", "HAVE_COMPILED", "detect_block", "step_costs"]

DETECTORS = ("ml", "pbld", "lrzf_single")

HAVE_COMPILED = _kernels is not None
BACKEND = "compiled" if HAVE_COMPILED and not os.environ.get("GSMDETECT_PURE") else "python"


def step_costs(n_r, n_a):
    """Nominal FLOP charge of each detection step for one geometry."""
    return {
        "stage1_combo": stage1_combo_cost(n_r, n_a),
        "stage2": stage2_cost(n_a),
        "residual": residual_cost(n_r, n_a),
        "update": UPDATE_COST,
        "ml_candidate": ml_candidate_cost(n_r),
        "zf_prep": zf_matrix_cost(n_r, n_a),
        "ml_row": matvec_cost(n_r, n_a),
        "qr_prep": mgs_cost(n_r, n_a),
    }


def _empty(n_uses, n_a):
    return dict(k=np.zeros(n_uses, np.int64), labels=np.zeros((n_uses, n_a), np.int64),
                eps=np.zeros(n_uses), examined=np.zeros(n_uses, np.int64),
                final_len=np.zeros(n_uses, np.int64), flops=np.zeros(n_uses, np.int64),
                monotone=np.ones(n_uses, np.int8), valid=np.ones(n_uses, np.int8))


def _monotone(trace, n_c):
    prev = n_c
    for lam in trace:
        if lam > prev:
            return False
        prev = lam
    return True


def _python_block(chan, c, Y, sigma2, rule, detectors):
    n_uses, n_a = Y.shape[0], chan.table.n_a
    out = {name: _empty(n_uses, n_a) for name in detectors}
    if "pbld" in detectors or "lrzf_single" in detectors:
        chan.prepare()
    for u in range(n_uses):
        y = Y[u]
        for name in detectors:
            if name == "pbld":
                res = pbld_detect(y, chan, c, rule, sigma2)
            elif name == "lrzf_single":
                res = lrzf_single_detect(y, chan, c)
            else:
                res = ml_detect(y, chan, c)
            d = out[name]
            d["k"][u] = res.k_hat
            d["labels"][u] = res.labels
            d["eps"][u] = res.epsilon_min
            d["examined"][u] = res.candidates_examined
            d["final_len"][u] = res.final_list_length
            d["flops"][u] = res.flops
            d["monotone"][u] = _monotone(res.lambda_trace, chan.table.n_c)
            d["valid"][u] = res.valid
    lr_prep = chan.prep_flops["zf"] + chan.prep_flops["lll"]
    prep = {}
    for name in detectors:
        prep[name] = chan.prep_flops["ml"] if name == "ml" else lr_prep
    return out, prep


def detect_block(chan, c, Y, sigma2, rule, detectors, backend=None):
    """Run ``detectors`` on every row of ``Y`` for one channel realization.

    Returns ``(out, prep, used_backend)`` where ``out[name]`` holds
    per-use arrays (``k``, ``labels``, ``eps``, ``examined``,
    ``final_len``, ``flops``, ``monotone``, ``valid``) and ``prep[name]``
    the one-off preprocessing FLOPs of that detector on this realization.
    """
    backend = backend or BACKEND
    detectors = tuple(detectors)
    unknown = set(detectors) - set(DETECTORS)
    if unknown:
        raise ValueError(f"unknown detectors {sorted(unknown)}")
    Y = np.atleast_2d(np.asarray(Y, dtype=complex))
    if backend == "compiled":
        if _kernels is None:
            raise RuntimeError("compiled core is not available in this build")
        status, out, prep = _kernels.run_block(
            chan.submatrices, Y, c.points, c.label_grid, c.scale, c.offset,
            float(sigma2), float(rule.l_min), float(rule.l1), float(chan.lll_delta),
            "ml" in detectors, "pbld" in detectors, "lrzf_single" in detectors,
            step_costs(chan.n_r, chan.table.n_a))
        if status == 0:
            return out, prep, "compiled"
    out, prep = _python_block(chan, c, Y, sigma2, rule, detectors)
    return out, prep, "python"
