"""GSM receivers: projection-based list detection, exhaustive ML and the
single-candidate LR-ZF baseline.

All detectors share the candidate residual ``||y - H_k x||^2`` computed by
:func:`residual_sq`, so distances of the same candidate agree bit for bit
across detectors and the dominance chain ML <= list <= single holds
exactly.

FLOP totals in :class:`DetectionResult` cover the work done per channel
use. Channel-only preprocessing is tallied on the
:class:`~gsmdetect.channel.ChannelRealization` instead.
"""

from dataclasses import dataclass
import math

import numpy as np

from .lattice import RankDeficient
from .modulation import quantize_index, quantize_lr
from .numerics import (OP_COST, FlopCounter, SingularGram, matvec,
                       matvec_cost, norm_sq, norm_sq_cost)

__all__ = [
    "AllCandidatesFailed",
    "DetectionResult",
    "ListRule",
    "ML_GUARD",
    "PbldParams",
    "TooLarge",
    "list_length",
    "lrzf_single_detect",
    "ml_detect",
    "pbld_detect",
    "quality_metric",
    "residual_sq",
    "stage1_sort",
    "stage2_candidate",
]

ML_GUARD = 1 << 20


class AllCandidatesFailed(RuntimeError):
    pass


class TooLarge(ValueError):
    pass


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ListRule:
    """List-length schedule at one SNR: floor ``l_min``, growth ``l1``."""

    l_min: float
    l1: float
    n_c: int


@dataclass(frozen=True)
class PbldParams:
    """List-length schedule inputs.

    ``c_lo`` and ``c_hi`` are fractions of the number of combinations.
    ``lmin_scale`` selects whether the floor is interpolated over SNR in
    dB (default) or in linear units; the growth rate always divides by
    the square root of the linear SNR.
    """

    c_lo: float = 0.25
    c_hi: float = 0.125
    rho_lo_db: float = 0.0
    rho_hi_db: float = 30.0
    lmin_scale: str = "db"

    def __post_init__(self):
        if not self.c_hi < self.c_lo:
            raise ValueError(f"need c_hi < c_lo, got c_hi={self.c_hi}, c_lo={self.c_lo}")
        if self.rho_hi_db <= self.rho_lo_db:
            raise ValueError("need rho_hi_db > rho_lo_db")
        if self.lmin_scale not in ("db", "linear"):
            raise ValueError(f"lmin_scale must be 'db' or 'linear', got {self.lmin_scale!r}")

    def l_min(self, n_c, rho_db):
        c_lo, c_hi = self.c_lo * n_c, self.c_hi * n_c
        if self.lmin_scale == "db":
            lo, hi, rho = self.rho_lo_db, self.rho_hi_db, rho_db
        else:
            lo, hi, rho = (10.0 ** (v / 10.0) for v in (self.rho_lo_db, self.rho_hi_db, rho_db))
        l_min = (c_hi - c_lo) / (hi - lo) * (rho - lo) + c_lo
        return max(1.0, l_min)

    def rule(self, n_c, rho_db):
        l_min = self.l_min(n_c, rho_db)
        return ListRule(l_min, l_min / math.sqrt(10.0 ** (rho_db / 10.0)), n_c)


def quality_metric(epsilon, n_r, sigma2):
    """Squared residual standardized by the noise-only chi-square moments."""
    return (epsilon * epsilon - n_r * sigma2) / (math.sqrt(n_r) * sigma2)


def _phi_sq(eps2, n_r, sigma2):
    if sigma2 <= 0:
        return -math.inf
    return (eps2 - n_r * sigma2) / (math.sqrt(n_r) * sigma2)


def list_length(phi, rule):
    """``ceil(max(l_min, exp(l1 * phi)))``, capped at the number of combinations."""
    arg = -math.inf if phi == -math.inf else rule.l1 * phi
    if arg >= math.log(rule.n_c):
        return rule.n_c
    return min(rule.n_c, math.ceil(max(rule.l_min, math.exp(arg))))


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------

def stage1_combo_cost(n_r, n_a):
    return matvec_cost(n_a, n_r) + matvec_cost(n_r, n_a) + norm_sq_cost(n_r)


def stage2_cost(n_a):
    # T^-1 w, shift/scale/round/rescale, T z, snap to the alphabet
    quant = n_a * OP_COST["csub"] + 2 * n_a + 2 * n_a + 2 * n_a + n_a * OP_COST["cadd"]
    return 2 * matvec_cost(n_a, n_a) + quant + 4 * n_a


def residual_cost(n_r, n_a):
    return matvec_cost(n_r, n_a) + n_r * OP_COST["csub"] + norm_sq_cost(n_r)


UPDATE_COST = 5


def ml_candidate_cost(n_r):
    return n_r * OP_COST["csub"] + norm_sq_cost(n_r)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DetectionResult:
    k_hat: int
    labels: np.ndarray
    x_hat: np.ndarray
    s_hat: np.ndarray
    epsilon_min: float
    candidates_examined: int
    final_list_length: int
    flops: int
    lambda_trace: tuple = ()
    epsilon_trace: tuple = ()
    valid: bool = True

    def same_decision(self, other):
        return self.k_hat == other.k_hat and np.array_equal(self.labels, other.labels)


def _result(chan, c, k, labels, eps2, examined, final_len, counter, **kw):
    labels = np.asarray(labels, dtype=np.int64)
    x = c.points[labels].astype(complex)
    s = np.zeros(chan.table.n_t, dtype=complex)
    s[list(chan.table.combos[k])] = x
    counter.charge("sqrt")
    return DetectionResult(int(k), labels, x, s, math.sqrt(eps2), int(examined),
                           int(final_len), counter.total, **kw)


def residual_sq(y, h, x):
    """``||y - h @ x||^2`` with the shared deterministic arithmetic."""
    return float(norm_sq(y - matvec(h, x)))


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage1_sort(y, chan, counter=None):
    """Rank combinations by the energy of ``y`` projected onto their span.

    Returns ``(order, w, magnitudes)``: combination indices by descending
    ``||H_i w_i||`` (ties to the lower index), the zero-forcing outputs
    ``w_i`` indexed by combination, and the squared magnitudes. A singular
    combination gets magnitude ``-inf`` and ``w_i = None``.
    """
    y = np.asarray(y, dtype=complex)
    n_c = chan.table.n_c
    cost = stage1_combo_cost(chan.n_r, chan.table.n_a)
    w = [None] * n_c
    mags = np.full(n_c, -np.inf)
    for i in range(n_c):
        try:
            g = chan.zf_matrix(i)
        except SingularGram:
            continue
        w[i] = matvec(g, y)
        mags[i] = norm_sq(matvec(chan.submatrices[i], w[i]))
        if counter is not None:
            counter.add(cost)
    order = sorted(range(n_c), key=lambda i: (-mags[i], i))
    return order, w, mags


def stage2_candidate(j, order, w, chan, c, counter=None):
    """LR-ZF candidate for the ``j``-th ranked combination.

    Reuses ``w`` from the sort: ``T^{-1} w`` is the zero-forcing output in
    the reduced basis. After mapping back with ``T``, entries outside the
    alphabet are snapped to the nearest point. Returns the symbol labels.

    Raises
    ------
    RankDeficient, SingularGram
        If the combination is degenerate.
    """
    p = order[j]
    if w[p] is None:
        raise SingularGram(f"combination {p} is singular")
    rb = chan.reduced(p)
    z_tilde = rb.t_inv @ w[p]
    z_hat = quantize_lr(c, z_tilde, rb.t_inv)
    labels = quantize_index(c, rb.t @ z_hat)
    if counter is not None:
        counter.add(stage2_cost(chan.table.n_a))
    return labels


# ---------------------------------------------------------------------------
# Detectors
# ---------------------------------------------------------------------------

def pbld_detect(y, chan, c, rule, sigma2, counter=None, strict=False):
    """Projection-based list detection of one channel use.

    Stage 1 ranks all combinations once; candidates are then generated in
    rank order. Whenever a candidate strictly improves the best residual it
    becomes the current decision and the list length is reset from its
    quality metric. The loop ends once the number of examined candidates
    reaches the list length.
    """
    counter = FlopCounter() if counter is None else counter
    y = np.asarray(y, dtype=complex)
    n_c, n_r = chan.table.n_c, chan.n_r
    res_cost = residual_cost(n_r, chan.table.n_a)
    order, w, _ = stage1_sort(y, chan, counter)

    eps_min = math.inf
    lam = n_c
    best = None
    lam_trace, eps_trace = [], []
    j = 0
    while j < lam and j < n_c:
        p = order[j]
        j += 1
        try:
            labels = stage2_candidate(j - 1, order, w, chan, c, counter)
        except (RankDeficient, SingularGram):
            continue
        eps2 = residual_sq(y, chan.submatrices[p], c.points[labels])
        counter.add(res_cost)
        if eps2 < eps_min:
            eps_min = eps2
            best = (p, labels)
            lam = list_length(_phi_sq(eps2, n_r, sigma2), rule)
            counter.add(UPDATE_COST)
            lam_trace.append(lam)
            eps_trace.append(eps2)

    if best is None:
        if strict:
            raise AllCandidatesFailed("every combination is degenerate")
        return _result(chan, c, order[0], np.zeros(chan.table.n_a, np.int64), math.inf,
                       j, lam, counter, valid=False)
    return _result(chan, c, best[0], best[1], eps_min, j, lam, counter,
                   lambda_trace=tuple(lam_trace), epsilon_trace=tuple(eps_trace))


def lrzf_single_detect(y, chan, c, counter=None):
    """Top-ranked combination and its LR-ZF candidate only."""
    counter = FlopCounter() if counter is None else counter
    y = np.asarray(y, dtype=complex)
    order, w, _ = stage1_sort(y, chan, counter)
    p = order[0]
    try:
        labels = stage2_candidate(0, order, w, chan, c, counter)
    except (RankDeficient, SingularGram):
        return _result(chan, c, p, np.zeros(chan.table.n_a, np.int64), math.inf,
                       1, 1, counter, valid=False)
    eps2 = residual_sq(y, chan.submatrices[p], c.points[labels])
    counter.add(residual_cost(chan.n_r, chan.table.n_a))
    return _result(chan, c, p, labels, eps2, 1, 1, counter)


def ml_detect(y, chan, c, counter=None):
    """Exhaustive search over every combination and symbol vector.

    Ties go to the smaller combination index, then to the lexicographically
    smaller tuple of symbol labels.
    """
    n_c, n_a = chan.table.n_c, chan.table.n_a
    n_cand = n_c * c.order ** n_a
    if n_cand > ML_GUARD:
        raise TooLarge(f"{n_cand} candidates exceed the enumeration guard {ML_GUARD}")
    counter = FlopCounter() if counter is None else counter
    y = np.asarray(y, dtype=complex)
    hx, labels = chan.ml_table(c)
    eps2 = norm_sq(y - hx)
    best = int(np.argmin(eps2))
    counter.add(n_cand * ml_candidate_cost(chan.n_r))
    per_k = c.order ** n_a
    return _result(chan, c, best // per_k, labels[best % per_k], float(eps2[best]),
                   n_cand, n_cand, counter)
