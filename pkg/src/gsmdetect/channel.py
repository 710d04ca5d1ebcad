"""Channel and noise generation."""

from dataclasses import dataclass

import numpy as np

from .lattice import LLL_DELTA, RankDeficient, lll_reduce
from .numerics import (GramFactor, SingularGram, matvec, matvec_cost,
                       zf_matrix_cost)

__all__ = [
    "ChannelRealization",
    "NoiseModel",
    "NotPSD",
    "correlation_matrix",
    "draw_correlated",
    "draw_iid",
    "draw_noise",
    "psd_sqrt",
    "snr_to_sigma2",
]


class NotPSD(np.linalg.LinAlgError):
    pass


def draw_iid(n_r, n_t, rng):
    """i.i.d. circularly-symmetric unit-variance complex Gaussian matrix."""
    g = rng.standard_normal((n_r, n_t, 2))
    return (g[..., 0] + 1j * g[..., 1]) * np.sqrt(0.5)


def correlation_matrix(n, delta):
    """Entry (i, j) is ``delta ** (|i - j| ** 2)``.

    The squared distance in the exponent is deliberate; it is the law used
    for the correlated-channel experiments, not the more common
    ``delta ** |i - j|``.
    """
    idx = np.arange(n)
    dist2 = (idx[:, None] - idx[None, :]) ** 2
    # 0 ** 0 == 1 keeps delta = 0 an identity
    return np.power(float(delta), dist2).astype(complex)


def psd_sqrt(r, tol=1e-12):
    """Principal square root of a Hermitian PSD matrix."""
    r = np.asarray(r, dtype=complex)
    evals, evecs = np.linalg.eigh(r)
    if evals.min() < -tol * max(1.0, abs(evals).max()):
        raise NotPSD(f"smallest eigenvalue {evals.min():.3g} is negative")
    evals = np.clip(evals, 0.0, None)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def draw_correlated(n_r, n_t, delta, rng, delta_rx=None):
    """Kronecker-correlated channel ``R_rx^{1/2} H R_tx^{1/2}``.

    ``delta`` applies to the transmitter side and, unless ``delta_rx`` is
    given, to the receiver side as well.
    """
    if delta_rx is None:
        delta_rx = delta
    h = draw_iid(n_r, n_t, rng)
    if delta == 0 and delta_rx == 0:
        return h
    rx = psd_sqrt(correlation_matrix(n_r, delta_rx))
    tx = psd_sqrt(correlation_matrix(n_t, delta))
    return rx @ h @ tx


@dataclass(frozen=True)
class NoiseModel:
    sigma2: float

    @classmethod
    def from_snr_db(cls, rho_db, n_a):
        return cls(snr_to_sigma2(rho_db, n_a))


def snr_to_sigma2(rho_db, n_a):
    """Noise variance giving average SNR ``n_a / sigma2`` per receive antenna."""
    return n_a / 10.0 ** (rho_db / 10.0)


def draw_noise(n_r, noise, rng, size=None):
    """Complex AWGN with total variance ``sigma2`` per entry."""
    sigma2 = noise.sigma2 if isinstance(noise, NoiseModel) else float(noise)
    shape = (n_r,) if size is None else (*np.atleast_1d(size), n_r)
    g = rng.standard_normal((*shape, 2))
    return (g[..., 0] + 1j * g[..., 1]) * np.sqrt(sigma2 / 2.0)


class ChannelRealization:
    """One channel matrix with lazily cached per-combination detection aids.

    The cached quantities depend on the channel only and are reused by
    every channel use that shares the realization. Their one-off cost is
    tallied in :attr:`prep_flops` under ``"zf"`` (Gram factorization and
    zero-forcing matrix), ``"lll"`` (lattice reduction) and ``"ml"`` (the
    table of noiseless received vectors).
    """

    def __init__(self, h, table, lll_delta=LLL_DELTA):
        h = np.asarray(h, dtype=complex)
        if h.shape[1] != table.n_t:
            raise ValueError(f"channel has {h.shape[1]} columns, table expects {table.n_t}")
        self.h = h
        self.table = table
        self.lll_delta = lll_delta
        self.n_r = h.shape[0]
        self.submatrices = np.ascontiguousarray(
            np.transpose(h[:, table.combo_array], (1, 0, 2)))
        self.submatrices.setflags(write=False)
        self.prep_flops = {"zf": 0, "lll": 0, "ml": 0}
        self._factors = {}
        self._zf = {}
        self._reduced = {}
        self._ml = {}

    def submatrix(self, i):
        return self.submatrices[i]

    def gram_factor(self, i):
        """Cached :class:`GramFactor` of combination ``i``, or raise SingularGram."""
        if i not in self._factors:
            try:
                self._factors[i] = GramFactor(self.submatrices[i])
            except SingularGram as exc:
                self._factors[i] = exc
            finally:
                self.prep_flops["zf"] += zf_matrix_cost(self.n_r, self.table.n_a)
        f = self._factors[i]
        if isinstance(f, Exception):
            raise f
        return f

    def zf_matrix(self, i):
        """Zero-forcing equalizer of combination ``i`` (n_a x n_r)."""
        if i not in self._zf:
            self._zf[i] = self.gram_factor(i).zf_matrix()
        return self._zf[i]

    def reduced(self, i):
        """Cached LLL reduction of combination ``i``, or raise RankDeficient."""
        if i not in self._reduced:
            try:
                rb = lll_reduce(self.submatrices[i], delta=self.lll_delta)
                self.prep_flops["lll"] += rb.flops
            except RankDeficient as exc:
                rb = exc
            self._reduced[i] = rb
        rb = self._reduced[i]
        if isinstance(rb, Exception):
            raise rb
        return rb

    def prepare(self):
        """Compute every per-combination aid used by the list detectors."""
        for i in range(self.table.n_c):
            for fn in (self.zf_matrix, self.reduced):
                try:
                    fn(i)
                except (SingularGram, RankDeficient):
                    pass
        return self

    def ml_table(self, c):
        """Noiseless received vectors for every (combination, symbol vector).

        Row ``k * M**n_a + sum(label_a * M**(n_a-1-a))`` holds
        ``H_k @ x`` for the symbols with those labels.
        """
        key = c.order
        if key not in self._ml:
            n_a, order = self.table.n_a, c.order
            labels = _label_grid(order, n_a)
            sym = c.points[labels]
            rows = [matvec(self.submatrices[k], sym) for k in range(self.table.n_c)]
            self._ml[key] = (np.concatenate(rows), labels)
            n_rows = self.table.n_c * order ** n_a
            self.prep_flops["ml"] += n_rows * matvec_cost(self.n_r, n_a)
        return self._ml[key]


def _label_grid(order, n_a):
    """All label tuples in lexicographic order, shape (order**n_a, n_a)."""
    grids = np.indices((order,) * n_a).reshape(n_a, -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)
