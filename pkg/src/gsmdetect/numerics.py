"""Complex linear-algebra kernels with FLOP accounting.

Matrices and vectors are plain ``complex128`` numpy arrays. Products that
feed residual comparisons go through :func:`matvec` and :func:`norm_sq`,
which fix the order of every real operation so that two detectors scoring
the same candidate obtain bit-identical distances.
"""

import numpy as np
import scipy.linalg

__all__ = [
    "OP_COST",
    "PIVOT_TOL",
    "FlopCounter",
    "GramFactor",
    "SingularGram",
    "flops_charge",
    "hermitian",
    "matvec",
    "norm_sq",
    "project",
    "solve_gram",
]

#: Real floating-point operations charged per primitive.
OP_COST = {
    "cmul": 6,
    "cadd": 2,
    "csub": 2,
    "rmul": 1,
    "radd": 1,
    "cdiv": 11,
    "sqrt": 1,
}

#: A Gram matrix is numerically singular below this pivot ratio.
PIVOT_TOL = 1e-12


class SingularGram(np.linalg.LinAlgError):
    """Gram matrix of a channel submatrix is numerically singular."""


class FlopCounter:
    """Running total of real floating-point operations."""

    __slots__ = ("total",)

    def __init__(self, total=0):
        self.total = int(total)

    def charge(self, op_kind, count=1):
        self.total += OP_COST[op_kind] * int(count)

    def add(self, flops):
        """Add a precomputed operation total."""
        self.total += int(flops)

    def reset(self):
        self.total = 0

    def __repr__(self):
        return f"FlopCounter(total={self.total})"


def flops_charge(counter, op_kind, count):
    counter.charge(op_kind, count)


def hermitian(m):
    """Conjugate transpose, returned as a new contiguous array."""
    m = np.asarray(m)
    return np.ascontiguousarray(np.conj(m).T)


# ---------------------------------------------------------------------------
# Deterministic products
# ---------------------------------------------------------------------------

def matvec(h, x):
    """Return ``h @ x`` with a fixed column-accumulation order.

    ``x`` may carry leading batch axes: shape ``(..., n_cols)`` gives a
    result of shape ``(..., n_rows)``.
    """
    h = np.asarray(h, dtype=complex)
    x = np.asarray(x, dtype=complex)
    hr, hi = h.real, h.imag
    xr, xi = x.real[..., None, :], x.imag[..., None, :]
    re = hr[:, 0] * xr[..., 0] - hi[:, 0] * xi[..., 0]
    im = hr[:, 0] * xi[..., 0] + hi[:, 0] * xr[..., 0]
    for a in range(1, h.shape[1]):
        re = re + (hr[:, a] * xr[..., a] - hi[:, a] * xi[..., a])
        im = im + (hr[:, a] * xi[..., a] + hi[:, a] * xr[..., a])
    return re + 1j * im


def norm_sq(v):
    """Squared Euclidean norm over the last axis, accumulated in order."""
    v = np.asarray(v, dtype=complex)
    re, im = v.real, v.imag
    acc = re[..., 0] * re[..., 0] + im[..., 0] * im[..., 0]
    for r in range(1, v.shape[-1]):
        acc = acc + (re[..., r] * re[..., r] + im[..., r] * im[..., r])
    return acc


# ---------------------------------------------------------------------------
# Nominal operation counts
# ---------------------------------------------------------------------------

def matvec_cost(rows, cols):
    return rows * cols * OP_COST["cmul"] + rows * (cols - 1) * OP_COST["cadd"]


def norm_sq_cost(n):
    return 3 * n - 1


def trisolve_cost(n):
    # row i: i multiply-subtracts, then scale by a stored real reciprocal
    return sum(i * (OP_COST["cmul"] + OP_COST["csub"]) + 2 for i in range(n))


def cholesky_cost(n):
    total = 0
    for j in range(n):
        total += 3 * j + 1 + OP_COST["sqrt"] + 1
        total += (n - 1 - j) * (j * (OP_COST["cmul"] + OP_COST["csub"]) + 2)
    return total


def gram_cost(rows, cols):
    return cols * cols * (rows * OP_COST["cmul"] + (rows - 1) * OP_COST["cadd"])


def zf_matrix_cost(rows, cols):
    """Cost of forming ``(h^H h)^{-1} h^H`` for an ``rows x cols`` h."""
    return gram_cost(rows, cols) + cholesky_cost(cols) + rows * 2 * trisolve_cost(cols)


# ---------------------------------------------------------------------------
# Gram factorization
# ---------------------------------------------------------------------------

class GramFactor:
    """Factorization of ``h^H h`` for least-squares solves against ``h``.

    Cholesky is used unless its pivot ratio falls below
    :data:`PIVOT_TOL`, in which case a column-pivoted QR of ``h`` takes
    over.

    Raises
    ------
    SingularGram
        If the QR fallback is itself rank deficient, or ``h`` has more
        columns than rows.
    """

    def __init__(self, h):
        h = np.asarray(h, dtype=complex)
        if h.ndim != 2 or h.shape[0] < h.shape[1]:
            raise SingularGram(f"need rows >= cols, got shape {h.shape}")
        self.h = h
        self.method = "cholesky"
        gram = hermitian(h) @ h
        try:
            chol = np.linalg.cholesky(gram)
            piv = np.real(np.diag(chol)) ** 2
            if not np.all(np.isfinite(piv)) or not piv.min() > PIVOT_TOL * piv.max():
                raise np.linalg.LinAlgError("ill-conditioned Cholesky pivots")
            self._chol = chol
        except np.linalg.LinAlgError:
            self._qr_fallback()

    def _qr_fallback(self):
        self.method = "qr"
        self._chol = None
        q, r, perm = scipy.linalg.qr(self.h, mode="economic", pivoting=True)
        rdiag = np.abs(np.diag(r))
        if rdiag.size == 0 or not rdiag.min() > PIVOT_TOL * rdiag.max():
            raise SingularGram("Gram matrix is numerically singular")
        self._q, self._r, self._perm = q, r, perm

    def solve(self, rhs):
        """Return ``(h^H h)^{-1} h^H rhs``; ``rhs`` may be a matrix."""
        rhs = np.asarray(rhs, dtype=complex)
        if self._chol is not None:
            b = hermitian(self.h) @ rhs
            u = scipy.linalg.solve_triangular(self._chol, b, lower=True)
            return scipy.linalg.solve_triangular(self._chol, u, lower=True, trans="C")
        z = scipy.linalg.solve_triangular(self._r, hermitian(self._q) @ rhs)
        out = np.empty_like(z)
        out[self._perm] = z
        return out

    def zf_matrix(self):
        """The zero-forcing equalizer ``(h^H h)^{-1} h^H``."""
        return self.solve(np.eye(self.h.shape[0], dtype=complex))


def solve_gram(h, rhs, factor=None, counter=None):
    """Least-squares solution ``(h^H h)^{-1} h^H rhs``.

    Parameters
    ----------
    h : (n_r, n_a) complex array
        Full column rank channel matrix.
    rhs : (n_r,) complex array
    factor : GramFactor, optional
        Cached factorization of ``h``; built on the fly when omitted.
    counter : FlopCounter, optional
        Charged for the per-solve work (the factorization is not charged).
    """
    if factor is None:
        factor = GramFactor(h)
    rows, cols = factor.h.shape
    if counter is not None:
        counter.add(matvec_cost(cols, rows) + 2 * trisolve_cost(cols))
    return factor.solve(rhs)


def project(h, y, factor=None, counter=None):
    """Orthogonal projection of ``y`` onto the column space of ``h``.

    Computed as ``h @ solve_gram(h, y)``; the n_r x n_r projector is never
    formed.
    """
    h = np.asarray(h, dtype=complex)
    w = solve_gram(h, y, factor=factor, counter=counter)
    if counter is not None:
        counter.add(matvec_cost(*h.shape))
    return h @ w
