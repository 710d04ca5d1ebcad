"""Complex LLL reduction with exact Gaussian-integer transforms.

The reduction works on the R factor of a modified Gram-Schmidt QR of the
basis. Every column operation applied to ``T`` is mirrored as the inverse
row operation on ``T^{-1}``, so the inverse is exact integer arithmetic
and ``T @ T^{-1} = I`` holds without any floating-point inversion.
"""

from dataclasses import dataclass
import math

import numpy as np

from .numerics import OP_COST, PIVOT_TOL, norm_sq_cost

__all__ = [
    "LLL_DELTA",
    "RankDeficient",
    "ReducedBasis",
    "lll_reduce",
    "mgs_qr",
    "orthogonality_defect",
    "verify_reduced",
]

LLL_DELTA = 0.75
MAX_LLL_STEPS = 10_000

# per-event charges; the compiled core uses the same numbers
SIZE_TEST_COST = OP_COST["cdiv"] + 2
LOVASZ_COST = 3 * 3 + 2
GIVENS_SETUP_COST = 7 + OP_COST["sqrt"] + 1 + 4
GIVENS_COLUMN_COST = 4 * OP_COST["cmul"] + 2 * OP_COST["cadd"]


class RankDeficient(np.linalg.LinAlgError):
    """Basis columns are (numerically) linearly dependent."""


@dataclass(frozen=True, eq=False)
class ReducedBasis:
    h_tilde: np.ndarray
    t: np.ndarray
    t_inv: np.ndarray
    flops: int = 0
    swaps: int = 0


def mgs_cost(rows, cols):
    per_pair = (rows * OP_COST["cmul"] + (rows - 1) * OP_COST["cadd"]
                + rows * (OP_COST["cmul"] + OP_COST["csub"]))
    per_col = norm_sq_cost(rows) + OP_COST["sqrt"] + 1 + 2 * rows
    return cols * (cols - 1) // 2 * per_pair + cols * per_col


def mgs_qr(h):
    """Thin QR by modified Gram-Schmidt; ``r`` has a real positive diagonal."""
    h = np.asarray(h, dtype=complex)
    rows, cols = h.shape
    if rows < cols:
        raise RankDeficient(f"{rows}x{cols} basis cannot have full column rank")
    q = h.copy()
    r = np.zeros((cols, cols), dtype=complex)
    scale = max(np.linalg.norm(h, axis=0).max(), np.finfo(float).tiny)
    for j in range(cols):
        for i in range(j):
            r[i, j] = np.vdot(q[:, i], q[:, j])
            q[:, j] -= r[i, j] * q[:, i]
        nrm = np.linalg.norm(q[:, j])
        if not nrm > PIVOT_TOL * scale:
            raise RankDeficient(f"column {j} is linearly dependent")
        r[j, j] = nrm
        q[:, j] *= 1.0 / nrm
    return q, r


def lll_reduce(h, delta=LLL_DELTA, counter=None):
    """LLL-reduce the columns of ``h`` over the Gaussian integers.

    Returns a :class:`ReducedBasis` with ``h_tilde = h @ t``. When a
    ``counter`` is given it is charged for the QR and for every size
    reduction, Lovász test and Givens swap actually performed.
    """
    h = np.asarray(h, dtype=complex)
    n = h.shape[1]
    _, r_mat = mgs_qr(h)
    flops = mgs_cost(*h.shape)

    R = [[complex(v) for v in row] for row in r_mat]
    T = [[complex(i == j) for j in range(n)] for i in range(n)]
    Ti = [[complex(i == j) for j in range(n)] for i in range(n)]
    cmul_sub = OP_COST["cmul"] + OP_COST["csub"]
    swaps = 0
    steps = 0
    k = 1
    while k < n:
        steps += 1
        if steps > MAX_LLL_STEPS:
            raise RankDeficient("LLL did not converge")
        for l in range(k - 1, -1, -1):
            rll = R[l][l]
            den = rll.real * rll.real + rll.imag * rll.imag
            num = R[l][k] * rll.conjugate()
            mu = complex(round(num.real / den), round(num.imag / den))
            flops += SIZE_TEST_COST
            if mu == 0:
                continue
            for i in range(l + 1):
                R[i][k] = R[i][k] - mu * R[i][l]
            for i in range(n):
                T[i][k] = T[i][k] - mu * T[i][l]
                Ti[l][i] = Ti[l][i] + mu * Ti[k][i]
            flops += (l + 1) * cmul_sub + 2 * n * cmul_sub

        a, b, c = R[k - 1][k - 1], R[k][k], R[k - 1][k]
        lhs = delta * (a.real * a.real + a.imag * a.imag)
        rhs = (b.real * b.real + b.imag * b.imag) + (c.real * c.real + c.imag * c.imag)
        flops += LOVASZ_COST
        if not lhs > rhs:
            k += 1
            continue

        swaps += 1
        for row in R:
            row[k - 1], row[k] = row[k], row[k - 1]
        for row in T:
            row[k - 1], row[k] = row[k], row[k - 1]
        Ti[k - 1], Ti[k] = Ti[k], Ti[k - 1]
        a, b = R[k - 1][k - 1], R[k][k - 1]
        rho = math.sqrt((a.real * a.real + a.imag * a.imag)
                        + (b.real * b.real + b.imag * b.imag))
        inv = 1.0 / rho
        ca, cb = a * inv, b * inv
        R[k - 1][k - 1] = complex(rho)
        R[k][k - 1] = 0j
        for col in range(k, n):
            u, v = R[k - 1][col], R[k][col]
            R[k - 1][col] = ca.conjugate() * u + cb.conjugate() * v
            R[k][col] = -cb * u + ca * v
        flops += GIVENS_SETUP_COST + (n - k) * GIVENS_COLUMN_COST
        k = max(k - 1, 1)

    t = np.array(T, dtype=complex)
    t_inv = np.array(Ti, dtype=complex)
    if counter is not None:
        counter.add(flops)
    return ReducedBasis(h @ t, t, t_inv, flops=flops, swaps=swaps)


def verify_reduced(rb, delta_lll=LLL_DELTA, tol=1e-9):
    """Check size reduction and the Lovász condition on ``rb.h_tilde``.

    Uses an independent Householder QR, not the factorization the
    reduction itself worked on.
    """
    h = rb.h_tilde if isinstance(rb, ReducedBasis) else np.asarray(rb)
    r = np.linalg.qr(np.asarray(h, dtype=complex), mode="r")
    n = r.shape[1]
    for k in range(1, n):
        for l in range(k):
            mu = r[l, k] / r[l, l]
            if abs(mu.real) > 0.5 + tol or abs(mu.imag) > 0.5 + tol:
                return False
        lhs = delta_lll * abs(r[k - 1, k - 1]) ** 2
        rhs = abs(r[k, k]) ** 2 + abs(r[k - 1, k]) ** 2
        if lhs > rhs * (1 + tol):
            return False
    return True


def orthogonality_defect(h):
    """prod of column norms over sqrt(det(h^H h)); 1 for orthogonal bases."""
    h = np.asarray(h, dtype=complex)
    gram = h.conj().T @ h
    det = abs(np.linalg.det(gram))
    return float(np.prod(np.linalg.norm(h, axis=0)) / np.sqrt(det))

