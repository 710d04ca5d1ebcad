"""Square QAM constellations with per-axis Gray labels.

A symbol label is the integer formed by the symbol's bits, most
significant first: the upper half of the bits is the Gray code of the
in-phase level, the lower half that of the quadrature level. Every point
is ``scale * d + offset`` for a Gaussian integer ``d`` inside the
``side x side`` box, which is what the lattice-reduced quantizer relies on.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BadLength",
    "Constellation",
    "NotAConstellationPoint",
    "UnsupportedOrder",
    "demap",
    "label_of",
    "make_constellation",
    "map_bits",
    "quantize",
    "quantize_index",
    "quantize_lr",
]

SUPPORTED_ORDERS = (4, 16, 64)


class UnsupportedOrder(ValueError):
    pass


class BadLength(ValueError):
    pass


class NotAConstellationPoint(ValueError):
    pass


def _gray(n):
    return n ^ (n >> 1)


@dataclass(frozen=True, eq=False)
class Constellation:
    order: int
    side: int
    bits_per_symbol: int
    scale: float
    offset: complex
    points: np.ndarray = field(repr=False)
    # label of the point with integer coordinates (i, q): label_grid[i, q]
    label_grid: np.ndarray = field(repr=False)
    # integer coordinates of each label
    coord_i: np.ndarray = field(repr=False)
    coord_q: np.ndarray = field(repr=False)

    @property
    def name(self):
        return "QPSK" if self.order == 4 else f"{self.order}QAM"


def make_constellation(order):
    """Unit-energy Gray-labeled square QAM of the given order."""
    if order not in SUPPORTED_ORDERS:
        raise UnsupportedOrder(f"unsupported constellation order {order!r}; "
                               f"choose one of {SUPPORTED_ORDERS}")
    side = int(round(np.sqrt(order)))
    axis_bits = side.bit_length() - 1
    # mean |2d - (side - 1)|^2 over both axes is 2 (M - 1) / 3
    norm = np.sqrt(2.0 * (order - 1) / 3.0)
    scale = 2.0 / norm
    offset = -(side - 1) * (1 + 1j) / norm

    label_grid = np.empty((side, side), dtype=np.int64)
    coord_i = np.empty(order, dtype=np.int64)
    coord_q = np.empty(order, dtype=np.int64)
    for di in range(side):
        for dq in range(side):
            lab = (_gray(di) << axis_bits) | _gray(dq)
            label_grid[di, dq] = lab
            coord_i[lab] = di
            coord_q[lab] = dq
    points = scale * (coord_i + 1j * coord_q) + offset
    for arr in (points, label_grid, coord_i, coord_q):
        arr.setflags(write=False)
    return Constellation(order, side, 2 * axis_bits, scale, complex(offset),
                         points, label_grid, coord_i, coord_q)


def _bits_to_int(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def map_bits(c, bits):
    """Map ``bits_per_symbol`` bits to their constellation point."""
    bits = list(bits)
    if len(bits) != c.bits_per_symbol:
        raise BadLength(f"expected {c.bits_per_symbol} bits, got {len(bits)}")
    return complex(c.points[_bits_to_int(bits)])


def label_of(c, point, tol=1e-9):
    """Label of an exact constellation point."""
    u = (complex(point) - c.offset) / c.scale
    di, dq = int(round(u.real)), int(round(u.imag))
    if (not (0 <= di < c.side and 0 <= dq < c.side)
            or abs(u - complex(di, dq)) > tol):
        raise NotAConstellationPoint(f"{point!r} is not a point of {c.name}")
    return int(c.label_grid[di, dq])


def demap(c, point):
    """Inverse of :func:`map_bits`."""
    lab = label_of(c, point)
    n = c.bits_per_symbol
    return [(lab >> (n - 1 - i)) & 1 for i in range(n)]


def quantize_index(c, v):
    """Label of the nearest point; ties go to the smaller (real, imag)."""
    v = np.asarray(v, dtype=complex)
    u_re = (v.real - c.offset.real) / c.scale
    u_im = (v.imag - c.offset.imag) / c.scale
    # ceil(u - 1/2) sends exact half-way values to the lower level
    di = np.clip(np.ceil(u_re - 0.5), 0, c.side - 1).astype(np.int64)
    dq = np.clip(np.ceil(u_im - 0.5), 0, c.side - 1).astype(np.int64)
    return c.label_grid[di, dq]


def quantize(c, v):
    """Nearest constellation point to ``v`` (scalar or array)."""
    out = c.points[quantize_index(c, v)]
    return complex(out) if np.ndim(out) == 0 else out


def quantize_lr(c, z_tilde, t_inv):
    """Quantize an equalized vector in the lattice-reduced domain.

    With ``x = scale * d + offset * 1`` the reduced-domain symbol is
    ``T^{-1} x = scale * (T^{-1} d) + offset * T^{-1} 1``, so the shift is
    removed, the remainder rounded to the nearest Gaussian integer (half
    to even, per coordinate) and the shift restored. No clipping is done
    here.
    """
    z_tilde = np.asarray(z_tilde, dtype=complex)
    t_inv = np.asarray(t_inv, dtype=complex)
    shift = c.offset * t_inv.sum(axis=1)
    u = (z_tilde - shift) / c.scale
    d = np.rint(u.real) + 1j * np.rint(u.imag)
    return c.scale * d + shift
