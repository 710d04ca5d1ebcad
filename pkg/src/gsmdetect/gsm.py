"""Generalized spatial modulation codec.

Only the first ``n_c`` antenna combinations in lexicographic order are
used, ``n_c`` being the largest power of two not above C(n_t, n_a). The
leading ``log2(n_c)`` bits of a channel use select the combination as a
big-endian binary index (not Gray coded); the remaining bits are split
into per-antenna symbols in combination order. Both conventions change
measured BER and are fixed here for reproducibility.
"""

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations, islice
from math import comb

import numpy as np

from .modulation import BadLength, label_of, make_constellation

__all__ = [
    "BadGeometry",
    "BadIndex",
    "GsmMappingTable",
    "SystemConfig",
    "build_table",
    "decode",
    "encode",
    "reconstruct",
]


class BadGeometry(ValueError):
    pass


class BadIndex(IndexError):
    pass


@dataclass(frozen=True, eq=False)
class GsmMappingTable:
    n_t: int
    n_a: int
    n_c: int
    combos: tuple
    spatial_bits: int

    @cached_property
    def combo_array(self):
        arr = np.array(self.combos, dtype=np.int64).reshape(self.n_c, self.n_a)
        arr.setflags(write=False)
        return arr

    def bits_per_use(self, order):
        return self.spatial_bits + self.n_a * (int(order).bit_length() - 1)


def build_table(n_t, n_a):
    """Mapping table for ``n_a`` active antennas out of ``n_t``."""
    if not (1 <= n_a <= n_t):
        raise BadGeometry(f"need 1 <= n_a <= n_t, got n_t={n_t}, n_a={n_a}")
    total = comb(n_t, n_a)
    if total < 2:
        raise BadGeometry(f"C({n_t},{n_a}) = {total} leaves no spatial bits")
    spatial_bits = total.bit_length() - 1
    n_c = 1 << spatial_bits
    combos = tuple(islice(combinations(range(n_t), n_a), n_c))
    return GsmMappingTable(n_t, n_a, n_c, combos, spatial_bits)


def _to_int(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _to_bits(value, width):
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def encode(table, c, bits):
    """Split one channel use worth of bits into ``(k, x, s)``.

    Returns the combination index, the ``n_a`` transmitted symbols and the
    sparse ``n_t``-length transmit vector.
    """
    bits = [int(b) for b in bits]
    expected = table.spatial_bits + table.n_a * c.bits_per_symbol
    if len(bits) != expected:
        raise BadLength(f"expected {expected} bits, got {len(bits)}")
    k = _to_int(bits[:table.spatial_bits])
    bps = c.bits_per_symbol
    labels = [_to_int(bits[table.spatial_bits + a * bps:
                           table.spatial_bits + (a + 1) * bps])
              for a in range(table.n_a)]
    x = c.points[labels].astype(complex)
    return k, x, reconstruct(table, k, x)


def reconstruct(table, k_hat, x_hat):
    """Scatter ``x_hat`` onto the antennas of combination ``k_hat``."""
    if not (0 <= k_hat < table.n_c):
        raise BadIndex(f"combination index {k_hat} outside [0, {table.n_c})")
    x_hat = np.asarray(x_hat, dtype=complex)
    if x_hat.shape != (table.n_a,):
        raise BadLength(f"expected {table.n_a} symbols, got shape {x_hat.shape}")
    s = np.zeros(table.n_t, dtype=complex)
    s[list(table.combos[k_hat])] = x_hat
    return s


def decode(table, c, k_hat, x_hat):
    """Inverse of :func:`encode` on its image."""
    if not (0 <= k_hat < table.n_c):
        raise BadIndex(f"combination index {k_hat} outside [0, {table.n_c})")
    bits = _to_bits(int(k_hat), table.spatial_bits)
    for v in np.asarray(x_hat, dtype=complex):
        bits += _to_bits(label_of(c, v), c.bits_per_symbol)
    return bits


@dataclass(frozen=True)
class SystemConfig:
    """Antenna geometry and constellation order of one GSM link."""

    n_t: int
    n_a: int
    n_r: int
    order: int = 4

    def __post_init__(self):
        if self.n_r < self.n_a:
            raise BadGeometry("N_R >= N_A required")
        # validates geometry and order eagerly
        build_table(self.n_t, self.n_a)
        make_constellation(self.order)

    @cached_property
    def table(self):
        return build_table(self.n_t, self.n_a)

    @cached_property
    def constellation(self):
        return make_constellation(self.order)

    @property
    def n_c(self):
        return self.table.n_c

    @property
    def bits_per_use(self):
        return self.table.bits_per_use(self.order)
