# -*- coding: utf-8 -*-

"""
Code tables, bit-packing, canonicalization and combinatorial ranking.

Codes are always unsigned indices in ``[0, 2**bitwidth)``; whatever numeric
value a code stands for lives in a ``CodeTable``. This keeps the lookup
tables independent of the number format, only the bitwidths matter.

Packing puts element 0 in the most significant bits, so the vector
``[3, 0, 2]`` at 3 bits packs to ``0b011_000_010``.

Permutations are ranked by their Lehmer code (lexicographic order), and
sorted code tuples (multisets) by their position in the lexicographic order
of non-decreasing tuples, which gives a dense index into the
``C(S + p - 1, p)`` columns of a canonical LUT.

License: See the LICENSE file.

"""

import itertools
import math

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import (
    CodeOutOfRange,
    InvalidScale,
    NotAPermutation,
    NotSorted,
    PackTooWide,
    RankOutOfRange,
)

MAX_PACK_BITS = 64
MAX_BITWIDTH = 8


@dataclass(frozen=True)
class CodeTable:
    """Decode map from b-bit codes to signed integer values."""

    bitwidth: int
    values: Tuple[int, ...]
    zero_code: Optional[int] = None

    def __post_init__(self):
        if not 1 <= self.bitwidth <= MAX_BITWIDTH:
            raise ValueError(
                "Bitwidth must be in [1, %d], got %r"
                % (MAX_BITWIDTH, self.bitwidth)
            )
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if len(self.values) != 1 << self.bitwidth:
            raise ValueError(
                "A %d-bit code table needs %d values, got %d"
                % (self.bitwidth, 1 << self.bitwidth, len(self.values))
            )
        if self.zero_code is not None:
            if not 0 <= self.zero_code < len(self.values):
                raise CodeOutOfRange(self.zero_code, self.bitwidth)
            if self.values[self.zero_code] != 0:
                raise ValueError(
                    "zero_code %d decodes to %d, not 0"
                    % (self.zero_code, self.values[self.zero_code])
                )

    @classmethod
    def unsigned(cls, bitwidth):
        """Identity table: code c stands for the integer c."""
        return cls(bitwidth, tuple(range(1 << bitwidth)), zero_code=0)

    @classmethod
    def symmetric(cls, bitwidth):
        """Signed table. One bit gives {-1, +1} (no zero), wider tables use
        the two's complement range with code ``2**(b-1)`` as zero."""
        if bitwidth == 1:
            return cls(1, (-1, 1), zero_code=None)
        half = 1 << (bitwidth - 1)
        return cls(bitwidth, tuple(range(-half, half)), zero_code=half)

    @classmethod
    def from_dict(cls, data):
        return cls(
            int(data["bitwidth"]),
            tuple(data["values"]),
            zero_code=data.get("zero_code"),
        )

    def to_dict(self):
        return {
            "bitwidth": self.bitwidth,
            "values": list(self.values),
            "zero_code": self.zero_code,
        }

    @property
    def size(self):
        return len(self.values)

    @property
    def array(self):
        return np.asarray(self.values, dtype=np.int64)

    @property
    def max_abs(self):
        return max(abs(v) for v in self.values)

    def decode(self, codes):
        return self.array[np.asarray(codes, dtype=np.int64)]


@dataclass(frozen=True, eq=False)
class CodeMatrix:
    """Row-major matrix of b-bit codes."""

    data: np.ndarray
    bitwidth: int

    def __post_init__(self):
        data = np.array(self.data, dtype=np.int64, ndmin=2)
        if data.ndim != 2:
            raise ValueError("CodeMatrix data must be two-dimensional")
        if data.size and (data.min() < 0 or data.max() >= 1 << self.bitwidth):
            bad = data[(data < 0) | (data >= 1 << self.bitwidth)][0]
            raise CodeOutOfRange(int(bad), self.bitwidth)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def empty(cls, rows, cols, bitwidth):
        return cls(np.zeros((rows, cols), dtype=np.int64), bitwidth)

    @classmethod
    def random(cls, rows, cols, bitwidth, rng):
        """Uniform codes over ``[0, 2**bitwidth)`` drawn from ``rng``."""
        return cls(rng.integers(0, 1 << bitwidth, size=(rows, cols)), bitwidth)

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    def __eq__(self, other):
        if not isinstance(other, CodeMatrix):
            return NotImplemented
        return self.bitwidth == other.bitwidth and np.array_equal(
            self.data, other.data
        )


@dataclass(frozen=True)
class PackedVector:
    p: int
    bitwidth: int
    bits: int


@dataclass(frozen=True)
class CanonVector:
    sorted_codes: Tuple[int, ...]
    multiset_rank: int
    perm_rank: int
    perm: Tuple[int, ...]


def _check_width(p, bitwidth):
    if p < 1 or p * bitwidth > MAX_PACK_BITS:
        raise PackTooWide(p, bitwidth, MAX_PACK_BITS)


def _check_codes(codes, bitwidth):
    limit = 1 << bitwidth
    for c in codes:
        if not 0 <= c < limit:
            raise CodeOutOfRange(c, bitwidth)


def pack(codes, bitwidth):
    codes = [int(c) for c in codes]
    _check_width(len(codes), bitwidth)
    _check_codes(codes, bitwidth)
    bits = 0
    for c in codes:
        bits = (bits << bitwidth) | c
    return PackedVector(len(codes), bitwidth, bits)


def unpack(vector):
    mask = (1 << vector.bitwidth) - 1
    return [
        (vector.bits >> ((vector.p - 1 - i) * vector.bitwidth)) & mask
        for i in range(vector.p)
    ]


def pack_array(codes, bitwidth):
    """Pack the last axis of an integer array; returns uint64 indices."""
    codes = np.asarray(codes)
    _check_width(codes.shape[-1], bitwidth)
    bits = np.zeros(codes.shape[:-1], dtype=np.uint64)
    shift = np.uint64(bitwidth)
    for i in range(codes.shape[-1]):
        bits = (bits << shift) | codes[..., i].astype(np.uint64)
    return bits


def unpack_array(bits, p, bitwidth):
    """Inverse of :func:`pack_array`, adding a trailing axis of length p."""
    _check_width(p, bitwidth)
    bits = np.asarray(bits, dtype=np.uint64)
    mask = np.uint64((1 << bitwidth) - 1)
    out = np.empty(bits.shape + (p,), dtype=np.int64)
    for i in range(p):
        shift = np.uint64((p - 1 - i) * bitwidth)
        out[..., i] = ((bits >> shift) & mask).astype(np.int64)
    return out


def perm_count(p):
    return math.factorial(p)


def _check_perm(perm):
    if sorted(perm) != list(range(len(perm))):
        raise NotAPermutation(perm)


def perm_rank(perm):
    """Lexicographic rank of a permutation (Lehmer code)."""
    perm = [int(x) for x in perm]
    _check_perm(perm)
    p = len(perm)
    rank = 0
    for i in range(p):
        smaller = sum(1 for j in range(i + 1, p) if perm[j] < perm[i])
        rank += smaller * math.factorial(p - 1 - i)
    return rank


def perm_unrank(rank, p):
    count = math.factorial(p)
    if not 0 <= rank < count:
        raise RankOutOfRange(rank, count)
    remaining = list(range(p))
    perm = []
    for i in range(p):
        f = math.factorial(p - 1 - i)
        digit, rank = divmod(rank, f)
        perm.append(remaining.pop(digit))
    return tuple(perm)


def perm_rank_array(perms):
    """Vectorised :func:`perm_rank` over the rows of an (n, p) array.

    Rows are assumed to be valid permutations.
    """
    perms = np.asarray(perms, dtype=np.int64)
    p = perms.shape[-1]
    rank = np.zeros(perms.shape[:-1], dtype=np.int64)
    for i in range(p):
        smaller = (perms[..., i + 1 :] < perms[..., i : i + 1]).sum(axis=-1)
        rank += smaller * math.factorial(p - 1 - i)
    return rank


def apply_perm(codes, perm):
    """Return ``[codes[perm[0]], ..., codes[perm[p-1]]]``."""
    return [codes[j] for j in perm]


def all_perms(p):
    """Every permutation of ``range(p)`` in rank order."""
    return itertools.permutations(range(p))


def multiset_count(alphabet, p):
    """Number of multisets of size p over an alphabet of the given size."""
    return math.comb(alphabet + p - 1, p)


def _suffix_count(alphabet, v, r):
    # non-decreasing tuples of length r with every value in [v, alphabet)
    return math.comb(alphabet - v + r - 1, r)


def multiset_rank(sorted_codes, alphabet):
    codes = [int(c) for c in sorted_codes]
    for c in codes:
        if not 0 <= c < alphabet:
            raise CodeOutOfRange(c, max(1, (alphabet - 1).bit_length()))
    if any(a > b for a, b in zip(codes, codes[1:])):
        raise NotSorted(codes)
    p = len(codes)
    rank = 0
    low = 0
    for i, c in enumerate(codes):
        r = p - 1 - i
        for v in range(low, c):
            rank += _suffix_count(alphabet, v, r)
        low = c
    return rank


def multiset_unrank(rank, p, alphabet):
    count = multiset_count(alphabet, p)
    if not 0 <= rank < count:
        raise RankOutOfRange(rank, count)
    codes = []
    v = 0
    for i in range(p):
        r = p - 1 - i
        while rank >= _suffix_count(alphabet, v, r):
            rank -= _suffix_count(alphabet, v, r)
            v += 1
        codes.append(v)
    return tuple(codes)


def all_multisets(alphabet, p):
    """Every sorted tuple in rank order."""
    return itertools.combinations_with_replacement(range(alphabet), p)


def _prefix_table(alphabet, p):
    # table[i, v] = sum over u < v of the suffix count at position i
    table = np.zeros((p, alphabet + 1), dtype=np.int64)
    for i in range(p):
        r = p - 1 - i
        for v in range(alphabet):
            table[i, v + 1] = table[i, v] + _suffix_count(alphabet, v, r)
    return table


def multiset_rank_array(sorted_codes, alphabet):
    """Vectorised :func:`multiset_rank` over the rows of an (n, p) array.

    Rows are assumed to be sorted and in range.
    """
    sorted_codes = np.asarray(sorted_codes, dtype=np.int64)
    p = sorted_codes.shape[-1]
    table = _prefix_table(alphabet, p)
    rank = np.zeros(sorted_codes.shape[:-1], dtype=np.int64)
    low = np.zeros_like(rank)
    for i in range(p):
        c = sorted_codes[..., i]
        rank += table[i, c] - table[i, low]
        low = c
    return rank


def canonicalize(codes, bitwidth):
    """Stable-sort an activation vector and record how it was sorted.

    ``perm`` satisfies ``sorted_codes[j] == codes[perm[j]]``; equal codes
    keep their original order, which makes ``perm`` unique.
    """
    codes = [int(c) for c in codes]
    _check_codes(codes, bitwidth)
    perm = tuple(sorted(range(len(codes)), key=lambda i: codes[i]))
    sorted_codes = tuple(codes[i] for i in perm)
    return CanonVector(
        sorted_codes=sorted_codes,
        multiset_rank=multiset_rank(sorted_codes, 1 << bitwidth),
        perm_rank=perm_rank(perm),
        perm=perm,
    )


def canonicalize_array(codes, bitwidth):
    """Vectorised :func:`canonicalize` over the last axis.

    Returns ``(sorted_codes, perms, multiset_ranks, perm_ranks)``.
    """
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size and (codes.min() < 0 or codes.max() >= 1 << bitwidth):
        bad = codes[(codes < 0) | (codes >= 1 << bitwidth)][0]
        raise CodeOutOfRange(int(bad), bitwidth)
    perms = np.argsort(codes, axis=-1, kind="stable")
    sorted_codes = np.take_along_axis(codes, perms, axis=-1)
    return (
        sorted_codes,
        perms,
        multiset_rank_array(sorted_codes, 1 << bitwidth),
        perm_rank_array(perms),
    )


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def uniform_quantize(x, bitwidth, scale, zero_point=0):
    if not scale > 0:
        raise InvalidScale(scale)
    x = np.asarray(x, dtype=np.float64)
    q = _round_half_away(x / scale) + zero_point
    q = np.clip(q, 0, (1 << bitwidth) - 1)
    return CodeMatrix(q.astype(np.int64), bitwidth)


def dequantize(codes, scale, zero_point=0):
    if not scale > 0:
        raise InvalidScale(scale)
    return (codes.data.astype(np.float64) - zero_point) * scale
