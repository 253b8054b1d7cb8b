# -*- coding: utf-8 -*-

"""
Construction and size accounting of the three lookup table kinds.

- ``PackedLut``: rows are packed weight vectors, columns packed activation
  vectors, each entry holds the p-term inner product.
- ``CanonicalLut``: the same rows, but only one column per multiset of
  activation codes (columns in multiset-rank order).
- ``ReorderingLut``: rows are packed weight vectors, columns permutation
  ranks; an entry is the weight vector permuted into the order of the sorted
  activations, packed again.

Entries are computed eagerly and the tables are immutable afterwards.

License: See the LICENSE file.

"""

import logging
import math

from dataclasses import dataclass

import numpy as np

from .errors import EntryOverflow, PackTooWide, PTooLarge
from .quantizer import (
    MAX_PACK_BITS,
    CodeTable,
    all_multisets,
    all_perms,
    multiset_count,
    pack_array,
    unpack_array,
)

logger = logging.getLogger(__name__)

DEFAULT_ENTRY_BYTES = 2
MAX_REORDER_P = 8

ENTRY_DTYPES = {1: np.int8, 2: np.int16, 4: np.int32, 8: np.int64}

KIND_PACKED = "packed"
KIND_CANONICAL = "canonical"
KIND_REORDERING = "reordering"

LAYOUT_ROW = "row"
LAYOUT_COLUMN = "column"

# columns handled per chunk while filling large tables
_CHUNK = 1 << 16


def reordering_entry_bytes(p, b_w):
    return max(1, math.ceil(p * b_w / 8))


def _with_layout(entries, layout):
    if layout == LAYOUT_COLUMN:
        return np.asfortranarray(entries)
    if layout == LAYOUT_ROW:
        return np.ascontiguousarray(entries)
    raise ValueError("Unknown layout: %s" % layout)


class Lut:
    """Shared behaviour of the three table kinds.

    ``entries`` is always indexed ``[row, col]``; ``layout`` only decides the
    memory order. With the column layout a column slice is contiguous.
    """

    kind = None

    def __post_init__(self):
        entries = _with_layout(self.entries, self.layout)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]

    @property
    def entry_count(self):
        return self.rows * self.cols

    @property
    def nbytes(self):
        return self.entry_count * self.entry_bytes

    def lookup(self, row, col):
        return int(self.entries[row, col])

    def column(self, col):
        return np.ascontiguousarray(self.entries[:, col])

    def slices(self, cols):
        """The columns ``cols`` as an (rows, len(cols)) array."""
        return self.entries[:, np.asarray(cols, dtype=np.int64)]

    def with_layout(self, layout):
        if layout == self.layout:
            return self
        fields = dict(self.__dict__)
        fields["layout"] = layout
        return type(self)(**fields)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        mine = {k: v for k, v in self.__dict__.items() if k not in ("entries", "layout")}
        theirs = {k: v for k, v in other.__dict__.items() if k not in ("entries", "layout")}
        return mine == theirs and np.array_equal(self.entries, other.entries)


@dataclass(frozen=True, eq=False)
class PackedLut(Lut):
    p: int
    weight_table: CodeTable
    act_table: CodeTable
    entry_bytes: int
    entries: np.ndarray
    layout: str = LAYOUT_ROW

    kind = KIND_PACKED

    @property
    def b_w(self):
        return self.weight_table.bitwidth

    @property
    def b_a(self):
        return self.act_table.bitwidth


@dataclass(frozen=True, eq=False)
class CanonicalLut(Lut):
    p: int
    weight_table: CodeTable
    act_table: CodeTable
    entry_bytes: int
    entries: np.ndarray
    layout: str = LAYOUT_ROW

    kind = KIND_CANONICAL

    @property
    def b_w(self):
        return self.weight_table.bitwidth

    @property
    def b_a(self):
        return self.act_table.bitwidth


@dataclass(frozen=True, eq=False)
class ReorderingLut(Lut):
    p: int
    b_w: int
    entries: np.ndarray
    layout: str = LAYOUT_ROW

    kind = KIND_REORDERING

    @property
    def b_a(self):
        return 0

    @property
    def entry_bytes(self):
        return reordering_entry_bytes(self.p, self.b_w)


@dataclass(frozen=True)
class SizeReport:
    b_w: int
    b_a: int
    p: int
    b_o: int
    rows: int
    packed_cols: int
    canonical_cols: int
    reordering_cols: int
    reordering_entry_bytes: int
    packed_bytes: int
    canonical_bytes: int
    reordering_bytes: int
    symmetric_packed_bytes: float
    column_reduction: float
    total_reduction: float

    @property
    def canonicalized_bytes(self):
        return self.canonical_bytes + self.reordering_bytes

    def to_dict(self):
        return dict(self.__dict__)


def compute_sizes(b_w, b_a, p, b_o=DEFAULT_ENTRY_BYTES):
    """Exact byte counts of the three tables for one configuration."""
    rows = 1 << (b_w * p)
    packed_cols = 1 << (b_a * p)
    canonical_cols = multiset_count(1 << b_a, p)
    reordering_cols = math.factorial(p)
    reorder_width = reordering_entry_bytes(p, b_w)

    packed_bytes = b_o * rows * packed_cols
    canonical_bytes = b_o * rows * canonical_cols
    reordering_bytes = reorder_width * rows * reordering_cols
    return SizeReport(
        b_w=b_w,
        b_a=b_a,
        p=p,
        b_o=b_o,
        rows=rows,
        packed_cols=packed_cols,
        canonical_cols=canonical_cols,
        reordering_cols=reordering_cols,
        reordering_entry_bytes=reorder_width,
        packed_bytes=packed_bytes,
        canonical_bytes=canonical_bytes,
        reordering_bytes=reordering_bytes,
        symmetric_packed_bytes=packed_bytes / 2,
        column_reduction=packed_cols / canonical_cols,
        total_reduction=packed_bytes / (canonical_bytes + reordering_bytes),
    )


def _entry_dtype(b_o):
    if b_o not in ENTRY_DTYPES:
        raise ValueError(
            "Entry width must be one of %s bytes, got %r"
            % (sorted(ENTRY_DTYPES), b_o)
        )
    return ENTRY_DTYPES[b_o]


def _check_build(weight_table, act_table, p, b_o):
    if p < 1 or p * (weight_table.bitwidth + act_table.bitwidth) > MAX_PACK_BITS:
        raise PackTooWide(p, weight_table.bitwidth + act_table.bitwidth)
    dtype = _entry_dtype(b_o)
    bound = p * weight_table.max_abs * act_table.max_abs
    if bound > np.iinfo(dtype).max:
        raise EntryOverflow(bound, b_o)
    return dtype


def _weight_rows(weight_table, p):
    rows = 1 << (weight_table.bitwidth * p)
    codes = unpack_array(np.arange(rows, dtype=np.uint64), p, weight_table.bitwidth)
    return weight_table.decode(codes)


def _fill(w_values, a_values, dtype):
    # entries[r, c] = sum_i w_values[r, i] * a_values[c, i]
    entries = np.empty((w_values.shape[0], a_values.shape[0]), dtype=dtype)
    for start in range(0, a_values.shape[0], _CHUNK):
        block = a_values[start : start + _CHUNK]
        entries[:, start : start + block.shape[0]] = w_values @ block.T
    return entries


def build_packed_lut(weight_table, act_table, p, b_o=DEFAULT_ENTRY_BYTES):
    dtype = _check_build(weight_table, act_table, p, b_o)
    w_values = _weight_rows(weight_table, p)
    cols = 1 << (act_table.bitwidth * p)
    a_codes = unpack_array(np.arange(cols, dtype=np.uint64), p, act_table.bitwidth)
    entries = _fill(w_values, act_table.decode(a_codes), dtype)
    logger.debug(
        "Built packed LUT W%dA%d p=%d: %d x %d",
        weight_table.bitwidth,
        act_table.bitwidth,
        p,
        entries.shape[0],
        entries.shape[1],
    )
    return PackedLut(p, weight_table, act_table, b_o, entries)


def build_canonical_lut(weight_table, act_table, p, b_o=DEFAULT_ENTRY_BYTES):
    dtype = _check_build(weight_table, act_table, p, b_o)
    w_values = _weight_rows(weight_table, p)
    a_codes = np.array(list(all_multisets(act_table.size, p)), dtype=np.int64)
    a_codes = a_codes.reshape(-1, p)
    entries = _fill(w_values, act_table.decode(a_codes), dtype)
    logger.debug(
        "Built canonical LUT W%dA%d p=%d: %d x %d",
        weight_table.bitwidth,
        act_table.bitwidth,
        p,
        entries.shape[0],
        entries.shape[1],
    )
    return CanonicalLut(p, weight_table, act_table, b_o, entries)


def build_reordering_lut(b_w, p):
    if p > MAX_REORDER_P:
        raise PTooLarge(p, MAX_REORDER_P)
    if p < 1 or p * b_w > MAX_PACK_BITS:
        raise PackTooWide(p, b_w)
    rows = 1 << (b_w * p)
    codes = unpack_array(np.arange(rows, dtype=np.uint64), p, b_w)
    perms = np.array(list(all_perms(p)), dtype=np.int64)
    entries = np.empty((rows, perms.shape[0]), dtype=np.uint64)
    step = max(1, _CHUNK // max(1, rows))
    for start in range(0, perms.shape[0], step):
        chunk = perms[start : start + step]
        # (rows, len(chunk), p): row r permuted by each permutation
        entries[:, start : start + chunk.shape[0]] = pack_array(
            codes[:, chunk], b_w
        )
    logger.debug("Built reordering LUT W%d p=%d: %d x %d", b_w, p, rows, perms.shape[0])
    return ReorderingLut(p, b_w, entries)
