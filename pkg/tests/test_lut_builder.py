# -*- coding: utf-8 -*-

import itertools

import numpy as np
import pytest

from lutpim.errors import EntryOverflow, PackTooWide, PTooLarge
from lutpim.lut_builder import (
    LAYOUT_COLUMN,
    build_canonical_lut,
    build_packed_lut,
    build_reordering_lut,
    compute_sizes,
    reordering_entry_bytes,
)
from lutpim.quantizer import CodeTable, all_multisets, canonicalize, pack, perm_rank


def test_column_reduction():
    assert compute_sizes(1, 3, 4).column_reduction == pytest.approx(12.412, abs=0.01)
    assert compute_sizes(1, 3, 7).column_reduction == pytest.approx(611.06, abs=0.1)


def test_total_reduction_range():
    totals = [compute_sizes(1, 3, p).total_reduction for p in range(2, 8)]
    assert all(a < b for a, b in zip(totals, totals[1:]))
    assert totals[0] == pytest.approx(512 / 296)
    assert totals[-1] == pytest.approx(536870912 / 1523712)
    assert 1.6 <= totals[0] <= 1.8
    assert 300 <= totals[-1] <= 360


def test_total_reduction_at_p1_is_below_one():
    # the reordering table costs more than canonicalization saves
    sizes = compute_sizes(1, 3, 1)
    assert sizes.total_reduction == pytest.approx(32 / 34)
    assert sizes.total_reduction < 1


def test_size_report_fields():
    sizes = compute_sizes(1, 3, 4)
    assert sizes.rows == 16
    assert sizes.packed_cols == 4096
    assert sizes.canonical_cols == 330
    assert sizes.reordering_cols == 24
    assert sizes.reordering_entry_bytes == 1
    assert sizes.packed_bytes == 131072
    assert sizes.canonical_bytes == 10560
    assert sizes.reordering_bytes == 384
    assert sizes.canonicalized_bytes == 10944
    assert sizes.symmetric_packed_bytes == 65536


def test_reordering_entry_bytes():
    assert reordering_entry_bytes(1, 1) == 1
    assert reordering_entry_bytes(8, 1) == 1
    assert reordering_entry_bytes(3, 4) == 2
    assert reordering_entry_bytes(8, 4) == 4


def test_packed_lut_entries():
    lut = build_packed_lut(CodeTable.unsigned(1), CodeTable.unsigned(2), 2)
    assert lut.entries.shape == (4, 16)
    # w = [1, 1], a = [1, 3]
    assert lut.lookup(0b11, 0b0111) == 4
    assert lut.nbytes == compute_sizes(1, 2, 2).packed_bytes


def test_packed_lut_symmetric():
    w_table = CodeTable.symmetric(2)
    a_table = CodeTable.unsigned(2)
    lut = build_packed_lut(w_table, a_table, 2)
    # w codes [0, 3] are [-2, 1], a codes [2, 1]
    assert lut.lookup(pack([0, 3], 2).bits, pack([2, 1], 2).bits) == -3


def test_canonical_lut_columns():
    w_table, a_table = CodeTable.unsigned(1), CodeTable.unsigned(3)
    lut = build_canonical_lut(w_table, a_table, 4)
    assert lut.entries.shape == (16, 330)
    multisets = list(all_multisets(8, 4))
    col = multisets.index((1, 2, 2, 7))
    assert lut.lookup(pack([1, 0, 1, 1], 1).bits, col) == 1 + 2 + 7
    assert lut.nbytes == compute_sizes(1, 3, 4).canonical_bytes


def test_reordering_lut_entries():
    lut = build_reordering_lut(1, 3)
    assert lut.entries.shape == (8, 6)
    # [1, 1, 0] permuted by (2, 0, 1) is [0, 1, 1]
    assert lut.lookup(0b110, perm_rank((2, 0, 1))) == 0b011
    assert lut.nbytes == compute_sizes(1, 3, 3).reordering_bytes
    assert lut.b_a == 0


def test_reordering_identity_column():
    lut = build_reordering_lut(2, 4)
    assert np.array_equal(lut.column(0), np.arange(lut.rows, dtype=np.uint64))


def test_build_errors():
    with pytest.raises(PTooLarge):
        build_reordering_lut(1, 9)
    with pytest.raises(PackTooWide):
        build_packed_lut(CodeTable.unsigned(4), CodeTable.unsigned(4), 9)
    with pytest.raises(EntryOverflow):
        build_packed_lut(CodeTable.unsigned(4), CodeTable.unsigned(4), 2, b_o=1)
    with pytest.raises(ValueError):
        build_canonical_lut(CodeTable.unsigned(1), CodeTable.unsigned(1), 2, b_o=3)


def test_layouts_hold_same_table():
    lut = build_canonical_lut(CodeTable.unsigned(2), CodeTable.unsigned(2), 3)
    col = lut.with_layout(LAYOUT_COLUMN)
    assert col.entries.flags.f_contiguous
    assert lut.entries.flags.c_contiguous
    assert col == lut
    assert np.array_equal(col.slices([0, 5]), lut.entries[:, [0, 5]])


def test_entries_are_read_only():
    lut = build_packed_lut(CodeTable.unsigned(1), CodeTable.unsigned(1), 2)
    with pytest.raises(ValueError):
        lut.entries[0, 0] = 1


def test_canonical_share_strictly_decreases():
    for b_w, b_a in [(1, 2), (1, 3), (2, 2), (4, 4)]:
        shares = []
        for p in range(1, 8):
            sizes = compute_sizes(b_w, b_a, p)
            shares.append(sizes.canonical_bytes / sizes.packed_bytes)
        assert all(a > b for a, b in zip(shares, shares[1:])), (b_w, b_a, shares)


@pytest.mark.parametrize("b_w, b_a, p", [(1, 2, 4), (2, 2, 3), (2, 3, 3)])
def test_swapping_weights_under_equal_activations(b_w, b_a, p):
    w_table, a_table = CodeTable.symmetric(b_w), CodeTable.unsigned(b_a)
    packed = build_packed_lut(w_table, a_table, p)
    canonical = build_canonical_lut(w_table, a_table, p)
    reordering = build_reordering_lut(b_w, p)

    def via_canonical(w, a):
        canon = canonicalize(a, b_a)
        row = reordering.lookup(pack(w, b_w).bits, canon.perm_rank)
        return canonical.lookup(row, canon.multiset_rank)

    checked = 0
    for a in itertools.product(range(1 << b_a), repeat=p):
        ties = [(i, j) for i, j in itertools.combinations(range(p), 2) if a[i] == a[j]]
        if not ties:
            continue
        a_bits = pack(a, b_a).bits
        for w in itertools.product(range(1 << b_w), repeat=p):
            expected = packed.lookup(pack(w, b_w).bits, a_bits)
            assert via_canonical(w, a) == expected
            for i, j in ties:
                swapped = list(w)
                swapped[i], swapped[j] = swapped[j], swapped[i]
                assert packed.lookup(pack(swapped, b_w).bits, a_bits) == expected
                assert via_canonical(swapped, a) == expected
                checked += 1
    assert checked > 0
