# -*- coding: utf-8 -*-

import itertools
import math

import numpy as np
import pytest

from lutpim.errors import (
    CodeOutOfRange,
    InvalidScale,
    NotAPermutation,
    NotSorted,
    PackTooWide,
    RankOutOfRange,
)
from lutpim.quantizer import (
    CodeMatrix,
    CodeTable,
    all_multisets,
    all_perms,
    apply_perm,
    canonicalize,
    canonicalize_array,
    dequantize,
    multiset_count,
    multiset_rank,
    multiset_rank_array,
    multiset_unrank,
    pack,
    pack_array,
    perm_count,
    perm_rank,
    perm_rank_array,
    perm_unrank,
    uniform_quantize,
    unpack,
    unpack_array,
)


def test_code_tables():
    assert CodeTable.unsigned(2).values == (0, 1, 2, 3)
    assert CodeTable.unsigned(2).zero_code == 0
    sym1 = CodeTable.symmetric(1)
    assert sym1.values == (-1, 1)
    assert sym1.zero_code is None
    sym3 = CodeTable.symmetric(3)
    assert sym3.values == tuple(range(-4, 4))
    assert sym3.values[sym3.zero_code] == 0
    assert sym3.max_abs == 4


def test_code_table_validation():
    with pytest.raises(ValueError):
        CodeTable(2, (0, 1, 2))
    with pytest.raises(ValueError):
        CodeTable(9, tuple(range(512)))
    with pytest.raises(ValueError):
        CodeTable(1, (1, 2), zero_code=0)


def test_code_table_decode():
    table = CodeTable.symmetric(2)
    assert table.decode([[0, 3], [2, 1]]).tolist() == [[-2, 1], [0, -1]]
    assert table.decode(np.zeros((0, 3), dtype=np.int64)).shape == (0, 3)


def test_code_table_dict():
    table = CodeTable.symmetric(2)
    assert CodeTable.from_dict(table.to_dict()) == table


def test_code_matrix_range():
    with pytest.raises(CodeOutOfRange):
        CodeMatrix([[0, 4]], 2)
    with pytest.raises(CodeOutOfRange):
        CodeMatrix([[-1]], 2)
    m = CodeMatrix.empty(3, 0, 4)
    assert (m.rows, m.cols) == (3, 0)


def test_pack_msb_first():
    assert pack([3, 0, 2], 3).bits == 0b011000010
    assert pack([1, 0, 1], 1).bits == 5
    assert unpack(pack([3, 0, 2], 3)) == [3, 0, 2]


def test_pack_errors():
    with pytest.raises(CodeOutOfRange):
        pack([4], 2)
    with pytest.raises(PackTooWide):
        pack([0] * 65, 1)
    with pytest.raises(PackTooWide):
        pack([0] * 9, 8)


def test_pack_array_matches_pack(rng):
    codes = rng.integers(0, 8, size=(50, 5))
    bits = pack_array(codes, 3)
    assert bits.dtype == np.uint64
    assert [int(b) for b in bits] == [pack(row, 3).bits for row in codes]
    assert np.array_equal(unpack_array(bits, 5, 3), codes)


PACK_SHAPES = [(p, b) for b in range(1, 9) for p in range(1, 17) if p * b <= 16]


@pytest.mark.parametrize("p, bitwidth", PACK_SHAPES)
def test_pack_round_trip_exhaustive(p, bitwidth):
    bits = np.arange(1 << (p * bitwidth), dtype=np.uint64)
    codes = unpack_array(bits, p, bitwidth)
    assert codes.min() >= 0 and codes.max() < 1 << bitwidth
    assert np.array_equal(pack_array(codes, bitwidth), bits)
    if p * bitwidth <= 10:
        for value, row in zip(bits.tolist(), codes.tolist()):
            assert pack(row, bitwidth).bits == value
            assert unpack(pack(row, bitwidth)) == row


def test_pack_array_full_width():
    codes = np.full((2, 8), 255)
    bits = pack_array(codes, 8)
    assert int(bits[0]) == (1 << 64) - 1
    assert np.array_equal(unpack_array(bits, 8, 8), codes)


def test_perm_rank_examples():
    assert perm_rank((0, 1, 2)) == 0
    assert perm_rank((1, 0, 2)) == 2
    assert perm_rank((2, 1, 0)) == 5
    assert perm_unrank(3, 3) == (1, 2, 0)
    assert perm_count(5) == 120


def test_perm_order_matches_itertools():
    for p in range(1, 6):
        assert [perm_unrank(r, p) for r in range(perm_count(p))] == list(
            all_perms(p)
        )


def test_perm_errors():
    with pytest.raises(NotAPermutation):
        perm_rank([0, 0, 1])
    with pytest.raises(RankOutOfRange):
        perm_unrank(6, 3)
    with pytest.raises(RankOutOfRange):
        perm_unrank(-1, 3)


def test_perm_rank_array(rng):
    perms = np.array([rng.permutation(6) for _ in range(100)])
    assert perm_rank_array(perms).tolist() == [perm_rank(p) for p in perms]


def test_apply_perm():
    assert apply_perm(["a", "b", "c"], (2, 0, 1)) == ["c", "a", "b"]


def test_multiset_counts():
    assert multiset_count(8, 3) == 120
    assert multiset_count(8, 4) == 330
    assert multiset_count(2, 7) == 8
    assert multiset_count(16, 3) == math.comb(18, 3)


def test_multiset_rank_is_lexicographic():
    ordered = list(all_multisets(4, 3))
    assert ordered[0] == (0, 0, 0)
    assert ordered[-1] == (3, 3, 3)
    assert ordered == sorted(ordered)
    for rank, codes in enumerate(ordered):
        assert multiset_rank(codes, 4) == rank
        assert multiset_unrank(rank, 3, 4) == codes


def test_multiset_errors():
    with pytest.raises(NotSorted):
        multiset_rank((1, 0), 4)
    with pytest.raises(CodeOutOfRange):
        multiset_rank((0, 4), 4)
    with pytest.raises(RankOutOfRange):
        multiset_unrank(120, 3, 8)


def test_multiset_rank_array():
    codes = np.array(list(all_multisets(8, 4)))
    assert multiset_rank_array(codes, 8).tolist() == list(range(len(codes)))


def test_canonicalize_example():
    canon = canonicalize([2, 0, 2, 1], 2)
    assert canon.sorted_codes == (0, 1, 2, 2)
    # equal codes keep their original order
    assert canon.perm == (1, 3, 0, 2)
    assert canon.perm_rank == 10
    assert canon.multiset_rank == list(all_multisets(4, 4)).index((0, 1, 2, 2))


def test_canonicalize_inverts():
    for codes in itertools.product(range(3), repeat=4):
        canon = canonicalize(codes, 2)
        assert tuple(apply_perm(codes, canon.perm)) == canon.sorted_codes
        assert multiset_unrank(canon.multiset_rank, 4, 4) == canon.sorted_codes
        assert perm_unrank(canon.perm_rank, 4) == canon.perm


def test_canonicalize_array_matches(rng):
    codes = rng.integers(0, 8, size=(40, 5))
    sorted_codes, perms, mranks, pranks = canonicalize_array(codes, 3)
    for i, row in enumerate(codes):
        canon = canonicalize(row, 3)
        assert tuple(sorted_codes[i]) == canon.sorted_codes
        assert tuple(perms[i]) == canon.perm
        assert mranks[i] == canon.multiset_rank
        assert pranks[i] == canon.perm_rank


def test_canonicalize_rejects_codes():
    with pytest.raises(CodeOutOfRange):
        canonicalize([0, 4], 2)
    with pytest.raises(CodeOutOfRange):
        canonicalize_array(np.array([[0, 8]]), 3)


def test_uniform_quantize():
    codes = uniform_quantize([-0.5, 0.5, 1.5, 100.0], 2, 1.0, zero_point=1)
    assert codes.data[0].tolist() == [0, 2, 3, 3]
    assert codes.bitwidth == 2


def test_dequantize():
    codes = CodeMatrix([[0, 1, 3]], 2)
    assert dequantize(codes, 0.5, zero_point=1).tolist() == [[-0.5, 0.0, 1.0]]


def test_invalid_scale():
    with pytest.raises(InvalidScale):
        uniform_quantize([1.0], 2, 0.0)
    with pytest.raises(InvalidScale):
        dequantize(CodeMatrix([[0]], 2), -1.0)
