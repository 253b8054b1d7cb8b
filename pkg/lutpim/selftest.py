# -*- coding: utf-8 -*-

"""
Exhaustive small-space checks of the combinatorics, the tables and the cost
arithmetic.

Each check is a function registered under a name with ``@check``. A check
passes when it returns without raising; any exception marks it as failed and
its message is reported next to the name.

License: See the LICENSE file.

"""

import itertools
import logging
import math
import time

from dataclasses import dataclass

import numpy as np

from . import engine
from .config import DeviceConfig
from .cost_model import (
    decision_threshold,
    predict_slice_time,
    select_p_star,
)
from .lut_builder import (
    build_canonical_lut,
    build_packed_lut,
    build_reordering_lut,
    compute_sizes,
)
from .pim_sim import max_feasible_for, max_feasible_p
from .quantizer import (
    CodeMatrix,
    CodeTable,
    all_multisets,
    all_perms,
    canonicalize,
    canonicalize_array,
    multiset_count,
    multiset_rank,
    multiset_unrank,
    pack,
    perm_rank,
    perm_unrank,
    unpack_array,
)

logger = logging.getLogger(__name__)

CHECKS = {}

DEDUP_CONFIGS = [(1, p) for p in range(1, 8)]
DEDUP_CONFIGS += [(2, p) for p in range(1, 6)]
DEDUP_CONFIGS += [(3, p) for p in range(1, 5)]


@dataclass
class CheckResult:
    name: str
    passed: bool
    message: str
    seconds: float

    def to_dict(self):
        return dict(self.__dict__)


def check(name):
    def decorator(func):
        CHECKS[name] = func
        return func

    return decorator


@check("perm_round_trip")
def check_perm_round_trip():
    for p in range(1, 7):
        for rank, perm in enumerate(all_perms(p)):
            assert perm_unrank(rank, p) == perm, "unrank(%d, p=%d)" % (rank, p)
            assert perm_rank(perm) == rank, "rank of %r" % (perm,)


@check("multiset_round_trip")
def check_multiset_round_trip():
    for alphabet in range(1, 9):
        for p in range(1, 5):
            count = 0
            for rank, codes in enumerate(all_multisets(alphabet, p)):
                assert multiset_unrank(rank, p, alphabet) == codes
                assert multiset_rank(codes, alphabet) == rank
                count += 1
            assert count == multiset_count(alphabet, p)


@check("dedup_count")
def check_dedup_count():
    """Every packed column is a canonical column read through the reordered
    weight rows, and the canonical columns are exactly the multisets."""
    w_table = CodeTable.symmetric(1)
    for b_a, p in DEDUP_CONFIGS:
        a_table = CodeTable.unsigned(b_a)
        packed = build_packed_lut(w_table, a_table, p)
        canonical = build_canonical_lut(w_table, a_table, p)
        reordering = build_reordering_lut(1, p)
        expected = multiset_count(1 << b_a, p)
        assert canonical.cols == expected, "b_a=%d p=%d: %d canonical columns" % (
            b_a, p, canonical.cols,
        )

        a_codes = unpack_array(np.arange(packed.cols, dtype=np.uint64), p, b_a)
        _, _, mranks, pranks = canonicalize_array(a_codes, b_a)
        assert np.unique(mranks).size == expected, "b_a=%d p=%d: %d classes" % (
            b_a, p, np.unique(mranks).size,
        )

        # (rows, packed cols): weight row reordered for every activation vector
        rows = reordering.entries[:, pranks].astype(np.int64)
        via_canonical = canonical.entries[rows, mranks[None, :]]
        bad = np.flatnonzero((via_canonical != packed.entries).any(axis=0))
        assert bad.size == 0, "b_a=%d p=%d: packed column %d differs" % (
            b_a, p, bad[0],
        )


def _lookup_pairs(b_w, b_a, p, w_codes, a_codes):
    w_table = CodeTable.unsigned(b_w)
    a_table = CodeTable.unsigned(b_a)
    packed = build_packed_lut(w_table, a_table, p)
    canonical = build_canonical_lut(w_table, a_table, p)
    reordering = build_reordering_lut(b_w, p)
    for w, a in zip(w_codes, a_codes):
        canon = canonicalize(a, b_a)
        w_row = pack(w, b_w).bits
        a_col = pack(a, b_a).bits
        reordered = reordering.lookup(w_row, canon.perm_rank)
        got = canonical.lookup(reordered, canon.multiset_rank)
        want = packed.lookup(w_row, a_col)
        assert got == want, "W%dA%d p=%d w=%r a=%r: %d != %d" % (
            b_w, b_a, p, tuple(w), tuple(a), got, want,
        )
        assert want == sum(int(x) * int(y) for x, y in zip(w, a))


@check("lookup_equivalence")
def check_lookup_equivalence(samples=10000, seed=0):
    # exhaustive on a tiny configuration
    for p in range(1, 4):
        pairs = list(
            itertools.product(
                itertools.product(range(2), repeat=p),
                itertools.product(range(4), repeat=p),
            )
        )
        _lookup_pairs(1, 2, p, [w for w, _ in pairs], [a for _, a in pairs])

    rng = np.random.default_rng(seed)
    for b_w, b_a, p in [(1, 3, 4), (2, 2, 4), (4, 4, 2)]:
        w = rng.integers(0, 1 << b_w, size=(samples, p))
        a = rng.integers(0, 1 << b_a, size=(samples, p))
        _lookup_pairs(b_w, b_a, p, w.tolist(), a.tolist())


@check("reordering_table")
def check_reordering_table():
    for b_w, p in [(1, 4), (2, 3), (4, 2)]:
        lut = build_reordering_lut(b_w, p)
        codes = unpack_array(np.arange(lut.rows, dtype=np.uint64), p, b_w)
        for rank, perm in enumerate(all_perms(p)):
            expected = [pack(row[list(perm)], b_w).bits for row in codes]
            assert lut.entries[:, rank].tolist() == expected


@check("sizes")
def check_sizes():
    assert abs(compute_sizes(1, 3, 4).column_reduction - 12.412) < 0.01
    assert abs(compute_sizes(1, 3, 7).column_reduction - 611.06) < 0.1
    totals = [compute_sizes(1, 3, p).total_reduction for p in range(2, 8)]
    assert all(a < b for a, b in zip(totals, totals[1:])), totals
    assert 1.6 <= totals[0] <= 1.8, totals[0]
    assert 300 <= totals[-1] <= 360, totals[-1]

    bank, buffer = 32 * 2 ** 20, 32 * 2 ** 10
    assert max_feasible_p(bank, 1, 3, 2, canonicalized=False) == 6
    assert max_feasible_p(buffer, 1, 3, 2, canonicalized=False) == 3
    assert max_feasible_p(bank, 1, 3, 2) == 8
    assert max_feasible_p(buffer, 1, 3, 2) == 4
    assert max_feasible_p(buffer, 1, 3, 1) == 5


@check("cost_arithmetic")
def check_cost_arithmetic():
    assert select_p_star(3072, 768, 768, 4, 4) == 3
    assert abs(decision_threshold(4, 3, 2) - 340.7) < 0.5
    assert decision_threshold(4, 3, 3) == math.inf

    # the per-p objective and the full streaming time share their argmin
    K, N = 840, 16
    for b_w in (1, 2, 4):
        for M in (64, 512, 4096, 16384):
            p_max = 8 // b_w
            times = [predict_slice_time(p, M, K, N, b_w) for p in range(1, p_max + 1)]
            best = 1 + min(range(len(times)), key=times.__getitem__)
            assert select_p_star(M, K, N, b_w, p_max) == best, (b_w, M)


@check("gemm_equivalence")
def check_gemm_equivalence(instances=20, seed=0):
    rng = np.random.default_rng(seed)
    device = DeviceConfig()
    strategies = [s for s in engine.Strategy if s != engine.Strategy.AUTO]
    for _ in range(instances):
        b_w = int(rng.choice([1, 2, 4]))
        b_a = int(rng.choice([1, 2, 3, 4]))
        M, K, N = (int(x) for x in rng.integers(1, 17, size=3))
        w_table = CodeTable.symmetric(b_w) if rng.random() < 0.5 else CodeTable.unsigned(b_w)
        a_table = CodeTable.symmetric(b_a) if rng.random() < 0.5 else CodeTable.unsigned(b_a)
        if a_table.zero_code is None:
            # no code to pad with, so K must split into groups of p <= 2
            K += K % 2
        W = CodeMatrix.random(M, K, b_w, rng)
        A = CodeMatrix.random(K, N, b_a, rng)
        expected = engine.gemm_reference(W, A, w_table, a_table)
        for strategy in strategies:
            p = min(2, max_feasible_for(strategy, b_w, b_a, 2, device, k=3))
            out, _ = engine.execute(
                strategy, W, A, w_table, a_table, device=device, p=p, k=3
            )
            assert np.array_equal(out, expected), "%s on %dx%dx%d W%dA%d" % (
                strategy, M, K, N, b_w, b_a,
            )


def run_selftest(names=None):
    """Run the named checks, or all of them, in registration order."""
    names = list(CHECKS) if names is None else list(names)
    results = []
    for name in names:
        if name not in CHECKS:
            raise KeyError("Unknown check: %s" % name)
        start = time.perf_counter()
        try:
            CHECKS[name]()
        except Exception as err:
            passed, message = False, "%s: %s" % (type(err).__name__, err)
        else:
            passed, message = True, ""
        seconds = time.perf_counter() - start
        logger.debug("Check %s %s in %.2fs", name, "passed" if passed else "FAILED", seconds)
        results.append(CheckResult(name, passed, message, seconds))
    return results
