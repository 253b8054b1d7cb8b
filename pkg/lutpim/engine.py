# -*- coding: utf-8 -*-

"""
Quantized GEMM ``Output = W . A`` through lookup tables.

W is an M x K matrix of weight codes and A a K x N matrix of activation
codes. K is cut into ``ceil(K / p)`` groups of p; every (weight row, group,
output column) triple becomes one lookup. The strategies differ in which
tables are used and where they live:

- ``naive_mac``: no tables, scalar multiply-adds.
- ``packed_dram``: operation-packed LUT in the DRAM bank.
- ``packed_buffer``: operation-packed LUT in the local buffer.
- ``canonical_runtime``: canonical LUT in the buffer, the weight vector is
  reordered by the processing unit before each lookup.
- ``canonical_buffer``: canonical and reordering LUT in the buffer.
- ``slice_stream``: both LUTs in the bank; for every k activation vectors
  the matching columns (slices) are streamed to the buffer and reused by
  all M weight rows.
- ``auto``: picks canonical_buffer or slice_stream with the cost model.

Every strategy returns the exact integer result together with an
``ExecReport`` of the events it performed.

License: See the LICENSE file.

"""

import logging
import math

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .config import DeviceConfig
from .errors import (
    AccumulatorOverflow,
    DimensionMismatch,
    InfeasibleP,
    NoZeroCode,
)
from .lut_builder import (
    DEFAULT_ENTRY_BYTES,
    LAYOUT_COLUMN,
    MAX_REORDER_P,
    build_canonical_lut,
    build_packed_lut,
    build_reordering_lut,
)
from .quantizer import (
    MAX_PACK_BITS,
    CanonVector,
    canonicalize_array,
    pack_array,
)

logger = logging.getLogger(__name__)

INT32_MIN = -(1 << 31)
INT32_MAX = (1 << 31) - 1


class Strategy(str, Enum):
    NAIVE_MAC = "naive_mac"
    PACKED_DRAM = "packed_dram"
    PACKED_BUFFER = "packed_buffer"
    CANONICAL_RUNTIME = "canonical_runtime"
    CANONICAL_BUFFER = "canonical_buffer"
    SLICE_STREAM = "slice_stream"
    AUTO = "auto"

    def __str__(self):
        return self.value

    @property
    def uses_packed(self):
        return self in (Strategy.PACKED_DRAM, Strategy.PACKED_BUFFER)

    @property
    def uses_canonical(self):
        return self in (
            Strategy.CANONICAL_RUNTIME,
            Strategy.CANONICAL_BUFFER,
            Strategy.SLICE_STREAM,
        )

    @property
    def uses_reordering(self):
        return self in (Strategy.CANONICAL_BUFFER, Strategy.SLICE_STREAM)


COUNTERS = (
    "dram_entry_loads",
    "local_lookups",
    "reorder_ops",
    "mac_ops",
    "dram_lut_lookups",
    "passes",
    "writebacks",
    "bytes_moved",
)


@dataclass
class ExecReport:
    """Event counters of one execution, plus the time they amount to.

    Merging reports sums the integer counters only, which is associative
    and commutative; times are recomputed from the merged counters.
    """

    strategy: str
    p: int
    k: int = 1
    dram_entry_loads: int = 0
    local_lookups: int = 0
    reorder_ops: int = 0
    mac_ops: int = 0
    dram_lut_lookups: int = 0
    passes: int = 0
    writebacks: int = 0
    bytes_moved: int = 0
    modeled_time_s: float = 0.0
    breakdown: dict = field(default_factory=dict)
    bank_id: Optional[int] = None

    def counters(self):
        return {name: getattr(self, name) for name in COUNTERS}

    def finalize(self, device):
        self.breakdown = device.time_breakdown(self)
        self.modeled_time_s = self.breakdown.pop("modeled_time_s")
        return self

    @classmethod
    def merged(cls, reports, strategy=None, p=None, k=1):
        reports = list(reports)
        if reports:
            strategy = strategy or reports[0].strategy
            p = p if p is not None else reports[0].p
            k = reports[0].k
        out = cls(strategy=strategy, p=p, k=k)
        for rep in reports:
            for name in COUNTERS:
                setattr(out, name, getattr(out, name) + getattr(rep, name))
        return out

    def to_dict(self):
        out = {"strategy": str(self.strategy), "p": self.p, "k": self.k}
        out.update(self.counters())
        out["modeled_time_s"] = self.modeled_time_s
        out.update(self.breakdown)
        if self.bank_id is not None:
            out["bank_id"] = self.bank_id
        return out


@dataclass(frozen=True, eq=False)
class ActivationPlan:
    """Canonicalized activation vectors, one per (group, output column).

    Arrays are indexed ``[g, n]`` (ranks) or ``[g, n, i]`` (codes).
    """

    p: int
    sorted_codes: np.ndarray
    perms: np.ndarray
    multiset_ranks: np.ndarray
    perm_ranks: np.ndarray
    pad_count: int

    @property
    def groups(self):
        return self.multiset_ranks.shape[0]

    @property
    def columns(self):
        return self.multiset_ranks.shape[1]

    def vector(self, g, n):
        return CanonVector(
            sorted_codes=tuple(int(c) for c in self.sorted_codes[g, n]),
            multiset_rank=int(self.multiset_ranks[g, n]),
            perm_rank=int(self.perm_ranks[g, n]),
            perm=tuple(int(i) for i in self.perms[g, n]),
        )


@dataclass
class LutSet:
    packed: object = None
    canonical: object = None
    reordering: object = None


def group_count(K, p):
    return math.ceil(K / p)


def _check_tables(W, A, weight_table, act_table):
    if W.cols != A.rows:
        raise DimensionMismatch(
            "W is %d x %d but A is %d x %d" % (W.rows, W.cols, A.rows, A.cols)
        )
    if W.bitwidth != weight_table.bitwidth:
        raise DimensionMismatch(
            "W has %d-bit codes, weight table is %d-bit"
            % (W.bitwidth, weight_table.bitwidth)
        )
    if A.bitwidth != act_table.bitwidth:
        raise DimensionMismatch(
            "A has %d-bit codes, activation table is %d-bit"
            % (A.bitwidth, act_table.bitwidth)
        )


def _to_int32(acc):
    if acc.size:
        lo, hi = int(acc.min()), int(acc.max())
        if lo < INT32_MIN:
            raise AccumulatorOverflow(lo)
        if hi > INT32_MAX:
            raise AccumulatorOverflow(hi)
    return acc.astype(np.int32)


def gemm_reference(W, A, weight_table, act_table):
    """Exact integer product of the decoded matrices."""
    _check_tables(W, A, weight_table, act_table)
    w_values = weight_table.decode(W.data)
    a_values = act_table.decode(A.data)
    return _to_int32(w_values @ a_values)


def _padded_activations(A, p, act_table):
    K, N = A.rows, A.cols
    G = group_count(K, p)
    pad = G * p - K
    if pad and act_table.zero_code is None:
        raise NoZeroCode(K, p)
    fill = act_table.zero_code if act_table.zero_code is not None else 0
    padded = np.full((G * p, N), fill, dtype=np.int64)
    padded[:K] = A.data
    # (G, N, p): vector of group g feeding output column n
    return padded.reshape(G, p, N).transpose(0, 2, 1), pad


def weight_codes(W, p):
    """Weight codes cut into groups, shape (M, G, p), padded with code 0."""
    M, K = W.rows, W.cols
    G = group_count(K, p)
    padded = np.zeros((M, G * p), dtype=np.int64)
    padded[:, :K] = W.data
    return padded.reshape(M, G, p)


def pack_weights(W, p):
    return pack_array(weight_codes(W, p), W.bitwidth).astype(np.int64)


def build_activation_plan(A, p, act_table):
    if A.bitwidth != act_table.bitwidth:
        raise DimensionMismatch(
            "A has %d-bit codes, activation table is %d-bit"
            % (A.bitwidth, act_table.bitwidth)
        )
    vectors, pad = _padded_activations(A, p, act_table)
    sorted_codes, perms, mranks, pranks = canonicalize_array(
        vectors, act_table.bitwidth
    )
    return ActivationPlan(
        p=p,
        sorted_codes=sorted_codes,
        perms=perms,
        multiset_ranks=mranks,
        perm_ranks=pranks,
        pad_count=pad,
    )


def build_luts(strategy, weight_table, act_table, p, b_o=DEFAULT_ENTRY_BYTES):
    strategy = Strategy(strategy)
    luts = LutSet()
    if strategy.uses_packed:
        luts.packed = build_packed_lut(weight_table, act_table, p, b_o)
    if strategy.uses_canonical:
        luts.canonical = build_canonical_lut(weight_table, act_table, p, b_o)
    if strategy.uses_reordering:
        luts.reordering = build_reordering_lut(weight_table.bitwidth, p)
    if strategy == Strategy.SLICE_STREAM:
        # slices are columns, keep them contiguous
        luts.canonical = luts.canonical.with_layout(LAYOUT_COLUMN)
        luts.reordering = luts.reordering.with_layout(LAYOUT_COLUMN)
    return luts


def _run_naive(W, A, weight_table, act_table, report):
    report.mac_ops += W.rows * W.cols * A.cols
    return weight_table.decode(W.data) @ act_table.decode(A.data)


def _run_packed(W, A, act_table, p, lut, report, in_dram):
    M, N = W.rows, A.cols
    wp = pack_weights(W, p)
    vectors, _ = _padded_activations(A, p, act_table)
    ap = pack_array(vectors, act_table.bitwidth).astype(np.int64)
    acc = np.zeros((M, N), dtype=np.int64)
    for g in range(ap.shape[0]):
        acc += lut.entries[wp[:, g][:, None], ap[g][None, :]]
        if in_dram:
            report.dram_lut_lookups += M * N
        else:
            report.local_lookups += M * N
    return acc


def _run_canonical_runtime(W, A, act_table, p, luts, report):
    M, N = W.rows, A.cols
    codes = weight_codes(W, p)
    plan = build_activation_plan(A, p, act_table)
    acc = np.zeros((M, N), dtype=np.int64)
    for g in range(plan.groups):
        # unpack, permute and repack on the processing unit
        reordered = codes[:, g, :][:, plan.perms[g]]
        rows = pack_array(reordered, W.bitwidth).astype(np.int64)
        report.reorder_ops += M * N
        acc += luts.canonical.entries[rows, plan.multiset_ranks[g][None, :]]
        report.local_lookups += M * N
    return acc


def _run_canonical_buffer(W, A, act_table, p, luts, report):
    M, N = W.rows, A.cols
    wp = pack_weights(W, p)
    plan = build_activation_plan(A, p, act_table)
    acc = np.zeros((M, N), dtype=np.int64)
    for g in range(plan.groups):
        rows = luts.reordering.entries[wp[:, g][:, None], plan.perm_ranks[g][None, :]]
        acc += luts.canonical.entries[rows.astype(np.int64), plan.multiset_ranks[g][None, :]]
        report.local_lookups += M * N
    return acc


def _run_slice_stream(W, A, act_table, p, k, luts, report):
    M, N = W.rows, A.cols
    wp = pack_weights(W, p)
    plan = build_activation_plan(A, p, act_table)
    G = plan.groups
    slice_rows = luts.canonical.rows
    acc = np.zeros((M, N), dtype=np.int64)
    if M == 0:
        return acc

    # activation vectors in column-major order, so an output column is
    # complete as soon as its last group has been consumed
    n_all = np.repeat(np.arange(N, dtype=np.int64), G)
    g_all = np.tile(np.arange(G, dtype=np.int64), N)
    for start in range(0, G * N, k):
        g_idx = g_all[start : start + k]
        n_idx = n_all[start : start + k]
        width = g_idx.shape[0]
        lanes = np.arange(width)

        # stream k canonical and k reordering slices into the buffer
        canon_slices = luts.canonical.slices(plan.multiset_ranks[g_idx, n_idx])
        reorder_slices = luts.reordering.slices(plan.perm_ranks[g_idx, n_idx])
        report.dram_entry_loads += slice_rows * width
        report.passes += 1

        # every weight row: reordering lookup, canonical lookup, accumulate
        rows = reorder_slices[wp[:, g_idx], lanes].astype(np.int64)
        values = canon_slices[rows, lanes]
        np.add.at(acc, (slice(None), n_idx), values)
        report.local_lookups += M * width

        report.writebacks += M * int(np.count_nonzero(g_idx == G - 1))
    return acc


def _resolve_p(strategy, p, b_w, b_a, b_o, k, device):
    from .pim_sim import max_feasible_for

    if p is None:
        p = max_feasible_for(strategy, b_w, b_a, b_o, device, k=k)
        if p is None:
            raise InfeasibleP("no packing degree fits the tables of %s" % strategy)
    if p < 1:
        raise InfeasibleP("packing degree must be at least 1, got %d" % p)
    if strategy.uses_reordering and p > MAX_REORDER_P:
        raise InfeasibleP(
            "%s needs a reordering LUT, which supports p <= %d (got %d)"
            % (strategy, MAX_REORDER_P, p)
        )
    if p * (b_w + b_a) > MAX_PACK_BITS:
        raise InfeasibleP(
            "p=%d packs %d index bits, more than %d"
            % (p, p * (b_w + b_a), MAX_PACK_BITS)
        )
    return p


def execute(
    strategy,
    W,
    A,
    weight_table,
    act_table,
    device=None,
    p=None,
    k=1,
    b_o=DEFAULT_ENTRY_BYTES,
    luts=None,
):
    """Multiply W by A with the given strategy.

    ``p`` defaults to the largest packing degree whose tables fit the
    strategy's memory tier. Pass ``luts`` to reuse tables built earlier with
    :func:`build_luts` for the same strategy, tables and p.
    """
    from .pim_sim import check_fit

    device = device or DeviceConfig()
    strategy = Strategy(strategy)
    _check_tables(W, A, weight_table, act_table)
    M, K, N = W.rows, W.cols, A.cols
    b_w, b_a = weight_table.bitwidth, act_table.bitwidth

    if strategy == Strategy.AUTO:
        from .cost_model import make_plan

        plan = make_plan(M, K, N, b_w, b_a, b_o, device, k=k)
        strategy = plan.strategy
        p = plan.p
        logger.debug("Auto strategy resolved to %s with p=%d", strategy, p)

    if strategy == Strategy.NAIVE_MAC:
        p = 1
    else:
        p = _resolve_p(strategy, p, b_w, b_a, b_o, k, device)
    if strategy == Strategy.SLICE_STREAM and k < 1:
        raise ValueError("k must be at least 1, got %r" % k)
    check_fit(strategy, b_w, b_a, b_o, p, k, device)

    report = ExecReport(strategy=strategy, p=p, k=k)
    report.bytes_moved = math.ceil(M * K * b_w / 8) + math.ceil(K * N * b_a / 8)
    if strategy != Strategy.NAIVE_MAC and luts is None:
        luts = build_luts(strategy, weight_table, act_table, p, b_o)

    if strategy == Strategy.NAIVE_MAC:
        acc = _run_naive(W, A, weight_table, act_table, report)
    elif strategy.uses_packed:
        acc = _run_packed(
            W, A, act_table, p, luts.packed, report,
            in_dram=strategy == Strategy.PACKED_DRAM,
        )
    elif strategy == Strategy.CANONICAL_RUNTIME:
        acc = _run_canonical_runtime(W, A, act_table, p, luts, report)
    elif strategy == Strategy.CANONICAL_BUFFER:
        acc = _run_canonical_buffer(W, A, act_table, p, luts, report)
    else:
        acc = _run_slice_stream(W, A, act_table, p, k, luts, report)

    if strategy != Strategy.SLICE_STREAM:
        report.passes = 1 if M and N else 0
        report.writebacks = M * N
    return _to_int32(acc), report.finalize(device)

