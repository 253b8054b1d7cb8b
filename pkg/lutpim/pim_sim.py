# -*- coding: utf-8 -*-

"""
Bank-level PIM simulator.

A device is a set of identical banks, each a DRAM array with a small local
buffer and a processing unit. Part of each tier (``lut_budget_fraction``)
holds lookup tables, which are replicated to every bank; the remainder holds
the bank's weight, activation and output tile.

The simulator does not model DRAM timing. It splits a GEMM into per-bank
tiles, runs the engine on each tile, stitches the outputs and turns the
per-bank event counters into time. Banks run concurrently, so the wall time
is the slowest bank.

License: See the LICENSE file.

"""

import logging
import math

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import engine
from .config import DeviceConfig
from .engine import ExecReport, Strategy
from .errors import CapacityExceeded, DegenerateTile, DimensionMismatch, InfeasibleP
from .lut_builder import (
    DEFAULT_ENTRY_BYTES,
    MAX_REORDER_P,
    compute_sizes,
    reordering_entry_bytes,
)
from .quantizer import MAX_PACK_BITS, CodeMatrix

logger = logging.getLogger(__name__)

TIER_BANK = "bank"
TIER_BUFFER = "buffer"
ACC_BYTES = 4


def _p_limit(b_w, b_a, include_reordering):
    limit = MAX_PACK_BITS // (b_w + b_a)
    if include_reordering:
        limit = min(limit, MAX_REORDER_P)
    return limit


def table_bytes(b_w, b_a, b_o, p, canonicalized, include_reordering=True):
    sizes = compute_sizes(b_w, b_a, p, b_o)
    if not canonicalized:
        return sizes.packed_bytes
    if include_reordering:
        return sizes.canonical_bytes + sizes.reordering_bytes
    return sizes.canonical_bytes


def max_feasible_p(
    tier_budget_bytes, b_w, b_a, b_o, canonicalized=True, include_reordering=True
):
    """Largest p whose tables fit the budget, or None if not even p=1 fits."""
    best = None
    for p in range(1, _p_limit(b_w, b_a, canonicalized and include_reordering) + 1):
        if table_bytes(b_w, b_a, b_o, p, canonicalized, include_reordering) > tier_budget_bytes:
            break
        best = p
    return best


def slice_bytes(b_w, b_o, p, k):
    """Buffer bytes taken by k canonical plus k reordering slices."""
    return (1 << (b_w * p)) * k * (b_o + reordering_entry_bytes(p, b_w))


def max_stream_p(buffer_budget_bytes, b_w, b_o, k=1):
    """Largest p whose k slice pairs fit the buffer, or None."""
    best = None
    for p in range(1, MAX_REORDER_P + 1):
        if slice_bytes(b_w, b_o, p, k) > buffer_budget_bytes:
            break
        best = p
    return best


def max_feasible_for(strategy, b_w, b_a, b_o, device, k=1):
    """Largest p the strategy can run with on this device."""
    strategy = Strategy(strategy)
    if strategy == Strategy.NAIVE_MAC:
        return 1
    if strategy == Strategy.PACKED_DRAM:
        return max_feasible_p(device.bank_lut_budget, b_w, b_a, b_o, False, False)
    if strategy == Strategy.PACKED_BUFFER:
        return max_feasible_p(device.buffer_lut_budget, b_w, b_a, b_o, False, False)
    if strategy == Strategy.CANONICAL_RUNTIME:
        return max_feasible_p(device.buffer_lut_budget, b_w, b_a, b_o, True, False)
    if strategy == Strategy.CANONICAL_BUFFER:
        return max_feasible_p(device.buffer_lut_budget, b_w, b_a, b_o, True, True)
    if strategy == Strategy.SLICE_STREAM:
        p_dram = max_feasible_p(device.bank_lut_budget, b_w, b_a, b_o, True, True)
        p_stream = max_stream_p(device.buffer_lut_budget, b_w, b_o, k)
        if p_dram is None or p_stream is None:
            return None
        return min(p_dram, p_stream)
    raise ValueError("Strategy %s has no fixed tables" % strategy)


def resident_lut_bytes(strategy, b_w, b_a, b_o, p, k=1):
    """LUT bytes each bank holds per tier, as ``{tier: bytes}``."""
    strategy = Strategy(strategy)
    if strategy == Strategy.NAIVE_MAC:
        return {TIER_BANK: 0, TIER_BUFFER: 0}
    if strategy == Strategy.PACKED_DRAM:
        return {TIER_BANK: table_bytes(b_w, b_a, b_o, p, False), TIER_BUFFER: 0}
    if strategy == Strategy.PACKED_BUFFER:
        return {TIER_BANK: 0, TIER_BUFFER: table_bytes(b_w, b_a, b_o, p, False)}
    if strategy == Strategy.CANONICAL_RUNTIME:
        return {TIER_BANK: 0, TIER_BUFFER: table_bytes(b_w, b_a, b_o, p, True, False)}
    if strategy == Strategy.CANONICAL_BUFFER:
        return {TIER_BANK: 0, TIER_BUFFER: table_bytes(b_w, b_a, b_o, p, True)}
    if strategy == Strategy.SLICE_STREAM:
        return {
            TIER_BANK: table_bytes(b_w, b_a, b_o, p, True),
            TIER_BUFFER: slice_bytes(b_w, b_o, p, k),
        }
    raise ValueError("Strategy %s has no fixed tables" % strategy)


def check_fit(strategy, b_w, b_a, b_o, p, k, device):
    """Raise CapacityExceeded unless the strategy's tables fit both tiers."""
    resident = resident_lut_bytes(strategy, b_w, b_a, b_o, p, k)
    budgets = {TIER_BANK: device.bank_lut_budget, TIER_BUFFER: device.buffer_lut_budget}
    for tier in (TIER_BANK, TIER_BUFFER):
        if resident[tier] > budgets[tier]:
            raise CapacityExceeded(tier, resident[tier], budgets[tier])
    return resident


@dataclass
class TilingPlan:
    """How a GEMM is cut across banks.

    Bank ``i * banks_N + j`` computes rows ``row_bounds[i]`` and columns
    ``col_bounds[j]`` of the output; every bank holds a copy of the
    ``replicated`` tables.
    """

    M: int
    K: int
    N: int
    b_w: int
    b_a: int
    b_o: int
    strategy: Strategy
    p: int
    k: int
    bank_grid: Tuple[int, int]
    row_bounds: List[Tuple[int, int]]
    col_bounds: List[Tuple[int, int]]
    replicated: List[str]
    resident: dict = field(default_factory=dict)
    cost_plan: Optional[object] = None

    @property
    def tile_shape(self):
        rows = max((b - a for a, b in self.row_bounds), default=0)
        cols = max((b - a for a, b in self.col_bounds), default=0)
        return rows, cols

    def tiles(self):
        banks_N = self.bank_grid[1]
        for i, rows in enumerate(self.row_bounds):
            for j, cols in enumerate(self.col_bounds):
                yield i * banks_N + j, rows, cols

    def to_dict(self):
        return {
            "strategy": str(self.strategy),
            "p": self.p,
            "k": self.k,
            "bank_grid": list(self.bank_grid),
            "tile_shape": list(self.tile_shape),
            "replicated": list(self.replicated),
            "resident_bytes": dict(self.resident),
        }


def _bounds(total, parts):
    # even split, the first (total % parts) parts get one extra element
    base, extra = divmod(total, parts)
    out = []
    start = 0
    for i in range(parts):
        stop = start + base + (1 if i < extra else 0)
        out.append((start, stop))
        start = stop
    return out


def _replicated(strategy):
    if strategy.uses_packed:
        return ["packed"]
    if strategy.uses_reordering:
        return ["canonical", "reordering"]
    if strategy.uses_canonical:
        return ["canonical"]
    return []


def plan_tiling(
    M,
    K,
    N,
    p,
    k,
    strategy,
    device,
    *,
    b_w,
    b_a,
    b_o=DEFAULT_ENTRY_BYTES,
    min_tile_rows=1,
    split_n=True,
    bank_grid=None,
):
    """Cut the problem across banks, M first, then N.

    ``bank_grid`` overrides the default (banks_M, banks_N) split. ``auto`` is
    resolved here with the cost model on the per-bank tile.
    """
    strategy = Strategy(strategy)
    if bank_grid is None:
        banks_M = max(1, min(device.num_banks, math.ceil(M / min_tile_rows)))
        banks_N = 1
        if split_n:
            banks_N = max(1, min(device.num_banks // banks_M, N))
    else:
        banks_M, banks_N = bank_grid
        if banks_M * banks_N > device.num_banks:
            raise CapacityExceeded(
                "device", banks_M * banks_N, device.num_banks, what="Bank grid"
            )
        if banks_M < 1 or banks_N < 1 or (M and banks_M > M) or (N and banks_N > N):
            raise DegenerateTile((banks_M, banks_N), (M, K, N))
    row_bounds = _bounds(M, banks_M)
    col_bounds = _bounds(N, banks_N)
    tile_M = max(b - a for a, b in row_bounds)
    tile_N = max(b - a for a, b in col_bounds)

    cost_plan = None
    if strategy == Strategy.AUTO:
        from .cost_model import make_plan

        cost_plan = make_plan(tile_M, K, tile_N, b_w, b_a, b_o, device, k=k)
        strategy = cost_plan.strategy
        p = cost_plan.p
    elif strategy == Strategy.NAIVE_MAC:
        p = 1
    elif p is None:
        p = max_feasible_for(strategy, b_w, b_a, b_o, device, k=k)
        if p is None:
            raise InfeasibleP("no packing degree fits the tables of %s" % strategy)

    resident = check_fit(strategy, b_w, b_a, b_o, p, k, device)
    data = (
        math.ceil(tile_M * K * b_w / 8)
        + math.ceil(K * tile_N * b_a / 8)
        + tile_M * tile_N * ACC_BYTES
    )
    if data > device.bank_data_budget:
        raise CapacityExceeded(TIER_BANK, data, device.bank_data_budget, what="Data tile")
    accumulator = tile_M * ACC_BYTES
    if accumulator > device.buffer_data_budget:
        raise CapacityExceeded(
            TIER_BUFFER, accumulator, device.buffer_data_budget, what="Output accumulator"
        )
    resident = {
        "bank_lut": resident[TIER_BANK],
        "buffer_lut": resident[TIER_BUFFER],
        "bank_data": data,
        "buffer_data": accumulator,
    }
    logger.debug(
        "Tiling %dx%dx%d over %dx%d banks with %s p=%d",
        M, K, N, banks_M, banks_N, strategy, p,
    )
    return TilingPlan(
        M=M,
        K=K,
        N=N,
        b_w=b_w,
        b_a=b_a,
        b_o=b_o,
        strategy=strategy,
        p=p,
        k=k,
        bank_grid=(banks_M, banks_N),
        row_bounds=row_bounds,
        col_bounds=col_bounds,
        replicated=_replicated(strategy),
        resident=resident,
        cost_plan=cost_plan,
    )


@dataclass
class SimReport:
    per_bank: List[ExecReport]
    aggregate: ExecReport
    wall_time_s: float
    capacity_utilization: dict

    def to_dict(self, include_banks=False):
        out = {
            "wall_time_s": self.wall_time_s,
            "aggregate": self.aggregate.to_dict(),
            "capacity_utilization": dict(self.capacity_utilization),
            "banks": len(self.per_bank),
        }
        if include_banks:
            out["per_bank"] = [r.to_dict() for r in self.per_bank]
        return out


def _utilization(plan, device):
    def ratio(used, budget):
        if budget == 0:
            return 0.0 if used == 0 else math.inf
        return used / budget

    return {
        "bank_lut": ratio(plan.resident["bank_lut"], device.bank_lut_budget),
        "buffer_lut": ratio(plan.resident["buffer_lut"], device.buffer_lut_budget),
        "bank_data": ratio(plan.resident["bank_data"], device.bank_data_budget),
        "buffer_data": ratio(plan.resident["buffer_data"], device.buffer_data_budget),
    }


def simulate(plan, W, A, weight_table, act_table, device=None, jobs=1):
    """Run every bank tile through the engine and stitch the result."""
    device = device or DeviceConfig()
    if (W.rows, W.cols, A.cols) != (plan.M, plan.K, plan.N):
        raise DimensionMismatch(
            "plan is for %dx%dx%d, got W %dx%d and A %dx%d"
            % (plan.M, plan.K, plan.N, W.rows, W.cols, A.rows, A.cols)
        )
    luts = None
    if plan.strategy != Strategy.NAIVE_MAC:
        luts = engine.build_luts(plan.strategy, weight_table, act_table, plan.p, plan.b_o)

    def run_bank(tile):
        bank_id, (r0, r1), (c0, c1) = tile
        w_tile = CodeMatrix(W.data[r0:r1], W.bitwidth)
        a_tile = CodeMatrix(A.data[:, c0:c1], A.bitwidth)
        out, report = engine.execute(
            plan.strategy,
            w_tile,
            a_tile,
            weight_table,
            act_table,
            device=device,
            p=plan.p,
            k=plan.k,
            b_o=plan.b_o,
            luts=luts,
        )
        report.bank_id = bank_id
        return out, report

    tiles = list(plan.tiles())
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_bank, tiles))
    else:
        results = [run_bank(t) for t in tiles]

    output = np.zeros((plan.M, plan.N), dtype=np.int32)
    for (bank_id, (r0, r1), (c0, c1)), (out, _) in zip(tiles, results):
        output[r0:r1, c0:c1] = out

    per_bank = [report for _, report in results]
    aggregate = ExecReport.merged(per_bank, strategy=plan.strategy, p=plan.p)
    aggregate.k = plan.k
    aggregate.finalize(device)
    wall = max((r.modeled_time_s for r in per_bank), default=0.0)
    return output, SimReport(
        per_bank=per_bank,
        aggregate=aggregate,
        wall_time_s=wall,
        capacity_utilization=_utilization(plan, device),
    )
