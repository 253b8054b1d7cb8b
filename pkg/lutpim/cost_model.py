# -*- coding: utf-8 -*-

"""
First-order performance model for LUT-based GEMM on a PIM bank.

Only LUT accesses are charged. Streaming a slice pair from the bank to the
buffer costs ``L_D`` per entry, a reordering lookup followed by a canonical
lookup and an accumulation costs ``L_local``. With ``G = ceil(K / p)``:

    slice streaming   T(p)     = 2^(b_w p) G N L_D + M G N L_local
    buffer resident   T_local  = M ceil(K / p_local) N L_local

The best streaming degree minimizes ``(2^(b_w p) L_D + M L_local) / p`` and
streaming pays off over the buffer-resident layout when

    M >= 2^(b_w p*) (L_D / L_local) p_local / (p* - p_local)

Input, weight and output traffic is ignored on purpose, the simulator reports
it separately.

License: See the LICENSE file.

"""

import logging
import math

from dataclasses import dataclass, field
from typing import List, Optional

from .config import DeviceConfig, LatencyConstants
from .engine import Strategy, group_count
from .errors import InfeasibleP
from .pim_sim import TIER_BANK, TIER_BUFFER, max_feasible_p, max_stream_p

__all__ = [
    "Plan",
    "decision_threshold",
    "make_plan",
    "max_stream_p",
    "placement_decision",
    "predict_local_time",
    "predict_slice_time",
    "select_p_star",
    "slice_objective",
]

logger = logging.getLogger(__name__)


def predict_slice_time(p, M, K, N, b_w, consts=None):
    consts = consts or LatencyConstants()
    if p < 1:
        raise ValueError("p must be at least 1, got %r" % p)
    G = group_count(K, p)
    loads = (1 << (b_w * p)) * G * N
    lookups = M * G * N
    return loads * consts.l_d_seconds + lookups * consts.l_local_seconds


def predict_local_time(p_local, M, K, N, consts=None):
    consts = consts or LatencyConstants()
    if p_local < 1:
        raise ValueError("p_local must be at least 1, got %r" % p_local)
    lookups = M * group_count(K, p_local) * N
    return lookups * consts.l_local_seconds


def slice_objective(p, M, b_w, consts=None):
    """Streaming time per unit of K * N, the quantity minimized over p."""
    consts = consts or LatencyConstants()
    return ((1 << (b_w * p)) * consts.l_d_seconds + M * consts.l_local_seconds) / p


def select_p_star(M, K, N, b_w, p_dram, consts=None, p_min=1):
    """Packing degree in ``[p_min, p_dram]`` with the fastest slice streaming.

    K and N scale every candidate equally and do not affect the choice; they
    are accepted so the call mirrors :func:`predict_slice_time`. Ties go to
    the smaller p.
    """
    if p_dram < 1:
        raise ValueError("p_dram must be at least 1, got %r" % p_dram)
    if not 1 <= p_min <= p_dram:
        raise ValueError("p_min must be in [1, %d], got %r" % (p_dram, p_min))
    best, best_value = p_min, slice_objective(p_min, M, b_w, consts)
    for p in range(p_min + 1, p_dram + 1):
        value = slice_objective(p, M, b_w, consts)
        if value < best_value:
            best, best_value = p, value
    return best


def decision_threshold(b_w, p_star, p_local, consts=None):
    """Smallest M at which slice streaming beats the buffer-resident LUTs."""
    consts = consts or LatencyConstants()
    if not 1 <= p_local <= p_star:
        raise ValueError(
            "need 1 <= p_local <= p_star, got p_local=%r p_star=%r"
            % (p_local, p_star)
        )
    if p_star == p_local:
        return math.inf
    ratio = consts.l_d_seconds / consts.l_local_seconds
    return (1 << (b_w * p_star)) * ratio * p_local / (p_star - p_local)


def placement_decision(M, b_w, p_star, p_local, consts=None):
    if M < decision_threshold(b_w, p_star, p_local, consts):
        return Strategy.CANONICAL_BUFFER
    return Strategy.SLICE_STREAM


@dataclass
class Plan:
    """Outcome of the planner for one problem on one device.

    ``p_dram`` and ``p_local`` are the canonical+reordering capacity limits
    of the bank and the buffer, ``p_stream`` the largest p whose k slices
    fit the buffer. The packed limits are kept for comparison only.
    """

    strategy: Strategy
    p_star: int
    p_local: Optional[int]
    p_dram: int
    p_stream: Optional[int]
    predicted_time_s: float
    decision_threshold_M: float
    M: int
    K: int
    N: int
    b_w: int
    b_a: int
    b_o: int
    k: int = 1
    p_dram_packed: Optional[int] = None
    p_local_packed: Optional[int] = None
    table: List[dict] = field(default_factory=list)

    @property
    def p(self):
        if self.strategy == Strategy.CANONICAL_BUFFER:
            return self.p_local
        return self.p_star

    def to_dict(self):
        threshold = self.decision_threshold_M
        return {
            "strategy": str(self.strategy),
            "p": self.p,
            "p_star": self.p_star,
            "p_local": self.p_local,
            "p_dram": self.p_dram,
            "p_stream": self.p_stream,
            "p_dram_packed": self.p_dram_packed,
            "p_local_packed": self.p_local_packed,
            "predicted_time_s": self.predicted_time_s,
            # JSON has no infinity
            "decision_threshold_M": None if math.isinf(threshold) else threshold,
            "problem": {"M": self.M, "K": self.K, "N": self.N},
            "bitwidths": {"b_w": self.b_w, "b_a": self.b_a, "b_o": self.b_o},
            "k": self.k,
            "table": [dict(row) for row in self.table],
        }


def make_plan(M, K, N, b_w, b_a, b_o, device=None, k=1):
    """Choose between buffer-resident and streamed canonical LUTs.

    Every p up to the bank limit is evaluated; the streaming degree is
    searched between ``p_local`` and the smaller of ``p_dram`` and
    ``p_stream``.
    """
    device = device or DeviceConfig()
    consts = device.consts
    p_dram = max_feasible_p(device.bank_lut_budget, b_w, b_a, b_o, True, True)
    p_local = max_feasible_p(device.buffer_lut_budget, b_w, b_a, b_o, True, True)
    p_stream = max_stream_p(device.buffer_lut_budget, b_w, b_o, k)
    if p_dram is None:
        raise InfeasibleP(
            "canonical and reordering LUTs do not fit the bank even at p=1",
            tier=TIER_BANK,
            budget=device.bank_lut_budget,
        )

    p_min = p_local or 1
    p_max = min(p_dram, p_stream) if p_stream is not None else None
    can_stream = p_max is not None and p_max >= p_min
    if p_local is None and not can_stream:
        raise InfeasibleP(
            "neither the LUTs nor %d slice pairs fit the buffer at p=1" % k,
            tier=TIER_BUFFER,
            budget=device.buffer_lut_budget,
        )

    if not can_stream:
        p_star = p_local
        strategy = Strategy.CANONICAL_BUFFER
        threshold = math.inf
    elif p_local is None:
        p_star = select_p_star(M, K, N, b_w, p_max, consts, p_min=1)
        strategy = Strategy.SLICE_STREAM
        threshold = 0.0
    else:
        p_star = select_p_star(M, K, N, b_w, p_max, consts, p_min=p_min)
        threshold = decision_threshold(b_w, p_star, p_local, consts)
        strategy = placement_decision(M, b_w, p_star, p_local, consts)

    if strategy == Strategy.SLICE_STREAM:
        predicted = predict_slice_time(p_star, M, K, N, b_w, consts)
    else:
        predicted = predict_local_time(p_local, M, K, N, consts)

    table = []
    for p in range(1, p_dram + 1):
        table.append(
            {
                "p": p,
                "slice_time_s": predict_slice_time(p, M, K, N, b_w, consts),
                "objective": slice_objective(p, M, b_w, consts),
                "streamable": p_stream is not None and p <= p_stream,
                "buffer_resident": p_local is not None and p <= p_local,
            }
        )

    plan = Plan(
        strategy=strategy,
        p_star=p_star,
        p_local=p_local,
        p_dram=p_dram,
        p_stream=p_stream,
        predicted_time_s=predicted,
        decision_threshold_M=threshold,
        M=M,
        K=K,
        N=N,
        b_w=b_w,
        b_a=b_a,
        b_o=b_o,
        k=k,
        p_dram_packed=max_feasible_p(device.bank_lut_budget, b_w, b_a, b_o, False),
        p_local_packed=max_feasible_p(device.buffer_lut_budget, b_w, b_a, b_o, False),
        table=table,
    )
    logger.debug(
        "Plan for %dx%dx%d W%dA%d: %s p=%d (p*=%d, p_local=%s, p_dram=%d)",
        M, K, N, b_w, b_a, strategy, plan.p, p_star, p_local, p_dram,
    )
    return plan
