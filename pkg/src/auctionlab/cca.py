"""Combinatorial clock auction baseline: an ascending clock phase with
linear item prices and truthful demand responses, followed by one of three
supplementary bidding heuristics, with winner determination and payments on
the collected bids.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rng
from .core import (
    AuctionOutcome,
    Bundle,
    CapabilityError,
    ReportSet,
    bundle_to_string,
    vcg_payments_on_reports,
    wdp_over_reports,
)
from .valuemodels import DomainInstance, all_bundles, true_demand

__all__ = [
    "ClockState",
    "HEURISTICS",
    "init_reserve_prices",
    "clock_phase",
    "supplementary_bids",
    "run_cca",
    "clock_trace_csv",
]

HEURISTICS = ("clock", "clock_raised", "profit_max")

_RESERVE_SAMPLES = 10_000
_RESERVE_RATE = 0.01
_INCREMENT = 1.05
_MAX_ROUNDS = 1_000


@dataclass(frozen=True)
class ClockState:
    prices: tuple  # final per-item prices
    round: int
    price_history: tuple  # per-round per-item prices
    demand_history: tuple  # per-round per-bidder bundles
    over_demand: tuple  # final per-item excess demand (count - 1, floored at 0)


def init_reserve_prices(domain: DomainInstance) -> tuple:
    """Per-item reserve: 1% of the mean imputed license value, where each
    sampled (bidder, bundle) pair attributes value/size to every contained
    item.  Sampling is seeded by the domain seed."""
    n, m = domain.n, domain.m
    gen = rng.stream(domain.seed, "cca/reserve")
    bidder_idx = gen.integers(0, n, size=_RESERVE_SAMPLES)
    masks = gen.integers(1, 2**m, size=_RESERVE_SAMPLES)
    bundles = ((masks[:, None] >> np.arange(m)) & 1).astype(np.int8)
    values = np.empty(_RESERVE_SAMPLES)
    for i in range(n):
        sel = bidder_idx == i
        if sel.any():
            values[sel] = domain.bidders[i].values_matrix(bundles[sel])
    per_item = values / bundles.sum(axis=1)
    sums = (bundles * per_item[:, None]).sum(axis=0)
    counts = bundles.sum(axis=0)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return tuple(float(x) for x in _RESERVE_RATE * means)


def clock_phase(domain: DomainInstance, prices: Sequence[float]) -> ClockState:
    """Ascending clock: every item demanded by two or more bidders gets a 5%
    price increase; stops when no item is over-demanded."""
    prices = np.asarray(prices, dtype=np.float64)
    price_history: list = []
    demand_history: list = []
    over = np.zeros(domain.m, dtype=int)
    rounds = 0
    for rounds in range(1, _MAX_ROUNDS + 1):
        demands = [true_demand(b, prices) for b in domain.bidders]
        price_history.append(tuple(float(x) for x in prices))
        demand_history.append(tuple(demands))
        counts = np.asarray(demands).sum(axis=0)
        over = np.maximum(counts - 1, 0)
        if not over.any():
            break
        prices = np.where(counts >= 2, prices * _INCREMENT, prices)
    return ClockState(
        tuple(float(x) for x in prices),
        rounds,
        tuple(price_history),
        tuple(demand_history),
        tuple(int(x) for x in over),
    )


def _clock_bundle_prices(state: ClockState, i: int) -> dict:
    """Highest quoted total price per unique nonempty bundle bidder i
    demanded during the clock phase."""
    best: dict = {}
    for prices, demands in zip(state.price_history, state.demand_history):
        b = demands[i]
        if not any(b):
            continue
        quoted = float(np.dot(prices, b))
        best[b] = max(best.get(b, 0.0), quoted)
    return best


def supplementary_bids(
    heuristic: str, state: ClockState, domain: DomainInstance, q: int = 10
) -> list:
    """Per-bidder report sets after the (possibly empty) supplementary round.

    clock: each clock-demanded bundle at its highest quoted price.
    clock_raised: true values on the same bundles.
    profit_max: clock_raised plus the q bundles with the highest true profit
    at the final clock prices, negative profits allowed.
    """
    if heuristic not in HEURISTICS:
        raise ValueError(f"unknown heuristic {heuristic!r}; pick from {HEURISTICS}")
    m = domain.m
    if heuristic == "profit_max" and m > 22:
        raise CapabilityError(f"profit_max enumerates all bundles; m={m} is too large")
    reports = []
    final_prices = np.asarray(state.prices)
    for i, bidder in enumerate(domain.bidders):
        rs = ReportSet(m)
        clock_prices = _clock_bundle_prices(state, i)
        for bundle in sorted(clock_prices):
            if heuristic == "clock":
                rs.add(bundle, clock_prices[bundle])
            else:
                rs.add(bundle, bidder.value(bundle))
        if heuristic == "profit_max":
            bundles = all_bundles(m)
            profits = bidder.values_matrix(bundles) - bundles @ final_prices
            order = np.lexsort((np.arange(len(bundles)), -profits))
            added = 0
            for idx in order:
                bundle = tuple(int(x) for x in bundles[idx])
                if added >= q:
                    break
                if not any(bundle):
                    continue
                if bundle not in rs:
                    rs.add(bundle, bidder.value(bundle))
                added += 1
        reports.append(rs)
    return reports


def run_cca(
    domain: DomainInstance, heuristic: str, payment_rule: str = "vcg", q: int = 10
) -> AuctionOutcome:
    """Clock phase, supplementary bids, winner determination, payments."""
    reserves = init_reserve_prices(domain)
    state = clock_phase(domain, reserves)
    reports = supplementary_bids(heuristic, state, domain, q=q)
    allocation = wdp_over_reports(reports)
    if payment_rule == "vcg":
        payments = vcg_payments_on_reports(reports, allocation)
    elif payment_rule == "vcg_nearest":
        from .mlca import vcg_nearest_payments

        payments = vcg_nearest_payments(reports, allocation)
    else:
        raise ValueError(f"unknown payment rule {payment_rule!r}")
    rounds = state.round + (0 if heuristic == "clock" else 1)
    trace = [
        {"type": "clock", "state": state, "reserves": reserves},
        {"type": "final", "allocation": allocation, "payments": payments, "reports": reports},
    ]
    return AuctionOutcome(allocation, payments, rounds, trace)


def clock_trace_csv(state: ClockState) -> str:
    """CSV of the clock phase: one row per round with item prices and each
    bidder's demanded bundle as a bit string."""
    n = len(state.demand_history[0]) if state.demand_history else 0
    m = len(state.prices)
    out = io.StringIO()
    header = ["round"] + [f"price_{j}" for j in range(m)] + [f"demand_{i}" for i in range(n)]
    out.write(",".join(header) + "\n")
    for r, (prices, demands) in enumerate(zip(state.price_history, state.demand_history), 1):
        row = [str(r)]
        row.extend(f"{p:.10g}" for p in prices)
        row.extend(bundle_to_string(b) for b in demands)
        out.write(",".join(row) + "\n")
    return out.getvalue()
