"""Synthetic bidder valuations (GSVM-style and 2-wise), oracle value/demand
queries at true values, and bidder strategies.

Both generators produce valuations that are 2-wise dependent: a per-item
weight plus a pairwise synergy term.  This makes exact winner determination
on true values tractable through the quadratic pseudo-boolean solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rng
from .core import Bundle, CapabilityError, WELFARE_TOL, bundle_from_string, bundle_to_string

__all__ = [
    "GsvmBidder",
    "TwoWiseBidder",
    "BidderStrategy",
    "DomainInstance",
    "gsvm_value",
    "generate_gsvm",
    "generate_twowise",
    "true_demand",
    "answer_query",
    "all_bundles",
]

_SYNERGY_RATE = 0.2  # per extra item of interest in the GSVM closed form

_BUNDLE_CACHE: dict = {}


def all_bundles(m: int) -> np.ndarray:
    """All 2^m bundles as a (2^m, m) 0/1 array in lexicographic row order."""
    if m > 22:
        raise CapabilityError(f"bundle enumeration not supported for m={m}")
    if m not in _BUNDLE_CACHE:
        ks = np.arange(2**m, dtype=np.int64)
        _BUNDLE_CACHE[m] = ((ks[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.int8)
    return _BUNDLE_CACHE[m]


@dataclass(frozen=True)
class GsvmBidder:
    """Bidder with per-item base values and a global synergy factor over the
    items of interest: v(x) = sum_{j in xbar} v_j * (1 + 0.2 * (|xbar| - 1))."""

    item_values: tuple

    def __post_init__(self):
        object.__setattr__(self, "item_values", tuple(float(v) for v in self.item_values))

    @property
    def m(self) -> int:
        return len(self.item_values)

    @property
    def interest_set(self) -> tuple:
        return tuple(j for j, v in enumerate(self.item_values) if v > 0)

    def value(self, x: Bundle) -> float:
        return gsvm_value(self, x)

    def values_matrix(self, bundles: np.ndarray) -> np.ndarray:
        v = np.asarray(self.item_values)
        interest = v > 0
        sub = bundles[:, interest].astype(np.float64)
        s = sub @ v[interest]
        k = sub.sum(axis=1)
        return s * (1.0 + _SYNERGY_RATE * np.maximum(k - 1.0, 0.0))

    def qpbo_terms(self):
        """Linear and symmetric pairwise weights reproducing the valuation."""
        v = np.asarray(self.item_values)
        interest = (v > 0).astype(np.float64)
        pair = _SYNERGY_RATE * (v[:, None] + v[None, :]) * np.outer(interest, interest)
        np.fill_diagonal(pair, 0.0)
        return v.copy(), pair

    def to_dict(self):
        return {"kind": "gsvm", "item_values": list(self.item_values)}


@dataclass(frozen=True)
class TwoWiseBidder:
    """2-wise dependent valuation: v(x) = sum_{j in x} (w_j + sum_{j'<j in x} w_{j,j'}),
    clamped at 0 from below (no free disposal beyond the clamp)."""

    weights: tuple
    pair_weights: tuple  # symmetric matrix, rows as tuples, zero diagonal

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(
            self, "pair_weights", tuple(tuple(float(w) for w in row) for row in self.pair_weights)
        )

    @property
    def m(self) -> int:
        return len(self.weights)

    def raw_value(self, x: Bundle) -> float:
        idx = [j for j, b in enumerate(x) if b]
        total = sum(self.weights[j] for j in idx)
        for a in range(len(idx)):
            for b in range(a + 1, len(idx)):
                total += self.pair_weights[idx[a]][idx[b]]
        return total

    def value(self, x: Bundle) -> float:
        return max(0.0, self.raw_value(x))

    def values_matrix(self, bundles: np.ndarray) -> np.ndarray:
        w = np.asarray(self.weights)
        pair = np.asarray(self.pair_weights)
        upper = np.triu(pair, k=1)
        b = bundles.astype(np.float64)
        raw = b @ w + ((b @ upper) * b).sum(axis=1)
        return np.maximum(raw, 0.0)

    def qpbo_terms(self):
        return np.asarray(self.weights), np.asarray(self.pair_weights)

    def to_dict(self):
        return {
            "kind": "twowise",
            "weights": list(self.weights),
            "pair_weights": [list(row) for row in self.pair_weights],
        }


def gsvm_value(b: GsvmBidder, x: Bundle) -> float:
    """Closed-form GSVM valuation of a bundle."""
    xbar = [j for j in b.interest_set if x[j]]
    if not xbar:
        return 0.0
    base = sum(b.item_values[j] for j in xbar)
    return base * (1.0 + _SYNERGY_RATE * (len(xbar) - 1))


@dataclass(frozen=True)
class BidderStrategy:
    """Truthful bidder or overbidding manipulator with parameter z in [0, 1)."""

    kind: str = "truthful"  # "truthful" | "overbid"
    z: float = 0.0

    def __post_init__(self):
        if self.kind not in ("truthful", "overbid"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if not 0.0 <= self.z < 1.0:
            raise ValueError(f"z must lie in [0, 1), got {self.z}")

    @property
    def needs_oracle(self) -> bool:
        return self.kind == "overbid" and self.z > 0.0


@dataclass(frozen=True)
class DomainInstance:
    generator: str
    seed: int
    m: int
    n: int
    bidders: tuple

    def valuations(self):
        return [b.value for b in self.bidders]

    def to_json(self) -> str:
        return json.dumps(
            {
                "generator": self.generator,
                "seed": self.seed,
                "m": self.m,
                "n": self.n,
                "bidders": [b.to_dict() for b in self.bidders],
            }
        )

    @classmethod
    def from_json(cls, s: str) -> "DomainInstance":
        d = json.loads(s)
        bidders = []
        for bd in d["bidders"]:
            if bd["kind"] == "gsvm":
                bidders.append(GsvmBidder(tuple(bd["item_values"])))
            elif bd["kind"] == "twowise":
                bidders.append(
                    TwoWiseBidder(tuple(bd["weights"]), tuple(map(tuple, bd["pair_weights"])))
                )
            else:
                raise ValueError(f"unknown bidder kind {bd['kind']!r}")
        return cls(d["generator"], d["seed"], d["m"], d["n"], tuple(bidders))


def generate_gsvm(seed: int, m: int, n: int) -> DomainInstance:
    """GSVM-style instance: n-1 regional bidders on contiguous arcs of
    ceil(m/3) items with per-item values U[0,20], and one national bidder on
    an arc of ceil(2m/3) items with per-item values U[0,10]."""
    if m < 2 or n < 2:
        raise ValueError("need m >= 2 and n >= 2")
    gen = rng.stream(seed, f"gsvm/{m}/{n}")
    regional_size = -(-m // 3)
    national_size = -(-(2 * m) // 3)
    bidders = []
    for _ in range(n - 1):
        start = int(gen.integers(m))
        arc = {(start + k) % m for k in range(regional_size)}
        values = [float(gen.uniform(0.0, 20.0)) if j in arc else 0.0 for j in range(m)]
        bidders.append(GsvmBidder(tuple(values)))
    start = int(gen.integers(m))
    arc = {(start + k) % m for k in range(national_size)}
    values = [float(gen.uniform(0.0, 10.0)) if j in arc else 0.0 for j in range(m)]
    bidders.append(GsvmBidder(tuple(values)))
    return DomainInstance("gsvm", seed, m, n, tuple(bidders))


def generate_twowise(seed: int, m: int, n: int) -> DomainInstance:
    """2-wise instance: item weights U[0,10]; each pair synergy is nonzero
    with probability 0.25, drawn U[-3,6]."""
    if m < 2 or n < 2:
        raise ValueError("need m >= 2 and n >= 2")
    gen = rng.stream(seed, f"twowise/{m}/{n}")
    bidders = []
    for _ in range(n):
        w = gen.uniform(0.0, 10.0, size=m)
        pair = np.zeros((m, m))
        for j in range(m):
            for jp in range(j + 1, m):
                if gen.random() < 0.25:
                    pair[j, jp] = pair[jp, j] = gen.uniform(-3.0, 6.0)
        bidders.append(TwoWiseBidder(tuple(w), tuple(map(tuple, pair))))
    return DomainInstance("twowise", seed, m, n, tuple(bidders))


def true_demand(bidder, prices: Sequence[float]) -> Bundle:
    """Profit-maximizing bundle at linear item prices; ties go to the
    lexicographically smallest bundle, and the empty bundle floors profit at 0."""
    prices = np.asarray(prices, dtype=np.float64)
    m = len(prices)
    if m <= 16:
        bundles = all_bundles(m)
        profits = bidder.values_matrix(bundles) - bundles @ prices
        best = profits.max()
        idx = int(np.nonzero(profits >= best - WELFARE_TOL)[0][0])
        return tuple(int(b) for b in bundles[idx])
    if hasattr(bidder, "qpbo_terms"):
        from .wdp import qpbo_maximize_single

        return qpbo_maximize_single(bidder, prices)
    raise CapabilityError(f"m={m} too large for demand enumeration and no structured path")


def answer_query(strategy: BidderStrategy, v_i, b: Bundle, V_R: float | None = None,
                 V_T_b: float | None = None) -> float:
    """Value report for bundle b under the given strategy.

    The overbidding manipulator reports truthfully unless the best allocation
    available among elicited bids (V_R) exceeds the best welfare achievable
    with him fixed to b (V_T_b); then he inflates by z * (V_R - V_T_b).
    """
    true_value = v_i(b)
    if strategy.kind == "truthful" or strategy.z == 0.0:
        return true_value
    if V_R is None or V_T_b is None:
        raise ValueError("overbidding strategy requires the V_R / V_T oracle values")
    if V_R <= V_T_b:
        return true_value
    return true_value + strategy.z * (V_R - V_T_b)
