"""Theory-facing measurements on auction runs: imputed bundle prices and
their approximate-clearing certificate, and per-round efficiency-loss bound
checks against the true valuations.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Allocation, CapabilityError, WELFARE_TOL
from .learning import OracleModel, predict, predict_many
from .valuemodels import DomainInstance
from .wdp import WdpProblem, solve, welfare_table

__all__ = [
    "PriceProfile",
    "ClearingCertificate",
    "certify_clearing",
    "b1_error_terms",
    "bound_report",
    "bound_report_csv",
    "CLEARING_MAX_M",
]

#: Largest item count for which demand sets are enumerated exactly.
CLEARING_MAX_M = 12


@dataclass(frozen=True)
class PriceProfile:
    """Per-bidder bundle prices given by learned valuations.

    Prices are normalized so the empty bundle costs nothing; the clearing
    subsidies below are invariant to such per-bidder constant shifts, so the
    raw learned values may be certified directly.
    """

    models: tuple

    def price(self, i: int, bundle) -> float:
        model = self.models[i]
        m = len(bundle)
        return predict(model, tuple(bundle)) - predict(model, (0,) * m)


@dataclass(frozen=True)
class ClearingCertificate:
    """How far a price profile is from clearing the market at an allocation:
    each bidder would need a subsidy beta_i to weakly prefer their assigned
    bundle, and the seller a subsidy gamma to weakly prefer the allocation's
    total price over the best alternative."""

    allocation: Allocation
    beta: tuple
    gamma: float
    delta: float

    def __post_init__(self):
        if min(self.beta, default=0.0) < -1e-9 or self.gamma < -1e-9:
            raise AssertionError("negative clearing subsidy")


def certify_clearing(
    pi: PriceProfile, allocation: Allocation, domain: DomainInstance
) -> ClearingCertificate:
    """Exact clearing subsidies by full enumeration of every bidder's demand
    set and one winner-determination solve for the seller's supply side."""
    m = domain.m
    if m > CLEARING_MAX_M:
        raise CapabilityError(f"clearing certification enumerates 2^m bundles; m={m} too large")
    ks = np.arange(2**m, dtype=np.int64)
    bundles = ((ks[:, None] >> np.arange(m)) & 1).astype(np.int8)
    betas = []
    price_at_alloc = []
    for i, bidder in enumerate(domain.bidders):
        prices = predict_many(pi.models[i], bundles)
        utilities = bidder.values_matrix(bundles) - prices
        b_i = allocation.bundle(i)
        mask = sum(1 << j for j, x in enumerate(b_i) if x)
        beta = float(utilities.max() - utilities[mask])
        betas.append(max(0.0, beta))
        price_at_alloc.append(float(prices[mask]))
    supply_best = float(welfare_table(pi.models, m)[2**m - 1])
    gamma = max(0.0, supply_best - sum(price_at_alloc))
    delta = float(sum(betas) + gamma)
    return ClearingCertificate(allocation, tuple(betas), gamma, delta)


def b1_error_terms(models: Sequence, domain: DomainInstance, a_tilde: Allocation) -> tuple:
    """(worst error over all bundles, worst error at the given allocation),
    each maximized over bidders; the certified delta of the imputed prices
    never exceeds n times their sum."""
    m = domain.m
    ks = np.arange(2**m, dtype=np.int64)
    bundles = ((ks[:, None] >> np.arange(m)) & 1).astype(np.int8)
    d1 = 0.0
    d2 = 0.0
    for i, bidder in enumerate(domain.bidders):
        err = np.abs(predict_many(models[i], bundles) - bidder.values_matrix(bundles))
        d1 = max(d1, float(err.max()))
        mask = sum(1 << j for j, x in enumerate(a_tilde.bundle(i)) if x)
        d2 = max(d2, float(err[mask]))
    return d1, d2


def _true_optimum(domain: DomainInstance, members: tuple):
    models = tuple(OracleModel(b) for b in domain.bidders)
    sol = solve(WdpProblem(models=models, economy=members))
    return sol.allocation, sol.objective


def bound_report(trace: Sequence, domain: DomainInstance, clearing: bool = True) -> list:
    """Per recorded solve: the worst learning errors at the learned and the
    efficient allocations, the realized efficiency loss of the learned
    allocation, the resulting loss bound, its slack, and (for small
    instances) the clearing delta of the imputed prices."""
    records = []
    opt_cache: dict = {}
    for entry in trace:
        if entry.get("type") != "solve":
            continue
        members = tuple(entry["members"])
        models = entry["models"]
        a_tilde = entry["allocation"]
        if members not in opt_cache:
            opt_cache[members] = _true_optimum(domain, members)
        a_star, v_star = opt_cache[members]
        if v_star <= WELFARE_TOL:
            continue
        delta1 = 0.0
        delta2 = 0.0
        achieved = 0.0
        for i in members:
            v_i = domain.bidders[i].value
            pred_tilde = predict(models[i], a_tilde.bundle(i))
            delta1 = max(delta1, abs(pred_tilde - v_i(a_tilde.bundle(i))))
            pred_star = predict(models[i], a_star.bundle(i))
            delta2 = max(delta2, abs(pred_star - v_i(a_star.bundle(i))))
            achieved += v_i(a_tilde.bundle(i))
        eff_loss = 1.0 - achieved / v_star
        bound = len(members) * (delta1 + delta2) / v_star
        clearing_delta = ""
        if clearing and domain.m <= CLEARING_MAX_M:
            sub = _restrict_domain(domain, members)
            cert = certify_clearing(
                PriceProfile(tuple(models[i] for i in members)),
                Allocation(tuple(a_tilde.bundle(i) for i in members)),
                sub,
            )
            clearing_delta = cert.delta
        records.append(
            {
                "round": entry["round"],
                "economy": entry["economy"],
                "delta1": delta1,
                "delta2": delta2,
                "eff_loss": eff_loss,
                "bound": bound,
                "slack": bound - eff_loss,
                "clearing_delta": clearing_delta,
            }
        )
    return records


def _restrict_domain(domain: DomainInstance, members: tuple) -> DomainInstance:
    return DomainInstance(
        domain.generator,
        domain.seed,
        domain.m,
        len(members),
        tuple(domain.bidders[i] for i in members),
    )


def bound_report_csv(records: Sequence) -> str:
    cols = ["round", "economy", "delta1", "delta2", "eff_loss", "bound", "slack",
            "clearing_delta"]
    out = io.StringIO()
    out.write(",".join(cols) + "\n")
    for r in records:
        cells = []
        for c in cols:
            v = r[c]
            cells.append(f"{v:.12g}" if isinstance(v, float) else str(v))
        out.write(",".join(cells) + "\n")
    return out.getvalue()
