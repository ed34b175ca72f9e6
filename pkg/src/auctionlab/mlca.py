"""The iterative auction: per-round learning of bidder valuations, query
generation from main and marginal economies, randomized query delivery, and
final winner determination with VCG (or core-projected) payments computed on
the elicited reports only.

One run is fully determined by (domain, strategies, config): all randomness
comes from named streams keyed by the config seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from . import rng
from .core import (
    Allocation,
    AuctionOutcome,
    Bundle,
    Payments,
    ReportSet,
    bundle_from_mask,
    empty_bundle,
    mask_of,
    reported_welfare,
    restricted_welfare,
    vcg_payments_on_reports,
    wdp_over_reports,
)
from .learning import DEFAULT_C, KernelSpec, OracleModel, train_linear, train_svr
from .valuemodels import BidderStrategy, DomainInstance, answer_query
from .wdp import WdpProblem, solve, welfare_table

__all__ = [
    "LearnerSpec",
    "MlcaConfig",
    "QueryProfile",
    "ExhaustedBidderError",
    "DomainTooSmallError",
    "next_queries",
    "run_mlca",
    "vcg_nearest_payments",
    "swa_diagnostic",
    "replay_json",
    "learner_from_dict",
]


class ExhaustedBidderError(RuntimeError):
    """A bidder has already valued every bundle; no new query exists."""


class DomainTooSmallError(ValueError):
    """More distinct initial queries requested than nonempty bundles exist."""


@dataclass(frozen=True)
class LearnerSpec:
    """How to fit a bidder's valuation from reports.

    kind: "linear" (regularized regression), "svr" (kernelized SVR), or
    "oracle" (the true valuation, for harness experiments).
    """

    kind: str = "svr"
    kernel: KernelSpec | None = None
    epsilon: float = 0.0
    c: float = DEFAULT_C

    def __post_init__(self):
        if self.kind not in ("linear", "svr", "oracle"):
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.kind == "svr" and self.kernel is None:
            raise ValueError("svr learner needs a kernel")

    def train(self, reports: ReportSet, bidder=None):
        if self.kind == "oracle":
            if bidder is None:
                raise ValueError("oracle learner needs the true bidder")
            return OracleModel(bidder)
        if self.kind == "linear":
            return train_linear(reports, c=self.c)
        return train_svr(reports, self.kernel, epsilon=self.epsilon, c=self.c)


@dataclass(frozen=True)
class MlcaConfig:
    q_max: int
    q_init: int
    q_round: int = 1
    p_max: int = 0
    learner: object = LearnerSpec("linear")  # one spec, or a per-bidder sequence
    seed: int = 0
    payment_rule: str = "vcg"  # vcg | vcg_nearest

    def __post_init__(self):
        if not 1 <= self.q_init <= self.q_max:
            raise ValueError("need 1 <= q_init <= q_max")
        if self.q_round < 1 or self.p_max < 0:
            raise ValueError("need q_round >= 1 and p_max >= 0")
        if self.payment_rule not in ("vcg", "vcg_nearest"):
            raise ValueError(f"unknown payment rule {self.payment_rule!r}")

    def rounds(self) -> int:
        return (self.q_max - self.q_init) // self.q_round

    def learner_for(self, i: int) -> LearnerSpec:
        if isinstance(self.learner, LearnerSpec):
            return self.learner
        return self.learner[i]


@dataclass
class QueryProfile:
    """Next value query per bidder of one economy, plus diagnostic payload
    (the trained models and the pre-substitution solver result)."""

    economy: tuple
    provenance: str
    queries: dict = field(default_factory=dict)  # bidder -> Bundle
    models: dict = field(default_factory=dict)
    solution: object = None


def next_queries(
    economy: Sequence[int],
    reports: Sequence[ReportSet],
    generated: Mapping,
    cfg: MlcaConfig,
    bidders: Sequence | None = None,
    provenance: str = "main",
    skip: frozenset = frozenset(),
    trained: Mapping | None = None,
) -> QueryProfile:
    """One query per bidder of the economy: train on current reports, solve
    for the learned-welfare-maximizing allocation, then replace any stale
    assignment (already reported or generated, or empty) by re-solving with
    that bidder restricted to fresh bundles.

    Bidders substituted earlier keep their fresh bundle fixed in later
    restricted solves, so the profile stays feasible as an allocation.
    Bidders in `skip` receive the empty slot and no substitution.
    """
    econ = tuple(sorted(set(economy)))
    m = reports[econ[0]].m
    models = {}
    for i in econ:
        if len(reports[i]) == 0:
            raise ValueError(f"bidder {i} has no reports to train on")
        if trained is not None and i in trained:
            models[i] = trained[i]
        else:
            models[i] = cfg.learner_for(i).train(
                reports[i], bidders[i] if bidders is not None else None
            )
    model_row = tuple(models.get(i) for i in range(len(reports)))
    base = solve(WdpProblem(models=model_row, economy=econ))

    queries: dict = {}
    fixed: dict = {}
    for i in econ:
        q_i = base.allocation.bundle(i)
        seen = set(generated.get(i, ()))
        if i in skip:
            queries[i] = empty_bundle(m)
            continue
        if q_i not in reports[i] and q_i not in seen:
            queries[i] = q_i
            continue
        exclusions = set(reports[i].bundles()) | seen | {empty_bundle(m)}
        restricted = solve(
            WdpProblem(
                models=model_row, economy=econ, exclusions={i: exclusions}, fixed=dict(fixed)
            )
        )
        pinned = True
        if restricted.status == "infeasible" and fixed:
            # earlier substitutions may leave bidder i no fresh bundle; drop
            # the pins and fall back to restricting bidder i alone
            restricted = solve(
                WdpProblem(models=model_row, economy=econ, exclusions={i: exclusions})
            )
            pinned = False
        if restricted.status == "infeasible":
            raise ExhaustedBidderError(f"bidder {i} has valued every bundle")
        queries[i] = restricted.allocation.bundle(i)
        if pinned:
            fixed[i] = queries[i]
    return QueryProfile(econ, provenance, queries, models, base)


def _push_reports(domain: DomainInstance, cfg: MlcaConfig, push_bids) -> list:
    reports = [ReportSet(domain.m) for _ in range(domain.n)]
    if push_bids is None:
        return reports
    for i, bids in enumerate(push_bids):
        if len(bids) > cfg.p_max:
            raise ValueError(f"bidder {i}: {len(bids)} push bids exceed the cap {cfg.p_max}")
        for bundle, value in bids:
            reports[i].add(bundle, value)
    return reports


def _initial_bundles(domain: DomainInstance, cfg: MlcaConfig, i: int, taken: set) -> list:
    m = domain.m
    if cfg.q_init > 2**m - 1 - len(taken):
        raise DomainTooSmallError(f"cannot draw {cfg.q_init} distinct nonempty bundles at m={m}")
    gen = rng.stream(cfg.seed, f"mlca/init/{i}")
    chosen: list = []
    seen = set(taken)
    while len(chosen) < cfg.q_init:
        mask = int(gen.integers(1, 2**m))
        if mask in seen:
            continue
        seen.add(mask)
        chosen.append(bundle_from_mask(mask, m))
    return chosen


class _Responder:
    """Answers value queries under a strategy, supplying the overbidding
    oracle quantities (best reported allocation so far, and best true
    welfare with the manipulator pinned to the queried bundle)."""

    def __init__(self, domain: DomainInstance, strategies: Sequence[BidderStrategy]):
        self.domain = domain
        self.strategies = strategies
        self._pinned: dict = {}

    def _pinned_table(self, i: int) -> np.ndarray:
        if i not in self._pinned:
            others = [OracleModel(b) for j, b in enumerate(self.domain.bidders) if j != i]
            self._pinned[i] = welfare_table(others, self.domain.m)
        return self._pinned[i]

    def answer(self, i: int, b: Bundle, reports: Sequence[ReportSet]) -> float:
        strategy = self.strategies[i]
        v_i = self.domain.bidders[i].value
        if not strategy.needs_oracle:
            return answer_query(strategy, v_i, b)
        v_r = restricted_welfare(reports)
        full = 2**self.domain.m - 1
        v_t = v_i(b) + float(self._pinned_table(i)[full ^ mask_of(b)])
        return answer_query(strategy, v_i, b, V_R=v_r, V_T_b=v_t)


def _round_economies(n: int, q_round: int, gen) -> list:
    """Sequence of (economy, provenance) calls for one round: sampled (or
    all) marginal economies first, then the main economy, possibly repeated."""
    everyone = tuple(range(n))
    calls: list = []

    def one_pass(excluded: Sequence[int]):
        for i in excluded:
            calls.append((tuple(j for j in everyone if j != i), f"marginal({i})"))
        calls.append((everyone, "main"))

    reps, rem = divmod(q_round, n)
    for _ in range(reps):
        one_pass(everyone)
    if rem:
        sampled = sorted(int(x) for x in gen.choice(n, size=rem - 1, replace=False))
        one_pass(sampled)
    return calls


def run_mlca(
    domain: DomainInstance,
    strategies: Sequence[BidderStrategy],
    cfg: MlcaConfig,
    push_bids: Sequence | None = None,
    initial_queries: Sequence | None = None,
) -> AuctionOutcome:
    """Full auction run.

    initial_queries optionally overrides the random initialization with
    explicit per-bidder bundle lists; an entry may be a bundle (answered by
    the bidder's strategy) or a (bundle, value) pair with a forced report.
    """
    n, m = domain.n, domain.m
    if len(strategies) != n:
        raise ValueError("one strategy per bidder required")
    reports = _push_reports(domain, cfg, push_bids)
    responder = _Responder(domain, strategies)
    trace: list = []
    queries_answered = [0] * n

    for i in range(n):
        if initial_queries is not None:
            entries = initial_queries[i]
        else:
            taken = {mask_of(b) for b in reports[i].bundles()}
            entries = _initial_bundles(domain, cfg, i, taken)
        for entry in entries:
            if isinstance(entry[0], tuple):
                bundle, value = entry
            else:
                bundle, value = tuple(entry), None
            if value is None:
                value = responder.answer(i, bundle, reports)
            reports[i].add(bundle, value)
            queries_answered[i] += 1
            trace.append({"type": "init", "bidder": i, "bundle": bundle, "value": value})

    everyone = tuple(range(n))
    rounds = cfg.rounds()
    for t in range(1, rounds + 1):
        gen_econ = rng.stream(cfg.seed, f"mlca/econ/{t}")
        generated: dict = {i: set() for i in range(n)}
        pending: dict = {i: [] for i in range(n)}
        exhausted = frozenset(
            i for i in range(n) if len(reports[i]) + len(generated[i]) >= 2**m - 1
        )
        # reports are frozen while a round's queries are generated, so one
        # trained model per bidder serves every economy this round
        trained = {
            i: cfg.learner_for(i).train(reports[i], domain.bidders[i]) for i in range(n)
        }
        for economy, provenance in _round_economies(n, cfg.q_round, gen_econ):
            profile = next_queries(
                economy, reports, generated, cfg, domain.bidders, provenance,
                skip=exhausted, trained=trained,
            )
            trace.append(
                {
                    "type": "solve",
                    "round": t,
                    "economy": provenance,
                    "members": profile.economy,
                    "objective": profile.solution.objective,
                    "nodes": profile.solution.nodes,
                    "allocation": profile.solution.allocation,
                    "models": profile.models,
                }
            )
            for i, b in profile.queries.items():
                if not any(b) or queries_answered[i] + len(pending[i]) >= cfg.q_max:
                    continue
                generated[i].add(b)
                pending[i].append((b, provenance))

        for i in range(n):
            if not pending[i]:
                continue
            order = rng.stream(cfg.seed, f"mlca/deliver/{t}/{i}").permutation(len(pending[i]))
            for idx in order:
                bundle, provenance = pending[i][int(idx)]
                value = responder.answer(i, bundle, reports)
                reports[i].add(bundle, value)
                queries_answered[i] += 1
                trace.append(
                    {
                        "type": "report",
                        "round": t,
                        "bidder": i,
                        "bundle": bundle,
                        "value": value,
                        "provenance": provenance,
                    }
                )

    assert all(q <= cfg.q_max for q in queries_answered)
    allocation = wdp_over_reports(reports, everyone)
    if cfg.payment_rule == "vcg":
        payments = vcg_payments_on_reports(reports, allocation)
    else:
        payments = vcg_nearest_payments(reports, allocation)
    trace.append({"type": "final", "allocation": allocation, "payments": payments,
                  "reports": reports})
    return AuctionOutcome(allocation, payments, rounds, trace)


def vcg_nearest_payments(
    reports: Sequence[ReportSet], allocation: Allocation | None = None
) -> Payments:
    """Point of the revealed core closest to VCG in Euclidean norm.

    The revealed core is cut out by one constraint per coalition C (the
    bidders outside C must pay at least what C could generate on its own,
    beyond what C's members already enjoy) plus pay-at-most-your-bid caps.
    """
    n = len(reports)
    if n > 8:
        raise ValueError(f"coalition enumeration supports n <= 8, got {n}")
    if allocation is None:
        allocation = wdp_over_reports(reports)
    p_vcg = np.asarray(vcg_payments_on_reports(reports, allocation).amounts)
    if n == 1:
        return Payments((float(p_vcg[0]),))
    caps = np.asarray([reports[i].value(allocation.bundle(i)) for i in range(n)])

    rows, rhs = [], []
    for mask in range(2**n):
        coalition = [i for i in range(n) if (mask >> i) & 1]
        outside = [i for i in range(n) if not (mask >> i) & 1]
        if not outside:
            continue
        bound = restricted_welfare(reports, coalition) - sum(
            reports[i].value(allocation.bundle(i)) for i in coalition
        )
        if bound <= 1e-12:
            continue
        row = np.zeros(n)
        row[outside] = 1.0
        rows.append(row)
        rhs.append(bound)

    if not rows:
        return Payments(tuple(float(x) for x in p_vcg))
    A, b = np.asarray(rows), np.asarray(rhs)
    if np.all(A @ p_vcg >= b - 1e-9):
        return Payments(tuple(float(x) for x in p_vcg))

    res = optimize.minimize(
        lambda p: float(np.sum((p - p_vcg) ** 2)),
        x0=caps.astype(np.float64),  # pay-your-bid is always in the revealed core
        jac=lambda p: 2.0 * (p - p_vcg),
        bounds=[(0.0, float(c)) for c in caps],
        constraints=[{"type": "ineq", "fun": lambda p, r=row, c=cut: float(r @ p - c)}
                     for row, cut in zip(A, b)],
        method="SLSQP",
        options={"maxiter": 500, "ftol": 1e-12},
    )
    p = np.maximum(res.x, 0.0)
    if not np.all(A @ p >= b - 1e-6):
        raise RuntimeError("core projection failed to satisfy coalition constraints")
    return Payments(tuple(float(x) for x in p))


def swa_diagnostic(
    domain: DomainInstance,
    strategies: Sequence[BidderStrategy],
    cfg: MlcaConfig,
    push_bids: Sequence | None = None,
) -> list:
    """Measure how much each bidder's reports move the welfare computed in
    the economies that exclude them: rerun the auction truthfully with the
    same seed and report, per round and marginal economy, the difference in
    solved learned welfare (manipulated minus truthful)."""
    truthful = [BidderStrategy() for _ in range(domain.n)]
    run_a = run_mlca(domain, strategies, cfg, push_bids)
    run_b = run_mlca(domain, truthful, cfg, push_bids)

    def solves(outcome):
        out = {}
        for e in outcome.trace:
            if e["type"] == "solve" and e["economy"].startswith("marginal"):
                out.setdefault((e["round"], e["economy"]), []).append(e["objective"])
        return out

    a, b = solves(run_a), solves(run_b)
    records = []
    for key in sorted(set(a) | set(b)):
        for obj_a, obj_b in zip(a.get(key, []), b.get(key, [])):
            excluded = int(key[1][len("marginal("):-1])
            records.append(
                {
                    "round": key[0],
                    "economy": key[1],
                    "excluded_bidder": excluded,
                    "welfare_delta": obj_a - obj_b,
                }
            )
    return records


def _learner_dict(learner) -> dict | list:
    if not isinstance(learner, LearnerSpec):
        return [_learner_dict(spec) for spec in learner]
    out = {"kind": learner.kind, "epsilon": learner.epsilon, "c": learner.c}
    if learner.kernel is not None:
        out["kernel"] = learner.kernel.kind
        out["lambda"] = learner.kernel.lam
    return out


def learner_from_dict(d) -> LearnerSpec | tuple:
    if isinstance(d, list):
        return tuple(learner_from_dict(x) for x in d)
    kernel = KernelSpec(d["kernel"], d["lambda"]) if "kernel" in d else None
    return LearnerSpec(d["kind"], kernel, d["epsilon"], d["c"])


def replay_json(domain: DomainInstance, cfg: MlcaConfig, outcome: AuctionOutcome) -> str:
    """Everything needed to reproduce or audit a run: the instance, the
    configuration, every elicited report, and the final outcome."""
    import json

    reports = next(e["reports"] for e in outcome.trace if e["type"] == "final")
    return json.dumps(
        {
            "domain": json.loads(domain.to_json()),
            "config": {
                "q_max": cfg.q_max,
                "q_init": cfg.q_init,
                "q_round": cfg.q_round,
                "p_max": cfg.p_max,
                "seed": cfg.seed,
                "payment_rule": cfg.payment_rule,
                "learner": _learner_dict(cfg.learner),
            },
            "reports": [json.loads(r.to_json()) for r in reports],
            "allocation": [list(b) for b in outcome.allocation.assignments],
            "payments": list(outcome.payments.amounts),
            "rounds": outcome.rounds,
        }
    )
