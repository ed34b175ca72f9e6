import json

import numpy as np
import pytest

from auctionlab.core import ReportSet, bundle_from_mask, feasible, utility
from auctionlab.learning import KernelSpec
from auctionlab.mlca import (
    DomainTooSmallError,
    LearnerSpec,
    MlcaConfig,
    learner_from_dict,
    next_queries,
    replay_json,
    run_mlca,
    swa_diagnostic,
    vcg_nearest_payments,
)
from auctionlab.valuemodels import BidderStrategy, DomainInstance, generate_gsvm
from conftest import final_reports

A, B, AB = (1, 0), (0, 1), (1, 1)

QUAD = LearnerSpec("svr", KernelSpec("quadratic", 0.1))


class TableBidder:
    """Explicit bundle-value table, for hand-built instances."""

    def __init__(self, table):
        self.table = {tuple(k): float(v) for k, v in table.items()}
        self.m = len(next(iter(table)))

    def value(self, bundle):
        return self.table.get(tuple(bundle), 0.0)


def two_bidder_domain():
    b1 = TableBidder({A: 2.0, B: 1.1, AB: 2.0})
    b2 = TableBidder({A: 1.0, B: 1.0, AB: 2.0})
    return DomainInstance("table", 0, 2, 2, (b1, b2))


class TestWorkedTwoBidderExample:
    """Two items, two bidders, linear learner, one query round; the
    final allocation flips when bidder 1 shades his report for item B."""

    cfg = MlcaConfig(q_max=2, q_init=1, q_round=1, learner=LearnerSpec("linear"), seed=0)

    def test_truthful_branch(self):
        domain = two_bidder_domain()
        outcome = run_mlca(
            domain,
            [BidderStrategy(), BidderStrategy()],
            self.cfg,
            initial_queries=[[B], [AB]],
        )
        assert outcome.allocation.bundle(0) == B
        assert outcome.payments[0] == pytest.approx(1.0, abs=1e-6)
        u1 = utility(0, outcome.allocation, outcome.payments, domain.bidders[0].value)
        assert u1 == pytest.approx(0.1, abs=1e-6)

    def test_shaded_report_branch(self):
        domain = two_bidder_domain()
        outcome = run_mlca(
            domain,
            [BidderStrategy(), BidderStrategy()],
            self.cfg,
            initial_queries=[[(B, 0.9)], [AB]],
        )
        assert outcome.allocation.bundle(0) == A
        assert outcome.payments[0] == pytest.approx(1.0, abs=1e-6)
        u1 = utility(0, outcome.allocation, outcome.payments, domain.bidders[0].value)
        assert u1 == pytest.approx(1.0, abs=1e-6)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            MlcaConfig(q_max=5, q_init=6)
        with pytest.raises(ValueError):
            MlcaConfig(q_max=5, q_init=1, q_round=0)
        with pytest.raises(ValueError):
            MlcaConfig(q_max=5, q_init=1, payment_rule="first-price")

    def test_rounds(self):
        assert MlcaConfig(q_max=40, q_init=12, q_round=4).rounds() == 7

    def test_per_bidder_learners(self):
        cfg = MlcaConfig(q_max=4, q_init=2, learner=(QUAD, LearnerSpec("linear")))
        assert cfg.learner_for(0) is QUAD
        assert cfg.learner_for(1).kind == "linear"


class TestNextQueries:
    def make_reports(self, domain, per_bidder=6, seed=0):
        gen = np.random.default_rng(seed)
        reports = []
        for bidder in domain.bidders:
            rs = ReportSet(domain.m)
            masks = gen.choice(np.arange(1, 2**domain.m), size=per_bidder, replace=False)
            for mask in masks:
                b = bundle_from_mask(int(mask), domain.m)
                rs.add(b, bidder.value(b))
            reports.append(rs)
        return reports

    def test_queries_fresh_and_feasible(self):
        domain = generate_gsvm(3, 6, 3)
        reports = self.make_reports(domain)
        cfg = MlcaConfig(q_max=10, q_init=6, learner=QUAD)
        profile = next_queries(range(3), reports, {}, cfg, domain.bidders)
        assert feasible(profile.solution.allocation)
        for i in range(3):
            q = profile.queries[i]
            assert any(q), "empty bundle is never a query"
            assert q not in reports[i]

    def test_generated_bundles_excluded(self):
        domain = generate_gsvm(4, 5, 2)
        reports = self.make_reports(domain)
        cfg = MlcaConfig(q_max=10, q_init=6, learner=QUAD)
        first = next_queries(range(2), reports, {}, cfg, domain.bidders)
        generated = {i: {first.queries[i]} for i in range(2)}
        second = next_queries(range(2), reports, generated, cfg, domain.bidders)
        for i in range(2):
            assert second.queries[i] not in generated[i]
            assert second.queries[i] not in reports[i]

    def test_skip_yields_empty_slot(self):
        domain = generate_gsvm(5, 5, 2)
        reports = self.make_reports(domain)
        cfg = MlcaConfig(q_max=10, q_init=6, learner=QUAD)
        profile = next_queries(range(2), reports, {}, cfg, domain.bidders,
                               skip=frozenset({1}))
        assert profile.queries[1] == (0,) * 5


class TestRunMlca:
    def test_budget_and_feasibility(self):
        domain = generate_gsvm(6, 6, 3)
        cfg = MlcaConfig(q_max=12, q_init=6, q_round=3, learner=QUAD, seed=6)
        outcome = run_mlca(domain, [BidderStrategy()] * 3, cfg)
        assert feasible(outcome.allocation)
        reports = final_reports(outcome)
        assert all(len(r) <= cfg.q_max for r in reports)
        assert outcome.rounds == cfg.rounds()

    def test_deterministic(self):
        domain = generate_gsvm(7, 6, 3)
        cfg = MlcaConfig(q_max=10, q_init=5, q_round=2, learner=QUAD, seed=7)
        a = run_mlca(domain, [BidderStrategy()] * 3, cfg)
        b = run_mlca(domain, [BidderStrategy()] * 3, cfg)
        assert a.allocation == b.allocation
        assert a.payments.amounts == b.payments.amounts
        ra, rb = final_reports(a), final_reports(b)
        assert [r.to_json() for r in ra] == [r.to_json() for r in rb]

    def test_push_bids_respect_cap(self):
        domain = generate_gsvm(8, 5, 2)
        cfg = MlcaConfig(q_max=8, q_init=4, p_max=1, learner=QUAD, seed=8)
        push = [[((1, 0, 0, 0, 0), 5.0)], []]
        outcome = run_mlca(domain, [BidderStrategy()] * 2, cfg, push_bids=push)
        assert (1, 0, 0, 0, 0) in final_reports(outcome)[0]
        with pytest.raises(ValueError):
            run_mlca(domain, [BidderStrategy()] * 2,
                     MlcaConfig(q_max=8, q_init=4, p_max=0, learner=QUAD, seed=8),
                     push_bids=push)

    def test_domain_too_small(self):
        domain = generate_gsvm(9, 2, 2)
        cfg = MlcaConfig(q_max=4, q_init=4, learner=QUAD, seed=9)
        with pytest.raises(DomainTooSmallError):
            run_mlca(domain, [BidderStrategy()] * 2, cfg)

    def test_strategy_count_checked(self):
        domain = generate_gsvm(10, 5, 3)
        cfg = MlcaConfig(q_max=6, q_init=3, learner=QUAD, seed=10)
        with pytest.raises(ValueError):
            run_mlca(domain, [BidderStrategy()] * 2, cfg)


class TestVcgNearest:
    def test_classic_core_projection(self):
        # two local bidders on single items vs one global bidder on the pair:
        # VCG charges the locals nothing, the revealed core lifts them to 1.5
        reports = [ReportSet(2) for _ in range(3)]
        reports[0].add(A, 2.0)
        reports[1].add(B, 2.0)
        reports[2].add(AB, 3.0)
        p = vcg_nearest_payments(reports)
        assert p.amounts == pytest.approx((1.5, 1.5, 0.0), abs=1e-6)

    def test_returns_vcg_when_already_in_core(self):
        reports = [ReportSet(2) for _ in range(2)]
        reports[0].add(A, 5.0)
        reports[1].add(B, 1.0)
        p = vcg_nearest_payments(reports)
        assert p.amounts == (0.0, 0.0)

    def test_caps_at_reported_value(self):
        reports = [ReportSet(2) for _ in range(3)]
        reports[0].add(A, 2.0)
        reports[1].add(B, 2.0)
        reports[2].add(AB, 5.0)
        from auctionlab.core import wdp_over_reports

        allocation = wdp_over_reports(reports)
        p = vcg_nearest_payments(reports, allocation)
        for i, amount in enumerate(p.amounts):
            assert 0.0 <= amount <= reports[i].value(allocation.bundle(i)) + 1e-9

    def test_coalition_count_cap(self):
        reports = [ReportSet(2) for _ in range(9)]
        for r in reports:
            r.add(A, 1.0)
        with pytest.raises(ValueError):
            vcg_nearest_payments(reports)


class TestDiagnosticsAndReplay:
    def test_swa_zero_for_truthful(self):
        domain = generate_gsvm(11, 5, 3)
        cfg = MlcaConfig(q_max=9, q_init=3, q_round=3, learner=QUAD, seed=11)
        records = swa_diagnostic(domain, [BidderStrategy()] * 3, cfg)
        assert records, "marginal economies must appear in the trace"
        assert all(r["welfare_delta"] == pytest.approx(0.0, abs=1e-9) for r in records)

    def test_replay_json_round_trip(self):
        domain = generate_gsvm(12, 5, 3)
        cfg = MlcaConfig(q_max=9, q_init=3, q_round=3, learner=QUAD, seed=12)
        outcome = run_mlca(domain, [BidderStrategy()] * 3, cfg)
        data = json.loads(replay_json(domain, cfg, outcome))
        back = DomainInstance.from_json(json.dumps(data["domain"]))
        assert back.to_json() == domain.to_json()
        assert data["config"]["seed"] == 12
        learner = learner_from_dict(data["config"]["learner"])
        assert learner == QUAD
        assert [tuple(b) for b in data["allocation"]] == list(
            outcome.allocation.assignments
        )
        got = [ReportSet.from_json(json.dumps(r), 5) for r in data["reports"]]
        want = final_reports(outcome)
        assert [r.to_json() for r in got] == [r.to_json() for r in want]
