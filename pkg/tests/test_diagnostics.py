import numpy as np
import pytest

from auctionlab.core import CapabilityError, ReportSet, bundle_from_mask
from auctionlab.diagnostics import (
    PriceProfile,
    b1_error_terms,
    bound_report,
    bound_report_csv,
    certify_clearing,
)
from auctionlab.learning import KernelSpec, LinearModel, OracleModel, train_svr
from auctionlab.mlca import LearnerSpec, MlcaConfig, run_mlca
from auctionlab.valuemodels import BidderStrategy, generate_gsvm
from auctionlab.wdp import WdpProblem, solve


def learned_models(domain, ell=20, seed=0, kernel=KernelSpec("quadratic", 0.1)):
    gen = np.random.default_rng(seed)
    models = []
    for bidder in domain.bidders:
        rs = ReportSet(domain.m)
        masks = gen.choice(np.arange(1, 2**domain.m), size=ell, replace=False)
        for mask in masks:
            b = bundle_from_mask(int(mask), domain.m)
            rs.add(b, bidder.value(b))
        models.append(train_svr(rs, kernel, epsilon=0.0, c=1e4))
    return tuple(models)


class TestCertifyClearing:
    def test_true_prices_clear_exactly(self):
        domain = generate_gsvm(51, 6, 3)
        models = tuple(OracleModel(b) for b in domain.bidders)
        a_star = solve(WdpProblem(models=models)).allocation
        cert = certify_clearing(PriceProfile(models), a_star, domain)
        assert cert.delta == pytest.approx(0.0, abs=1e-9)
        assert cert.beta == pytest.approx((0.0,) * 3, abs=1e-9)
        assert cert.gamma == pytest.approx(0.0, abs=1e-9)

    def test_learned_prices_within_error_bound(self):
        domain = generate_gsvm(52, 6, 3)
        models = learned_models(domain)
        pi = PriceProfile(models)
        a_tilde = solve(WdpProblem(models=models)).allocation
        cert = certify_clearing(pi, a_tilde, domain)
        d1, d2 = b1_error_terms(models, domain, a_tilde)
        assert cert.delta <= domain.n * (d1 + d2) + 1e-9

    def test_offset_invariance(self):
        # a gaussian-kernel model prices the empty bundle above zero; the
        # total subsidy must equal the one computed from prices normalized
        # to a free empty bundle, since per-bidder constants cancel
        from auctionlab.learning import predict, predict_many
        from auctionlab.valuemodels import all_bundles
        from auctionlab.wdp import welfare_table

        domain = generate_gsvm(53, 5, 2)
        gauss = learned_models(domain, ell=12, kernel=KernelSpec("gaussian", 5.0))
        assert any(abs(predict(mod, (0,) * 5)) > 1e-6 for mod in gauss)
        a = solve(WdpProblem(models=gauss)).allocation
        cert = certify_clearing(PriceProfile(gauss), a, domain)

        B = all_bundles(5)
        betas = []
        price_at = []
        for i, bidder in enumerate(domain.bidders):
            prices = predict_many(gauss[i], B) - predict(gauss[i], (0,) * 5)
            util = bidder.values_matrix(B) - prices
            here = [k for k, b in enumerate(B) if tuple(b) == a.bundle(i)][0]
            betas.append(max(0.0, float(util.max() - util[here])))
            price_at.append(float(prices[here]))
        # every bidder contributes exactly one bundle to the supply optimum,
        # so normalizing shifts it by the summed empty-bundle offsets
        offsets = sum(predict(mod, (0,) * 5) for mod in gauss)
        gamma = max(0.0, float(welfare_table(gauss, 5)[31]) - offsets - sum(price_at))
        assert cert.delta == pytest.approx(sum(betas) + gamma, abs=1e-6)

    def test_m_cap(self):
        domain = generate_gsvm(54, 13, 3)
        models = tuple(OracleModel(b) for b in domain.bidders)
        a = solve(WdpProblem(models=models)).allocation
        with pytest.raises(CapabilityError):
            certify_clearing(PriceProfile(models), a, domain)

    def test_negative_subsidy_rejected(self):
        from auctionlab.diagnostics import ClearingCertificate

        with pytest.raises(AssertionError):
            ClearingCertificate(None, (-1.0,), 0.0, -1.0)


@pytest.fixture(scope="module")
def run():
    domain = generate_gsvm(55, 6, 3)
    cfg = MlcaConfig(q_max=12, q_init=6, q_round=3,
                     learner=LearnerSpec("svr", KernelSpec("quadratic", 0.1)),
                     seed=55)
    outcome = run_mlca(domain, [BidderStrategy()] * 3, cfg)
    return domain, outcome


class TestBoundReport:
    def test_bound_dominates_realized_loss(self, run):
        domain, outcome = run
        records = bound_report(outcome.trace, domain, clearing=False)
        assert records
        for r in records:
            assert r["eff_loss"] <= r["bound"] + 1e-9
            assert r["slack"] >= -1e-9
            assert r["delta1"] >= 0 and r["delta2"] >= 0

    def test_clearing_column_when_small(self, run):
        domain, outcome = run
        records = bound_report(outcome.trace, domain, clearing=True)
        assert all(isinstance(r["clearing_delta"], float) for r in records)
        assert all(r["clearing_delta"] >= -1e-9 for r in records)

    def test_csv_shape(self, run):
        domain, outcome = run
        records = bound_report(outcome.trace, domain, clearing=False)
        text = bound_report_csv(records)
        lines = text.strip().split("\n")
        assert lines[0] == "round,economy,delta1,delta2,eff_loss,bound,slack,clearing_delta"
        assert len(lines) == len(records) + 1
