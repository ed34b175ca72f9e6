import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from auctionlab.core import CapabilityError
from auctionlab.valuemodels import (
    BidderStrategy,
    DomainInstance,
    GsvmBidder,
    TwoWiseBidder,
    all_bundles,
    answer_query,
    generate_gsvm,
    generate_twowise,
    gsvm_value,
    true_demand,
)


def random_bundles(gen, m, k):
    return (gen.random((k, m)) < 0.5).astype(np.int8)


class TestAllBundles:
    def test_lexicographic_order(self):
        B = all_bundles(3)
        rows = [tuple(r) for r in B]
        assert rows == sorted(rows)
        assert len(rows) == 8

    def test_cap(self):
        with pytest.raises(CapabilityError):
            all_bundles(23)


class TestGsvm:
    def test_closed_form(self):
        b = GsvmBidder((4.0, 0.0, 6.0))
        assert gsvm_value(b, (0, 0, 0)) == 0.0
        assert gsvm_value(b, (1, 0, 0)) == 4.0  # single item, no synergy
        assert gsvm_value(b, (1, 1, 0)) == 4.0  # item 1 outside the interest set
        assert gsvm_value(b, (1, 0, 1)) == pytest.approx((4 + 6) * 1.2)

    def test_values_matrix_matches_scalar(self):
        gen = np.random.default_rng(0)
        b = GsvmBidder(tuple(gen.uniform(0, 20, 6) * (gen.random(6) < 0.6)))
        B = random_bundles(gen, 6, 64)
        vm = b.values_matrix(B)
        for row, v in zip(B, vm):
            assert v == pytest.approx(b.value(tuple(int(x) for x in row)))

    def test_qpbo_terms_reproduce_value(self):
        gen = np.random.default_rng(1)
        b = GsvmBidder(tuple(gen.uniform(0, 20, 5) * (gen.random(5) < 0.7)))
        w, pair = b.qpbo_terms()
        for row in random_bundles(gen, 5, 32):
            idx = np.nonzero(row)[0]
            total = w[idx].sum() + pair[np.ix_(idx, idx)].sum() / 2.0
            assert total == pytest.approx(b.value(tuple(int(x) for x in row)))


class TestTwoWise:
    def test_clamped_at_zero(self):
        b = TwoWiseBidder((1.0, 1.0), ((0.0, -10.0), (-10.0, 0.0)))
        assert b.raw_value((1, 1)) == -8.0
        assert b.value((1, 1)) == 0.0

    def test_values_matrix_matches_scalar(self):
        gen = np.random.default_rng(2)
        d = generate_twowise(7, 6, 2)
        b = d.bidders[0]
        B = random_bundles(gen, 6, 64)
        vm = b.values_matrix(B)
        for row, v in zip(B, vm):
            assert v == pytest.approx(b.value(tuple(int(x) for x in row)))


class TestGenerators:
    def test_gsvm_structure(self):
        d = generate_gsvm(11, 12, 5)
        assert d.n == 5 and len(d.bidders) == 5
        regional_size = 4  # ceil(12/3)
        national_size = 8  # ceil(24/3)
        for b in d.bidders[:-1]:
            assert len(b.interest_set) == regional_size
            assert all(0 < b.item_values[j] <= 20 for j in b.interest_set)
        nat = d.bidders[-1]
        assert len(nat.interest_set) == national_size
        assert all(0 < nat.item_values[j] <= 10 for j in nat.interest_set)

    def test_gsvm_regional_arcs_contiguous(self):
        d = generate_gsvm(13, 9, 4)
        m = 9
        for b in d.bidders[:-1]:
            arc = set(b.interest_set)
            assert any(
                arc == {(s + k) % m for k in range(len(arc))} for s in range(m)
            )

    def test_seed_determinism(self):
        a = generate_gsvm(5, 10, 4).to_json()
        b = generate_gsvm(5, 10, 4).to_json()
        assert a == b
        assert a != generate_gsvm(6, 10, 4).to_json()

    def test_twowise_ranges(self):
        d = generate_twowise(3, 8, 3)
        for b in d.bidders:
            assert all(0 <= w <= 10 for w in b.weights)
            pair = np.asarray(b.pair_weights)
            assert np.array_equal(pair, pair.T)
            assert np.all(np.diag(pair) == 0)
            nz = pair[pair != 0]
            assert np.all((-3 <= nz) & (nz <= 6))

    def test_json_round_trip(self):
        for d in (generate_gsvm(9, 6, 3), generate_twowise(9, 6, 3)):
            back = DomainInstance.from_json(d.to_json())
            assert back.to_json() == d.to_json()


class TestTrueDemand:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 5))
    def test_matches_enumeration(self, seed, m):
        d = generate_twowise(seed, m, 2)
        gen = np.random.default_rng(seed)
        prices = gen.uniform(0, 8, m)
        got = true_demand(d.bidders[0], prices)
        B = all_bundles(m)
        profits = d.bidders[0].values_matrix(B) - B @ prices
        assert d.bidders[0].value(got) - np.dot(got, prices) == pytest.approx(
            float(profits.max()), abs=1e-9
        )

    def test_tie_prefers_lexicographically_smallest(self):
        b = TwoWiseBidder((1.0, 1.0), ((0.0, 0.0), (0.0, 0.0)))
        assert true_demand(b, (1.0, 1.0)) == (0, 0)


class TestStrategies:
    def test_validation(self):
        with pytest.raises(ValueError):
            BidderStrategy("overbid", 1.0)
        with pytest.raises(ValueError):
            BidderStrategy("shade", 0.0)

    def test_truthful_answer(self):
        v = lambda b: 7.0
        assert answer_query(BidderStrategy(), v, (1, 0)) == 7.0

    def test_overbid_inflates_when_profitable(self):
        v = lambda b: 3.0
        s = BidderStrategy("overbid", 0.5)
        assert answer_query(s, v, (1, 0), V_R=10.0, V_T_b=6.0) == pytest.approx(5.0)
        assert answer_query(s, v, (1, 0), V_R=6.0, V_T_b=10.0) == 3.0

    def test_overbid_requires_oracle_values(self):
        with pytest.raises(ValueError):
            answer_query(BidderStrategy("overbid", 0.5), lambda b: 1.0, (1, 0))
