"""Foundational auction types, report bookkeeping, and winner determination
restricted to elicited reports.

Bundles are fixed-width 0/1 tuples (item index 0 leftmost).  All argmax
operations break ties by the lexicographically smallest assignment vector
(bidder-major, bundle bit order) so identical inputs always produce identical
outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

__all__ = [
    "Bundle",
    "WELFARE_TOL",
    "DimensionError",
    "UndefinedReportError",
    "DegenerateInstanceError",
    "CapabilityError",
    "empty_bundle",
    "mask_of",
    "bundle_from_mask",
    "bundle_to_string",
    "bundle_from_string",
    "Allocation",
    "BundleValueReport",
    "ReportSet",
    "Payments",
    "AuctionOutcome",
    "feasible",
    "reported_welfare",
    "wdp_over_reports",
    "restricted_welfare",
    "vcg_payments_on_reports",
    "utility",
    "efficiency",
]

Bundle = tuple  # tuple of 0/1 ints, length m

#: Absolute tolerance for welfare comparisons.
WELFARE_TOL = 1e-9


class DimensionError(ValueError):
    """Bundle lengths do not match the instance's item count."""


class UndefinedReportError(KeyError):
    """A nonempty bundle was looked up that the bidder never reported."""


class DegenerateInstanceError(ValueError):
    """The instance has zero optimal welfare, so efficiency is undefined."""


class CapabilityError(RuntimeError):
    """The requested computation exceeds what this implementation supports."""


def empty_bundle(m: int) -> Bundle:
    return (0,) * m


def mask_of(bundle: Bundle) -> int:
    """Integer bitmask of a bundle (item j -> bit j)."""
    mask = 0
    for j, b in enumerate(bundle):
        if b:
            mask |= 1 << j
    return mask


def bundle_from_mask(mask: int, m: int) -> Bundle:
    return tuple((mask >> j) & 1 for j in range(m))


def bundle_to_string(bundle: Bundle) -> str:
    """Bit string with item index 0 leftmost."""
    return "".join("1" if b else "0" for b in bundle)


def bundle_from_string(s: str) -> Bundle:
    if set(s) - {"0", "1"}:
        raise ValueError(f"not a bit string: {s!r}")
    return tuple(int(ch) for ch in s)


@dataclass(frozen=True)
class Allocation:
    """One bundle per bidder; feasible iff bundles are pairwise item-disjoint."""

    assignments: tuple

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple(tuple(b) for b in self.assignments))

    @property
    def n(self) -> int:
        return len(self.assignments)

    def bundle(self, i: int) -> Bundle:
        return self.assignments[i]


def feasible(a: Allocation) -> bool:
    """True iff every item is allocated to at most one bidder."""
    lengths = {len(b) for b in a.assignments}
    if len(lengths) > 1:
        raise DimensionError(f"bundles of mixed lengths: {sorted(lengths)}")
    used = 0
    for b in a.assignments:
        mask = mask_of(b)
        if mask & used:
            return False
        used |= mask
    return True


@dataclass(frozen=True)
class BundleValueReport:
    bundle: Bundle
    value: float

    def __post_init__(self):
        object.__setattr__(self, "bundle", tuple(self.bundle))
        if self.value < 0:
            raise ValueError(f"reported value must be nonnegative, got {self.value}")


class ReportSet:
    """A bidder's elicited bundle-value reports.

    Append-only; no duplicate bundles.  The empty bundle always carries an
    implicit report of value 0.
    """

    def __init__(self, m: int, reports: Iterable = ()):
        self.m = m
        self.reports: list[BundleValueReport] = []
        self._by_bundle: dict = {}
        for r in reports:
            if isinstance(r, BundleValueReport):
                self.add(r.bundle, r.value)
            else:
                self.add(r[0], r[1])

    def __len__(self) -> int:
        return len(self.reports)

    def __contains__(self, bundle) -> bool:
        bundle = tuple(bundle)
        return bundle in self._by_bundle or not any(bundle)

    def add(self, bundle, value: float) -> None:
        bundle = tuple(bundle)
        if len(bundle) != self.m:
            raise DimensionError(f"bundle length {len(bundle)} != m={self.m}")
        if bundle in self._by_bundle:
            raise ValueError(f"duplicate report for bundle {bundle_to_string(bundle)}")
        if not any(bundle):
            raise ValueError("the empty bundle carries an implicit zero report")
        report = BundleValueReport(bundle, float(value))
        self.reports.append(report)
        self._by_bundle[bundle] = report.value

    def value(self, bundle) -> float:
        """Reported value for a bundle; defined on reported bundles and the empty bundle."""
        bundle = tuple(bundle)
        if not any(bundle):
            return 0.0
        try:
            return self._by_bundle[bundle]
        except KeyError:
            raise UndefinedReportError(
                f"no report for bundle {bundle_to_string(bundle)}"
            ) from None

    def bundles(self) -> list:
        return [r.bundle for r in self.reports]

    def to_json(self) -> str:
        return json.dumps(
            [{"bundle": bundle_to_string(r.bundle), "value": r.value} for r in self.reports]
        )

    @classmethod
    def from_json(cls, s: str, m: int | None = None) -> "ReportSet":
        entries = json.loads(s)
        if m is None:
            if not entries:
                raise ValueError("cannot infer m from an empty report set")
            m = len(entries[0]["bundle"])
        rs = cls(m)
        for e in entries:
            rs.add(bundle_from_string(e["bundle"]), e["value"])
        return rs


@dataclass(frozen=True)
class Payments:
    amounts: tuple

    def __post_init__(self):
        object.__setattr__(self, "amounts", tuple(float(p) for p in self.amounts))

    def __getitem__(self, i: int) -> float:
        return self.amounts[i]

    def __len__(self) -> int:
        return len(self.amounts)

    def total(self) -> float:
        return sum(self.amounts)


@dataclass
class AuctionOutcome:
    allocation: Allocation
    payments: Payments
    rounds: int
    trace: list = field(default_factory=list)


def reported_welfare(a: Allocation, reports: Sequence[ReportSet], economy=None) -> float:
    """Sum of reported values of the allocated bundles over the economy's bidders."""
    econ = range(len(reports)) if economy is None else economy
    return sum(reports[i].value(a.bundle(i)) for i in econ)


def _report_options(reports: ReportSet) -> list:
    """(bundle, mask, value) options including the implicit empty bundle,
    sorted lexicographically by bundle."""
    opts = [(empty_bundle(reports.m), 0, 0.0)]
    opts.extend((r.bundle, mask_of(r.bundle), r.value) for r in reports.reports)
    opts.sort(key=lambda o: o[0])
    return opts


def wdp_over_reports(reports: Sequence[ReportSet], economy=None) -> Allocation:
    """Welfare-maximizing feasible allocation with every bidder restricted to
    his reported bundles (or the empty bundle); bidders outside the economy
    receive the empty bundle."""
    n = len(reports)
    econ = sorted(range(n) if economy is None else set(economy))
    m = reports[0].m if reports else 0
    options = [_report_options(reports[i]) for i in econ]

    memo: dict = {}

    def best(idx: int, used: int) -> float:
        if idx == len(econ):
            return 0.0
        key = (idx, used)
        try:
            return memo[key]
        except KeyError:
            pass
        val = max(
            v + best(idx + 1, used | mask)
            for _, mask, v in options[idx]
            if not mask & used
        )
        memo[key] = val
        return val

    total = best(0, 0)
    assignment = {i: empty_bundle(m) for i in range(n)}
    used = 0
    remaining = total
    for idx, i in enumerate(econ):
        for bundle, mask, v in options[idx]:  # lexicographic order
            if mask & used:
                continue
            if v + best(idx + 1, used | mask) >= remaining - WELFARE_TOL:
                assignment[i] = bundle
                used |= mask
                remaining -= v
                break
    return Allocation(tuple(assignment[i] for i in range(n)))


def restricted_welfare(reports: Sequence[ReportSet], economy=None) -> float:
    """Optimal reported welfare over the report-restricted feasible set."""
    a = wdp_over_reports(reports, economy)
    econ = range(len(reports)) if economy is None else economy
    return reported_welfare(a, reports, econ)


def vcg_payments_on_reports(reports: Sequence[ReportSet], allocation: Allocation | None = None) -> Payments:
    """VCG payments computed on the elicited reports.

    p_i = W(N \\ {i}) - sum_{j != i} reported value of j's bundle under the
    main allocation.  Always nonnegative.
    """
    n = len(reports)
    if allocation is None:
        allocation = wdp_over_reports(reports)
    amounts = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        w_marginal = restricted_welfare(reports, others)
        w_others_here = reported_welfare(allocation, reports, others)
        p = w_marginal - w_others_here
        if p < -1e-6:
            raise AssertionError(f"negative VCG payment {p} for bidder {i}")
        amounts.append(max(0.0, p))
    return Payments(tuple(amounts))


def utility(i: int, a: Allocation, p: Payments, v_i: Callable) -> float:
    """Quasi-linear utility: true value of the allocated bundle minus payment."""
    if not feasible(a):
        raise ValueError("allocation is infeasible")
    return v_i(a.bundle(i)) - p[i]


def efficiency(a: Allocation, valuations: Sequence[Callable], optimal_welfare: float) -> float:
    """Achieved true welfare divided by the optimal true welfare.

    `optimal_welfare` must come from an exact oracle on the true values.
    """
    if optimal_welfare <= WELFARE_TOL:
        raise DegenerateInstanceError("optimal welfare is zero")
    achieved = sum(v(a.bundle(i)) for i, v in enumerate(valuations))
    return achieved / optimal_welfare
