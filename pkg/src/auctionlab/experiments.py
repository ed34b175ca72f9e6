"""Seeded experiment harness: batches of auction runs across mechanisms,
kernel and query-budget grids, and manipulation studies with significance
tests.  All aggregation is deterministic; reported solver effort is the
(seed-stable) number of search states rather than wall-clock time, so
repeated runs emit byte-identical CSV.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from . import rng
from .core import Allocation, ReportSet, bundle_from_mask, utility, wdp_over_reports
from .learning import KernelSpec, OracleModel, learning_error
from .mlca import LearnerSpec, MlcaConfig, run_mlca, vcg_nearest_payments
from .cca import run_cca
from .valuemodels import BidderStrategy, DomainInstance, generate_gsvm, generate_twowise
from .wdp import WdpProblem, solve

__all__ = [
    "MechanismSpec",
    "ExperimentConfig",
    "ResultRow",
    "run_batch",
    "kernel_grid",
    "manipulation_study",
    "rows_to_csv",
    "grid_to_csv",
    "manipulation_to_csv",
    "generate_domain",
]

_GENERATORS = {"gsvm": generate_gsvm, "twowise": generate_twowise}


def generate_domain(generator: str, seed: int, m: int, n: int) -> DomainInstance:
    try:
        return _GENERATORS[generator](seed, m, n)
    except KeyError:
        raise ValueError(f"unknown domain generator {generator!r}") from None


@dataclass(frozen=True)
class MechanismSpec:
    kind: str  # mlca | cca | vcg | random
    learner: LearnerSpec | None = None
    q_max: int = 40
    q_init: int = 12
    q_round: int = 4
    payment_rule: str = "vcg"
    heuristic: str = "clock"
    q_supplementary: int = 10

    def __post_init__(self):
        if self.kind not in ("mlca", "cca", "vcg", "random"):
            raise ValueError(f"unknown mechanism kind {self.kind!r}")
        if self.kind == "mlca" and self.learner is None:
            raise ValueError("mlca needs a learner spec")

    def ml_label(self) -> str:
        if self.kind != "mlca":
            return "-"
        if self.learner.kind != "svr":
            return self.learner.kind
        return f"svr-{self.learner.kernel.kind}"

    def label(self) -> str:
        if self.kind == "mlca":
            return f"mlca[{self.ml_label()}]"
        if self.kind == "cca":
            return f"cca[{self.heuristic}]"
        return self.kind


@dataclass(frozen=True)
class ExperimentConfig:
    generator: str
    m: int
    n: int
    seeds: tuple
    mechanisms: tuple

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seed range is empty")


@dataclass(frozen=True)
class ResultRow:
    mechanism: str
    ml: str
    heuristic: str
    efficiency_mean: float
    efficiency_se: float
    revenue_mean: float
    revenue_se: float
    revenue_core_mean: float | None
    rounds_mean: float
    learning_error: float | None
    solver_nodes: float | None
    optimality_gap: float | None

    def __post_init__(self):
        if not -1e-9 <= self.efficiency_mean <= 1.0 + 1e-9:
            raise AssertionError(f"efficiency {self.efficiency_mean} out of range")


def _se(xs: Sequence[float]) -> float:
    if len(xs) < 2:
        return 0.0
    return float(np.std(xs, ddof=1) / np.sqrt(len(xs)))


def _true_optimum(domain: DomainInstance):
    sol = solve(WdpProblem(models=tuple(OracleModel(b) for b in domain.bidders)))
    return sol.allocation, sol.objective


def _true_welfare(domain: DomainInstance, a: Allocation) -> float:
    return sum(b.value(a.bundle(i)) for i, b in enumerate(domain.bidders))


def _vcg_full_information(domain: DomainInstance):
    a_star, v_star = _true_optimum(domain)
    payments = []
    for i in range(domain.n):
        others = tuple(j for j in range(domain.n) if j != i)
        sol = solve(
            WdpProblem(models=tuple(OracleModel(b) for b in domain.bidders), economy=others)
        )
        got = sum(domain.bidders[j].value(a_star.bundle(j)) for j in others)
        payments.append(max(0.0, sol.objective - got))
    return a_star, v_star, payments


def _final_reports(outcome) -> list:
    return next(e["reports"] for e in outcome.trace if e["type"] == "final")


def _solver_stats(outcome) -> tuple:
    solves = [e for e in outcome.trace if e.get("type") == "solve"]
    if not solves:
        return 0.0, 0.0
    nodes = float(np.mean([e["nodes"] for e in solves]))
    return nodes, 0.0  # every in-budget solve in the trace finished optimal


def _run_mechanism(spec: MechanismSpec, domain: DomainInstance, seed: int) -> dict:
    a_star, v_star = _true_optimum(domain)
    if v_star <= 0:
        raise ValueError(f"degenerate instance at seed {seed}")
    row: dict = {"rounds": 0.0, "learning_error": None, "nodes": None, "gap": None,
                 "revenue_core": None}
    if spec.kind == "vcg":
        a, _, payments = _vcg_full_information(domain)
        row["efficiency"] = 1.0
        row["revenue"] = sum(payments) / v_star
        row["rounds"] = 1.0
        return row
    if spec.kind == "random":
        gen = rng.stream(seed, "random-alloc")
        owner = gen.integers(0, domain.n + 1, size=domain.m)
        masks = [0] * domain.n
        for j, i in enumerate(owner):
            if i < domain.n:
                masks[i] |= 1 << j
        a = Allocation(tuple(bundle_from_mask(mask, domain.m) for mask in masks))
        row["efficiency"] = _true_welfare(domain, a) / v_star
        row["revenue"] = 0.0
        return row
    if spec.kind == "cca":
        outcome = run_cca(domain, spec.heuristic, spec.payment_rule, q=spec.q_supplementary)
        reports = _final_reports(outcome)
    else:
        cfg = MlcaConfig(
            q_max=spec.q_max,
            q_init=spec.q_init,
            q_round=spec.q_round,
            learner=spec.learner,
            seed=seed,
            payment_rule=spec.payment_rule,
        )
        outcome = run_mlca(domain, [BidderStrategy() for _ in range(domain.n)], cfg)
        reports = _final_reports(outcome)
        errors = [
            learning_error(spec.learner.train(reports[i], domain.bidders[i]),
                           domain.bidders[i].value, domain.m)
            for i in range(domain.n)
        ]
        row["learning_error"] = float(np.mean(errors))
        nodes, gap = _solver_stats(outcome)
        row["nodes"], row["gap"] = nodes, gap
    row["efficiency"] = _true_welfare(domain, outcome.allocation) / v_star
    row["revenue"] = outcome.payments.total() / v_star
    row["rounds"] = float(outcome.rounds)
    if domain.n <= 8:
        core_p = vcg_nearest_payments(reports, outcome.allocation)
        row["revenue_core"] = core_p.total() / v_star
    return row


def run_batch(cfg: ExperimentConfig) -> list:
    """One ResultRow per mechanism, averaged over the seed range."""
    per_mech: dict = {k: [] for k in range(len(cfg.mechanisms))}
    for seed in cfg.seeds:
        domain = generate_domain(cfg.generator, seed, cfg.m, cfg.n)
        for k, spec in enumerate(cfg.mechanisms):
            try:
                per_mech[k].append(_run_mechanism(spec, domain, seed))
            except Exception as exc:
                raise RuntimeError(f"{spec.label()} failed at seed {seed}: {exc}") from exc
    rows = []
    for k, spec in enumerate(cfg.mechanisms):
        samples = per_mech[k]

        def col(name):
            vals = [s[name] for s in samples]
            return None if any(v is None for v in vals) else vals

        eff = col("efficiency")
        rev = col("revenue")
        core = col("revenue_core")
        err = col("learning_error")
        nodes = col("nodes")
        gap = col("gap")
        rows.append(
            ResultRow(
                mechanism=spec.kind,
                ml=spec.ml_label(),
                heuristic=spec.heuristic if spec.kind == "cca" else "-",
                efficiency_mean=min(1.0, float(np.mean(eff))),
                efficiency_se=_se(eff),
                revenue_mean=float(np.mean(rev)),
                revenue_se=_se(rev),
                revenue_core_mean=None if core is None else float(np.mean(core)),
                rounds_mean=float(np.mean(col("rounds"))),
                learning_error=None if err is None else float(np.mean(err)),
                solver_nodes=None if nodes is None else float(np.mean(nodes)),
                optimality_gap=None if gap is None else float(np.mean(gap)),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# kernel / epsilon / query-budget grid


def kernel_grid(
    generator: str,
    m: int,
    n: int,
    seeds: Sequence[int],
    kernels: Sequence[KernelSpec],
    eps_values: Sequence[float] = (0.0,),
    q_values: Sequence[int] = (20, 40, 80),
    c: float = 1e4,
) -> list:
    """Train each kernel on Q random truthful reports per bidder, solve the
    learned winner determination, and score it against the true optimum."""
    cells = []
    for kernel in kernels:
        for eps in eps_values:
            for q in q_values:
                samples = []
                for seed in seeds:
                    domain = generate_domain(generator, seed, m, n)
                    a_star, v_star = _true_optimum(domain)
                    spec = LearnerSpec("svr", kernel, eps, c)
                    models = []
                    sv_counts = []
                    err = []
                    for i, bidder in enumerate(domain.bidders):
                        gen = rng.stream(seed, f"grid/{i}/{q}")
                        masks: list = []
                        seen = set()
                        while len(masks) < q:
                            mask = int(gen.integers(1, 2**m))
                            if mask not in seen:
                                seen.add(mask)
                                masks.append(mask)
                        rs = ReportSet(m)
                        for mask in masks:
                            bundle = bundle_from_mask(mask, m)
                            rs.add(bundle, bidder.value(bundle))
                        model = spec.train(rs)
                        models.append(model)
                        sv_counts.append(len(model.support_vectors))
                        err.append(learning_error(model, bidder.value, m))
                    sol = solve(WdpProblem(models=tuple(models)))
                    gap, _ = sol.optimality_gap()
                    samples.append(
                        {
                            "efficiency": _true_welfare(domain, sol.allocation) / v_star,
                            "learning_error": float(np.mean(err)),
                            "nodes": float(sol.nodes),
                            "gap": gap,
                            "sv_count": float(np.mean(sv_counts)),
                        }
                    )
                cells.append(
                    {
                        "kernel": kernel.kind,
                        "lambda": kernel.lam,
                        "epsilon": eps,
                        "q": q,
                        "efficiency_mean": float(np.mean([s["efficiency"] for s in samples])),
                        "efficiency_se": _se([s["efficiency"] for s in samples]),
                        "learning_error": float(np.mean([s["learning_error"] for s in samples])),
                        "solver_nodes": float(np.mean([s["nodes"] for s in samples])),
                        "optimality_gap": float(np.mean([s["gap"] for s in samples])),
                        "sv_count": float(np.mean([s["sv_count"] for s in samples])),
                    }
                )
    return cells


# ---------------------------------------------------------------------------
# manipulation study


def _anova_p(groups: Sequence[Sequence[float]]) -> float:
    """One-way F-test; identical groups carry no evidence of a difference."""
    arrs = [np.asarray(g, dtype=np.float64) for g in groups]
    flat = np.concatenate(arrs)
    if np.ptp(flat) <= 1e-12 or all(np.ptp(a) <= 1e-12 for a in arrs):
        return 1.0
    return float(stats.f_oneway(*arrs).pvalue)


def resolve_role(role, n: int) -> int:
    """Manipulator index: an integer, or 'national' for the last bidder of a
    GSVM-style instance."""
    if isinstance(role, str):
        if role == "national":
            return n - 1
        role = int(role)
    if not 0 <= role < n:
        raise ValueError(f"role {role} out of range for n={n}")
    return role


def manipulation_study(
    generator: str,
    m: int,
    n: int,
    seeds: Sequence[int],
    role,
    z_values: Sequence[float],
    learner: LearnerSpec,
    q_max: int = 40,
    q_init: int = 12,
    q_round: int = 4,
) -> dict:
    """Paired-seed comparison of truthful play against overbidding levels.

    Returns per-strategy summary rows plus a one-way ANOVA p-value for each
    recorded column.  Asserts on every run that the manipulator never wins a
    bundle whose reported value was inflated.
    """
    strategies = [("truthful", 0.0)] + [("overbid", z) for z in z_values]
    columns = ("social_welfare", "marginal_welfare", "utility")
    data: dict = {name: {c: [] for c in columns} for name, _ in strategies}
    for seed in seeds:
        domain = generate_domain(generator, seed, m, n)
        idx = resolve_role(role, n)
        a_star, v_star = _true_optimum(domain)
        cfg = MlcaConfig(q_max=q_max, q_init=q_init, q_round=q_round, learner=learner, seed=seed)
        for name, z in strategies:
            profile = [BidderStrategy() for _ in range(n)]
            if name == "overbid":
                profile[idx] = BidderStrategy("overbid", z)
            outcome = run_mlca(domain, profile, cfg)
            reports = _final_reports(outcome)
            won = outcome.allocation.bundle(idx)
            if any(won):
                reported = reports[idx].value(won)
                true_val = domain.bidders[idx].value(won)
                assert abs(reported - true_val) <= 1e-9, "manipulator won a misreported bundle"
            others = tuple(j for j in range(n) if j != idx)
            a_marg = wdp_over_reports(reports, others)
            marg_sw = sum(domain.bidders[j].value(a_marg.bundle(j)) for j in others)
            data[name]["social_welfare"].append(_true_welfare(domain, outcome.allocation))
            data[name]["marginal_welfare"].append(marg_sw)
            data[name]["utility"].append(
                utility(idx, outcome.allocation, outcome.payments, domain.bidders[idx].value)
            )
    rows = []
    for name, z in strategies:
        row = {"strategy": name, "z": z}
        for c in columns:
            row[f"{c}_mean"] = float(np.mean(data[name][c]))
            row[f"{c}_se"] = _se(data[name][c])
        rows.append(row)
    anova = {c: _anova_p([data[name][c] for name, _ in strategies]) for c in columns}
    return {"rows": rows, "anova_p": anova}


# ---------------------------------------------------------------------------
# CSV emission (deterministic formatting)


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    cols = [
        "mechanism", "ml", "heuristic", "efficiency_mean", "efficiency_se",
        "revenue_mean", "revenue_se", "revenue_core_mean", "rounds_mean",
        "learning_error", "solver_nodes", "optimality_gap",
    ]
    out = io.StringIO()
    out.write(",".join(cols) + "\n")
    for r in rows:
        out.write(",".join(_fmt(getattr(r, c)) for c in cols) + "\n")
    return out.getvalue()


def grid_to_csv(cells: Sequence[dict]) -> str:
    cols = ["kernel", "lambda", "epsilon", "q", "efficiency_mean", "efficiency_se",
            "learning_error", "solver_nodes", "optimality_gap", "sv_count"]
    out = io.StringIO()
    out.write(",".join(cols) + "\n")
    for cell in cells:
        out.write(",".join(_fmt(cell[c]) for c in cols) + "\n")
    return out.getvalue()


def manipulation_to_csv(result: dict) -> str:
    cols = ["strategy", "z", "social_welfare_mean", "social_welfare_se",
            "marginal_welfare_mean", "marginal_welfare_se", "utility_mean", "utility_se"]
    out = io.StringIO()
    out.write(",".join(cols) + "\n")
    for row in result["rows"]:
        out.write(",".join(_fmt(row[c]) for c in cols) + "\n")
    p = result["anova_p"]
    out.write(
        "anova_p,-,"
        + ",".join(_fmt(p[c]) for c in ("social_welfare",))
        + ",-,"
        + _fmt(p["marginal_welfare"])
        + ",-,"
        + _fmt(p["utility"])
        + ",-\n"
    )
    return out.getvalue()
