"""Winner determination on learned valuations.

All solvers maximize the sum of per-bidder predicted values over feasible
allocations (each item to at most one bidder), with optional per-bidder
exclusion sets (forbidden bundles) and per-bidder fixed assignments.

The workhorse is exact: tabulate each bidder's predicted value on all 2^m
bundles, then run a max-plus dynamic program over item masks (a best-first
search over per-bidder bundle choices with memoized subproblems).  This is
exact for any model kind and supports m <= 14.  Exclusion-free linear
problems of any size are solved greedily in closed form, and single-bidder
quadratic pseudo-boolean problems (demand queries) get a dedicated
branch-and-bound that scales past the table limit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (
    Allocation,
    Bundle,
    CapabilityError,
    WELFARE_TOL,
    bundle_from_mask,
    empty_bundle,
    mask_of,
)
from .learning import KernelSpec, LinearModel, OracleModel, SvrModel, predict_many

__all__ = [
    "WdpProblem",
    "WdpSolution",
    "ModelKindError",
    "solve",
    "solve_enumeration",
    "solve_linear_ip",
    "solve_quadratic",
    "solve_kernel_generic",
    "qpbo_maximize_single",
    "welfare_table",
    "dump_lp",
    "TABLE_MAX_M",
    "DEFAULT_TIME_LIMIT",
]

#: Largest item count for which full per-bidder value tables are built.
TABLE_MAX_M = 14

#: Seconds before a solve returns its best incumbent instead of the optimum.
DEFAULT_TIME_LIMIT = 60.0

_NEG = -np.inf


class ModelKindError(TypeError):
    """A solver received a model kind its encoding does not cover."""


@dataclass(frozen=True)
class WdpProblem:
    """Maximize sum of predicted values over feasible allocations.

    exclusions maps bidder index to an iterable of forbidden bundles (the
    empty bundle may be forbidden too, which forces a nonempty assignment).
    fixed maps bidder index to a mandatory bundle.  Bidders outside the
    economy always receive the empty bundle.
    """

    models: tuple
    economy: tuple | None = None
    exclusions: Mapping | None = None
    fixed: Mapping | None = None
    time_limit: float = DEFAULT_TIME_LIMIT

    def economy_indices(self) -> list:
        if self.economy is None:
            return list(range(len(self.models)))
        idx = sorted(set(self.economy))
        if idx and not 0 <= idx[0] <= idx[-1] < len(self.models):
            raise IndexError(f"economy {idx} out of range for {len(self.models)} models")
        return idx

    def exclusion_masks(self, i: int) -> set:
        if not self.exclusions or i not in self.exclusions:
            return set()
        return {mask_of(tuple(b)) for b in self.exclusions[i]}


@dataclass(frozen=True)
class WdpSolution:
    allocation: Allocation
    objective: float
    bound: float
    status: str  # optimal | timeout-feasible | infeasible
    nodes: int = 0

    def __post_init__(self):
        if self.status not in ("optimal", "timeout-feasible", "infeasible"):
            raise ValueError(f"unknown status {self.status!r}")
        if self.objective > self.bound + 1e-6:
            raise AssertionError("incumbent exceeds the proven bound")

    def optimality_gap(self) -> tuple:
        """(gap, is_absolute): relative gap when the incumbent is positive,
        otherwise the absolute gap with a flag."""
        gap = self.bound - self.objective
        if self.objective > WELFARE_TOL:
            return gap / self.objective, False
        return gap, True


# ---------------------------------------------------------------------------
# cached combinatorics per item count


_PAIRS_CACHE: dict = {}
_MASK_BUNDLE_CACHE: dict = {}
_LEX_KEY_CACHE: dict = {}


def _mask_bundles(m: int) -> np.ndarray:
    """(2^m, m) 0/1 rows indexed by item mask (item j at bit j)."""
    if m not in _MASK_BUNDLE_CACHE:
        ks = np.arange(2**m, dtype=np.int64)
        _MASK_BUNDLE_CACHE[m] = ((ks[:, None] >> np.arange(m)) & 1).astype(np.int8)
    return _MASK_BUNDLE_CACHE[m]


def _lex_keys(m: int) -> np.ndarray:
    """Integer key per mask whose order equals lexicographic bundle order."""
    if m not in _LEX_KEY_CACHE:
        ks = np.arange(2**m, dtype=np.int64)
        key = np.zeros(2**m, dtype=np.int64)
        for j in range(m):
            key |= ((ks >> j) & 1) << (m - 1 - j)
        _LEX_KEY_CACHE[m] = key
    return _LEX_KEY_CACHE[m]


def _pairs(m: int):
    """All (mask, submask) pairs grouped by mask, as flat arrays plus group
    starts, for one vectorized max-plus join pass."""
    if m not in _PAIRS_CACHE:
        M = np.zeros(1, dtype=np.int64)
        S = np.zeros(1, dtype=np.int64)
        mbits = np.array([0, 1, 1], dtype=np.int64)
        sbits = np.array([0, 0, 1], dtype=np.int64)
        for _ in range(m):
            M = (M[:, None] * 2 + mbits).ravel()
            S = (S[:, None] * 2 + sbits).ravel()
        order = np.argsort(M, kind="stable")
        M, S = M[order], S[order]
        pc = np.zeros(2**m, dtype=np.int64)
        ks = np.arange(2**m)
        for j in range(m):
            pc += (ks >> j) & 1
        counts = 1 << pc
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        _PAIRS_CACHE[m] = (M, S, starts)
    return _PAIRS_CACHE[m]


def _join(V: np.ndarray, F: np.ndarray, m: int) -> np.ndarray:
    """out[mask] = max over b subset of mask of V[b] + F[mask without b]."""
    M, S, starts = _pairs(m)
    cand = V[S] + F[M - S]
    return np.maximum.reduceat(cand, starts)


# ---------------------------------------------------------------------------
# model plumbing


def _model_m(model) -> int | None:
    if model is None:  # placeholder outside the economy
        return None
    if isinstance(model, LinearModel):
        return len(model.weights)
    if isinstance(model, SvrModel):
        return len(model.support_vectors[0]) if model.support_vectors else None
    if isinstance(model, OracleModel):
        return model.bidder.m
    raise ModelKindError(f"not a learned valuation: {type(model).__name__}")


def _problem_m(p: WdpProblem) -> int:
    ms = {m for model in p.models if (m := _model_m(model)) is not None}
    if p.exclusions:
        ms.update(len(tuple(b)) for bs in p.exclusions.values() for b in bs)
    if p.fixed:
        ms.update(len(tuple(b)) for b in p.fixed.values())
    if len(ms) > 1:
        raise ValueError(f"inconsistent item counts: {sorted(ms)}")
    if not ms:
        raise ValueError("cannot infer the item count from the problem")
    return ms.pop()


def _value_table(p: WdpProblem, i: int, m: int) -> np.ndarray:
    if p.fixed and i in p.fixed:
        q = tuple(p.fixed[i])
        V = np.full(2**m, _NEG)
        V[mask_of(q)] = predict_many(p.models[i], np.asarray([q]))[0]
        return V
    V = predict_many(p.models[i], _mask_bundles(m)).astype(np.float64)
    for mask in p.exclusion_masks(i):
        V[mask] = _NEG
    return V


# ---------------------------------------------------------------------------
# exact table solver


def _greedy_masks(tables: list, m: int) -> list:
    """Sequential incumbent: each bidder in turn takes its best allowed
    bundle among remaining items; falls back to the empty bundle."""
    all_masks = np.arange(2**m)
    lex = _lex_keys(m)
    remaining = 2**m - 1
    chosen = []
    for V in tables:
        subs = all_masks[(all_masks & ~remaining) == 0]
        vals = V[subs]
        best = vals.max()
        if best == _NEG:
            chosen.append(0)
            continue
        tie = subs[vals >= best - WELFARE_TOL]
        pick = int(tie[np.argmin(lex[tie])])
        chosen.append(pick)
        remaining &= ~pick
    return chosen


def _assemble(p: WdpProblem, econ: list, masks: list, m: int) -> Allocation:
    bundles = [empty_bundle(m)] * len(p.models)
    for i, mask in zip(econ, masks):
        bundles[i] = bundle_from_mask(mask, m)
    return Allocation(tuple(bundles))


def _solve_tables(p: WdpProblem) -> WdpSolution:
    m = _problem_m(p)
    if m > TABLE_MAX_M:
        raise CapabilityError(f"m={m} exceeds the table solver limit {TABLE_MAX_M}")
    econ = p.economy_indices()
    deadline = time.perf_counter() + p.time_limit
    nodes = 0
    tables = []
    for i in econ:
        tables.append(_value_table(p, i, m))
        nodes += 2**m
        if time.perf_counter() > deadline:
            # incomplete tables: finish them cheaply so the incumbent is valid
            tables.extend(_value_table(p, j, m) for j in econ[len(tables):])
            return _timeout_solution(p, econ, tables, m, nodes)

    k = len(econ)
    full = 2**m - 1
    suffix = [None] * (k + 1)
    suffix[k] = np.zeros(2**m)
    for idx in range(k - 1, -1, -1):
        V = tables[idx]
        finite = np.isfinite(V)
        if not finite.any():
            alloc = _assemble(p, econ, [0] * k, m)
            return WdpSolution(alloc, _NEG, _NEG, "infeasible", nodes)
        if finite.sum() == 1:
            # fixed bidder: a join against a single bundle is just a shift
            b = int(np.nonzero(finite)[0][0])
            out = np.full(2**m, _NEG)
            all_masks = np.arange(2**m)
            sups = all_masks[(all_masks & b) == b]
            out[sups] = V[b] + suffix[idx + 1][sups ^ b]
            suffix[idx] = out
            nodes += len(sups)
        else:
            suffix[idx] = _join(V, suffix[idx + 1], m)
            nodes += len(_pairs(m)[1])
        if time.perf_counter() > deadline:
            return _timeout_solution(p, econ, tables, m, nodes)

    opt = float(suffix[0][full])
    if not np.isfinite(opt):
        alloc = _assemble(p, econ, [0] * k, m)
        return WdpSolution(alloc, _NEG, _NEG, "infeasible", nodes)

    # reconstruct the lexicographically smallest optimal assignment
    all_masks = np.arange(2**m)
    lex = _lex_keys(m)
    remaining = full
    masks = []
    for idx in range(k):
        subs = all_masks[(all_masks & ~remaining) == 0]
        cand = tables[idx][subs] + suffix[idx + 1][remaining ^ subs]
        ok = subs[cand >= suffix[idx][remaining] - WELFARE_TOL]
        pick = int(ok[np.argmin(lex[ok])])
        masks.append(pick)
        remaining &= ~pick
    for idx, i in enumerate(econ):
        if masks[idx] in p.exclusion_masks(i):
            raise AssertionError(f"excluded bundle returned for bidder {i}")
    objective = float(sum(tables[idx][masks[idx]] for idx in range(k)))
    return WdpSolution(_assemble(p, econ, masks, m), objective, objective, "optimal", nodes)


def _timeout_solution(p: WdpProblem, econ: list, tables: list, m: int, nodes: int) -> WdpSolution:
    masks = _greedy_masks(tables, m)
    objective = float(sum(V[mask] for V, mask in zip(tables, masks)))
    bound = float(sum(max(V.max(), 0.0) for V in tables))
    return WdpSolution(
        _assemble(p, econ, masks, m), objective, max(bound, objective), "timeout-feasible", nodes
    )


# ---------------------------------------------------------------------------
# public solvers


def solve_enumeration(p: WdpProblem) -> WdpSolution:
    """Exact optimum by exhaustive per-bidder value tables (m <= 14)."""
    return _solve_tables(p)


def _linear_weights(model, m: int) -> np.ndarray:
    if isinstance(model, LinearModel):
        return np.asarray(model.weights)
    if isinstance(model, SvrModel) and model.kernel.kind == "linear":
        if not model.support_vectors:
            return np.zeros(m)
        return np.asarray(model.coeffs) @ np.asarray(model.support_vectors, dtype=np.float64)
    raise ModelKindError(f"linear solver got {type(model).__name__}")


def solve_linear_ip(p: WdpProblem) -> WdpSolution:
    """Additive-model winner determination.

    Without exclusions the optimum is closed-form: item j goes to the
    bidder with the largest positive weight.  With exclusions (or fixed
    bundles) the exact table solver enforces the cuts.
    """
    m = _problem_m(p)
    econ = p.economy_indices()
    W = np.stack([_linear_weights(p.models[i], m) for i in econ]) if econ else np.zeros((0, m))
    if p.exclusions or p.fixed:
        if m > TABLE_MAX_M:
            raise CapabilityError(f"exclusion cuts need the table solver (m <= {TABLE_MAX_M})")
        return _solve_tables(p)
    masks = [0] * len(econ)
    objective = 0.0
    for j in range(m):
        if not len(W):
            break
        idx = int(np.argmax(W[:, j]))
        if W[idx, j] > 0:
            masks[idx] |= 1 << j
            objective += float(W[idx, j])
    return WdpSolution(_assemble(p, econ, masks, m), objective, objective, "optimal", 1)


def _require_kernel(p: WdpProblem, kinds: tuple) -> None:
    for i in p.economy_indices():
        model = p.models[i]
        if not isinstance(model, SvrModel) or model.kernel.kind not in kinds:
            raise ModelKindError(
                f"bidder {i}: expected SVR with kernel in {kinds}, got {_describe(model)}"
            )


def _describe(model) -> str:
    if isinstance(model, SvrModel):
        return f"SVR/{model.kernel.kind}"
    return type(model).__name__


def solve_quadratic(p: WdpProblem) -> WdpSolution:
    """Winner determination for quadratic-kernel SVR models."""
    _require_kernel(p, ("quadratic",))
    return _solve_tables(p)


def solve_kernel_generic(p: WdpProblem) -> WdpSolution:
    """Winner determination for exponential and gaussian kernel SVR models."""
    _require_kernel(p, ("exponential", "gaussian"))
    return _solve_tables(p)


def solve(p: WdpProblem) -> WdpSolution:
    """Dispatch on model kind; oracle or mixed model kinds route to the
    exact enumeration path."""
    econ = p.economy_indices()
    kinds = set()
    for i in econ:
        model = p.models[i]
        if isinstance(model, OracleModel):
            kinds.add("oracle")
        elif isinstance(model, LinearModel):
            kinds.add("linear")
        elif isinstance(model, SvrModel):
            kinds.add("linear" if model.kernel.kind == "linear" else model.kernel.kind)
        else:
            raise ModelKindError(f"not a learned valuation: {type(model).__name__}")
    if kinds <= {"linear"}:
        return solve_linear_ip(p)
    if kinds == {"quadratic"}:
        return solve_quadratic(p)
    if kinds and kinds <= {"exponential", "gaussian"}:
        return solve_kernel_generic(p)
    m = _problem_m(p)
    if m > TABLE_MAX_M:
        raise CapabilityError(
            f"model kinds {sorted(kinds)} need the table solver but m={m} > {TABLE_MAX_M}"
        )
    return solve_enumeration(p)


def welfare_table(models: Sequence, m: int) -> np.ndarray:
    """F[mask] = maximal summed predicted value of the given bidders using
    only items inside mask.  Useful for answering many fixed-bundle
    counterfactuals against the same bidder set."""
    if m > TABLE_MAX_M:
        raise CapabilityError(f"m={m} exceeds the table solver limit {TABLE_MAX_M}")
    F = np.zeros(2**m)
    for model in models:
        V = predict_many(model, _mask_bundles(m)).astype(np.float64)
        F = _join(V, F, m)
    return F


# ---------------------------------------------------------------------------
# single-bidder quadratic pseudo-boolean maximization (demand queries)


def qpbo_maximize_single(bidder, prices: Sequence[float]) -> Bundle:
    """argmax over bundles of bidder value minus linear prices, for bidders
    exposing qpbo_terms(); exact branch-and-bound over items, preferring the
    lexicographically smallest maximizer."""
    w, pair = bidder.qpbo_terms()
    prices = np.asarray(prices, dtype=np.float64)
    m = len(prices)
    net = np.asarray(w, dtype=np.float64) - prices
    pair = np.asarray(pair, dtype=np.float64)
    pos = np.maximum(pair, 0.0).sum(axis=1)
    caps = np.maximum(net + pos, 0.0)
    suffix_cap = np.concatenate((np.cumsum(caps[::-1])[::-1], [0.0]))

    best_val = 0.0  # the empty bundle is always available
    best_set: tuple = ()
    stack = [(0, 0.0, ())]  # depth, value so far, chosen item indices
    while stack:
        depth, val, chosen = stack.pop()
        if val + suffix_cap[depth] <= best_val + 1e-12:
            continue
        if depth == m:
            if val > best_val + 1e-12:
                best_val, best_set = val, chosen
            continue
        gain = net[depth] + sum(pair[depth, j] for j in chosen)
        # LIFO: push the include branch first so exclusion is explored first,
        # making the first optimum found the lexicographically smallest
        stack.append((depth + 1, val + gain, chosen + (depth,)))
        stack.append((depth + 1, val, chosen))
    out = [0] * m
    for j in best_set:
        out[j] = 1
    return tuple(out)


# ---------------------------------------------------------------------------
# LP-format export


def _z_profile(model: SvrModel, k: int, m: int):
    """(tau range size, kernel value per tau, link kind) for support vector k."""
    x = model.support_vectors[k]
    size = sum(x)
    kind = model.kernel.kind
    if kind == "gaussian":
        taus = np.arange(m + 1)
        return taus, np.exp(-taus / model.kernel.lam), "hamming"
    taus = np.arange(size + 1)
    if kind == "quadratic":
        vals = taus + model.kernel.lam * taus.astype(np.float64) ** 2
    elif kind == "exponential":
        vals = np.exp(taus / model.kernel.lam)
    else:
        raise ModelKindError(f"no indicator encoding for kernel {kind!r}")
    return taus, vals, "dot"


def dump_lp(p: WdpProblem, path: str) -> None:
    """Write the problem as an LP-format integer program for cross-checking.

    Linear models contribute weight terms directly; SVR models are
    linearized with per-support-vector indicator variables z_i_k_tau tied to
    the overlap (or Hamming distance) between the assignment and the
    support vector.
    """
    m = _problem_m(p)
    econ = p.economy_indices()
    obj_terms: list = []
    constraints: list = []
    binaries: list = []

    for i in econ:
        binaries.extend(f"a_{i}_{j}" for j in range(m))

    for i in econ:
        model = p.models[i]
        if isinstance(model, LinearModel) or (
            isinstance(model, SvrModel) and model.kernel.kind == "linear"
        ):
            weights = _linear_weights(model, m)
            obj_terms.extend(f"{weights[j]:+.12g} a_{i}_{j}" for j in range(m))
            continue
        if not isinstance(model, SvrModel):
            raise ModelKindError(f"cannot export {type(model).__name__} to LP format")
        for k, x in enumerate(model.support_vectors):
            taus, vals, link = _z_profile(model, k, m)
            coeff = model.coeffs[k]
            zs = [f"z_{i}_{k}_{t}" for t in taus]
            binaries.extend(zs)
            obj_terms.extend(f"{coeff * v:+.12g} {z}" for z, v in zip(zs, vals))
            constraints.append(" + ".join(zs) + " = 1")
            inside = [j for j in range(m) if x[j]]
            outside = [j for j in range(m) if not x[j]]
            tau_sum = " ".join(f"{-int(t):+d} {z}" for z, t in zip(zs, taus) if t)
            if link == "dot":
                lhs = " + ".join(f"a_{i}_{j}" for j in inside) or "0 a_0_0"
                constraints.append(f"{lhs} {tau_sum} = 0")
            else:
                parts = [f"- a_{i}_{j}" for j in inside] + [f"+ a_{i}_{j}" for j in outside]
                constraints.append(f"{' '.join(parts)} {tau_sum} = {-len(inside)}")

    for j in range(m):
        constraints.append(" + ".join(f"a_{i}_{j}" for i in econ) + " <= 1")
    for i in econ:
        for b in (p.exclusions or {}).get(i, ()):  # integer cut per forbidden bundle
            b = tuple(b)
            inside = [j for j in range(m) if b[j]]
            outside = [j for j in range(m) if not b[j]]
            parts = [f"- a_{i}_{j}" for j in inside] + [f"+ a_{i}_{j}" for j in outside]
            constraints.append(f"{' '.join(parts) or '0 a_' + str(i) + '_0'} >= {1 - len(inside)}")
        if p.fixed and i in p.fixed:
            q = tuple(p.fixed[i])
            for j in range(m):
                constraints.append(f"a_{i}_{j} = {int(q[j])}")

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("Maximize\n obj: " + " ".join(obj_terms or ["0 a_0_0"]) + "\n")
        fh.write("Subject To\n")
        for idx, c in enumerate(constraints):
            fh.write(f" c{idx}: {c}\n")
        fh.write("Binary\n " + "\n ".join(dict.fromkeys(binaries)) + "\nEnd\n")
