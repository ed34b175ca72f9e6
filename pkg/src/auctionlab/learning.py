"""Per-bidder learned valuations: regularized linear regression and
kernelized support vector regression trained through the dual QP.

The SVR dual (no bias term, so no coupling constraint) is solved by greedy
coordinate ascent on theta_k = alpha_k - beta_k: each step picks the
coordinate with the largest KKT violation and solves its one-dimensional
subproblem in closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Bundle, ReportSet, bundle_from_string, bundle_to_string

__all__ = [
    "KernelSpec",
    "LinearModel",
    "SvrModel",
    "OracleModel",
    "kernel_eval",
    "kernel_matrix",
    "train_linear",
    "train_svr",
    "predict",
    "predict_many",
    "learning_error",
    "dual_objective",
    "DEFAULT_C",
]

KERNEL_KINDS = ("linear", "quadratic", "exponential", "gaussian")

#: Default regularization trade-off when a caller does not specify one.
DEFAULT_C = 1e4

_SUPPORT_TOL = 1e-10
_KKT_TOL = 1e-5
_MAX_STEPS = 10**6


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.kind in ("exponential", "gaussian") and self.lam <= 0:
            raise ValueError(f"{self.kind} kernel requires lambda > 0")


def kernel_eval(k: KernelSpec, x: Bundle, xp: Bundle) -> float:
    if len(x) != len(xp):
        raise ValueError("bundle lengths differ")
    return float(kernel_matrix(k, np.asarray([x]), np.asarray([xp]))[0, 0])


def kernel_matrix(k: KernelSpec, X: np.ndarray, X2: np.ndarray | None = None) -> np.ndarray:
    """Pairwise kernel values between the rows of X and X2."""
    X = np.asarray(X, dtype=np.float64)
    X2 = X if X2 is None else np.asarray(X2, dtype=np.float64)
    dots = X @ X2.T
    if k.kind == "linear":
        return dots
    if k.kind == "quadratic":
        return dots + k.lam * dots**2
    if k.kind == "exponential":
        with np.errstate(over="ignore"):
            out = np.exp(dots / k.lam)
        if not np.all(np.isfinite(out)):
            raise OverflowError("exponential kernel overflowed; lambda too small")
        return out
    # gaussian: squared distance equals the Hamming distance for 0/1 vectors
    sq = X.sum(axis=1)[:, None] + X2.sum(axis=1)[None, :] - 2.0 * dots
    return np.exp(-sq / k.lam)


@dataclass(frozen=True)
class LinearModel:
    weights: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not all(np.isfinite(w)):
            raise ValueError("non-finite weights")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class SvrModel:
    kernel: KernelSpec
    support_vectors: tuple  # training bundles with |alpha - beta| > tolerance
    coeffs: tuple  # alpha - beta on the support vectors
    alpha: tuple  # raw duals over all training points
    beta: tuple
    epsilon: float
    c: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "kernel": self.kernel.kind,
                "lambda": self.kernel.lam,
                "epsilon": self.epsilon,
                "c": self.c,
                "support_vectors": [bundle_to_string(x) for x in self.support_vectors],
                "coeffs": list(self.coeffs),
            }
        )

    @classmethod
    def from_json(cls, s: str) -> "SvrModel":
        d = json.loads(s)
        svs = tuple(bundle_from_string(b) for b in d["support_vectors"])
        coeffs = tuple(d["coeffs"])
        alpha = tuple(max(c, 0.0) for c in coeffs)
        beta = tuple(max(-c, 0.0) for c in coeffs)
        return cls(
            KernelSpec(d["kernel"], d["lambda"]), svs, coeffs, alpha, beta, d["epsilon"], d["c"]
        )


@dataclass(frozen=True)
class OracleModel:
    """Wraps a true valuation; prediction is exact by construction."""

    bidder: object  # anything with .value(bundle); qpbo_terms() enables fast WDP


def train_linear(reports: ReportSet, c: float = DEFAULT_C) -> LinearModel:
    """Regularized linear regression: minimize c * sum (v_k - w.x_k)^2 + ||w||^2,
    solved through the normal equations (X'X + I/c) w = X'v."""
    if len(reports) < 1:
        raise ValueError("need at least one report")
    if c <= 0:
        raise ValueError("c must be positive")
    X = np.asarray(reports.bundles(), dtype=np.float64)
    y = np.asarray([r.value for r in reports.reports])
    m = reports.m
    w = np.linalg.solve(X.T @ X + np.eye(m) / c, X.T @ y)
    return LinearModel(tuple(w))


def _one_dim_optimum(q: np.ndarray, kdiag: np.ndarray, eps: float, c: float) -> np.ndarray:
    """Closed-form optimum of each coordinate's subproblem
    max_t -0.5*kdiag*t^2 + q*t - eps*|t| over [-c, c], others fixed."""
    soft = np.sign(q) * np.maximum(np.abs(q) - eps, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(kdiag > 1e-12, soft / np.maximum(kdiag, 1e-300), np.sign(soft) * c)
    return np.clip(t, -c, c)


def _kkt_violation(theta: np.ndarray, grad: np.ndarray, eps: float, c: float) -> np.ndarray:
    """Projected-gradient magnitude of the nonsmooth dual objective."""
    sub = np.where(
        theta > 0,
        grad - eps,
        np.where(theta < 0, grad + eps, np.sign(grad) * np.maximum(np.abs(grad) - eps, 0.0)),
    )
    sub = np.where(theta >= c, np.minimum(sub, 0.0), sub)
    sub = np.where(theta <= -c, np.maximum(sub, 0.0), sub)
    return np.abs(sub)


def dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray, beta: np.ndarray,
                   eps: float) -> float:
    """Value of the SVR dual objective at (alpha, beta)."""
    theta = alpha - beta
    return float(-0.5 * theta @ K @ theta - eps * np.sum(alpha + beta) + y @ theta)


def train_svr(reports: ReportSet, kernel: KernelSpec, epsilon: float = 0.0,
              c: float = DEFAULT_C) -> SvrModel:
    """Train SVR by maximizing the dual over the box [0, c]^(2l).

    Runs until the maximal KKT violation drops to 1e-5 or the step budget
    is exhausted; feasibility (box bounds, complementary slackness) holds at
    every iterate by construction.
    """
    if len(reports) < 1:
        raise ValueError("need at least one report")
    if epsilon < 0 or c <= 0:
        raise ValueError("need epsilon >= 0 and c > 0")
    X = np.asarray(reports.bundles(), dtype=np.float64)
    y = np.asarray([r.value for r in reports.reports])
    K = kernel_matrix(kernel, X)
    if not np.all(np.isfinite(K)):
        raise OverflowError("kernel matrix has non-finite entries")
    ell = len(y)
    kdiag = np.diag(K).copy()
    theta = np.zeros(ell)
    if epsilon == 0.0:
        # with no insensitivity tube the dual is a box QP whose unconstrained
        # optimum solves K theta = y; accept it directly when it sits inside
        # the box, otherwise clip it and let coordinate ascent finish the job
        try:
            guess = np.linalg.solve(K, y)
        except np.linalg.LinAlgError:
            guess = np.linalg.lstsq(K, y, rcond=None)[0]
        if np.all(np.isfinite(guess)):
            clipped = np.clip(guess, -c, c)
            if _kkt_violation(clipped, y - K @ clipped, epsilon, c).max() <= _KKT_TOL:
                theta = clipped
            elif np.abs(K @ clipped - y).max() <= 10.0 * np.abs(y).max() + 10.0:
                theta = clipped  # sane warm start only
    u = K @ theta  # maintained incrementally below

    for _ in range(_MAX_STEPS):
        grad = y - u
        viol = _kkt_violation(theta, grad, epsilon, c)
        k = int(np.argmax(viol))
        if viol[k] <= _KKT_TOL:
            break
        q = grad[k] + kdiag[k] * theta[k]
        new = _one_dim_optimum(np.asarray([q]), np.asarray([kdiag[k]]), epsilon, c)[0]
        delta = new - theta[k]
        if delta == 0.0:
            break
        theta[k] = new
        u += K[:, k] * delta

    alpha = np.maximum(theta, 0.0)
    beta = np.maximum(-theta, 0.0)
    support = np.abs(theta) > _SUPPORT_TOL
    svs = tuple(tuple(int(b) for b in X[i]) for i in np.nonzero(support)[0])
    coeffs = tuple(float(t) for t in theta[support])
    return SvrModel(kernel, svs, coeffs, tuple(alpha), tuple(beta), float(epsilon), float(c))


def predict(model, x: Bundle) -> float:
    """Predicted value of a bundle under a learned (or oracle) valuation."""
    return float(predict_many(model, np.asarray([x]))[0])


def predict_many(model, bundles: np.ndarray) -> np.ndarray:
    """Vectorized prediction over the rows of a (K, m) bundle matrix."""
    bundles = np.asarray(bundles)
    if isinstance(model, LinearModel):
        return bundles.astype(np.float64) @ np.asarray(model.weights)
    if isinstance(model, SvrModel):
        if not model.support_vectors:
            return np.zeros(len(bundles))
        K = kernel_matrix(model.kernel, bundles, np.asarray(model.support_vectors))
        return K @ np.asarray(model.coeffs)
    if isinstance(model, OracleModel):
        if hasattr(model.bidder, "values_matrix"):
            return model.bidder.values_matrix(bundles)
        return np.asarray([model.bidder.value(tuple(int(v) for v in b)) for b in bundles])
    raise TypeError(f"not a learned valuation: {type(model).__name__}")


def learning_error(model, v_i, m: int, sample: Sequence[Bundle] | None = None,
                   rng_stream: np.random.Generator | None = None) -> float:
    """Mean absolute prediction error; defaults to full enumeration for
    m <= 18 and 100,000 seeded uniform draws beyond that."""
    if sample is not None:
        B = np.asarray([tuple(b) for b in sample], dtype=np.int8)
        if B.size == 0:
            raise ValueError("sample must be nonempty")
    elif m <= 18:
        from .valuemodels import all_bundles

        B = all_bundles(m)
    else:
        if rng_stream is None:
            raise ValueError("large m requires a seeded generator for sampling")
        B = (rng_stream.random((100_000, m)) < 0.5).astype(np.int8)
    predicted = predict_many(model, B)
    truth = np.asarray([v_i(tuple(int(x) for x in row)) for row in B])
    return float(np.mean(np.abs(predicted - truth)))
