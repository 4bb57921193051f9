"""Logistic regression by damped iteratively-reweighted least squares.

Deterministic from-scratch fit: Newton steps on the penalized
log-likelihood with a small ridge term for numerical stability,
convergence declared on the gradient norm. Diverging coefficient norms
are reported as perfect separation rather than returned silently.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import NonConvergenceError, SeparationError

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITER = 100
RIDGE = 1e-8
SEPARATION_NORM = 1e3


@dataclass
class LogisticModel:
    """Fitted logistic model over a named feature expansion."""

    feature_names: tuple[str, ...]
    coef: np.ndarray
    fitted: bool = False
    n_iter: int = 0
    gradient_norm: float = float("inf")

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise NonConvergenceError("model is not fitted")
        return expit(np.asarray(X, dtype=float) @ self.coef)

    def to_json_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "coef": [float(c) for c in self.coef],
            "n_iter": self.n_iter,
            "gradient_norm": self.gradient_norm,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "LogisticModel":
        return cls(feature_names=tuple(data["feature_names"]),
                   coef=np.asarray(data["coef"], dtype=float), fitted=True,
                   n_iter=int(data["n_iter"]), gradient_norm=float(data["gradient_norm"]))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def fit_logistic(X: np.ndarray, y: np.ndarray,
                 feature_names: tuple[str, ...] | None = None,
                 tolerance: float = DEFAULT_TOLERANCE,
                 max_iter: int = DEFAULT_MAX_ITER) -> LogisticModel:
    """Fit P(y=1 | x) = expit(x @ coef) by damped Newton iterations.

    ``tolerance`` bounds the per-row score norm (the gradient norm divided
    by the number of rows), so convergence is declared at the same
    sharpness regardless of sample size.

    Raises SeparationError when labels are degenerate or coefficients
    diverge, NonConvergenceError when the iteration budget is exhausted.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"design {X.shape} does not match labels {y.shape}")
    if X.shape[0] < 1:
        raise ValueError("at least one row is required")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    if y.min() == y.max():
        raise SeparationError(f"labels are all {int(y[0])}; the model is degenerate")

    n, p = X.shape
    names = feature_names or tuple(f"x{i}" for i in range(p))
    coef = np.zeros(p)
    for it in range(1, max_iter + 1):
        mu = expit(X @ coef)
        grad = X.T @ (y - mu) - RIDGE * coef
        gnorm = float(np.linalg.norm(grad)) / n
        if gnorm <= tolerance:
            if np.linalg.norm(coef) > SEPARATION_NORM:
                raise SeparationError(
                    f"converged at coefficient norm {np.linalg.norm(coef):.1f}; data are separated")
            return LogisticModel(feature_names=names, coef=coef, fitted=True,
                                 n_iter=it - 1, gradient_norm=gnorm)
        w = mu * (1.0 - mu)
        hess = X.T @ (w[:, None] * X) + RIDGE * np.eye(p)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise SeparationError(f"singular information matrix: {exc}") from exc
        # Halve the step while it worsens the penalized log-likelihood.
        ll0 = _penalized_ll(X, y, coef)
        scale = 1.0
        for _ in range(30):
            trial = coef + scale * step
            if _penalized_ll(X, y, trial) >= ll0:
                break
            scale *= 0.5
        coef = coef + scale * step
        if np.linalg.norm(coef) > SEPARATION_NORM:
            raise SeparationError(
                f"coefficient norm {np.linalg.norm(coef):.1f} diverged; data are separated")
    raise NonConvergenceError(
        f"no convergence in {max_iter} iterations (gradient norm {gnorm:.2e})")


def _penalized_ll(X: np.ndarray, y: np.ndarray, coef: np.ndarray) -> float:
    eta = X @ coef
    # log-likelihood via logaddexp for stability: y*eta - log(1+exp(eta))
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * RIDGE * coef @ coef)
