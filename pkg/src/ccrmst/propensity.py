"""Weighted logistic regression (IRLS) for propensity scores and the phi model."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

SEPARATION_BOUND = 30.0


class RankDeficiencyError(ValueError):
    """Design matrix is not of full column rank on the weighted support."""


@dataclass(frozen=True)
class LogisticFit:
    """Fitted logistic model; ``coefficients[0]`` is the intercept."""

    coefficients: np.ndarray
    converged: bool
    iterations: int
    max_weighted_gradient_norm: float
    separated: bool = False

    def linear_predictor(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.coefficients.size - 1:
            raise ValueError(
                f"expected {self.coefficients.size - 1} predictors, got {x.shape[1]}"
            )
        return self.coefficients[0] + x @ self.coefficients[1:]


def _check_rank(design, w, names):
    support = design[w > 0] * np.sqrt(w[w > 0])[:, None]
    for j in range(1, design.shape[1] + 1):
        if np.linalg.matrix_rank(support[:, :j]) < j:
            label = names[j - 1] if names is not None else f"column {j - 1}"
            raise RankDeficiencyError(f"design matrix is rank deficient at {label}")


def fit_weighted_logistic(
    y,
    x,
    w=None,
    *,
    tol: float = 1e-8,
    max_iter: int = 100,
    ridge: float = 0.0,
    names: Optional[Sequence[str]] = None,
    check_rank: bool = True,
) -> LogisticFit:
    """Maximize sum(w * [y log p + (1 - y) log(1 - p)]) by IRLS.

    An intercept column is prepended to ``x``. Iteration stops once the
    weighted score ``X'W(y - p)`` has max-norm below ``tol``, or after
    ``max_iter`` Newton steps. Steps are halved while the weighted
    log-likelihood decreases. Divergent coefficients flag separation and
    ``converged=False``.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = y.size
    w = np.ones(n) if w is None else np.asarray(w, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    pos = w > 0
    if not (np.any(y[pos] == 1) and np.any(y[pos] == 0)):
        raise ValueError("need both outcome levels among positively weighted rows")
    design = np.column_stack([np.ones(n), x])
    if check_rank:
        full_names = None if names is None else ["intercept", *names]
        _check_rank(design, w, full_names)

    def loglik(eta):
        # y*eta - log(1 + e^eta), stable for large |eta|
        return np.sum(w * (y * eta - np.logaddexp(0.0, eta)))

    beta = np.zeros(design.shape[1])
    eta = design @ beta
    ll = loglik(eta)
    grad_norm = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = special.expit(eta)
        score = design.T @ (w * (y - p))
        grad_norm = float(np.max(np.abs(score)))
        if grad_norm < tol:
            converged = True
            it -= 1
            break
        info = (design * (w * p * (1.0 - p))[:, None]).T @ design
        if ridge:
            info[np.diag_indices_from(info)] += ridge
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, score, rcond=None)[0]
        scale = 1.0
        while True:
            cand = beta + scale * step
            cand_eta = design @ cand
            cand_ll = loglik(cand_eta)
            if cand_ll >= ll - 1e-12 * abs(ll) or scale < 1e-10:
                break
            scale *= 0.5
        beta, eta, ll = cand, cand_eta, cand_ll
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            break
    else:
        p = special.expit(eta)
        grad_norm = float(np.max(np.abs(design.T @ (w * (y - p)))))
        converged = grad_norm < tol

    separated = bool(np.max(np.abs(beta)) > SEPARATION_BOUND)
    if separated:
        converged = False
    return LogisticFit(beta, converged, it, grad_norm, separated)


def predict_propensity(fit: LogisticFit, x) -> np.ndarray:
    """expit(intercept + x'beta); accepts one covariate vector or a matrix."""
    x = np.asarray(x, dtype=np.float64)
    out = special.expit(fit.linear_predictor(x if x.ndim > 1 else x[None, :]))
    return float(out[0]) if x.ndim == 1 else out


@dataclass(frozen=True)
class PhiModel:
    """phi(z) = E(delta | z) + [1 - E(delta | z)] / alpha.

    ``fit`` is ``None`` when the outcome was constant; ``constant`` then holds
    the sample mean.
    """

    fit: Optional[LogisticFit]
    constant: Optional[float] = None

    def event_probability(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            z = z[:, None]
        if self.fit is None:
            return np.full(z.shape[0], self.constant)
        return special.expit(self.fit.linear_predictor(z))

    def __call__(self, z, alpha) -> np.ndarray:
        e = self.event_probability(z)
        return e + (1.0 - e) / np.asarray(alpha, dtype=np.float64)


def phi_value(event_probability, alpha):
    return event_probability + (1.0 - event_probability) / alpha


def fit_phi(cases, predictors, *, warn: bool = True) -> PhiModel:
    """Unweighted logistic model of case status on the matched unexposed subjects.

    ``predictors`` is the propensity score (one column) or the covariates.
    """
    cases = np.asarray(cases, dtype=np.float64)
    mean = float(cases.mean())
    if mean in (0.0, 1.0):
        if warn:
            warnings.warn("case status is constant among matched unexposed; phi uses the mean",
                          stacklevel=2)
        return PhiModel(None, mean)
    fit = fit_weighted_logistic(cases, predictors, check_rank=False, ridge=1e-8)
    if warn and not fit.converged:
        warnings.warn("phi model did not converge", stacklevel=2)
    return PhiModel(fit)
