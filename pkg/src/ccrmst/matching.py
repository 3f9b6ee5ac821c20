"""Distances, templates, exact one-to-one optimal matching, balance diagnostics."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from . import kernels

log = logging.getLogger(__name__)

PROPENSITY = "propensity_euclidean"
MAHALANOBIS = "mahalanobis"
MIN_EIGENVALUE = 1e-10
_ROW_BLOCK = 2048


def weighted_covariance(x, rho) -> np.ndarray:
    """sum(rho (x - mu)(x - mu)') / (sum(rho) - 1) with mu the rho-weighted mean."""
    x = np.asarray(x, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    total = rho.sum()
    if total <= 1.0:
        raise ValueError("sum of weights must exceed 1")
    mu = rho @ x / total
    dev = x - mu
    sigma = (dev * rho[:, None]).T @ dev / (total - 1.0)
    return 0.5 * (sigma + sigma.T)


def condition_covariance(sigma) -> tuple[np.ndarray, bool]:
    """Add a ridge of 1e-8 * trace / p when the matrix is near singular."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    if np.linalg.eigvalsh(sigma).min() > MIN_EIGENVALUE:
        return sigma, False
    p = sigma.shape[0]
    lam = 1e-8 * np.trace(sigma) / p
    fixed = sigma + lam * np.eye(p)
    log.warning("covariance near singular; added ridge %.3g", lam)
    return fixed, True


def mahalanobis(x1, x2, sigma) -> float:
    diff = np.atleast_1d(np.asarray(x1, dtype=np.float64) - np.asarray(x2, dtype=np.float64))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ValueError("covariance matrix is not positive definite") from None
    z = np.linalg.solve(chol, diff)
    return float(np.sqrt(z @ z))


@dataclass(frozen=True)
class DistanceSpec:
    """How two subjects are compared.

    ``propensity_euclidean`` uses |p_i - p_j| on the estimated propensity
    score; ``mahalanobis`` uses the (conditioned) covariance on the columns
    ``matching_covariate_indices``.
    """

    kind: str
    covariance: Optional[np.ndarray] = None
    matching_covariate_indices: Optional[Sequence[int]] = None
    ridge_applied: bool = False
    _whitener: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (PROPENSITY, MAHALANOBIS):
            raise ValueError(f"unknown distance kind {self.kind!r}")
        if self.kind == MAHALANOBIS:
            if self.covariance is None:
                raise ValueError("Mahalanobis distance needs a covariance matrix")
            cov = np.atleast_2d(np.asarray(self.covariance, dtype=np.float64))
            if not np.allclose(cov, cov.T):
                raise ValueError("covariance must be symmetric")
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ValueError("covariance must be positive definite") from None
            object.__setattr__(self, "covariance", cov)
            object.__setattr__(self, "_whitener", np.linalg.inv(chol).T)

    @classmethod
    def propensity(cls) -> "DistanceSpec":
        return cls(PROPENSITY)

    @classmethod
    def from_sample(cls, x, rho, indices=None) -> "DistanceSpec":
        """Mahalanobis spec with the rho-weighted case-cohort covariance."""
        x = np.asarray(x, dtype=np.float64)
        cols = list(range(x.shape[1])) if indices is None else list(indices)
        sigma, ridged = condition_covariance(weighted_covariance(x[:, cols], rho))
        return cls(MAHALANOBIS, sigma, tuple(cols), ridged)

    def features(self, values) -> np.ndarray:
        """Map raw inputs (propensity scores or covariate rows) to Euclidean coordinates."""
        values = np.asarray(values, dtype=np.float64)
        if self.kind == PROPENSITY:
            return values.reshape(-1, 1)
        if values.ndim == 1:
            values = values[None, :]
        if self.matching_covariate_indices is not None:
            values = values[:, list(self.matching_covariate_indices)]
        return values @ self._whitener

    def pairwise(self, a, b) -> np.ndarray:
        return cdist(self.features(a), self.features(b))


@dataclass(frozen=True)
class MatchedPairSet:
    """Exposed/unexposed pairs as row indices into the analyzed sample."""

    treated: np.ndarray
    control: np.ndarray
    distance_spec: DistanceSpec
    template_id: Optional[int]
    total_within_pair_distance: float

    def __post_init__(self):
        if len(self.treated) != len(self.control):
            raise ValueError("pairs need one treated and one control index each")
        if len(np.unique(self.control)) != len(self.control):
            raise ValueError("a control appears in more than one pair")
        if len(np.unique(self.treated)) != len(self.treated):
            raise ValueError("a treated subject appears in more than one pair")

    def __len__(self):
        return len(self.treated)


def template_size(n0: int, ratio: float) -> int:
    """Template size giving about ``ratio`` unexposed per template member."""
    return max(1, int(round(n0 / ratio)))


def draw_templates(n_exposed: int, m: int, n_candidates: int, rng: np.random.Generator):
    """Simple random subsets (as index arrays into the exposed group)."""
    if m >= n_exposed:
        raise ValueError(f"template size {m} must be smaller than the exposed count {n_exposed}")
    if m < 1 or n_candidates < 1:
        raise ValueError("template size and candidate count must be positive")
    return [np.sort(rng.choice(n_exposed, size=m, replace=False)) for _ in range(n_candidates)]


def _distance_row_sums(spec: DistanceSpec, values) -> np.ndarray:
    feats = spec.features(values)
    sums = np.empty(feats.shape[0])
    for start in range(0, feats.shape[0], _ROW_BLOCK):
        stop = start + _ROW_BLOCK
        sums[start:stop] = cdist(feats[start:stop], feats).sum(axis=1)
    return sums


def select_template(candidates, exposed_values, spec: DistanceSpec):
    """Candidate with the smallest total distance to the whole exposed group.

    The total for a template is the sum over its members of their distances
    to every exposed subject, so per-subject row sums are computed once.
    Ties go to the lowest candidate index.

    Returns
    -------
    index : int
    totals : ndarray
    """
    if len(candidates) == 1:
        return 0, np.array([np.nan])
    row_sums = _distance_row_sums(spec, exposed_values)
    totals = np.array([row_sums[c].sum() for c in candidates])
    return int(np.argmin(totals)), totals


def optimal_match(template_values, unexposed_values, spec: DistanceSpec):
    """Minimum total distance one-to-one assignment of unexposed to template.

    Returns
    -------
    control : ndarray
        Index into ``unexposed_values`` for each template row.
    total : float
    """
    cost = spec.pairwise(template_values, unexposed_values)
    if cost.shape[0] > cost.shape[1]:
        raise ValueError(
            f"infeasible matching: {cost.shape[0]} template subjects, {cost.shape[1]} unexposed"
        )
    if not np.all(np.isfinite(cost)):
        raise ValueError("distances must be finite")
    col4row, total = kernels.solve_assignment(cost)
    return np.asarray(col4row, dtype=np.int64), float(total)


def match_sample(values, exposure, spec: DistanceSpec, *, template_ratio=None,
                 n_candidates: int = 50, rng=None) -> MatchedPairSet:
    """Template or plain one-to-one optimal matching on an analyzed sample.

    ``values`` holds per-subject propensity scores or covariate rows. With
    ``template_ratio`` a template of size round(n0 / ratio) is chosen among
    ``n_candidates`` random draws from the exposed group. Without it every
    exposed subject is matched; when unexposed subjects are the scarcer group
    each of them gets a distinct exposed partner instead.
    """
    values = np.asarray(values, dtype=np.float64)
    exposed = np.flatnonzero(exposure == 1)
    unexposed = np.flatnonzero(exposure == 0)
    template_id = None
    if template_ratio is not None:
        m = template_size(unexposed.size, template_ratio)
        candidates = draw_templates(exposed.size, m, n_candidates, rng)
        template_id, _ = select_template(candidates, values[exposed], spec)
        rows = exposed[candidates[template_id]]
    else:
        rows = exposed
    if rows.size <= unexposed.size:
        cols, total = optimal_match(values[rows], values[unexposed], spec)
        treated, control = rows, unexposed[cols]
    else:
        cols, total = optimal_match(values[unexposed], values[rows], spec)
        treated, control = rows[cols], unexposed
        order = np.argsort(treated, kind="stable")
        treated, control = treated[order], control[order]
    return MatchedPairSet(treated, control, spec, template_id, total)


def standardized_difference(x1, x0, pooled_sd: Optional[float] = None) -> float:
    """(mean1 - mean0) / pooled SD; the pooled SD defaults to the two groups given."""
    x1 = np.asarray(x1, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if pooled_sd is None:
        pooled_sd = pooled_standard_deviation(x1, x0)
    diff = x1.mean() - x0.mean()
    if pooled_sd == 0:
        if diff == 0:
            return 0.0
        return float("nan")
    return float(diff / pooled_sd)


def pooled_standard_deviation(x1, x0) -> float:
    n1, n0 = len(x1), len(x0)
    v1 = np.var(x1, ddof=1) if n1 > 1 else 0.0
    v0 = np.var(x0, ddof=1) if n0 > 1 else 0.0
    return float(np.sqrt(((n1 - 1) * v1 + (n0 - 1) * v0) / (n1 + n0 - 2)))


def is_binary(column) -> bool:
    return set(np.unique(column)).issubset({0.0, 1.0})


def balance_table(x, exposure, names, stages: dict) -> list[dict]:
    """Balance rows for each stage.

    ``stages`` maps a stage label to ``(treated_rows, control_rows)`` index
    arrays into ``x``. Continuous covariates report the SMD using the pooled
    SD of the unmatched case-cohort sample for every stage; binary covariates
    report the difference in proportions (treated minus control).
    """
    x = np.asarray(x, dtype=np.float64)
    exposure = np.asarray(exposure)
    if not (np.any(exposure == 1) and np.any(exposure == 0)):
        raise ValueError("both exposure groups must be nonempty")
    rows = []
    base1, base0 = np.flatnonzero(exposure == 1), np.flatnonzero(exposure == 0)
    for j, name in enumerate(names):
        col = x[:, j]
        binary = is_binary(col)
        pooled = pooled_standard_deviation(col[base1], col[base0])
        for stage, (t_rows, c_rows) in stages.items():
            if binary:
                metric = "prop_diff"
                value = float(col[t_rows].mean() - col[c_rows].mean())
            else:
                metric = "smd"
                value = standardized_difference(col[t_rows], col[c_rows], pooled)
            rows.append({"covariate": name, "stage": stage, "metric": metric, "value": value})
    return rows
