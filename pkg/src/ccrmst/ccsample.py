"""Stratified case-cohort sampling and inverse sampling-probability weights."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import Cohort, StudyConfig, normalize_event_definition


@dataclass(frozen=True)
class CaseCohortSample:
    """Analyzed case-cohort subjects plus the design that produced them.

    ``data`` holds only subjects with positive weight. ``full`` is the whole
    cohort annotated with ``xi`` and ``rho`` (excluded subjects have rho 0);
    it is ``None`` for samples ingested without the full cohort.
    ``alpha`` is indexed by stratum label minus one.
    """

    data: Cohort
    alpha: np.ndarray
    event_definition: str
    full: Optional[Cohort] = None
    stratum_sizes: Optional[np.ndarray] = None

    @property
    def n1(self) -> int:
        return int(np.sum(self.data.a == 1))

    @property
    def n0(self) -> int:
        return int(np.sum(self.data.a == 0))

    @property
    def cases(self) -> np.ndarray:
        return self.data.events(self.event_definition)

    def pooled_alpha(self) -> float:
        """Single subcohort sampling probability, averaged over stratum sizes.

        Stratum sizes come from the full cohort when known, otherwise from the
        Horvitz-Thompson totals of the weights.
        """
        sizes = self.stratum_sizes
        if sizes is None:
            sizes = np.bincount(self.data.stratum - 1, weights=self.data.rho,
                                minlength=len(self.alpha))
        sizes = np.asarray(sizes, dtype=np.float64)
        return float(np.dot(self.alpha, sizes) / sizes.sum())


def default_alphas(cohort: Cohort, event_definition: str, n_strata: Optional[int] = None) -> np.ndarray:
    """alpha_b = min(1, cases_b / noncases_b), aiming at about one control per case.

    Strata without non-cases get 1. A stratum without cases would get 0; it is
    raised to one expected control (1 / noncases_b) so every stratum stays
    sampleable.
    """
    ev = cohort.events(event_definition)
    b = n_strata or int(cohort.stratum.max())
    cases = np.bincount(cohort.stratum - 1, weights=ev, minlength=b)
    noncases = np.bincount(cohort.stratum - 1, weights=1 - ev, minlength=b)
    alpha = np.ones(b)
    has_controls = noncases > 0
    alpha[has_controls] = np.minimum(1.0, np.maximum(cases[has_controls], 1.0) / noncases[has_controls])
    return alpha


def case_cohort_weights(events, xi, alpha_i) -> np.ndarray:
    """rho = delta + (1 - delta) * xi / alpha."""
    events = np.asarray(events, dtype=np.float64)
    return events + (1.0 - events) * np.asarray(xi) / np.asarray(alpha_i, dtype=np.float64)


def draw_case_cohort(
    cohort: Cohort,
    alpha,
    rng: np.random.Generator,
    event_definition: str = "conventional",
) -> CaseCohortSample:
    """Bernoulli subcohort per stratum plus all cases.

    ``alpha`` is a per-stratum probability vector or a :class:`StudyConfig`
    (whose event definition then takes precedence).
    """
    if isinstance(alpha, StudyConfig):
        event_definition = alpha.event_definition
        alpha = alpha.alpha
    event_definition = normalize_event_definition(event_definition)
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha <= 0) or np.any(alpha > 1):
        raise ValueError("subcohort sampling probabilities must lie in (0, 1]")
    if cohort.stratum.min() < 1 or cohort.stratum.max() > alpha.size:
        raise ValueError("stratum labels must lie in 1..B")
    sizes = np.bincount(cohort.stratum - 1, minlength=alpha.size)
    if np.any(sizes == 0):
        warnings.warn(f"empty strata: {list(np.flatnonzero(sizes == 0) + 1)}", stacklevel=2)

    alpha_i = alpha[cohort.stratum - 1]
    xi = (rng.random(len(cohort)) < alpha_i).astype(np.int64)
    ev = cohort.events(event_definition)
    rho = case_cohort_weights(ev, xi, alpha_i)
    full = replace(cohort, xi=xi, rho=rho, alpha=alpha_i)
    data = full.take(np.flatnonzero(rho > 0))
    return CaseCohortSample(data, alpha, event_definition, full=full, stratum_sizes=sizes)


def from_annotated(data: Cohort, event_definition: str, alpha=None) -> CaseCohortSample:
    """Wrap an ingested case-cohort sample that already carries xi/rho/alpha columns."""
    if alpha is None:
        b = int(data.stratum.max())
        alpha = np.ones(b)
        for s in range(1, b + 1):
            rows = data.stratum == s
            if np.any(rows):
                alpha[s - 1] = float(np.median(data.alpha[rows]))
    return CaseCohortSample(data, np.asarray(alpha, dtype=np.float64),
                            normalize_event_definition(event_definition))
