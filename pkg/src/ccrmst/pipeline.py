"""One analysis: propensity model, matching, ATT, bootstrap, for a chosen method."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ccsample import CaseCohortSample
from .estimator import (
    METHODS,
    AttResult,
    PairData,
    bootstrap_variance,
    estimate_att,
    with_bootstrap,
)
from .matching import DistanceSpec, MatchedPairSet, match_sample
from .propensity import LogisticFit, fit_weighted_logistic, predict_propensity


@dataclass(frozen=True)
class MethodOptions:
    """Knobs shared by all methods.

    ``alpha_convention`` is ``"stratum"`` (each unexposed subject's own
    stratum probability) or ``"single"`` (one pooled probability).
    ``phi_index`` picks whose propensity score feeds phi in PS matching:
    ``"control"`` (the matched unexposed subject) or ``"treated"``.
    """

    template_ratio: float = 5.0
    n_candidates: int = 50
    n_boot: int = 500
    phi_refit: bool = True
    alpha_convention: str = "stratum"
    phi_index: str = "control"
    include_strata: bool = True
    matching_covariates: Optional[Sequence[int]] = None
    ci: str = "normal"

    def __post_init__(self):
        if self.alpha_convention not in ("stratum", "single"):
            raise ValueError("alpha_convention must be 'stratum' or 'single'")
        if self.phi_index not in ("control", "treated"):
            raise ValueError("phi_index must be 'control' or 'treated'")


def parse_method(method: str):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    family, kind = method.split("_")
    return family, kind == "template"


def propensity_design(sample: CaseCohortSample, include_strata: bool):
    """Covariates plus stratum dummies (first stratum as reference) when requested.

    Dummies that would duplicate a covariate column are dropped.
    """
    data = sample.data
    x = data.x
    names = list(data.covariate_names)
    if not include_strata:
        return x, names
    labels = np.unique(data.stratum)
    extra, extra_names = [], []
    for s in labels[1:]:
        col = (data.stratum == s).astype(np.float64)
        if any(np.array_equal(col, x[:, j]) for j in range(x.shape[1])):
            continue
        candidate = np.column_stack([x, *extra, col])
        if np.linalg.matrix_rank(np.column_stack([np.ones(len(col)), candidate])) < candidate.shape[1] + 1:
            continue
        extra.append(col)
        extra_names.append(f"stratum_{s}")
    if not extra:
        return x, names
    return np.column_stack([x, *extra]), names + extra_names


def fit_propensity(sample: CaseCohortSample, include_strata: bool = True):
    """rho-weighted logistic regression of exposure; returns (fit, scores)."""
    design, names = propensity_design(sample, include_strata)
    fit = fit_weighted_logistic(sample.data.a, design, sample.data.rho, names=names)
    return fit, predict_propensity(fit, design)


def pair_data(sample: CaseCohortSample, pairs: MatchedPairSet, family: str,
              scores: np.ndarray, opts: MethodOptions) -> PairData:
    d = sample.data
    ev = sample.cases.astype(np.float64)
    tr, co = pairs.treated, pairs.control
    if family == "ps":
        phi_z = scores[co if opts.phi_index == "control" else tr][:, None]
    else:
        cols = list(range(d.x.shape[1])) if opts.matching_covariates is None else list(opts.matching_covariates)
        phi_z = d.x[co][:, cols]
    if opts.alpha_convention == "stratum":
        alpha0 = sample.alpha[d.stratum[co] - 1]
    else:
        alpha0 = np.full(len(co), sample.pooled_alpha())
    return PairData(
        t1=d.time[tr].astype(np.float64), e1=ev[tr], rho1=d.rho[tr].astype(np.float64),
        t0=d.time[co].astype(np.float64), e0=ev[co], rho0=d.rho[co].astype(np.float64),
        phi_z=phi_z, alpha0=alpha0, tau=float(d.tau),
    )


@dataclass(frozen=True)
class MethodRun:
    result: AttResult
    pairs: MatchedPairSet
    pair_data: PairData


def run_method(
    sample: CaseCohortSample,
    method: str,
    rng: np.random.Generator,
    opts: MethodOptions = MethodOptions(),
    *,
    ps: Optional[tuple] = None,
    bootstrap: bool = True,
    template_ratio: Optional[float] = None,
) -> MethodRun:
    """Match and estimate for one method.

    ``ps`` may carry a precomputed ``(fit, scores)`` pair so several methods
    share one propensity model. ``template_ratio`` overrides the option.
    """
    family, use_template = parse_method(method)
    if ps is None:
        ps = fit_propensity(sample, opts.include_strata)
    _, scores = ps
    d = sample.data
    if family == "ps":
        spec = DistanceSpec.propensity()
        values = scores
    else:
        spec = DistanceSpec.from_sample(d.x, d.rho, opts.matching_covariates)
        values = d.x
    ratio = (template_ratio or opts.template_ratio) if use_template else None
    pairs = match_sample(values, d.a, spec, template_ratio=ratio,
                         n_candidates=opts.n_candidates, rng=rng)
    pdata = pair_data(sample, pairs, family, scores, opts)
    result = estimate_att(pdata, method=method)
    if bootstrap:
        boot = bootstrap_variance(pdata, opts.n_boot, rng, phi_refit=opts.phi_refit,
                                  att=result.att, ci=opts.ci)
        result = with_bootstrap(result, boot)
    return MethodRun(result, pairs, pdata)


def ps_summary(fit: LogisticFit, names: Sequence[str]) -> dict:
    return {
        "coefficients": dict(zip(["intercept", *names], map(float, fit.coefficients))),
        "converged": fit.converged,
        "iterations": fit.iterations,
    }
