"""Analysis of a user-supplied case-cohort sample: balance and ATT table."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .ccsample import CaseCohortSample
from .estimator import METHODS
from .matching import balance_table
from .pipeline import MethodOptions, fit_propensity, parse_method, ps_summary, propensity_design, run_method
from .simgen import make_rng

LABELS = {
    "ps_plain": "PS matched no template",
    "ps_template": "PS matched with template",
    "covar_plain": "Covar matched no template",
    "covar_template": "Covar matched with template",
}


@dataclass(frozen=True)
class AnalysisConfig:
    methods: tuple = METHODS
    template_ratios: tuple = (5.0, 4.0)
    n_candidates: int = 50
    n_boot: int = 500
    seed: int = 2024
    options: MethodOptions = field(default_factory=MethodOptions)

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one method is required")
        for m in self.methods:
            parse_method(m)
        if not self.template_ratios or min(self.template_ratios) <= 0:
            raise ValueError("template ratios must be positive")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "template_ratios", tuple(float(r) for r in self.template_ratios))
        object.__setattr__(self, "options", replace(self.options, n_candidates=self.n_candidates,
                                                    n_boot=self.n_boot))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["options"] = asdict(self.options)
        return out


@dataclass
class AnalysisResult:
    att_table: list
    balance: list
    curves: list
    propensity: dict
    sample_summary: dict
    runs: dict = field(default_factory=dict, repr=False)


def _runs(config: AnalysisConfig) -> list[tuple[str, float | None]]:
    out = []
    for method in config.methods:
        if method.endswith("template"):
            out += [(method, r) for r in config.template_ratios]
        else:
            out.append((method, None))
    return out


def analyze_dataset(sample: CaseCohortSample, config: AnalysisConfig = AnalysisConfig()) -> AnalysisResult:
    """Match with every configured method and template ratio, then estimate.

    Each (method, ratio) run draws from its own stream so adding a ratio does
    not change the others. Balance stages are ``before`` plus one per run.
    """
    from .experiment import curve_rows

    d = sample.data
    ps = fit_propensity(sample, config.options.include_strata)
    _, names = propensity_design(sample, config.options.include_strata)
    stages = {"before": (np.flatnonzero(d.a == 1), np.flatnonzero(d.a == 0))}
    table, curves, runs = [], [], {}
    for k, (method, ratio) in enumerate(_runs(config)):
        rng = make_rng(config.seed, METHODS.index(method), k)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            run = run_method(sample, method, rng, config.options, ps=ps, template_ratio=ratio)
        res = run.result
        tag = method if ratio is None else f"{method}_r{ratio:g}"
        runs[tag] = run
        stages[tag] = (run.pairs.treated, run.pairs.control)
        table.append({
            "method": method,
            "label": LABELS[method],
            "template_ratio": "" if ratio is None else ratio,
            "template_size": "" if ratio is None else int(len(run.pairs)),
            "n_pairs": res.n_pairs,
            "att": res.att,
            "se": res.se,
            "ci_low": res.ci_low,
            "ci_high": res.ci_high,
            "rmst_treated": res.rmst_treated,
            "rmst_control": res.rmst_control,
            "tau": float(d.tau),
            "n_missing_draws": res.n_missing_draws,
            "phi_min": res.phi_diagnostics["min"],
            "phi_max": res.phi_diagnostics["max"],
        })
        curves += curve_rows("data", tag, "treated", res.hazard_treated)
        curves += curve_rows("data", tag, "control", res.hazard_control)
    summary = {
        "n": len(d), "n_exposed": sample.n1, "n_unexposed": sample.n0,
        "n_cases": int(sample.cases.sum()), "tau": float(d.tau),
        "event_definition": sample.event_definition,
        "alpha": [float(a) for a in sample.alpha],
        "covariates": list(d.covariate_names),
    }
    return AnalysisResult(
        att_table=table,
        balance=balance_table(d.x, d.a, d.covariate_names, stages),
        curves=curves,
        propensity=ps_summary(ps[0], names),
        sample_summary=summary,
        runs=runs,
    )


def balance_improved(rows: Sequence[dict], stage: str, baseline: str = "before") -> bool:
    """Mean absolute imbalance at ``stage`` is below the baseline's."""
    def mean_abs(s):
        return float(np.mean([abs(r["value"]) for r in rows if r["stage"] == s]))
    return mean_abs(stage) < mean_abs(baseline)
