"""Simulation experiment runner: replications, per-method metrics, outputs."""
from __future__ import annotations

import csv
import json
import logging
import os
import platform
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__, kernels
from .ccsample import default_alphas, draw_case_cohort
from .core import normalize_event_definition
from .estimator import METHODS
from .pipeline import MethodOptions, fit_propensity, run_method
from .simgen import SimScenario, generate_cohort, get_scenario, make_rng

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
SE_TABLE_SCALE = 1000.0
MAX_FAILURE_FRACTION = 0.02


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: SimScenario = field(default_factory=lambda: get_scenario("ratio2"))
    methods: tuple = ("ps_template", "covar_template")
    event_definition: str = "generalized"
    replications: int = 400
    n_boot: int = 500
    template_ratio: float = 5.0
    n_candidates: int = 50
    seed: int = 2024
    threads: int = 1
    true_att: Optional[float] = None
    options: MethodOptions = field(default_factory=lambda: MethodOptions(include_strata=False))

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.n_boot < 2:
            raise ValueError("bootstrap draws must be at least 2")
        if self.template_ratio <= 0:
            raise ValueError("template ratio must be positive")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "event_definition",
                           normalize_event_definition(self.event_definition))
        object.__setattr__(self, "options", replace(
            self.options, template_ratio=self.template_ratio,
            n_candidates=self.n_candidates, n_boot=self.n_boot))

    @property
    def target(self) -> float:
        value = self.true_att if self.true_att is not None else self.scenario.true_att
        if value is None:
            raise ExperimentError("no true ATT: set true_att or use a calibrated preset")
        return float(value)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scenario"] = self.scenario.to_dict()
        out["options"] = asdict(self.options)
        return out


def replication_sample(config: ExperimentConfig, rep: int):
    cohort = generate_cohort(config.scenario, make_rng(config.seed, rep, 0))
    alpha = default_alphas(cohort, config.event_definition, n_strata=4)
    return draw_case_cohort(cohort, alpha, make_rng(config.seed, rep, 1), config.event_definition)


def run_replication(config: ExperimentConfig, rep: int) -> list[dict]:
    """All configured methods on one simulated case-cohort sample.

    Each method draws from its own stream keyed by its position in
    ``METHODS``, so a method's numbers do not depend on which others run.
    """
    rows = []
    try:
        sample = replication_sample(config, rep)
        ps = fit_propensity(sample, config.options.include_strata)
    except Exception as exc:  # whole replication unusable
        return [_failed(rep, m, exc) for m in config.methods]
    for method in config.methods:
        rng = make_rng(config.seed, rep, 2, METHODS.index(method))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = run_method(sample, method, rng, config.options, ps=ps).result
        except Exception as exc:
            rows.append(_failed(rep, method, exc))
            continue
        rows.append({
            "rep": rep, "method": method, "status": "ok",
            "att": res.att, "se": res.se, "ci_low": res.ci_low, "ci_high": res.ci_high,
            "rmst_treated": res.rmst_treated, "rmst_control": res.rmst_control,
            "n_pairs": res.n_pairs, "n0": sample.n0, "n1": sample.n1,
            "tau": float(sample.data.tau), "n_missing_draws": res.n_missing_draws,
            "ps_converged": bool(ps[0].converged), "error": "",
        })
    return rows


def _failed(rep, method, exc):
    log.warning("replication %d method %s failed: %s", rep, method, exc)
    return {"rep": rep, "method": method, "status": "failed", "att": float("nan"),
            "se": float("nan"), "ci_low": float("nan"), "ci_high": float("nan"),
            "rmst_treated": float("nan"), "rmst_control": float("nan"), "n_pairs": 0,
            "n0": 0, "n1": 0, "tau": float("nan"), "n_missing_draws": 0,
            "ps_converged": False, "error": f"{type(exc).__name__}: {exc}"}


def _run_chunk(args):
    config, reps = args
    return [row for rep in reps for row in run_replication(config, rep)]


def run_replications(config: ExperimentConfig, reps: Optional[Sequence[int]] = None) -> list[dict]:
    """Per-replication rows, ordered by (rep, method), independent of worker count."""
    reps = list(range(config.replications)) if reps is None else list(reps)
    workers = max(1, int(config.threads or os.cpu_count() or 1))
    if workers == 1 or len(reps) == 1:
        rows = _run_chunk((config, reps))
    else:
        chunks = [reps[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [r for part in pool.map(_run_chunk, [(config, c) for c in chunks]) for r in part]
    order = {m: i for i, m in enumerate(config.methods)}
    rows.sort(key=lambda r: (r["rep"], order[r["method"]]))
    return rows


def compute_metrics(att, se, ci_low, ci_high, truth: float) -> dict:
    """Percent bias, SEM, SEE and coverage for one method.

    SEE (standard deviation of the estimates) is NaN for a single replication.
    """
    att = np.asarray(att, dtype=np.float64)
    se = np.asarray(se, dtype=np.float64)
    covered = (np.asarray(ci_low) <= truth) & (truth <= np.asarray(ci_high))
    mean = float(att.mean())
    see = float(att.std(ddof=1)) if att.size > 1 else float("nan")
    return {
        "n": int(att.size),
        "mean_att": mean,
        "pct_bias": 100.0 * (mean - truth) / truth,
        "sem": float(se.mean()),
        "see": see,
        "cp": 100.0 * float(covered.mean()),
    }


def metrics_table(rows: list[dict], config: ExperimentConfig) -> list[dict]:
    table = []
    truth = config.target
    for method in config.methods:
        ok = [r for r in rows if r["method"] == method and r["status"] == "ok"]
        n_failed = sum(1 for r in rows if r["method"] == method and r["status"] != "ok")
        if not ok:
            raise ExperimentError(f"every replication failed for {method}")
        m = compute_metrics([r["att"] for r in ok], [r["se"] for r in ok],
                            [r["ci_low"] for r in ok], [r["ci_high"] for r in ok], truth)
        table.append({
            "scenario": config.scenario.name or f"ratio{config.scenario.exposure_ratio}",
            "n_full": config.scenario.n_full,
            "event_definition": config.event_definition,
            "method": method,
            "true_att": truth,
            "replications": m["n"],
            "failed": n_failed,
            "mean_att": m["mean_att"],
            "pct_bias": m["pct_bias"],
            "sem": m["sem"] * SE_TABLE_SCALE,
            "see": m["see"] * SE_TABLE_SCALE,
            "sem_over_see": m["sem"] / m["see"] if m["n"] > 1 else float("nan"),
            "cp": m["cp"],
        })
    return table


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    table: list

    def method_rows(self, method: str, ok_only: bool = True) -> list:
        return [r for r in self.rows if r["method"] == method
                and (r["status"] == "ok" or not ok_only)]

    def metrics(self, method: str) -> dict:
        return next(t for t in self.table if t["method"] == method)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    rows = run_replications(config)
    for method in config.methods:
        failed = [r for r in rows if r["method"] == method and r["status"] != "ok"]
        if len(failed) > MAX_FAILURE_FRACTION * config.replications:
            details = "; ".join(f"rep {r['rep']}: {r['error']}" for r in failed[:5])
            raise ExperimentError(
                f"{len(failed)} of {config.replications} replications failed for {method} "
                f"(seed {config.seed}): {details}"
            )
    return ExperimentResult(config, rows, metrics_table(rows, config))


def provenance(config: ExperimentConfig, extra: Optional[dict] = None) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "config": config.to_dict(),
        "calibrated_constants": {
            "gamma0": config.scenario.gamma0,
            "h0": config.scenario.h0,
            "censor_hazard": config.scenario.censor_hazard,
        },
        "seed_derivation": "SeedSequence([seed, rep, stage(, method_index)])",
        "se_table_scale": SE_TABLE_SCALE,
    }
    if extra:
        out.update(extra)
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path: Path, rows: list[dict]):
    path = Path(path)
    if not rows:
        path.write_text("")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path, payload: dict):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n",
                          encoding="utf-8")


def curve_rows(label: str, method: str, arm: str, curve) -> list[dict]:
    rows = [{"source": label, "method": method, "arm": arm, "time": 0.0,
             "cumulative_hazard": 0.0, "survival": 1.0}]
    for t, h in zip(curve.times, curve.values):
        rows.append({"source": label, "method": method, "arm": arm, "time": float(t),
                     "cumulative_hazard": float(h), "survival": float(np.exp(-h))})
    return rows


def emit_outputs(result: ExperimentResult, out_dir, *, balance_rows=None, curves=None) -> dict:
    """Write results.csv, replications.csv, results.json, balance.csv, survival_curves.csv."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExperimentError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ExperimentError(f"output directory {out} is not writable")
    paths = {
        "results": out / "results.csv",
        "replications": out / "replications.csv",
        "provenance": out / "results.json",
        "balance": out / "balance.csv",
        "curves": out / "survival_curves.csv",
    }
    write_csv(paths["results"], result.table)
    write_csv(paths["replications"], result.rows)
    write_json(paths["provenance"], provenance(result.config, {"metrics": result.table}))
    write_csv(paths["balance"], balance_rows or [])
    write_csv(paths["curves"], curves or [])
    return paths


def example_diagnostics(config: ExperimentConfig, rep: int = 0):
    """Balance rows and survival curves for one replication (plot-ready)."""
    from .matching import balance_table

    sample = replication_sample(config, rep)
    ps = fit_propensity(sample, config.options.include_strata)
    d = sample.data
    stages = {"before": (np.flatnonzero(d.a == 1), np.flatnonzero(d.a == 0))}
    curves = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for method in config.methods:
            rng = make_rng(config.seed, rep, 2, METHODS.index(method))
            run = run_method(sample, method, rng, config.options, ps=ps, bootstrap=False)
            stages[method] = (run.pairs.treated, run.pairs.control)
            curves += curve_rows(f"rep{rep}", method, "treated", run.result.hazard_treated)
            curves += curve_rows(f"rep{rep}", method, "control", run.result.hazard_control)
    return balance_table(d.x, d.a, d.covariate_names, stages), curves
