"""Command line front end: ``ccrmst simulate | analyze | calibrate | oracle``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path

import yaml

from .analysis import AnalysisConfig, analyze_dataset
from .estimator import METHODS
from .experiment import (
    ExperimentConfig,
    ExperimentError,
    emit_outputs,
    example_diagnostics,
    run_experiment,
    write_csv,
    write_json,
)
from .io import ColumnMap, DataValidationError, load_case_cohort
from .pipeline import MethodOptions
from .simgen import PRESETS, SimScenario, calibrate, get_scenario, true_att_oracle

log = logging.getLogger("ccrmst")

EVENT_DEFS = {"conv": "conventional", "gde": "generalized"}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    """YAML mapping from a path or a bundled preset name (``preset:NAME``)."""
    if path is None:
        return {}
    text = None
    if str(path).startswith("preset:"):
        name = str(path).split(":", 1)[1]
        ref = resources.files("ccrmst") / "presets" / f"{name}.yaml"
        if not ref.is_file():
            raise ConfigError(f"no bundled preset {name!r}")
        text = ref.read_text(encoding="utf-8")
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def _options(raw: dict, base: MethodOptions) -> MethodOptions:
    known = {f.name for f in fields(MethodOptions)}
    bad = set(raw) - known
    if bad:
        raise ConfigError(f"unknown options {sorted(bad)}")
    return replace(base, **raw)


def _scenario(raw) -> SimScenario:
    if raw is None:
        return get_scenario("ratio2")
    if isinstance(raw, str):
        return get_scenario(raw)
    raw = dict(raw)
    name = raw.pop("name", None)
    if name in PRESETS:
        return get_scenario(name, **raw)
    return SimScenario(name=name or "", **raw)


def experiment_config(args, cfg: dict) -> tuple[ExperimentConfig, Path]:
    cfg = dict(cfg)
    scenario = _scenario(cfg.pop("scenario", None))
    if args.scenario:
        scenario = get_scenario(args.scenario, n_full=scenario.n_full)
    if args.n_full:
        scenario = replace(scenario, n_full=args.n_full)
    options = _options(cfg.pop("options", {}) or {}, MethodOptions(include_strata=False))
    out = Path(args.out or cfg.pop("out", "results"))
    cfg.pop("out", None)
    if args.method:
        cfg["methods"] = args.method
    for key, val in (("event_definition", args.event_def and EVENT_DEFS[args.event_def]),
                     ("replications", args.reps), ("n_boot", args.boot),
                     ("template_ratio", args.template_ratio), ("n_candidates", args.candidates),
                     ("seed", args.seed), ("threads", args.threads), ("true_att", args.true_att)):
        if val is not None:
            cfg[key] = val
    cfg.setdefault("threads", os.cpu_count() or 1)
    known = {f.name for f in fields(ExperimentConfig)}
    bad = set(cfg) - known
    if bad:
        raise ConfigError(f"unknown config keys {sorted(bad)}")
    if "methods" in cfg:
        cfg["methods"] = tuple(cfg["methods"])
    if "event_definition" in cfg:
        cfg["event_definition"] = EVENT_DEFS.get(cfg["event_definition"], cfg["event_definition"])
    return ExperimentConfig(scenario=scenario, options=options, **cfg), out


def cmd_simulate(args) -> int:
    config, out = experiment_config(args, load_config(args.config))
    log.info("running %d replications of %s", config.replications, ", ".join(config.methods))
    result = run_experiment(config)
    balance, curves = example_diagnostics(config)
    paths = emit_outputs(result, out, balance_rows=balance, curves=curves)
    _print_table(result.table, ["method", "event_definition", "true_att", "pct_bias", "sem", "see",
                                "sem_over_see", "cp", "failed"])
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    cols = dict(cfg.pop("columns", {}) or {})
    if args.exposure:
        cols["exposure"] = args.exposure
    if args.covariates:
        cols["covariates"] = [c.strip() for c in args.covariates.split(",") if c.strip()]
    unknown = set(cols) - {f.name for f in fields(ColumnMap)}
    if unknown:
        raise ConfigError(f"unknown column keys {sorted(unknown)}")
    data_path = args.csv or cfg.pop("data", None)
    cfg.pop("data", None)
    if data_path is None:
        raise ConfigError("no input CSV given")
    if data_path == "builtin:aric_like":
        data_path = resources.files("ccrmst") / "data" / "aric_like.csv"
    threshold = args.threshold if args.threshold is not None else cfg.pop("exposure_threshold", None)
    tau = args.tau if args.tau is not None else cfg.pop("tau", None)
    evdef = EVENT_DEFS.get(args.event_def) if args.event_def else cfg.pop("event_definition", "conventional")
    exclude = cfg.pop("exclude", ()) or ()
    precision = cfg.pop("time_precision", None)
    for k in ("exposure_threshold", "tau", "event_definition"):
        cfg.pop(k, None)
    sample = load_case_cohort(data_path, ColumnMap(**cols), event_definition=EVENT_DEFS.get(evdef, evdef),
                              tau=tau, exposure_threshold=threshold, exclude=exclude,
                              time_precision=precision)
    out = Path(args.out or cfg.pop("out", "analysis"))
    cfg.pop("out", None)
    options = _options(cfg.pop("options", {}) or {}, MethodOptions())
    if args.method:
        cfg["methods"] = tuple(args.method)
    if args.template_ratio:
        cfg["template_ratios"] = tuple(args.template_ratio)
    for key, val in (("n_candidates", args.candidates), ("n_boot", args.boot), ("seed", args.seed)):
        if val is not None:
            cfg[key] = val
    bad = set(cfg) - {f.name for f in fields(AnalysisConfig)}
    if bad:
        raise ConfigError(f"unknown config keys {sorted(bad)}")
    if "methods" in cfg:
        cfg["methods"] = tuple(cfg["methods"])
    if "template_ratios" in cfg:
        cfg["template_ratios"] = tuple(cfg["template_ratios"])
    config = AnalysisConfig(options=options, **cfg)
    result = analyze_dataset(sample, config)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "results.csv", result.att_table)
    write_csv(out / "balance.csv", result.balance)
    write_csv(out / "survival_curves.csv", result.curves)
    from . import __version__, kernels
    write_json(out / "results.json", {
        "schema_version": "1.0", "package_version": __version__, "kernel_backend": kernels.BACKEND,
        "input": str(data_path), "config": config.to_dict(), "sample": result.sample_summary,
        "propensity_model": result.propensity, "att": result.att_table,
    })
    _print_table(result.att_table, ["label", "template_ratio", "n_pairs", "att", "se", "ci_low", "ci_high"])
    print(f"wrote results.csv, balance.csv, survival_curves.csv, results.json to {out}")
    return 0


def cmd_calibrate(args) -> int:
    ratios = args.ratio or [2, 3, 4]
    rows = []
    for r in ratios:
        target = args.target_att
        if target is None and not args.unit_time:
            target = PRESETS[f"ratio{r}"].true_att
        cal = calibrate(r, target, n_pilot=args.pilot, n_scale=args.scale_n, seed=args.seed)
        rows.append({"exposure_ratio": r, "target_att": target, **cal.to_dict()})
    _print_table(rows, ["exposure_ratio", "gamma0", "h0", "censor_hazard", "exposed_fraction",
                        "event_rate", "generalized_event_rate"])
    if args.out:
        write_json(args.out, {"calibration": rows, "seed": args.seed})
    return 0


def cmd_oracle(args) -> int:
    names = args.scenario or sorted(PRESETS)
    rows = []
    for name in names:
        sc = get_scenario(name)
        att, se, tau = true_att_oracle(sc, n_mc=int(args.n_mc), seed=args.seed)
        row = {"scenario": name, "att": att, "mc_se": se, "tau": tau, "preset_true_att": sc.true_att}
        if sc.true_att is not None:
            row["z"] = (att - sc.true_att) / se
        rows.append(row)
    _print_table(rows, ["scenario", "att", "mc_se", "tau", "preset_true_att", "z"])
    if args.out:
        write_json(args.out, {"oracle": rows, "n_mc": int(args.n_mc), "seed": args.seed})
    return 0


def _print_table(rows, keys):
    print("\t".join(keys))
    for row in rows:
        vals = []
        for k in keys:
            v = row.get(k, "")
            vals.append(f"{v:.6g}" if isinstance(v, float) else str(v))
        print("\t".join(vals))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccrmst", description="RMST ATT estimation under stratified "
                                "case-cohort sampling with template matching.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config path or preset:NAME")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--method", action="append", choices=METHODS,
                        help="repeat to run several methods")
        sp.add_argument("--event-def", choices=sorted(EVENT_DEFS))
        sp.add_argument("--template-ratio", type=float, action="append",
                        help="unexposed per template member (analyze accepts several)")
        sp.add_argument("--candidates", type=int, help="number of candidate templates")
        sp.add_argument("--boot", type=int, help="bootstrap draws")

    sp = sub.add_parser("simulate", help="run a simulation experiment")
    common(sp)
    sp.add_argument("--scenario", choices=sorted(PRESETS))
    sp.add_argument("--n-full", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--true-att", type=float)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("analyze", help="analyze a case-cohort CSV")
    common(sp)
    sp.add_argument("csv", nargs="?", help="input CSV (or builtin:aric_like)")
    sp.add_argument("--exposure", help="exposure column")
    sp.add_argument("--threshold", type=float, help="dichotomize exposure as value > threshold")
    sp.add_argument("--covariates", help="comma-separated covariate columns")
    sp.add_argument("--tau", type=float)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("calibrate", help="recompute scenario constants")
    sp.add_argument("--ratio", type=int, action="append", choices=[2, 3, 4])
    sp.add_argument("--target-att", type=float)
    sp.add_argument("--unit-time", action="store_true", help="keep h0 = 1 instead of matching a target ATT")
    sp.add_argument("--pilot", type=int, default=10**6)
    sp.add_argument("--scale-n", type=int, default=2 * 10**7)
    sp.add_argument("--seed", type=int, default=20240101)
    sp.add_argument("--out", help="JSON output path")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("oracle", help="Monte Carlo true ATT")
    sp.add_argument("--scenario", action="append", choices=sorted(PRESETS))
    sp.add_argument("--n-mc", type=float, default=1e7)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--out", help="JSON output path")
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "template_ratio", None) and args.command == "simulate":
        if len(args.template_ratio) > 1:
            print("error: simulate takes a single --template-ratio", file=sys.stderr)
            return 2
        args.template_ratio = args.template_ratio[0]
    try:
        return args.func(args)
    except (ConfigError, DataValidationError, ExperimentError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
