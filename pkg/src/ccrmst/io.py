"""CSV import/export for cohorts and case-cohort samples."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ccsample import CaseCohortSample, case_cohort_weights
from .core import Cohort, normalize_event_definition

RESERVED = ("id", "exposure", "a", "time", "event", "delta", "delta_star",
            "stratum", "xi", "rho", "alpha", "alpha_stratum")
RHO_TOLERANCE = 1e-6


class DataValidationError(ValueError):
    """Problems found while ingesting a CSV; ``problems`` lists (row, message)."""

    def __init__(self, problems):
        self.problems = list(problems)
        shown = "; ".join(f"row {r}: {m}" if r else m for r, m in self.problems[:10])
        more = f" (+{len(self.problems) - 10} more)" if len(self.problems) > 10 else ""
        super().__init__(shown + more)


def _write(path, header, columns):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else int(v)
                        for v in row])
    return path


def write_cohort_csv(path, cohort: Cohort):
    """id, covariates, a, time, delta, delta_star, stratum (plus xi/rho/alpha if present)."""
    names = list(cohort.covariate_names)
    header = ["id", *names, "a", "time", "delta", "delta_star", "stratum"]
    cols = [cohort.id, *[cohort.x[:, j].astype(float) for j in range(len(names))],
            cohort.a, cohort.time.astype(float), cohort.delta, cohort.delta_star, cohort.stratum]
    if cohort.xi is not None:
        header += ["xi", "rho", "alpha_stratum"]
        cols += [cohort.xi, cohort.rho.astype(float), cohort.alpha.astype(float)]
    return _write(path, header, cols)


def write_case_cohort_csv(path, sample: CaseCohortSample, full: bool = False):
    """Analyzed subjects (or, with ``full``, the whole annotated cohort)."""
    data = sample.full if full else sample.data
    if data is None:
        raise ValueError("sample carries no full cohort")
    return write_cohort_csv(path, data)


def read_csv_columns(path) -> dict:
    """Header-keyed columns of strings, with the header validated."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataValidationError([(0, f"{path} is empty")]) from None
        dupes = sorted({h for h in header if header.count(h) > 1})
        if dupes:
            raise DataValidationError([(1, f"duplicate columns {dupes}")])
        cols = {h: [] for h in header}
        problems = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                problems.append((lineno, f"expected {len(header)} fields, found {len(row)}"))
                continue
            for h, v in zip(header, row):
                cols[h].append((lineno, v.strip()))
    if problems:
        raise DataValidationError(problems)
    return cols


def _numeric(cols, name, problems, *, integer=False, required=True):
    if name not in cols:
        if required:
            problems.append((0, f"missing column {name!r}"))
        return None
    out, lines = [], []
    for lineno, raw in cols[name]:
        lines.append(lineno)
        try:
            v = float(raw)
        except ValueError:
            problems.append((lineno, f"{name}={raw!r} is not a number"))
            v = np.nan
        else:
            if not np.isfinite(v):
                problems.append((lineno, f"{name}={raw!r} is not finite"))
            elif integer and v != int(v):
                problems.append((lineno, f"{name}={raw!r} is not an integer"))
        out.append(v)
    return np.asarray(out, dtype=np.float64), np.asarray(lines)


def _binary(values, lines, name, problems):
    bad = ~np.isin(values, (0.0, 1.0)) & np.isfinite(values)
    for ln, v in zip(lines[bad], values[bad]):
        problems.append((int(ln), f"{name}={v:g} is not 0/1"))


@dataclass(frozen=True)
class ColumnMap:
    """Column names in an input CSV. ``covariates=None`` takes every unreserved column."""

    id: str = "id"
    exposure: str = "exposure"
    time: str = "time"
    event: str = "event"
    stratum: str = "stratum"
    xi: str = "xi"
    rho: str = "rho"
    alpha: str = "alpha"
    covariates: Optional[Sequence[str]] = None


_ALIASES = {"exposure": "a", "event": "delta", "alpha": "alpha_stratum"}


def _resolve_aliases(columns: ColumnMap, cols: dict, event_definition: str) -> ColumnMap:
    """Fall back to the export names (a, delta or delta_star, alpha_stratum) for default columns."""
    swaps = {}
    aliases = dict(_ALIASES)
    if event_definition == "generalized":
        aliases["event"] = "delta_star"
    for key, alias in aliases.items():
        name = getattr(columns, key)
        if name == getattr(ColumnMap, key) and name not in cols and alias in cols:
            swaps[key] = alias
    return replace(columns, **swaps) if swaps else columns


def load_case_cohort(
    path,
    columns: ColumnMap = ColumnMap(),
    *,
    event_definition: str = "conventional",
    tau: Optional[float] = None,
    exposure_threshold: Optional[float] = None,
    exclude: Sequence[str] = (),
    time_precision: Optional[int] = None,
) -> CaseCohortSample:
    """Read a case-cohort CSV into a :class:`CaseCohortSample`.

    The ``event`` column is the case status that drove sampling (for files
    written by :func:`write_cohort_csv`, ``delta`` or ``delta_star`` according
    to ``event_definition``; both indicators are then read as stored). ``rho`` is
    taken from the file when present and checked against ``event``, ``xi`` and
    per-stratum ``alpha``; otherwise it is derived. With ``exposure_threshold``
    the exposure column is continuous and dichotomized as ``value > threshold``.
    ``tau`` defaults to the 80th percentile of observed times. The generalized
    event indicator is ``event`` or follow-up beyond ``tau``. Rows with rho 0
    (outside the sample) are dropped.
    """
    event_definition = normalize_event_definition(event_definition)
    cols = read_csv_columns(path)
    problems = []
    c = _resolve_aliases(columns, cols, event_definition)
    exp_ = _numeric(cols, c.exposure, problems)
    time_ = _numeric(cols, c.time, problems)
    ev_ = _numeric(cols, c.event, problems)
    st_ = _numeric(cols, c.stratum, problems, integer=True)
    xi_ = _numeric(cols, c.xi, problems, required=False)
    rho_ = _numeric(cols, c.rho, problems, required=False)
    al_ = _numeric(cols, c.alpha, problems, required=False)
    if rho_ is None and (xi_ is None or al_ is None):
        problems.append((0, f"need column {c.rho!r}, or both {c.xi!r} and {c.alpha!r}"))
    if c.covariates is None:
        skip = set(RESERVED) | {c.id, c.exposure, c.time, c.event, c.stratum, c.xi, c.rho,
                                c.alpha} | set(exclude)
        cov_names = [h for h in cols if h not in skip]
    else:
        cov_names = list(c.covariates)
    if not cov_names:
        problems.append((0, "no covariate columns"))
    cov = [_numeric(cols, h, problems) for h in cov_names]
    if problems:
        raise DataValidationError(problems)

    exposure, lines = exp_
    if exposure_threshold is not None:
        exposure = (exposure > exposure_threshold).astype(np.float64)
    _binary(exposure, lines, c.exposure, problems)
    event = ev_[0]
    _binary(event, lines, c.event, problems)
    time = time_[0]
    for ln in lines[time < 0]:
        problems.append((int(ln), f"{c.time} is negative"))
    stratum = st_[0]
    for ln in lines[stratum < 1]:
        problems.append((int(ln), f"{c.stratum} labels must start at 1"))
    xi = None
    if xi_ is not None:
        xi = xi_[0]
        _binary(xi, lines, c.xi, problems)
    alpha_i = None
    if al_ is not None:
        alpha_i = al_[0]
        for ln in lines[(alpha_i <= 0) | (alpha_i > 1)]:
            problems.append((int(ln), f"{c.alpha} must lie in (0, 1]"))
    if problems:
        raise DataValidationError(problems)

    if rho_ is not None:
        rho = rho_[0]
        for ln in lines[rho < 0]:
            problems.append((int(ln), f"{c.rho} is negative"))
        if xi is not None and alpha_i is not None:
            want = case_cohort_weights(event, xi, alpha_i)
            off = np.abs(want - rho) > RHO_TOLERANCE * np.maximum(1.0, want)
            for ln, r, w in zip(lines[off], rho[off], want[off]):
                problems.append((int(ln), f"{c.rho}={r:g} disagrees with event/xi/alpha ({w:g})"))
    else:
        rho = case_cohort_weights(event, xi, alpha_i)
    if problems:
        raise DataValidationError(problems)

    if time_precision is not None:
        time = np.round(time, time_precision)
    keep = rho > 0
    ids = (np.asarray([int(float(v)) for _, v in cols[c.id]]) if c.id in cols
           else np.arange(1, len(time) + 1))
    if tau is None:
        tau = float(np.quantile(time[keep], 0.8))
    if tau <= 0:
        raise DataValidationError([(0, "tau must be positive")])
    if {"delta", "delta_star"} <= set(cols):
        delta = _numeric(cols, "delta", problems)[0].astype(np.int64)
        delta_star = _numeric(cols, "delta_star", problems)[0].astype(np.int64)
    else:
        delta = event.astype(np.int64)
        delta_star = ((event == 1) | (time > tau)).astype(np.int64)
    stratum = stratum.astype(np.int64)
    n_strata = int(stratum.max())

    if alpha_i is not None:
        alpha = np.ones(n_strata)
        for s in range(1, n_strata + 1):
            rows = stratum == s
            if rows.any():
                vals = np.unique(alpha_i[rows])
                if vals.size > 1:
                    problems.append((0, f"stratum {s} has several alpha values"))
                alpha[s - 1] = vals[0]
        if problems:
            raise DataValidationError(problems)
    else:
        # controls carry rho = 1/alpha
        alpha = np.ones(n_strata)
        for s in range(1, n_strata + 1):
            rows = (stratum == s) & (event == 0) & (rho > 0)
            if rows.any():
                alpha[s - 1] = 1.0 / float(np.median(rho[rows]))
        alpha_i = alpha[stratum - 1]
    if xi is None:
        xi = ((event == 0) & (rho > 0)).astype(np.float64)

    x = np.column_stack([v[0] for v in cov])
    data = Cohort(
        x=x[keep], a=exposure[keep].astype(np.int64), time=time[keep],
        delta=delta[keep], delta_star=delta_star[keep], stratum=stratum[keep],
        tau=float(tau), id=ids[keep], xi=xi[keep].astype(np.int64), rho=rho[keep],
        alpha=alpha_i[keep], covariate_names=tuple(cov_names),
        meta={"source": str(path), "sampling_event": "event column"},
    )
    if np.unique(data.a).size < 2:
        raise DataValidationError([(0, "exposure must have both levels in the sample")])
    return CaseCohortSample(data, alpha, event_definition)
