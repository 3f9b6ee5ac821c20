"""Weighted cumulative hazards for both arms, RMST difference, pair bootstrap."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .core import AttEstimate, StepCurve, hazard_curve
from .propensity import PhiModel, fit_phi

Z_975 = 1.96
METHODS = ("ps_plain", "ps_template", "covar_plain", "covar_template")


class AssumptionError(ValueError):
    """The truncation time exceeds the follow-up available in an arm."""


class DegenerateSampleError(ValueError):
    """Too few usable bootstrap draws, or another condition leaves the ATT undefined.

    An arm without events before tau is not degenerate: its hazard is zero
    and its RMST equals tau.
    """


@dataclass(frozen=True)
class PairData:
    """Per-pair arrays for the estimator; row i is matched pair i.

    ``phi_z`` holds the predictors of the phi model for the pair (propensity
    score or covariates) and ``alpha0`` the subcohort sampling probability
    paired with it.
    """

    t1: np.ndarray
    e1: np.ndarray
    rho1: np.ndarray
    t0: np.ndarray
    e0: np.ndarray
    rho0: np.ndarray
    phi_z: np.ndarray
    alpha0: np.ndarray
    tau: float

    def __len__(self):
        return self.t1.size

    def take(self, idx) -> "PairData":
        return PairData(
            self.t1[idx], self.e1[idx], self.rho1[idx],
            self.t0[idx], self.e0[idx], self.rho0[idx],
            self.phi_z[idx], self.alpha0[idx], self.tau,
        )


@dataclass(frozen=True)
class AttResult(AttEstimate):
    hazard_treated: Optional[StepCurve] = None
    hazard_control: Optional[StepCurve] = None
    bootstrap_draws: np.ndarray = field(default_factory=lambda: np.empty(0))
    method: str = ""
    phi_diagnostics: dict = field(default_factory=dict)
    n_missing_draws: int = 0

    def summary(self) -> dict:
        out = {k: v for k, v in asdict(self).items()
               if k not in ("hazard_treated", "hazard_control", "bootstrap_draws")}
        out["n_bootstrap"] = int(self.bootstrap_draws.size)
        return out


def _nelson_aalen(times, events, num_w, den_w, tau):
    order = np.argsort(times, kind="mergesort")
    return kernels.weighted_nelson_aalen(
        times[order], events[order], num_w[order], den_w[order], tau
    )


def hazard_treated(t1, e1, rho1, tau) -> StepCurve:
    """Nelson-Aalen for the exposed members with rho only in the risk set."""
    t1 = np.asarray(t1, dtype=np.float64)
    e1 = np.asarray(e1, dtype=np.float64)
    jt, inc = _nelson_aalen(t1, e1, np.ones_like(t1), np.asarray(rho1, dtype=np.float64), tau)
    return hazard_curve(jt, inc)


def hazard_control(t0, e0, rho0, rho1, phi, tau) -> StepCurve:
    """Unexposed-arm hazard with pair weights rho1 / phi.

    Increment at u: sum(rho1/phi * dN0(u)) / sum(Y0(u) * rho1 * rho0 / phi).
    """
    t0 = np.asarray(t0, dtype=np.float64)
    pw = np.asarray(rho1, dtype=np.float64) / np.asarray(phi, dtype=np.float64)
    if np.any(~np.isfinite(pw)) or np.any(np.asarray(phi) <= 0):
        raise ValueError("phi must be positive and finite")
    jt, inc = _nelson_aalen(t0, np.asarray(e0, dtype=np.float64), pw,
                            pw * np.asarray(rho0, dtype=np.float64), tau)
    return hazard_curve(jt, inc)


def check_follow_up(pd: PairData):
    if pd.t1.max() < pd.tau:
        raise AssumptionError(f"tau={pd.tau:g} exceeds the largest follow-up time in the exposed arm")
    if pd.t0.max() < pd.tau:
        raise AssumptionError(f"tau={pd.tau:g} exceeds the largest follow-up time in the unexposed arm")


def phi_values(pd: PairData, model: PhiModel) -> np.ndarray:
    return model(pd.phi_z, pd.alpha0)


def _rmst_arms(pd: PairData, phi: np.ndarray):
    t1, t0 = pd.t1, pd.t0
    o1 = np.argsort(t1, kind="mergesort")
    jt1, inc1 = kernels.weighted_nelson_aalen(t1[o1], pd.e1[o1], np.ones(t1.size), pd.rho1[o1], pd.tau)
    pw = pd.rho1 / phi
    o0 = np.argsort(t0, kind="mergesort")
    jt0, inc0 = kernels.weighted_nelson_aalen(t0[o0], pd.e0[o0], pw[o0], (pw * pd.rho0)[o0], pd.tau)
    return (kernels.rmst_from_increments(jt1, inc1, pd.tau),
            kernels.rmst_from_increments(jt0, inc0, pd.tau))


def point_estimate(pd: PairData, phi_model: Optional[PhiModel] = None, *, warn: bool = True):
    """ATT, treated RMST and control RMST; fits phi when no model is given."""
    check_follow_up(pd)
    if phi_model is None:
        phi_model = fit_phi(pd.e0, pd.phi_z, warn=warn)
    r1, r0 = _rmst_arms(pd, phi_values(pd, phi_model))
    return r1 - r0, r1, r0


def estimate_att(pd: PairData, phi_model: Optional[PhiModel] = None, method: str = "") -> AttResult:
    """Point estimate with both hazard curves; se and CI are left at zero width."""
    check_follow_up(pd)
    if phi_model is None:
        phi_model = fit_phi(pd.e0, pd.phi_z)
    phi = phi_values(pd, phi_model)
    h1 = hazard_treated(pd.t1, pd.e1, pd.rho1, pd.tau)
    h0 = hazard_control(pd.t0, pd.e0, pd.rho0, pd.rho1, phi, pd.tau)
    r1, r0 = _rmst_arms(pd, phi)
    att = r1 - r0
    return AttResult(
        att=att, se=0.0, ci_low=att, ci_high=att,
        rmst_treated=r1, rmst_control=r0, n_pairs=len(pd),
        hazard_treated=h1, hazard_control=h0, method=method,
        phi_diagnostics={"min": float(phi.min()), "max": float(phi.max()),
                         "mean": float(phi.mean())},
    )


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    ci_low: float
    ci_high: float
    draws: np.ndarray
    n_missing: int


def bootstrap_variance(
    pd: PairData,
    n_boot: int = 500,
    rng: Optional[np.random.Generator] = None,
    *,
    phi_refit: bool = True,
    phi_model: Optional[PhiModel] = None,
    att: Optional[float] = None,
    ci: str = "normal",
) -> BootstrapResult:
    """Resample matched pairs with replacement and recompute the ATT.

    Case-cohort weights stay as observed. With ``phi_refit`` the phi model is
    refit on each resample; otherwise ``phi_model`` (or one fit to the full
    pair set) is reused. Draws that leave the ATT undefined are dropped and
    counted.
    """
    if n_boot < 2:
        raise ValueError("need at least two bootstrap draws")
    m = len(pd)
    if m == 0:
        raise ValueError("no matched pairs")
    rng = rng if rng is not None else np.random.default_rng()
    if not phi_refit and phi_model is None:
        phi_model = fit_phi(pd.e0, pd.phi_z)
    if att is None:
        att = point_estimate(pd, phi_model)[0]
    idx = rng.integers(0, m, size=(n_boot, m))
    draws = np.full(n_boot, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for b in range(n_boot):
            try:
                draws[b] = point_estimate(pd.take(idx[b]), None if phi_refit else phi_model,
                                          warn=False)[0]
            except (AssumptionError, DegenerateSampleError, ZeroDivisionError,
                    np.linalg.LinAlgError, ValueError):
                pass
    ok = draws[np.isfinite(draws)]
    n_missing = n_boot - ok.size
    if n_missing > 0.05 * n_boot:
        warnings.warn(f"{n_missing} of {n_boot} bootstrap draws were degenerate", stacklevel=2)
    if ok.size < 2:
        raise DegenerateSampleError("fewer than two usable bootstrap draws")
    se = float(np.std(ok, ddof=1))
    if ci == "normal":
        lo, hi = att - Z_975 * se, att + Z_975 * se
    elif ci == "percentile":
        lo, hi = (float(v) for v in np.quantile(ok, [0.025, 0.975]))
    else:
        raise ValueError(f"unknown interval type {ci!r}")
    return BootstrapResult(se, float(lo), float(hi), draws, int(n_missing))


def with_bootstrap(result: AttResult, boot: BootstrapResult) -> AttResult:
    return replace(result, se=boot.se, ci_low=boot.ci_low, ci_high=boot.ci_high,
                   bootstrap_draws=boot.draws, n_missing_draws=boot.n_missing)
