"""Domain types and survival primitives shared across the package."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from . import kernels

EVENT_DEFINITIONS = ("conventional", "generalized")
_EVENT_ALIASES = {
    "conventional": "conventional",
    "conv": "conventional",
    "generalized": "generalized",
    "gde": "generalized",
}


class ContractError(ValueError):
    """An input violates the documented contract of an operation."""


def normalize_event_definition(name: str) -> str:
    try:
        return _EVENT_ALIASES[str(name).lower()]
    except KeyError:
        raise ValueError(
            f"unknown event definition {name!r}; use one of {sorted(_EVENT_ALIASES)}"
        ) from None


@dataclass(frozen=True)
class Subject:
    """One individual of a cohort or case-cohort sample.

    ``subcohort_flag`` and ``weight`` are ``None`` until the subject has been
    through case-cohort sampling.
    """

    id: int
    covariates: np.ndarray
    exposure: int
    obs_time: float
    event_conventional: int
    event_generalized: int
    stratum: int
    subcohort_flag: Optional[int] = None
    weight: Optional[float] = None

    def __post_init__(self):
        if self.obs_time < 0:
            raise ContractError("obs_time must be nonnegative")
        if self.exposure not in (0, 1):
            raise ContractError("exposure must be 0 or 1")
        if self.event_conventional and not self.event_generalized:
            raise ContractError("conventional event implies generalized event")

    def event(self, definition: str = "conventional") -> int:
        if normalize_event_definition(definition) == "conventional":
            return int(self.event_conventional)
        return int(self.event_generalized)


@dataclass(frozen=True)
class StudyConfig:
    tau: float
    p: int
    k: int
    B: int
    alpha: tuple
    event_definition: str = "conventional"

    def __post_init__(self):
        if not self.tau > 0:
            raise ContractError("tau must be positive")
        if self.k > self.p:
            raise ContractError("k (continuous covariates) cannot exceed p")
        alpha = tuple(float(a) for a in self.alpha)
        if len(alpha) != self.B:
            raise ContractError(f"expected {self.B} sampling probabilities, got {len(alpha)}")
        if any(not 0.0 < a <= 1.0 for a in alpha):
            raise ContractError("sampling probabilities must lie in (0, 1]")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(
            self, "event_definition", normalize_event_definition(self.event_definition)
        )


@dataclass(frozen=True)
class StepCurve:
    """Right-continuous step function on [0, tau] stored by its jump points.

    ``kind`` is ``"hazard"`` (nondecreasing, nonnegative) or ``"survival"``
    (nonincreasing, in (0, 1], starting at 1).
    """

    times: np.ndarray
    values: np.ndarray
    initial_value: float = 0.0
    kind: str = "hazard"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.shape != values.shape or times.ndim != 1:
            raise ContractError("times and values must be 1-d arrays of equal length")
        if times.size and (np.any(np.diff(times) <= 0) or times[0] < 0):
            raise ContractError("jump times must be nonnegative and strictly increasing")
        steps = np.diff(np.r_[self.initial_value, values])
        if self.kind == "hazard":
            if self.initial_value < 0 or np.any(steps < 0):
                raise ContractError("cumulative hazard must be nonnegative and nondecreasing")
        elif self.kind == "survival":
            if self.initial_value != 1.0:
                raise ContractError("survival curve must start at 1")
            if np.any(steps > 0) or np.any(values <= 0) or np.any(values > 1):
                raise ContractError("survival curve must be nonincreasing within (0, 1]")
        else:
            raise ContractError(f"unknown curve kind {self.kind!r}")

    def __call__(self, t):
        """Evaluate at ``t`` (scalar or array) by binary search."""
        idx = np.searchsorted(self.times, t, side="right")
        table = np.r_[self.initial_value, self.values]
        out = table[idx]
        return float(out) if np.ndim(out) == 0 else out

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class AttEstimate:
    att: float
    se: float
    ci_low: float
    ci_high: float
    rmst_treated: float
    rmst_control: float
    n_pairs: int

    def __post_init__(self):
        if self.se < 0:
            raise ContractError("standard error must be nonnegative")


@dataclass(frozen=True)
class Cohort:
    """Columnar cohort or case-cohort sample.

    Rows are subjects. ``xi``, ``rho`` and ``alpha`` (per-subject stratum
    sampling probability) are ``None`` for a full cohort before sampling.
    Strata are labelled ``1..B``.
    """

    x: np.ndarray
    a: np.ndarray
    time: np.ndarray
    delta: np.ndarray
    delta_star: np.ndarray
    stratum: np.ndarray
    tau: float
    id: np.ndarray = None
    xi: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    covariate_names: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.a)
        if self.id is None:
            object.__setattr__(self, "id", np.arange(1, n + 1))
        if not self.covariate_names:
            names = tuple(f"x{j + 1}" for j in range(np.shape(self.x)[1]))
            object.__setattr__(self, "covariate_names", names)
        if np.any(np.asarray(self.delta) > np.asarray(self.delta_star)):
            raise ContractError("conventional event without generalized event")

    def __len__(self):
        return len(self.a)

    def events(self, definition: str) -> np.ndarray:
        if normalize_event_definition(definition) == "conventional":
            return self.delta
        return self.delta_star

    def take(self, idx) -> "Cohort":
        idx = np.asarray(idx)

        def pick(v):
            return None if v is None else np.asarray(v)[idx]

        return replace(
            self,
            x=self.x[idx],
            a=self.a[idx],
            time=self.time[idx],
            delta=self.delta[idx],
            delta_star=self.delta_star[idx],
            stratum=self.stratum[idx],
            id=self.id[idx],
            xi=pick(self.xi),
            rho=pick(self.rho),
            alpha=pick(self.alpha),
        )

    def subject(self, i: int) -> Subject:
        return Subject(
            id=int(self.id[i]),
            covariates=np.asarray(self.x[i]),
            exposure=int(self.a[i]),
            obs_time=float(self.time[i]),
            event_conventional=int(self.delta[i]),
            event_generalized=int(self.delta_star[i]),
            stratum=int(self.stratum[i]),
            subcohort_flag=None if self.xi is None else int(self.xi[i]),
            weight=None if self.rho is None else float(self.rho[i]),
        )

    def subjects(self) -> Iterator[Subject]:
        for i in range(len(self)):
            yield self.subject(i)


def _check_time(t):
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")


def counting_process(subject: Subject, t: float, definition: Optional[str] = None) -> int:
    """N(t) for one subject.

    With ``definition=None`` this is the raw indicator I(T <= t). Passing an
    event definition counts only observed events, I(T <= t, event = 1).
    """
    _check_time(t)
    reached = int(subject.obs_time <= t)
    if definition is None:
        return reached
    return reached * subject.event(definition)


def event_jump(subject: Subject, t: float, definition: str = "conventional") -> int:
    """dN(t): 1 only at the subject's own observed event time."""
    _check_time(t)
    return int(subject.obs_time == t) * subject.event(definition)


def at_risk(subject: Subject, t: float) -> int:
    """Y(t) = I(T >= t)."""
    _check_time(t)
    return int(subject.obs_time >= t)


def rmst_from_survival(curve: StepCurve, tau: float) -> float:
    """Area under a survival step curve on [0, tau], summed exactly."""
    if curve.kind != "survival":
        raise ContractError("rmst_from_survival needs a survival curve")
    if not tau > 0:
        raise ValueError("tau must be positive")
    return float(kernels.step_integral(curve.times, curve.values, curve.initial_value, tau))


def survival_from_hazard(hazard: StepCurve) -> StepCurve:
    if hazard.kind != "hazard":
        raise ContractError("survival_from_hazard needs a cumulative hazard curve")
    return StepCurve(
        hazard.times,
        np.exp(-hazard.values),
        initial_value=float(np.exp(-hazard.initial_value)),
        kind="survival",
    )


def hazard_curve(times: Sequence[float], increments: Sequence[float]) -> StepCurve:
    """Cumulative hazard curve from jump times and increments."""
    return StepCurve(np.asarray(times), np.cumsum(increments), 0.0, kind="hazard")
