import math

import numpy as np
import pytest

from ccrmst.core import (
    AttEstimate,
    ContractError,
    StepCurve,
    StudyConfig,
    Subject,
    at_risk,
    counting_process,
    event_jump,
    hazard_curve,
    normalize_event_definition,
    rmst_from_survival,
    survival_from_hazard,
)


def subject(t, ev=1, gen=None, **kw):
    gen = ev if gen is None else gen
    return Subject(id=1, covariates=np.zeros(2), exposure=0, obs_time=t,
                   event_conventional=ev, event_generalized=gen, stratum=1, **kw)


def test_counting_process_examples():
    s = subject(2.0)
    assert counting_process(s, 3.0) == 1
    assert counting_process(s, 1.0) == 0
    censored = subject(2.0, ev=0)
    assert event_jump(censored, 2.0) == 0
    assert counting_process(censored, 3.0) == 1  # raw I(T <= t)
    assert counting_process(censored, 3.0, "conventional") == 0


def test_event_jump_only_at_own_time():
    s = subject(2.0)
    assert event_jump(s, 2.0) == 1
    assert event_jump(s, 2.5) == 0


def test_generalized_event_counts_tau_survivor():
    s = subject(4.0, ev=0, gen=1)
    assert counting_process(s, 4.0, "gde") == 1
    assert counting_process(s, 4.0, "conv") == 0


@pytest.mark.parametrize("t, expected", [(5.0, 1), (5.01, 0), (0.0, 1)])
def test_at_risk_boundary(t, expected):
    obs = 0.0 if t == 0.0 else 5.0
    assert at_risk(subject(obs), t) == expected


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        at_risk(subject(1.0), -0.1)
    with pytest.raises(ValueError):
        counting_process(subject(1.0), -1.0)


def test_subject_invariants():
    with pytest.raises(ContractError):
        subject(1.0, ev=1, gen=0)
    with pytest.raises(ContractError):
        subject(-1.0)
    with pytest.raises(ContractError):
        Subject(1, np.zeros(1), 2, 1.0, 0, 0, 1)


def test_study_config_validation():
    cfg = StudyConfig(tau=1.0, p=6, k=3, B=2, alpha=[0.5, 1.0], event_definition="gde")
    assert cfg.event_definition == "generalized"
    with pytest.raises(ContractError):
        StudyConfig(tau=0.0, p=6, k=3, B=1, alpha=[0.5])
    with pytest.raises(ContractError):
        StudyConfig(tau=1.0, p=2, k=3, B=1, alpha=[0.5])
    with pytest.raises(ContractError):
        StudyConfig(tau=1.0, p=6, k=3, B=2, alpha=[0.5])
    with pytest.raises(ContractError):
        StudyConfig(tau=1.0, p=6, k=3, B=1, alpha=[0.0])


def test_event_definition_aliases():
    assert normalize_event_definition("CONV") == "conventional"
    assert normalize_event_definition("gde") == "generalized"
    with pytest.raises(ValueError):
        normalize_event_definition("other")


def test_rmst_constant_survival_is_tau_exactly():
    s = StepCurve([], [], 1.0, kind="survival")
    assert rmst_from_survival(s, 5.0) == 5.0


def test_rmst_one_step():
    s = StepCurve([2.0], [0.5], 1.0, kind="survival")
    assert rmst_from_survival(s, 4.0) == 3.0


def test_rmst_two_steps():
    s = StepCurve([1.0, 3.0], [0.75, 0.25], 1.0, kind="survival")
    assert rmst_from_survival(s, 4.0) == pytest.approx(2.75, abs=1e-15)


def test_rmst_truncates_jumps_after_tau():
    s = StepCurve([1.0, 6.0], [0.5, 0.25], 1.0, kind="survival")
    assert rmst_from_survival(s, 4.0) == pytest.approx(1.0 + 3 * 0.5)


def test_rmst_requires_survival_curve():
    with pytest.raises(ContractError):
        rmst_from_survival(StepCurve([1.0], [0.5]), 2.0)


def test_survival_from_hazard_examples():
    flat = survival_from_hazard(StepCurve([], [], 0.0))
    assert flat(3.0) == 1.0
    s = survival_from_hazard(StepCurve([1.0], [math.log(2)]))
    assert s(0.5) == 1.0
    assert s(1.0) == pytest.approx(0.5, abs=1e-15)
    s2 = survival_from_hazard(StepCurve([1.0, 2.0], [0.3, 0.8]))
    np.testing.assert_allclose(s2.values, [math.exp(-0.3), math.exp(-0.8)], rtol=1e-15)
    assert s2.kind == "survival"


def test_step_curve_validation():
    with pytest.raises(ContractError):
        StepCurve([2.0, 1.0], [0.1, 0.2])
    with pytest.raises(ContractError):
        StepCurve([1.0, 2.0], [0.2, 0.1])
    with pytest.raises(ContractError):
        StepCurve([1.0], [1.1], 1.0, kind="survival")
    with pytest.raises(ContractError):
        StepCurve([1.0], [0.5], 0.9, kind="survival")
    with pytest.raises(ContractError):
        StepCurve([1.0], [0.5], kind="other")


def test_step_curve_is_right_continuous_and_read_only():
    h = hazard_curve([1.0, 2.0], [0.1, 0.2])
    np.testing.assert_allclose(h([0.0, 1.0, 1.5, 2.0, 9.0]), [0, 0.1, 0.1, 0.3, 0.3])
    with pytest.raises(ValueError):
        h.values[0] = 5.0


def test_att_estimate_rejects_negative_se():
    with pytest.raises(ContractError):
        AttEstimate(0.0, -1.0, 0.0, 0.0, 1.0, 1.0, 3)
