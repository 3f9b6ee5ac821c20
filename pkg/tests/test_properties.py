"""Property-based checks of invariants that must hold for any input."""
import warnings

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ccrmst import kernels
from ccrmst.ccsample import case_cohort_weights
from ccrmst.core import rmst_from_survival, survival_from_hazard
from ccrmst.estimator import PairData, hazard_control, hazard_treated, point_estimate
from ccrmst.propensity import phi_value
from ccrmst.simgen import generate_cohort, get_scenario, make_rng

PROFILE = settings(max_examples=60, deadline=None)


@st.composite
def arm(draw, min_size=2, max_size=25):
    n = draw(st.integers(min_size, max_size))
    t = draw(arrays(np.float64, n, elements=st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0])))
    e = draw(arrays(np.int64, n, elements=st.integers(0, 1)))
    rho = np.where(e == 1, 1.0, draw(arrays(np.float64, n, elements=st.sampled_from([1.0, 2.0, 5.0]))))
    return t, e, rho


@st.composite
def cost_matrix(draw):
    nr = draw(st.integers(1, 5))
    nc = draw(st.integers(nr, 7))
    return draw(arrays(np.float64, (nr, nc), elements=st.floats(0, 100, allow_nan=False)))


@PROFILE
@given(arm(), st.floats(0.5, 4.0))
def test_hazard_nondecreasing_and_survival_bounded(a, tau):
    t, e, rho = a
    h = hazard_treated(t, e, rho, tau)
    assert np.all(np.diff(h.values) >= 0) and np.all(h.values >= 0)
    assert np.all(h.times <= tau)
    s = survival_from_hazard(h)
    assert np.all(np.diff(s.values) <= 0)
    assert np.all((s.values > 0) & (s.values <= 1))
    r = rmst_from_survival(s, tau)
    assert 0 <= r <= tau + 1e-12


@PROFILE
@given(arm(), st.floats(0.05, 1.0), st.floats(0.0, 1.0))
def test_control_hazard_is_valid_curve(a, alpha, p):
    t, e, rho = a
    phi = np.full(t.size, phi_value(p, alpha))
    h = hazard_control(t, e, rho, np.ones_like(t), phi, 4.0)
    assert np.all(np.diff(h.values) >= 0)


@PROFILE
@given(st.floats(0, 1), st.floats(1e-3, 1))
def test_phi_lies_between_one_and_inverse_alpha(p, alpha):
    v = phi_value(p, alpha)
    assert 1 - 1e-12 <= v <= 1 / alpha * (1 + 1e-12)


@PROFILE
@given(arrays(np.int64, 20, elements=st.integers(0, 1)), arrays(np.int64, 20, elements=st.integers(0, 1)),
       st.floats(0.01, 1))
def test_case_cohort_weights(events, xi, alpha):
    rho = case_cohort_weights(events, xi, np.full(20, alpha))
    assert np.all(rho[events == 1] == 1)
    assert np.all((rho == 0) == ((events == 0) & (xi == 0)))
    assert np.all(rho[(events == 0) & (xi == 1)] == 1 / alpha)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["ratio2", "ratio3", "ratio4"]))
def test_generalized_event_dominates_conventional(seed, name):
    c = generate_cohort(get_scenario(name, n_full=300), make_rng(seed))
    assert np.all(c.delta <= c.delta_star)
    assert np.all(c.delta_star[c.time > c.tau] == 1)


@PROFILE
@given(cost_matrix(), st.floats(0.01, 50), st.data())
def test_assignment_invariant_to_scaling_and_row_shifts(cost, scale, data):
    _, total = kernels.solve_assignment(cost)
    shifts = data.draw(arrays(np.float64, cost.shape[0], elements=st.floats(-10, 10)))
    _, moved = kernels.solve_assignment(scale * cost + shifts[:, None])
    assert np.isclose(moved, scale * total + shifts.sum(), rtol=1e-9, atol=1e-7)


@PROFILE
@given(cost_matrix(), st.randoms(use_true_random=False))
def test_assignment_invariant_to_column_order(cost, rnd):
    perm = list(range(cost.shape[1]))
    rnd.shuffle(perm)
    col, total = kernels.solve_assignment(cost)
    _, permuted = kernels.solve_assignment(cost[:, perm])
    assert np.isclose(total, permuted, rtol=1e-12, atol=1e-9)
    assert len(set(col.tolist())) == cost.shape[0]


@PROFILE
@given(cost_matrix())
def test_backends_agree_on_assignment(cost):
    if kernels.compiled_backend is None:
        return
    c1, t1 = kernels.compiled_backend.solve_assignment(cost)
    c2, t2 = kernels.python_backend.solve_assignment(cost)
    assert t1 == t2 and np.array_equal(c1, c2)


def _pairs(a, b, tau=5.0):
    (t1, e1, r1), (t0, e0, r0) = a, b
    n = min(t1.size, t0.size)
    z = np.linspace(-1, 1, n)
    return PairData(t1[:n], e1[:n].astype(float), r1[:n], t0[:n], e0[:n].astype(float),
                    r0[:n], z, np.full(n, 0.5), tau)


@PROFILE
@given(arm(min_size=4), arm(min_size=4))
def test_point_estimate_deterministic_and_bounded(a, b):
    t1, e1, r1 = a
    a = (np.r_[5.0, t1], np.r_[0, e1], np.r_[1.0, r1])
    t0, e0, r0 = b
    b = (np.r_[5.0, t0], np.r_[0, e0], np.r_[1.0, r0])
    pd = _pairs(a, b)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        first = point_estimate(pd)
        second = point_estimate(pd)
    assert first == second
    att, r1_, r0_ = first
    assert 0 <= r1_ <= pd.tau and 0 <= r0_ <= pd.tau
    assert abs(att) <= pd.tau


@PROFILE
@given(arm(min_size=3))
def test_identical_arms_give_zero_att(a):
    t, e, _ = a
    t = np.append(t, 5.0)
    e = np.append(e, 0).astype(float)
    one = np.ones_like(t)
    pd = PairData(t, e, one, t.copy(), e.copy(), one, np.zeros(t.size), one, 5.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        att, _, _ = point_estimate(pd)
    assert abs(att) < 1e-12
