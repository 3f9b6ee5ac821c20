import numpy as np
import pytest

from ccrmst.matching import (
    DistanceSpec,
    balance_table,
    condition_covariance,
    draw_templates,
    mahalanobis,
    match_sample,
    optimal_match,
    pooled_standard_deviation,
    select_template,
    standardized_difference,
    template_size,
    weighted_covariance,
)
from oracles import brute_force_assignment, greedy_assignment


def test_weighted_covariance_unit_weights_is_sample_covariance():
    x = np.random.default_rng(0).normal(size=(50, 3))
    np.testing.assert_allclose(weighted_covariance(x, np.ones(50)), np.cov(x.T), rtol=1e-12)


def test_weighted_covariance_integer_weights_replicate_rows():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(20, 2))
    w = rng.integers(1, 4, 20).astype(float)
    dup = np.repeat(x, w.astype(int), axis=0)
    np.testing.assert_allclose(weighted_covariance(x, w), np.cov(dup.T), rtol=1e-12)


def test_mahalanobis_examples():
    assert mahalanobis([0, 0], [3, 4], np.eye(2)) == pytest.approx(5.0)
    assert mahalanobis([0, 0], [2, 0], np.diag([4.0, 1.0])) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        mahalanobis([0, 0], [1, 1], np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_condition_covariance_adds_ridge_when_singular():
    sigma = np.array([[1.0, 1.0], [1.0, 1.0]])
    fixed, ridged = condition_covariance(sigma)
    assert ridged
    assert np.linalg.eigvalsh(fixed).min() > 0
    same, ridged = condition_covariance(np.eye(2))
    assert not ridged and np.array_equal(same, np.eye(2))


def test_distance_spec_validation():
    with pytest.raises(ValueError):
        DistanceSpec("manhattan")
    with pytest.raises(ValueError):
        DistanceSpec("mahalanobis")
    with pytest.raises(ValueError):
        DistanceSpec("mahalanobis", np.array([[1.0, 0.5], [0.4, 1.0]]))


def test_pairwise_matches_pointwise_mahalanobis():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(30, 3))
    spec = DistanceSpec.from_sample(x, np.ones(30))
    d = spec.pairwise(x[:4], x[4:9])
    for i in range(4):
        for j in range(5):
            assert d[i, j] == pytest.approx(mahalanobis(x[i], x[4 + j], spec.covariance), rel=1e-10)


def test_optimal_match_equals_enumeration():
    rng = np.random.default_rng(7)
    spec = DistanceSpec.propensity()
    for _ in range(40):
        nr = int(rng.integers(1, 5))
        nc = int(rng.integers(nr, 8))
        a, b = rng.random(nr), rng.random(nc)
        cols, total = optimal_match(a, b, spec)
        best, _ = brute_force_assignment(np.abs(a[:, None] - b[None, :]))
        assert total == pytest.approx(best, abs=1e-12)


def test_optimal_never_worse_than_greedy():
    rng = np.random.default_rng(8)
    for _ in range(30):
        spec = DistanceSpec.propensity()
        a, b = rng.random(20), rng.random(35)
        _, total = optimal_match(a, b, spec)
        assert total <= greedy_assignment(np.abs(a[:, None] - b[None, :])) + 1e-12


def test_greedy_trap_example():
    # greedy grabs the shared nearest control; optimal total is smaller
    spec = DistanceSpec.propensity()
    treated, controls = np.array([0.5, 0.4]), np.array([0.45, 0.9])
    _, total = optimal_match(treated, controls, spec)
    assert total == pytest.approx(0.45)
    assert greedy_assignment(np.abs(treated[:, None] - controls[None, :])) == pytest.approx(0.55)


def test_optimal_match_infeasible():
    with pytest.raises(ValueError):
        optimal_match(np.zeros(3), np.zeros(2), DistanceSpec.propensity())


def test_template_size_and_draws():
    assert template_size(1000, 5) == 200
    assert template_size(3, 5) == 1
    rng = np.random.default_rng(0)
    cands = draw_templates(50, 10, 5, rng)
    assert len(cands) == 5
    for c in cands:
        assert len(np.unique(c)) == 10 and c.max() < 50
    with pytest.raises(ValueError):
        draw_templates(10, 10, 3, rng)


def test_select_template_matches_direct_total():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(40, 2))
    spec = DistanceSpec.from_sample(x, np.ones(40))
    cands = draw_templates(40, 6, 8, rng)
    idx, totals = select_template(cands, x, spec)
    direct = [spec.pairwise(x[c], x).sum() for c in cands]
    np.testing.assert_allclose(totals, direct, rtol=1e-12)
    assert idx == int(np.argmin(direct))


def test_mahalanobis_matching_is_affine_invariant():
    rng = np.random.default_rng(10)
    x = rng.normal(size=(80, 3))
    a = (rng.random(80) < 0.3).astype(int)
    w = np.ones(80)
    A = np.array([[2.0, 0.3, 0.0], [0.0, 1.5, -0.4], [0.1, 0.0, 0.7]])
    p1 = match_sample(x, a, DistanceSpec.from_sample(x, w))
    y = x @ A.T + 5.0
    p2 = match_sample(y, a, DistanceSpec.from_sample(y, w))
    assert np.array_equal(p1.control, p2.control)


def test_match_sample_plain_and_template():
    rng = np.random.default_rng(11)
    ps = rng.random(60)
    a = (rng.random(60) < 0.4).astype(int)
    plain = match_sample(ps, a, DistanceSpec.propensity())
    assert len(plain) == min(a.sum(), (1 - a).sum())
    assert set(plain.treated) <= set(np.flatnonzero(a == 1))
    assert set(plain.control) <= set(np.flatnonzero(a == 0))
    tmpl = match_sample(ps, a, DistanceSpec.propensity(), template_ratio=5, n_candidates=10,
                        rng=np.random.default_rng(0))
    assert len(tmpl) == template_size(int((1 - a).sum()), 5)
    assert tmpl.template_id is not None


def test_plain_matching_with_scarce_controls_pairs_every_control():
    ps = np.array([0.1, 0.2, 0.3, 0.4, 0.15, 0.35])
    a = np.array([1, 1, 1, 1, 0, 0])
    pairs = match_sample(ps, a, DistanceSpec.propensity())
    assert sorted(pairs.control.tolist()) == [4, 5]
    assert pairs.total_within_pair_distance == pytest.approx(0.1)


def test_standardized_difference_and_balance():
    x1, x0 = np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, 2.0])
    assert standardized_difference(x1, x0) == pytest.approx(1.0)
    assert pooled_standard_deviation(x1, x0) == pytest.approx(1.0)
    x = np.column_stack([np.r_[x1, x0], [1, 1, 0, 0, 0, 1]])
    exposure = np.array([1, 1, 1, 0, 0, 0])
    rows = balance_table(x, exposure, ["age", "smoker"],
                         {"before": (np.arange(3), np.arange(3, 6))})
    by = {r["covariate"]: r for r in rows}
    assert by["age"]["metric"] == "smd" and by["age"]["value"] == pytest.approx(1.0)
    assert by["smoker"]["metric"] == "prop_diff"
    assert by["smoker"]["value"] == pytest.approx(2 / 3 - 1 / 3)


def test_balance_needs_both_groups():
    with pytest.raises(ValueError):
        balance_table(np.zeros((3, 1)), np.ones(3), ["a"], {})
