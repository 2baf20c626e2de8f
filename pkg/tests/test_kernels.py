import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from singdiff.errors import ConfigError, DomainError, SingularEvaluationError
from singdiff.kernels import (
    DriftSpec,
    KPointKernel,
    MeasureDrift,
    PairKernel,
    check_growth,
    eval_pair_kernel,
    eval_spec_kernel,
    lpq_admissible,
    lpq_sum,
    mollify_pair_kernel,
    pair_drift,
    power_law_admissible,
    reflect_direction,
    rotation_direction,
    spec_admissibility,
    truncate_kernel,
    weighted_drift,
)


def test_linear_attractive_kernel():
    k = PairKernel(1.0, sign=-1)
    np.testing.assert_allclose(eval_pair_kernel(k, 0.0, [2.0, 0.0]), [-2.0, 0.0])


def test_power_kernel_norm_and_clamp():
    k = PairKernel(-0.5)
    z = 0.25 * np.array([0.6, 0.8])
    v = eval_pair_kernel(k, 0.0, z)
    assert math.isclose(np.linalg.norm(v), 2.0, rel_tol=1e-12)
    np.testing.assert_allclose(v, 2.0 * np.array([0.6, 0.8]))
    clamped = eval_pair_kernel(k, 0.0, z, truncation=0.1)
    np.testing.assert_allclose(clamped, v)  # 1/lambda = 10 exceeds every component
    tight = eval_pair_kernel(k, 0.0, z, truncation=1.0)
    np.testing.assert_allclose(tight, [1.0, 1.0])


def test_singular_evaluation():
    k = PairKernel(-0.3)
    with pytest.raises(SingularEvaluationError):
        eval_pair_kernel(k, 0.0, [0.0])
    np.testing.assert_array_equal(eval_pair_kernel(k, 0.0, [0.0], truncation=0.1), [0.0])


def test_cutoff_tail_and_directions():
    k = PairKernel(1.0, cutoff=1.0, tail=lambda z: 0.5 * np.ones_like(z), tail_bound=0.5)
    np.testing.assert_allclose(eval_pair_kernel(k, 0, [3.0, 0.0]), [0.5, 0.5])
    np.testing.assert_allclose(eval_pair_kernel(k, 0, [0.5, 0.0]), [0.5, 0.0])
    r = PairKernel(0.0, direction=reflect_direction)
    np.testing.assert_allclose(eval_pair_kernel(r, 0, [0.0, 2.0]), [0.0, -1.0])
    rot = PairKernel(0.0, direction=rotation_direction(math.pi / 2))
    np.testing.assert_allclose(eval_pair_kernel(rot, 0, [3.0, 0.0]), [0.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("d,alpha,expected", [
    (2, -0.5, True), (1, -0.5, False), (3, 0.0, True), (1, -0.49, True),
    (2, -1.0, False), (2, -0.999, True), (1, -0.6, False),
])
def test_power_law_thresholds(d, alpha, expected):
    assert power_law_admissible(d, alpha) is expected


@pytest.mark.parametrize("d,p,q,expected,total", [
    (2, [math.inf], math.inf, True, 0),
    (3, [4], 8, False, 1),
    (1, [4, 4], math.inf, True, 0.5),
    (2, [3], math.inf, True, 2 / 3),
    (1, [2], 4, False, 1),
])
def test_lpq_thresholds(d, p, q, expected, total):
    assert lpq_admissible(d, p, q) is expected
    assert math.isclose(float(lpq_sum(d, p, q)), total)


def test_lpq_rejects_small_exponents():
    with pytest.raises(DomainError):
        lpq_admissible(1, [1.5], math.inf)
    with pytest.raises(DomainError):
        lpq_admissible(1, [4], 1)


def test_inverse_power_in_l3_quadrature():
    # |z|^-0.5 on the unit disc: int |z|^-1.5 dz = 2 pi int_0^1 r^-0.5 dr = 4 pi
    val, _ = integrate.quad(lambda r: 2 * math.pi * r ** (-1.5) * r, 0, 1)
    assert math.isclose(val ** (1 / 3), (4 * math.pi) ** (1 / 3), rel_tol=0.01)
    assert lpq_admissible(2, [3], math.inf)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 2.0), st.floats(0.01, 5.0), st.integers(1, 3))
def test_clamped_values_bounded(alpha, lam, d):
    rng = np.random.default_rng(0)
    z = rng.normal(size=(10_000, d)) * rng.exponential(size=(10_000, 1))
    spec = pair_drift(alpha, truncation=lam)
    vals = eval_spec_kernel(spec, 0.0, z, np.zeros(d))
    assert np.all(np.abs(vals) <= 1 / lam + 1e-12)


def test_truncate_kernel_properties():
    bounded = pair_drift(0.0, cutoff=2.0)
    rng = np.random.default_rng(1)
    z = rng.normal(size=(500, 2))
    base = eval_spec_kernel(bounded, 0, z, 0 * z)
    np.testing.assert_array_equal(eval_spec_kernel(truncate_kernel(bounded, 0.5), 0, z, 0 * z), base)
    sing = pair_drift(-0.5)
    t = truncate_kernel(sing, 0.5)
    vals = eval_spec_kernel(t, 0, z, 0 * z)
    assert np.all(np.abs(vals) <= 2.0)
    tt = truncate_kernel(t, 0.5)
    np.testing.assert_array_equal(eval_spec_kernel(tt, 0, z, 0 * z), vals)
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            truncate_kernel(sing, bad)


def test_mollifier():
    k = PairKernel(-0.5)
    eps = 0.1
    m = mollify_pair_kernel(k, eps)
    rng = np.random.default_rng(2)
    z = rng.normal(size=(1000, 2))
    far = np.linalg.norm(z, axis=1) >= eps
    np.testing.assert_allclose(eval_spec_kernel(DriftSpec(m), 0, z[far], 0 * z[far]),
                               eval_spec_kernel(DriftSpec(k), 0, z[far], 0 * z[far]))
    at0 = eval_pair_kernel(m, 0, [0.0, 0.0])
    assert np.all(np.isfinite(at0)) and np.linalg.norm(at0) <= eps**-0.5
    sphere = eval_pair_kernel(m, 0, [eps, 0.0])
    assert math.isclose(np.linalg.norm(sphere), eps**-0.5, rel_tol=1e-12)
    # smaller radius agrees with the original on a larger set
    z1 = np.array([[0.05, 0.0]])
    small = mollify_pair_kernel(k, 0.01)
    np.testing.assert_allclose(eval_spec_kernel(DriftSpec(small), 0, z1, 0 * z1),
                               eval_spec_kernel(DriftSpec(k), 0, z1, 0 * z1))
    assert not np.allclose(eval_spec_kernel(DriftSpec(m), 0, z1, 0 * z1),
                           eval_spec_kernel(DriftSpec(k), 0, z1, 0 * z1))
    with pytest.raises(DomainError):
        mollify_pair_kernel(k, 0.0)


def test_mollifier_is_lipschitz():
    eps = 0.2
    m = DriftSpec(mollify_pair_kernel(PairKernel(-0.5), eps))
    rng = np.random.default_rng(3)
    a = rng.uniform(-1, 1, size=(20_000, 2))
    b = a + rng.normal(scale=1e-3, size=a.shape)
    q = (np.linalg.norm(eval_spec_kernel(m, 0, a, 0 * a) - eval_spec_kernel(m, 0, b, 0 * b), axis=1)
         / np.linalg.norm(a - b, axis=1))
    # radial part: |d/dr r^alpha| = |alpha| eps^(alpha-1); angular part: eps^alpha / eps
    bound = (abs(-0.5) + 1.0) * eps ** (-1.5)
    assert np.all(np.isfinite(q)) and q.max() <= bound * 1.05


def test_kpoint_arity_checked():
    with pytest.raises(ConfigError):
        KPointKernel(3, lambda t, x, y: x)
    KPointKernel(3, lambda t, x, y, z: x)
    KPointKernel(4, lambda t, *xs: xs[0])


def test_three_point_exact_sum_matches_brute_force():
    phi = lambda t, x, y, z: np.sin(x - 2 * y) + np.cos(z)  # noqa: E731
    spec = DriftSpec(KPointKernel(3, phi))
    rng = np.random.default_rng(4)
    x = rng.normal(size=(6, 1))
    out = weighted_drift(spec, 0.0, x[None], x[None], np.full(6, 1 / 6), True)[0]
    for i in range(6):
        total = sum(phi(0.0, x[i], x[j], x[k]) for j, k in itertools.permutations(range(6), 2)
                    if i not in (j, k))
        np.testing.assert_allclose(out[i], total / 36, atol=1e-12)


def test_four_point_subsampling_is_unbiased():
    phi = lambda t, x, y, z, w: y + z + w  # noqa: E731
    rng = np.random.default_rng(5)
    x = rng.normal(size=(8, 1))
    exact = []
    for i in range(8):
        others = [j for j in range(8) if j != i]
        exact.append(sum(phi(0, x[i], x[a], x[b], x[c])
                         for a, b, c in itertools.permutations(others, 3)) / 8**3)
    est = np.mean([weighted_drift(DriftSpec(KPointKernel(4, phi), subsample=512,
                                            subsample_seed=s), 0.0, x[None], x[None],
                                  np.full(8, 1 / 8), True)[0] for s in range(20)], axis=0)
    np.testing.assert_allclose(est, np.array(exact), atol=0.05)


def test_measure_drift_growth_check():
    drift = MeasureDrift(lambda x, y, a, b, mu: 0.5 * np.tanh(a) + 0.25 * b,
                         PairKernel(1.0, sign=-1), lipschitz=0.5, growth=1.0)
    assert check_growth(drift, 2, n_samples=2000) <= drift.growth


def test_spec_admissibility_reasons():
    ok, reason = spec_admissibility(pair_drift(-0.6), 1)
    assert not ok and "-1/2" in reason
    ok, _ = spec_admissibility(pair_drift(-0.6), 2)
    assert ok
    ok, reason = spec_admissibility(DriftSpec(KPointKernel(2, lambda t, x, y: x,
                                                           p_list=[4], q=4)), 2)
    assert not ok and "< 1" in reason


def test_spec_parameters_validated():
    with pytest.raises(DomainError):
        DriftSpec(PairKernel(1.0), truncation=0.0)
    with pytest.raises(ConfigError):
        PairKernel(1.0, sign=2)
