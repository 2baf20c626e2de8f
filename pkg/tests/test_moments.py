import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from singdiff.errors import DomainError, UnsupportedFamilyError
from singdiff.kernels import constant_drift, pair_drift, pair_values
from singdiff.moments import (
    PASS,
    estimate_alpha,
    heat_kernel_norm,
    heat_smoothed_excess,
    indicator_lpq_norm,
    khasminskii_bound,
    khasminskii_check,
    lpq_constant,
    mc_exp_moment,
    moments_from_integrals,
    step_averaged_heat_kernel,
    truncation_excess,
    verify_drift_conditions,
)
from singdiff.paths import Gaussian, PointMass, TimeGrid

GRID = TimeGrid(1.0, 64)
LAW = Gaussian([0.0], [1.0])


def test_zero_integrand_gives_one():
    rep = mc_exp_moment(lambda t, xs: np.zeros(xs.shape[:-2]), [0.5, 3.0], 2, LAW, GRID,
                        200, 1)
    assert rep.estimates == (1.0, 1.0)
    assert rep.verdicts == (PASS, PASS)


def test_constant_integrand_is_deterministic():
    c = 0.7
    rep = mc_exp_moment(lambda t, xs: np.full(xs.shape[:-2], c), 1.0, 1, LAW, GRID, 100, 1)
    assert math.isclose(rep.estimates[0], math.exp(c * GRID.horizon), rel_tol=1e-12)
    assert rep.stderrs[0] < 1e-12


def test_clamped_kernel_moment_is_healthy():
    # clamp level 0.5 bounds |phi| by 2; see the ledger for stronger clamps
    lam = 0.5
    spec = pair_drift(-0.4, sign=-1, truncation=lam)

    def g(t, xs):
        v = pair_values(spec.family, t, xs[..., 0, :] - xs[..., 1, :], lam)
        return np.einsum("...d,...d->...", v, v)

    M = 5000
    rep = mc_exp_moment(g, 1.0, 2, LAW, GRID, M, 3)
    assert math.isfinite(rep.estimates[0]) and rep.estimates[0] > 1
    assert rep.ess[0] > 0.2 * M


def test_overflow_is_reported_not_raised():
    rep = moments_from_integrals(np.array([0.0, 1000.0]), [1.0])
    assert rep.estimates[0] == math.inf and rep.verdicts[0] != PASS
    assert rep.max_finite_beta is None


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=2, max_size=50),
       st.lists(st.floats(0, 3), min_size=2, max_size=6, unique=True))
def test_monotone_in_beta(sample, betas):
    betas = sorted(betas)
    rep = moments_from_integrals(np.array(sample), betas)
    est = rep.estimates
    assert all(a <= b * (1 + 1e-12) for a, b in zip(est, est[1:]))


def test_khasminskii_bound_values():
    assert khasminskii_bound(0.0) == 1
    assert khasminskii_bound(0.5) == 2
    assert math.isclose(khasminskii_bound(0.9), 10)
    for bad in (1.0, 1.5, -0.1):
        with pytest.raises(DomainError):
            khasminskii_bound(bad)
    assert math.exp(0.5) <= khasminskii_bound(0.5)


def test_alpha_of_constant():
    est = estimate_alpha(lambda t, xs: np.full(xs.shape[:-2], 0.3), 1, [[0.0], [2.0]],
                         GRID, 100, 1)
    assert math.isclose(est.value, 0.3 * GRID.horizon)


def test_alpha_of_shrinking_indicator():
    vals = []
    for r in (0.5, 0.25, 0.1):
        f = lambda t, xs, r=r: (np.abs(xs[..., 0, 0]) <= r).astype(float)
        vals.append(estimate_alpha(f, 1, [[0.0]], GRID, 4000, 2).value)
    assert all(v < GRID.horizon for v in vals)
    assert vals[0] > vals[1] > vals[2]


def test_alpha_translation_invariance():
    f = lambda t, xs: np.exp(-np.abs(xs[..., 0, 0] - xs[..., 1, 0]))
    est = estimate_alpha(f, 2, [[0.0, 0.5], [3.0, 3.5], [-7.0, -6.5]], GRID, 2000, 4)
    spread = max(est.means) - min(est.means)
    assert spread < 3 * max(est.stderrs) + 1e-12


def test_khasminskii_consistency():
    f = lambda t, xs: 0.6 * (np.abs(xs[..., 0, 0]) <= 0.5)
    rows = khasminskii_check(f, 1, [[0.0], [1.0], [3.0]], GRID, 4000, 5)
    assert rows and all(r.holds for r in rows)
    big = lambda t, xs: np.full(xs.shape[:-2], 2.0)
    assert khasminskii_check(big, 1, [[0.0]], GRID, 100, 5) == []


@pytest.mark.parametrize("d,pc", [(1, 2.0), (1, 1.5), (2, 3.0), (3, 1.2)])
def test_heat_kernel_norm_against_quadrature(d, pc):
    t = 0.7
    density = lambda r: (2 * math.pi * t) ** (-d / 2) * math.exp(-r * r / (2 * t))
    surface = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    val, _ = integrate.quad(lambda r: surface * r ** (d - 1) * density(r) ** pc, 0, np.inf)
    assert math.isclose(heat_kernel_norm(t, d, pc), val ** (1 / pc), rel_tol=1e-8)


def test_lpq_constant_examples():
    assert math.isclose(lpq_constant(1, [math.inf], math.inf, 2.5), 2.5)
    T = 1.3
    direct, _ = integrate.quad(lambda t: heat_kernel_norm(t, 1, 2.0), 0, T)
    assert math.isclose(lpq_constant(1, [2.0], math.inf, T), direct, rel_tol=0.01)
    with pytest.raises(DomainError):
        lpq_constant(2, [2.0], 2.0, 1.0)
    with pytest.raises(DomainError):
        lpq_constant(1, [0.5], math.inf, 1.0)


@pytest.mark.parametrize("p,q", [(math.inf, math.inf), (2.0, math.inf), (4.0, 4.0)])
def test_lpq_bound_holds(p, q):
    T = 1.0
    f = lambda t, xs: (np.abs(xs[..., 0, 0]) <= 1.0).astype(float)
    est = estimate_alpha(f, 1, [[0.0], [0.5], [2.0]], GRID, 4000, 6)
    assert est.value <= lpq_constant(1, [p], q, T) * indicator_lpq_norm(1, 1.0, p, q, T)


def test_step_averaged_kernel_is_a_density():
    h = 0.01
    val, _ = integrate.quad(lambda u: step_averaged_heat_kernel(u, h, 2.0), -2, 2, points=[0])
    assert math.isclose(val, 1.0, rel_tol=1e-6)


def test_heat_smoothing_of_a_vanishing_excess():
    spec = pair_drift(-0.4, truncation=0.05)
    g = heat_smoothed_excess(spec, 0.05, 1 / 256)
    far = np.array([[[[3.0], [0.0]]]])
    assert g(0.0, far)[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert g(0.0, np.array([[[[0.0], [0.0]]]]))[0, 0] > 0
    _, raw = truncation_excess(spec, 0.05)
    assert raw(0.0, far)[0, 0] == 0


def test_bounded_kernel_moments_are_exactly_one():
    spec = pair_drift(0.0)  # unit vector field, |phi| <= 1
    rep = verify_drift_conditions(spec, [0.5, 0.2], [1.0, 4.0], 500, 1, grid=GRID)
    assert rep.admissible
    for r in rep.reports:
        assert r.estimates == (1.0, 1.0)


def test_inadmissible_kernel_flagged_before_sampling():
    rep = verify_drift_conditions(pair_drift(-0.6), [0.1], [1.0], 10**9, 1)
    assert not rep.admissible and rep.reports == []
    assert "-1/2" in rep.reason


def test_custom_drift_unsupported():
    with pytest.raises(UnsupportedFamilyError):
        verify_drift_conditions(constant_drift([1.0]), [0.1], [1.0], 10, 1)


def test_truncation_trend_decreases():
    spec = pair_drift(-0.4, sign=-1, truncation=0.05)
    rep = verify_drift_conditions(spec, [0.2, 0.1, 0.05], [1.0], 4000, 11,
                                  grid=TimeGrid(1.0, 128))
    trend = rep.trend(0)
    assert rep.quadrature == "heat"
    assert trend[0] >= trend[1] >= trend[2] >= 1.0
