import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singdiff.errors import BlowUpError, DegenerateSystemError, DimensionError, InadmissibleDriftError
from singdiff.kernels import (
    CustomDrift,
    DriftSpec,
    KPointKernel,
    MeasureDrift,
    PairKernel,
    constant_drift,
    ou_drift,
    pair_drift,
    zero_drift,
)
from singdiff.particle_sim import (
    EmpiricalMarginal,
    Ensemble,
    dbl_distance,
    drift_field,
    free_ensemble,
    simulate_batch,
    simulate_system,
    sliced_w1,
    w1_distance_1d,
)
from singdiff.paths import Gaussian, PointMass, SeedSpec, TimeGrid

LIN = DriftSpec(PairKernel(1.0, sign=-1))


def test_two_particle_linear_drift():
    np.testing.assert_allclose(drift_field([1.0, -1.0], 0.0, LIN), [[-1.0], [1.0]])


def test_single_particle_pair_drift_is_zero():
    np.testing.assert_array_equal(drift_field([[0.3, 0.4]], 0.0, pair_drift(-0.5)), [[0, 0]])


def test_measure_drift_reduces_to_pair_drift():
    md = DriftSpec(MeasureDrift(lambda x, y, a, b, mu: y - x, PairKernel(1.0, sign=-1), 1.0, 1.0))
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.normal(size=(7, 2))
        np.testing.assert_allclose(drift_field(x, 0.0, md), drift_field(x, 0.0, LIN), atol=1e-12)


def test_kpoint_needs_enough_particles():
    spec = DriftSpec(KPointKernel(3, lambda t, x, y, z: x))
    with pytest.raises(DegenerateSystemError):
        drift_field([[0.0], [1.0]], 0.0, spec)


def test_noise_free_dynamics():
    g = TimeGrid(1.0, 10)
    law = Gaussian([0.0], [1.0])
    ens = simulate_system(5, g, law, zero_drift(), SeedSpec(1), noise_on=False)
    assert np.all(ens.paths == ens.paths[:, :1])
    c = simulate_system(5, g, law, constant_drift([0.7]), SeedSpec(1), noise_on=False)
    np.testing.assert_allclose(c.paths[..., 0], ens.paths[..., 0] + 0.7 * g.times(), atol=1e-14)


def test_linear_gap_ode():
    g = TimeGrid(1.0, 10_000)
    law = PointMass([0.0])
    spec = LIN
    from singdiff.paths import EmpiricalSamples
    law = EmpiricalSamples([[1.0], [-1.0]])
    starts = law.sample(0, 0, np.arange(2))
    ids = [i for i in range(50) if np.allclose(law.sample(0, 0, i), 1.0)][:1] + \
          [i for i in range(50) if np.allclose(law.sample(0, 0, i), -1.0)][:1]
    assert starts.shape == (2, 1)
    paths, _ = simulate_batch(2, g, law, spec, 0, [0], noise_on=False, particle_ids=ids)
    gap = paths[0, 0, -1, 0] - paths[0, 1, -1, 0]
    assert abs(gap - 2 * math.exp(-1)) < 1e-3


def test_coupled_noise_differs_by_integrated_drift():
    g = TimeGrid(2.0, 40)
    law = Gaussian([0.0, 1.0], [1.0, 1.0])
    c = np.array([0.5, -1.5])
    free = simulate_system(6, g, law, zero_drift(), SeedSpec(3, 2))
    drifted = simulate_system(6, g, law, constant_drift(c), SeedSpec(3, 2))
    np.testing.assert_allclose(drifted.paths - free.paths,
                               np.broadcast_to(g.times()[:, None] * c, free.paths.shape),
                               atol=1e-12)
    np.testing.assert_allclose(drifted.squared_drift, np.full(6, (c @ c) * 2.0))


def test_inadmissible_refused_unless_overridden():
    g = TimeGrid(1.0, 5)
    spec = pair_drift(-0.6, truncation=0.1)
    with pytest.raises(InadmissibleDriftError):
        simulate_system(4, g, Gaussian([0.0], [1.0]), spec, SeedSpec(0))
    ens = simulate_system(4, g, Gaussian([0.0], [1.0]), spec, SeedSpec(0), allow_inadmissible=True)
    assert np.all(np.isfinite(ens.paths))


@pytest.mark.filterwarnings("ignore:overflow")
def test_blow_up_reports_step():
    explode = DriftSpec(CustomDrift(lambda t, x, cloud: 1e200 * (1 + np.abs(x)) ** 2))
    with pytest.raises(BlowUpError) as info:
        simulate_system(2, TimeGrid(1.0, 10), PointMass([1.0]), explode, SeedSpec(0))
    assert 1 <= info.value.step <= 10


@pytest.mark.parametrize("spec", [pair_drift(-0.4, sign=-1, truncation=0.05),
                                  pair_drift(-0.9, truncation=0.1),
                                  ou_drift(2.0)])
def test_clamped_runs_stay_finite(spec):
    d = 2 if spec.family.exponent == -0.9 else 1
    ens = simulate_system(64, TimeGrid(1.0, 50), Gaussian(np.zeros(d), np.ones(d)), spec,
                          SeedSpec(4))
    assert np.all(np.isfinite(ens.paths))
    assert np.all(ens.squared_drift >= 0)


def test_relabelling_permutes_paths():
    g = TimeGrid(1.0, 20)
    law = Gaussian([0.0], [1.0])
    spec = pair_drift(-0.4, sign=-1, truncation=0.05)
    ids = np.arange(10)
    perm = np.random.default_rng(1).permutation(10)
    a = simulate_system(10, g, law, spec, SeedSpec(2), particle_ids=ids)
    b = simulate_system(10, g, law, spec, SeedSpec(2), particle_ids=ids[perm])
    np.testing.assert_allclose(b.paths, a.paths[perm], atol=1e-12)


def test_ensemble_save_load(tmp_path):
    ens = simulate_system(3, TimeGrid(1.0, 4), PointMass([0.0]), ou_drift(), SeedSpec(9, 1))
    ens.save(tmp_path / "e")
    back = Ensemble.load(tmp_path / "e")
    np.testing.assert_array_equal(back.paths, ens.paths)
    assert back.seed == SeedSpec(9, 1)
    assert ens.provenance()["drift"]["family"] == "pair"
    assert free_ensemble(3, TimeGrid(1.0, 4), PointMass([0.0]), SeedSpec(0)).provenance()["drift"] == "free Brownian"


def test_w1_examples():
    a = EmpiricalMarginal(np.array([0.3, -1.0, 2.0]))
    assert w1_distance_1d(a, a) == 0
    assert w1_distance_1d(EmpiricalMarginal([0.0]), EmpiricalMarginal([1.0])) == 1
    assert math.isclose(w1_distance_1d(EmpiricalMarginal([0.0, 1.0]), EmpiricalMarginal([0.0, 3.0])), 1.0)
    with pytest.raises(DimensionError):
        w1_distance_1d(EmpiricalMarginal(np.zeros((2, 2))), EmpiricalMarginal(np.zeros((2, 2))))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30),
       st.lists(st.floats(-10, 10), min_size=1, max_size=30))
def test_w1_matches_quantile_coupling(xs, ys):
    n, m = len(xs), len(ys)
    # common refinement of quantile levels
    levels = np.unique(np.concatenate([np.arange(n + 1) / n, np.arange(m + 1) / m]))
    mid = 0.5 * (levels[1:] + levels[:-1])
    qa = np.sort(xs)[np.minimum((mid * n).astype(int), n - 1)]
    qb = np.sort(ys)[np.minimum((mid * m).astype(int), m - 1)]
    expected = np.sum(np.abs(qa - qb) * np.diff(levels))
    got = w1_distance_1d(EmpiricalMarginal(np.array(xs)), EmpiricalMarginal(np.array(ys)))
    assert math.isclose(got, expected, rel_tol=1e-9, abs_tol=1e-9)


def test_sliced_w1_examples():
    a = EmpiricalMarginal(np.random.default_rng(0).normal(size=(50, 2)))
    b = EmpiricalMarginal(np.random.default_rng(1).normal(size=(40, 2)))
    assert sliced_w1(a, a) == 0
    assert sliced_w1(a, b, seed=3) == sliced_w1(b, a, seed=3)
    x, y = np.array([[1.0, 2.0]]), np.array([[-1.0, 0.5]])
    got = sliced_w1(x, y, n_projections=20_000, seed=5)
    assert math.isclose(got, 2 / math.pi * np.linalg.norm(x - y), rel_tol=0.02)


def test_dbl_lower_bound():
    a = EmpiricalMarginal(np.random.default_rng(0).normal(size=(30, 1)))
    assert dbl_distance(a, a) == 0
    e01 = dbl_distance(EmpiricalMarginal([0.0]), EmpiricalMarginal([1.0]))
    assert 0 < e01 <= 1
    e10 = dbl_distance(EmpiricalMarginal([0.0]), EmpiricalMarginal([10.0]))
    assert e10 <= 2
    rng = np.random.default_rng(7)
    for _ in range(10):
        p = EmpiricalMarginal(rng.normal(size=(20, 2)))
        q = EmpiricalMarginal(rng.normal(size=(25, 2)) + 0.5)
        # d_BL <= W1 <= mean pairwise distance under the product coupling
        coupling = np.mean(np.linalg.norm(p.points[:, None] - q.points[None], axis=-1))
        assert dbl_distance(p, q, seed=1) <= coupling


def test_pair_drift_cost_superlinear():
    spec = pair_drift(-0.4, sign=-1, truncation=0.05)

    def cost(n):
        x = np.random.default_rng(0).normal(size=(n, 1))
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            drift_field(x, 0.0, spec)
            best = min(best, time.perf_counter() - t0)
        return best

    assert cost(2048) > 2.0 * cost(512)
