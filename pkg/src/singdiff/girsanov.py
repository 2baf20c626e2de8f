"""Path potentials, mean-field energies and relative-entropy estimators.

For a path ``x`` and a flow of marginals ``mu_t`` the two potentials are the
left-point sums

    V1(x, mu) = sum_i |b(t_i, x_i, mu_{t_i})|^2 dt
    V2(x, mu) = sum_i b(t_i, x_i, mu_{t_i}) . (x_{i+1} - x_i)

Midpoint or trapezoidal rules would add a correction term and break the
exact discrete martingale identity ``E[exp(V2 - V1/2)] = 1`` on Brownian
paths, so they are never used.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, IllNormalizedMeasureError, SingularEvaluationError
from .kernels import is_zero_drift, weighted_drift
from .paths import TimeGrid, brownian_array


@dataclass(frozen=True)
class Flow:
    """Weighted marginals on a grid: ``points (m, n_steps + 1, d)``, ``weights (m,)``."""

    grid: TimeGrid
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 3 or pts.shape[1] != self.grid.n_steps + 1:
            raise ConfigError("flow points must have shape (m, n_steps + 1, d)")
        if w.shape != (pts.shape[0],) or np.any(w < 0) or w.sum() <= 0:
            raise ConfigError("flow weights must be nonnegative, one per path")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w / w.sum())

    @classmethod
    def from_ensemble(cls, ens):
        return cls(ens.grid, ens.paths, np.ones(ens.N))

    @classmethod
    def point_mass(cls, grid, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        pts = np.broadcast_to(x, (1, grid.n_steps + 1, x.size))
        return cls(grid, pts, np.ones(1))


def drifts_along(spec, grid, paths, support, weights, exclude_self):
    """Drift at the left grid points of batched paths.

    ``paths`` has shape ``(B, n, n_steps + 1, d)``; ``support`` holds the flow
    paths ``(B, m, n_steps + 1, d)`` (or ``(m, ...)`` shared by every batch)
    with ``weights`` ``(m,)`` or ``(B, m)``.  Returns ``(B, n, n_steps, d)``.
    """
    x = np.asarray(paths, dtype=float)
    y = np.asarray(support, dtype=float)
    if y.ndim == 3:
        y = np.broadcast_to(y, (x.shape[0],) + y.shape)
    B, n, _, d = x.shape
    out = np.zeros((B, n, grid.n_steps, d))
    if is_zero_drift(spec):
        return out
    times = grid.times()
    for i in range(grid.n_steps):
        out[:, :, i] = weighted_drift(spec, times[i], x[:, :, i], y[:, :, i],
                                      weights, exclude_self, step=i)
    if not np.all(np.isfinite(out)):
        raise SingularEvaluationError("drift evaluation produced non-finite values")
    return out


def potentials(drifts, paths, dt):
    """``(V1, V2)`` from drifts ``(..., n_steps, d)`` and paths ``(..., n_steps + 1, d)``."""
    v1 = np.einsum("...id,...id->...", drifts, drifts) * dt
    v2 = np.einsum("...id,...id->...", drifts, np.diff(paths, axis=-2))
    return v1, v2


def _single(path, flow, spec):
    if path.grid != flow.grid:
        raise ConfigError("path and flow live on different grids")
    b = drifts_along(spec, flow.grid, path.points[None, None], flow.points,
                     flow.weights, False)
    return potentials(b[0, 0], path.points, flow.grid.dt)


def v1_energy(path, flow, spec):
    """Left-point sum of ``|b|^2 dt`` along ``path`` against ``flow``."""
    return float(_single(path, flow, spec)[0])


def v2_integral(path, flow, spec):
    """Left-point stochastic integral of ``b`` along ``path`` against ``flow``."""
    return float(_single(path, flow, spec)[1])


@dataclass(frozen=True)
class EnergyBreakdown:
    v1_mean: float
    v2_mean: float
    energy: float
    v1: np.ndarray
    v2: np.ndarray
    N: int

    @property
    def log_density(self):
        """Log of the interacting-versus-free density, ``-N * energy``."""
        return -self.N * self.energy

    def to_record(self):
        return {"v1_mean": self.v1_mean, "v2_mean": self.v2_mean,
                "energy": self.energy, "log_density": self.log_density,
                "N": self.N}


def _breakdown(v1, v2):
    n = v1.shape[-1]
    v1_mean = v1.mean(axis=-1)
    v2_mean = v2.mean(axis=-1)
    return v1_mean, v2_mean, 0.5 * v1_mean - v2_mean, n


def particle_energy(ens, spec):
    """Mean-field energy of an ensemble against its own empirical flow."""
    b = drifts_along(spec, ens.grid, ens.paths[None], ens.paths[None],
                     np.full(ens.N, 1.0 / ens.N), True)[0]
    v1, v2 = potentials(b, ens.paths, ens.grid.dt)
    v1_mean, v2_mean, energy, n = _breakdown(v1, v2)
    return EnergyBreakdown(float(v1_mean), float(v2_mean), float(energy), v1, v2, n)


def batch_energy(spec, grid, paths):
    """Energies of many ensembles at once; ``paths`` is ``(B, N, n_steps + 1, d)``."""
    N = paths.shape[1]
    b = drifts_along(spec, grid, paths, paths, np.full(N, 1.0 / N), True)
    v1, v2 = potentials(b, paths, grid.dt)
    return _breakdown(v1, v2)[2]


def entropy_wiener_constant_drift_oracle(c, T):
    """Relative entropy ``|c|^2 T / 2`` of Brownian motion with drift ``c``."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return 0.5 * float(c @ c) * T


def batch_means(values, n_batches=None):
    """Means over ``n_batches`` contiguous batches (default ``floor(sqrt(M))``)."""
    values = np.asarray(values, dtype=float)
    M = values.shape[-1]
    nb = n_batches or max(2, math.isqrt(M))
    return np.stack([v.mean(axis=-1) for v in np.array_split(values, nb, axis=-1)],
                    axis=-1)


def mean_with_stderr(values, n_batches=None):
    """Sample mean with the batched standard error."""
    means = batch_means(values, n_batches)
    nb = means.shape[-1]
    return float(np.mean(values)), float(np.std(means, ddof=1) / math.sqrt(nb))


def normalization_check(N, grid, law, spec, replicas, master_seed, chunk=1000):
    """Mean of ``exp(-N * energy)`` over free Brownian ensembles.

    Returns ``(mean, stderr)``; the exact value is one because left-point
    sums make the Girsanov density a discrete martingale.
    """
    dens = np.empty(replicas)
    parts = np.arange(N)
    for s in range(0, replicas, chunk):
        e = min(replicas, s + chunk)
        paths = brownian_array(grid, law.dim, law, master_seed,
                               np.arange(s, e)[:, None], parts[None, :])
        dens[s:e] = np.exp(-N * batch_energy(spec, grid, paths))
    return mean_with_stderr(dens)


@dataclass(frozen=True)
class RateEstimate:
    entropy_vs_wiener: float
    entropy_stderr: float
    energy: float
    energy_stderr: float
    rate_value: float
    rate_stderr: float
    ess: float
    n_paths: int

    def to_record(self):
        return asdict(self)


def _delta_estimate(a, u, nb):
    """Estimate ``mean(a)/mean(u) - log mean(u)`` with a delta-method stderr."""
    A, U = a.mean(), u.mean()
    val = A / U - math.log(U)
    ga, gu = 1.0 / U, -A / U**2 - 1.0 / U
    lin = ga * batch_means(a, nb) + gu * batch_means(u, nb)
    return val, float(np.std(lin, ddof=1) / math.sqrt(lin.size))


def _ratio_estimate(a, u, nb):
    A, U = a.mean(), u.mean()
    lin = (batch_means(a, nb) - (A / U) * batch_means(u, nb)) / U
    return A / U, float(np.std(lin, ddof=1) / math.sqrt(lin.size))


def rate_function_estimate(measure, spec, n_batches=None):
    """Relative entropy of ``measure`` against the law of its own SDE.

    ``measure`` is a weighted set of reference Brownian paths (attributes
    ``grid``, ``paths``, ``log_weights``, ``log_normalizer``); its density at
    path ``j`` is ``u_j = exp(log_weights[j] + log_normalizer)``.  The
    entropy term ``R(mu | Wiener)`` and the energy term (weighted mean of
    ``V1/2 - V2`` against the measure's own marginals) are self-normalised
    importance-sampling ratios; their standard errors come from the delta
    method applied to ``floor(sqrt(M))`` batch means, which keeps the noise
    of the normaliser in the error bar.
    """
    logu = np.asarray(measure.log_weights) + measure.log_normalizer
    u = np.exp(logu)
    if not 0.5 <= u.mean() <= 2.0:
        raise IllNormalizedMeasureError(
            f"mean weight {u.mean():.3g} outside [0.5, 2]")
    w = u / u.sum()
    b = drifts_along(spec, measure.grid, measure.paths[None], measure.paths[None],
                     w, True)[0]
    v1, v2 = potentials(b, measure.paths, measure.grid.dt)
    nb = n_batches or max(2, math.isqrt(u.size))
    ent, ent_se = _delta_estimate(u * logu, u, nb)
    en, en_se = _ratio_estimate(u * (0.5 * v1 - v2), u, nb)
    rate, rate_se = _delta_estimate(u * (logu + 0.5 * v1 - v2), u, nb)
    ess = float(u.sum() ** 2 / (u * u).sum())
    return RateEstimate(ent, ent_se, en, en_se, rate, rate_se, ess, u.size)
