"""Euler--Maruyama simulation of the mean-field particle system and
distances between empirical measures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._philox import normal_stream, uniform_stream
from .errors import BlowUpError, DimensionError, InadmissibleDriftError
from .kernels import DriftSpec, is_zero_drift, spec_admissibility, weighted_drift
from .paths import (
    TAG_AUXILIARY,
    Path,
    SeedSpec,
    TimeGrid,
    brownian_increments,
    read_paths,
    write_paths,
)

# Normals generated at once when drawing increments in time blocks.
_NOISE_BLOCK = 1 << 22


@dataclass(frozen=True)
class EmpiricalMarginal:
    """Weighted point cloud at one grid time (uniform weights by default)."""

    points: np.ndarray
    weights: np.ndarray | None = None
    time_index: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = pts.shape[0]
        w = np.full(n, 1.0 / n) if self.weights is None else np.asarray(
            self.weights, dtype=float)
        if w.shape != (n,) or np.any(w < 0):
            raise ValueError("weights must be nonnegative, one per point")
        w = w / w.sum()
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.points.shape[1]

    def mean(self):
        return self.weights @ self.points

    def variance(self):
        c = self.points - self.mean()
        return self.weights @ (c * c)


@dataclass
class Ensemble:
    """``N`` particle paths on a shared grid, with their provenance.

    ``squared_drift`` holds the per-particle left-point sum of ``|b|^2 dt``
    along the simulated trajectory (``None`` for free Brownian ensembles).
    """

    grid: TimeGrid
    paths: np.ndarray
    spec: DriftSpec | None
    seed: SeedSpec
    noise_on: bool = True
    squared_drift: np.ndarray | None = None
    particle_ids: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.paths.ndim != 3 or self.paths.shape[0] < 1:
            raise ValueError("paths must have shape (N, n_steps + 1, d), N >= 1")
        if self.paths.shape[1] != self.grid.n_steps + 1:
            raise ValueError("paths do not match the grid")

    @property
    def N(self):
        return self.paths.shape[0]

    @property
    def d(self):
        return self.paths.shape[2]

    def path(self, i):
        return Path(self.grid, self.paths[i])

    def marginal(self, time_index):
        return EmpiricalMarginal(self.paths[:, time_index], None, time_index)

    def terminal(self):
        return self.marginal(self.grid.n_steps)

    def provenance(self):
        return {
            "N": self.N,
            "d": self.d,
            "horizon": self.grid.horizon,
            "n_steps": self.grid.n_steps,
            "drift": "free Brownian" if self.spec is None else self.spec.describe(),
            "master_seed": self.seed.master_seed,
            "replica": self.seed.replica,
            "noise_on": self.noise_on,
        }

    def save(self, stem):
        """Write ``<stem>.bin`` (binary paths) and ``<stem>.json`` (provenance)."""
        write_paths(f"{stem}.bin", self.grid, self.paths)
        with open(f"{stem}.json", "w") as fh:
            json.dump(self.provenance(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, stem):
        grid, paths = read_paths(f"{stem}.bin")
        with open(f"{stem}.json") as fh:
            prov = json.load(fh)
        seed = SeedSpec(prov["master_seed"], prov["replica"])
        return cls(grid, paths, None, seed, prov["noise_on"])


def drift_field(state, t, spec, step=0):
    """Mean-field drift at every particle of ``state`` (shape ``(N, d)``)."""
    x = np.asarray(state, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    w = np.full(n, 1.0 / n)
    return weighted_drift(spec, t, x[None], x[None], w, True, step)[0]


def _check_admissible(spec, d, allow_inadmissible):
    ok, reason = spec_admissibility(spec, d)
    if not ok and not allow_inadmissible:
        raise InadmissibleDriftError(reason)


def simulate_batch(N, grid, law, spec, master_seed, replicas, noise_on=True,
                   particle_ids=None, allow_inadmissible=False):
    """Simulate independent systems for each replica coordinate.

    Returns ``(paths, squared_drift)`` with shapes ``(R, N, n_steps + 1, d)``
    and ``(R, N)``.  Particle ``i`` of replica ``r`` draws its initial state
    and increments from stream ``(r, particle_ids[i])``.
    """
    d = law.dim
    if spec is not None:
        _check_admissible(spec, d, allow_inadmissible)
    replicas = np.atleast_1d(np.asarray(replicas, dtype=np.int64))
    ids = np.arange(N) if particle_ids is None else np.asarray(particle_ids)
    if ids.shape != (N,):
        raise DimensionError("particle_ids must have one entry per particle")
    R, n, dt = replicas.size, grid.n_steps, grid.dt
    out = np.empty((R, N, n + 1, d))
    out[:, :, 0] = law.sample(master_seed, replicas[:, None], ids[None, :])
    sq = np.zeros((R, N))
    dynamic = spec is not None and not is_zero_drift(spec)
    w = np.full(N, 1.0 / N)
    times = grid.times()
    block = max(1, _NOISE_BLOCK // max(1, R * N * d))
    noise = None
    for i in range(n):
        if noise_on and i % block == 0:
            steps = min(block, n - i)
            sub = TimeGrid(steps * dt, steps)
            noise = brownian_increments(sub, d, master_seed, replicas[:, None],
                                        ids[None, :], step=i)
        x = out[:, :, i]
        nxt = x.copy()
        if dynamic:
            b = weighted_drift(spec, times[i], x, x, w, True, step=i)
            nxt += b * dt
            sq += np.einsum("rnd,rnd->rn", b, b) * dt
        if noise_on:
            nxt += noise[:, :, i % block]
        if not np.all(np.isfinite(nxt)):
            raise BlowUpError(i + 1)
        out[:, :, i + 1] = nxt
    return out, sq


def simulate_system(N, grid, law, spec, seed, noise_on=True,
                    allow_inadmissible=False, particle_ids=None):
    """Euler--Maruyama run of the ``N``-particle system on replica ``seed.replica``."""
    paths, sq = simulate_batch(N, grid, law, spec, seed.master_seed,
                               [seed.replica], noise_on, particle_ids,
                               allow_inadmissible)
    return Ensemble(grid, paths[0], spec, seed, noise_on,
                    None if spec is None else sq[0], particle_ids)


def free_ensemble(N, grid, law, seed):
    """Ensemble of independent Brownian paths (no drift)."""
    return simulate_system(N, grid, law, None, seed)


# ------------------------------------------------------------------ distances


def _as_marginal(a):
    return a if isinstance(a, EmpiricalMarginal) else EmpiricalMarginal(a)


def _w1_weighted(xa, wa, xb, wb):
    ia, ib = np.argsort(xa, kind="stable"), np.argsort(xb, kind="stable")
    xa, wa, xb, wb = xa[ia], wa[ia], xb[ib], wb[ib]
    grid = np.sort(np.concatenate([xa, xb]))
    ca = np.concatenate([[0.0], np.cumsum(wa)])
    cb = np.concatenate([[0.0], np.cumsum(wb)])
    fa = ca[np.searchsorted(xa, grid[:-1], side="right")]
    fb = cb[np.searchsorted(xb, grid[:-1], side="right")]
    return float(np.sum(np.abs(fa - fb) * np.diff(grid)))


def w1_distance_1d(a, b):
    """Exact 1-D Wasserstein-1 distance via the CDF-difference integral."""
    a, b = _as_marginal(a), _as_marginal(b)
    if a.dim != 1 or b.dim != 1:
        raise DimensionError("w1_distance_1d needs one-dimensional marginals")
    return _w1_weighted(a.points[:, 0], a.weights, b.points[:, 0], b.weights)


def _directions(d, count, seed):
    z = normal_stream(seed, TAG_AUXILIARY, 0, np.arange(count), d)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sliced_w1(a, b, n_projections=128, seed=0):
    """Mean 1-D W1 over ``n_projections`` seeded random unit directions."""
    a, b = _as_marginal(a), _as_marginal(b)
    if a.dim != b.dim:
        raise DimensionError("marginals live in different dimensions")
    dirs = _directions(a.dim, n_projections, seed)
    pa, pb = a.points @ dirs.T, b.points @ dirs.T
    return float(np.mean([
        _w1_weighted(pa[:, j], a.weights, pb[:, j], b.weights)
        for j in range(n_projections)
    ]))


def dbl_distance(a, b, feature_budget=256, seed=0):
    """Lower estimate of the bounded-Lipschitz distance.

    Maximises ``|int f da - int f db|`` over clamped ridge functions
    ``f(x) = clip(u . x - c, -1, 1)`` with seeded unit directions ``u`` and
    offsets ``c`` at projected midpoints of random support pairs.  Every such
    ``f`` has sup-norm and Lipschitz constant at most one, so the result never
    exceeds the true distance.
    """
    a, b = _as_marginal(a), _as_marginal(b)
    if a.dim != b.dim:
        raise DimensionError("marginals live in different dimensions")
    support = np.concatenate([a.points, b.points])
    dirs = _directions(a.dim, feature_budget, seed)
    u = uniform_stream(seed, TAG_AUXILIARY, 1, np.arange(feature_budget), 2)
    picks = np.minimum((u * len(support)).astype(np.int64), len(support) - 1)
    mid = 0.5 * (support[picks[:, 0]] + support[picks[:, 1]])
    offsets = np.einsum("fd,fd->f", dirs, mid)
    fa = np.clip(a.points @ dirs.T - offsets, -1.0, 1.0)
    fb = np.clip(b.points @ dirs.T - offsets, -1.0, 1.0)
    return float(np.max(np.abs(a.weights @ fa - b.weights @ fb)))


def marginal_distance(a, b, n_projections=128, seed=0):
    """Exact W1 in one dimension, sliced W1 otherwise."""
    a, b = _as_marginal(a), _as_marginal(b)
    if a.dim == 1:
        return w1_distance_1d(a, b)
    return sliced_w1(a, b, n_projections, seed)

