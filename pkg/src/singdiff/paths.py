"""Time grids, Brownian paths and initial laws driven by a counter-based RNG.

Every random number is addressed by ``(master_seed, tag, replica, particle,
index)``.  Brownian increments of particle ``p`` in replica ``r`` live on
stream ``(r, p)`` with tag :data:`TAG_INCREMENTS`; step ``i`` consumes stream
entries ``i*d .. i*d + d - 1``.  Because draws are addressed rather than
consumed, results do not depend on batch shape, ordering or thread count.
"""

from __future__ import annotations

import csv
import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from ._philox import normal_stream, uniform_stream
from .errors import ConfigError, DimensionError

TAG_INCREMENTS = 0
TAG_INITIAL = 1
TAG_AUXILIARY = 2
TAG_INITIAL_UNIFORM = 3

_HEADER = struct.Struct("<dqqq")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i * T / n_steps`` on ``[0, T]``."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self):
        return self.horizon / self.n_steps

    def times(self):
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.horizon
        return t

    def index_of(self, t):
        """Grid index closest to time ``t`` (which must lie in ``[0, T]``)."""
        if not 0.0 <= t <= self.horizon * (1 + 1e-12):
            raise ConfigError(f"time {t} outside [0, {self.horizon}]")
        return int(round(t / self.dt))

    def prefix(self, n_steps):
        """The grid made of the first ``n_steps`` steps of this one."""
        return TimeGrid(n_steps * self.dt, n_steps)


@dataclass(frozen=True)
class SeedSpec:
    """Coordinates of a random stream.

    ``step`` is the first time step drawn from the stream, so a path built
    in two pieces equals the path built at once.
    """

    master_seed: int
    replica: int = 0
    particle: int = 0
    step: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must fit in 64 unsigned bits")
        if min(self.replica, self.particle, self.step) < 0:
            raise ConfigError("stream coordinates must be nonnegative")


@dataclass(frozen=True)
class Path:
    grid: TimeGrid
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] != self.grid.n_steps + 1:
            raise ConfigError(
                f"path needs {self.grid.n_steps + 1} rows, got shape {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise ConfigError("path contains non-finite entries")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self):
        return self.points.shape[1]


def _vector(x, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be a finite vector")
    return arr


@dataclass(frozen=True)
class Gaussian:
    """Product Gaussian with diagonal covariance."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = _vector(self.mean, "mean")
        var = _vector(self.variance, "variance")
        if var.size == 1 and mean.size > 1:
            var = np.full(mean.size, var[0])
        if var.shape != mean.shape or np.any(var < 0):
            raise ConfigError("variance must be nonnegative and match the mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @property
    def dim(self):
        return self.mean.size

    def sample(self, master_seed, replica, particle):
        z = normal_stream(master_seed, TAG_INITIAL, replica, particle, self.dim)
        return self.mean + np.sqrt(self.variance) * z

    @property
    def n_uniforms(self):
        return self.dim

    def from_uniforms(self, u):
        return self.mean + np.sqrt(self.variance) * ndtri(u)


@dataclass(frozen=True)
class UniformBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vector(self.center, "center"))
        if not self.radius > 0:
            raise ConfigError("radius must be positive")

    @property
    def dim(self):
        return self.center.size

    def sample(self, master_seed, replica, particle):
        d = self.dim
        z = normal_stream(master_seed, TAG_INITIAL, replica, particle, d)
        u = uniform_stream(master_seed, TAG_INITIAL_UNIFORM, replica, particle, 1)
        norm = np.linalg.norm(z, axis=-1, keepdims=True)
        return self.center + self.radius * u ** (1.0 / d) * z / norm

    @property
    def n_uniforms(self):
        return self.dim + 1

    def from_uniforms(self, u):
        z = ndtri(u[..., :-1])
        norm = np.linalg.norm(z, axis=-1, keepdims=True)
        return self.center + self.radius * u[..., -1:] ** (1.0 / self.dim) * z / norm


@dataclass(frozen=True)
class PointMass:
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", _vector(self.point, "point"))

    @property
    def dim(self):
        return self.point.size

    def sample(self, master_seed, replica, particle):
        shape = np.broadcast_shapes(np.shape(replica), np.shape(particle))
        return np.broadcast_to(self.point, shape + (self.dim,)).copy()

    n_uniforms = 0

    def from_uniforms(self, u):
        return np.broadcast_to(self.point, u.shape[:-1] + (self.dim,)).copy()


@dataclass(frozen=True)
class EmpiricalSamples:
    """Uniform choice among a finite list of points."""

    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0 or not np.all(np.isfinite(arr)):
            raise ConfigError("samples must be a nonempty finite (n, d) array")
        object.__setattr__(self, "samples", arr)

    @property
    def dim(self):
        return self.samples.shape[1]

    def sample(self, master_seed, replica, particle):
        u = uniform_stream(master_seed, TAG_INITIAL_UNIFORM, replica, particle, 1)
        return self.from_uniforms(u)

    n_uniforms = 1

    def from_uniforms(self, u):
        idx = np.minimum((u[..., 0] * len(self.samples)).astype(np.int64),
                         len(self.samples) - 1)
        return self.samples[idx]


InitialLaw = Gaussian | UniformBall | PointMass | EmpiricalSamples


def _check_dim(d, law):
    if int(d) != d or d < 1:
        raise ConfigError(f"dimension must be a positive integer, got {d}")
    if law.dim != d:
        raise DimensionError(f"initial law has dimension {law.dim}, expected {d}")


def brownian_array(grid, d, law, master_seed, replicas, particles, step=0):
    """Brownian paths for a batch of stream coordinates.

    ``replicas`` and ``particles`` are broadcastable integer arrays; the
    result has their broadcast shape followed by ``(n_steps + 1, d)``.
    """
    _check_dim(d, law)
    replicas = np.asarray(replicas, dtype=np.int64)
    particles = np.asarray(particles, dtype=np.int64)
    n = grid.n_steps
    z = normal_stream(master_seed, TAG_INCREMENTS, replicas, particles,
                      n * d, offset=step * d)
    shape = z.shape[:-1]
    out = np.empty(shape + (n + 1, d))
    out[..., 0, :] = law.sample(master_seed, replicas, particles)
    np.cumsum(z.reshape(shape + (n, d)) * math.sqrt(grid.dt), axis=-2,
              out=out[..., 1:, :])
    out[..., 1:, :] += out[..., :1, :]
    return out


def brownian_increments(grid, d, master_seed, replicas, particles, step=0):
    """Increments ``W(t_{i+1}) - W(t_i)`` with shape ``(..., n_steps, d)``."""
    replicas = np.asarray(replicas, dtype=np.int64)
    particles = np.asarray(particles, dtype=np.int64)
    z = normal_stream(master_seed, TAG_INCREMENTS, replicas, particles,
                      grid.n_steps * d, offset=step * d)
    return z.reshape(z.shape[:-1] + (grid.n_steps, d)) * math.sqrt(grid.dt)


def _bisection_schedule(n):
    """Order in which a Brownian bridge fills grid points ``1..n-1``."""
    todo, order = [(0, n)], []
    while todo:
        nxt = []
        for a, b in todo:
            if b - a >= 2:
                m = (a + b) // 2
                order.append((a, m, b))
                nxt += [(a, m), (m, b)]
        todo = nxt
    return order


def brownian_bridge_rqmc(grid, law, M, master_seed, replica=0):
    """``M`` Brownian paths from scrambled Sobol points via a Brownian bridge.

    Randomised quasi-Monte Carlo: each path is still marginally a Brownian
    path with initial law ``law``, but the sample as a whole is spread much
    more evenly than an independent one.  The leading Sobol coordinates feed
    the initial point and the terminal value, the rest fill midpoints in
    bisection order.  The scrambling is keyed by ``(master_seed, replica)``.
    """
    d, n = law.dim, grid.n_steps
    n_init = law.n_uniforms
    dims = n_init + d * n
    if dims > qmc.Sobol.MAXDIM:
        raise ConfigError(f"{dims} Sobol dimensions exceed {qmc.Sobol.MAXDIM}")
    rng = np.random.default_rng([int(master_seed) & 0xFFFFFFFF,
                                 int(master_seed) >> 32, int(replica)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        u = qmc.Sobol(dims, scramble=True, seed=rng).random(M)
    u = np.clip(u, 2.0**-53, 1.0 - 2.0**-53)
    z = ndtri(u[:, n_init:]).reshape(M, n, d)
    w = np.zeros((M, n + 1, d))
    w[:, n] = math.sqrt(grid.horizon) * z[:, 0]
    for col, (a, m, b) in enumerate(_bisection_schedule(n), start=1):
        frac = (m - a) / (b - a)
        sd = math.sqrt((m - a) * (b - m) / (b - a) * grid.dt)
        w[:, m] = w[:, a] + frac * (w[:, b] - w[:, a]) + sd * z[:, col]
    x0 = law.from_uniforms(u[:, :n_init])
    return w + x0[:, None, :]


def sample_brownian(grid, d, law, seed):
    """One Brownian path with initial law ``law`` on stream ``seed``."""
    pts = brownian_array(grid, d, law, seed.master_seed, seed.replica,
                         seed.particle, seed.step)
    return Path(grid, pts)


def sample_brownian_tuple(grid, d, law, k, seed):
    """``k`` independent paths on streams ``seed.particle + j``."""
    if int(k) != k or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k}")
    parts = seed.particle + np.arange(k)
    pts = brownian_array(grid, d, law, seed.master_seed, seed.replica, parts,
                         seed.step)
    return [Path(grid, p) for p in pts]


def write_paths(file, grid, points):
    """Write ``points`` of shape ``(N, n_steps + 1, d)`` in the binary layout.

    Layout: little-endian header ``(T: f64, n_steps: i64, d: i64, N: i64)``
    followed by the row-major float64 array.
    """
    pts = np.ascontiguousarray(points, dtype="<f8")
    if pts.ndim != 3 or pts.shape[1] != grid.n_steps + 1:
        raise ConfigError(f"expected (N, {grid.n_steps + 1}, d) array")
    n, _, d = pts.shape
    with open(file, "wb") as fh:
        fh.write(_HEADER.pack(grid.horizon, grid.n_steps, d, n))
        fh.write(pts.tobytes())


def read_paths(file):
    """Inverse of :func:`write_paths`; returns ``(grid, points)``."""
    with open(file, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ConfigError(f"{file}: truncated header")
        horizon, n_steps, d, n = _HEADER.unpack(header)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * (n_steps + 1) * d:
        raise ConfigError(f"{file}: payload size does not match header")
    return TimeGrid(horizon, n_steps), data.reshape(n, n_steps + 1, d).copy()


def write_paths_csv(file, grid, points):
    """Long-format CSV with columns ``particle, step, t, x0, ...``."""
    pts = np.asarray(points, dtype=float)
    t = grid.times()
    d = pts.shape[2]
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["particle", "step", "t"] + [f"x{j}" for j in range(d)])
        for i, path in enumerate(pts):
            for s, row in enumerate(path):
                w.writerow([i, s, repr(float(t[s]))] + [repr(float(v)) for v in row])
