"""McKean--Vlasov solvers.

The Picard solver represents a path law ``mu`` by ``M`` reference Brownian
paths carrying weights ``dmu/dW``.  One Picard step freezes the marginals of
``mu`` inside the drift and reweights every reference path by the Girsanov
density ``exp(V2 - V1/2)`` of that frozen drift.  Marginal integrals are
self-normalised weighted sums over the reference positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .errors import IllNormalizedMeasureError, WeightCollapseError
from .girsanov import Flow, drifts_along, potentials
from .particle_sim import (
    EmpiricalMarginal,
    Ensemble,
    marginal_distance,
    simulate_batch,
    simulate_system,
)
from .paths import SeedSpec, brownian_array, brownian_bridge_rqmc

# Collapse threshold on the effective sample size, as a fraction of M.
COLLAPSE_FRACTION = 0.01


@dataclass(frozen=True)
class WeightedPathMeasure:
    """Reference Brownian paths with log-densities relative to Wiener measure.

    ``log_weights`` are normalised so that the weights have sample mean one;
    ``log_normalizer`` is the log of the sample mean of the unnormalised
    densities they came from (zero when the densities are exact).  Time
    marginals are the weighted clouds ``(paths[:, i], probabilities)``.
    """

    grid: object
    paths: np.ndarray = field(repr=False)
    log_weights: np.ndarray = field(repr=False)
    log_normalizer: float = 0.0

    def __post_init__(self):
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.shape != (self.paths.shape[0],):
            raise ValueError("one log-weight per reference path is required")
        mean_w = np.exp(logsumexp(lw) - math.log(lw.size))
        if not 0.5 <= mean_w <= 2.0:
            raise IllNormalizedMeasureError(
                f"mean weight {mean_w:.3g} outside [0.5, 2]")
        object.__setattr__(self, "log_weights", lw)

    @property
    def M(self):
        return self.paths.shape[0]

    @property
    def weights(self):
        return np.exp(self.log_weights)

    @property
    def probabilities(self):
        return np.exp(self.log_weights - logsumexp(self.log_weights))

    @property
    def ess(self):
        p = self.probabilities
        return float(1.0 / (p @ p))

    def marginal(self, time_index):
        return EmpiricalMarginal(self.paths[:, time_index], self.probabilities,
                                 time_index)

    def terminal(self):
        return self.marginal(self.grid.n_steps)

    def flow(self):
        return Flow(self.grid, self.paths, self.probabilities)

    def entropy(self):
        """Self-normalised estimate of ``R(mu | Wiener)``."""
        p = self.probabilities
        return float(p @ (np.log(p) + math.log(self.M)))

    @classmethod
    def wiener(cls, grid, law, M, master_seed, replica=0, sampling="iid"):
        """Unweighted reference of ``M`` Brownian paths.

        ``sampling="iid"`` uses the counter-based streams ``(replica, j)``;
        ``sampling="rqmc"`` uses scrambled Sobol points through a Brownian
        bridge (see :func:`brownian_bridge_rqmc`).
        """
        if sampling == "iid":
            paths = brownian_array(grid, law.dim, law, master_seed, replica,
                                   np.arange(M))
        elif sampling == "rqmc":
            paths = brownian_bridge_rqmc(grid, law, M, master_seed, replica)
        else:
            raise ValueError(f"unknown sampling scheme {sampling!r}")
        return cls(grid, paths, np.zeros(M))

    def reweighted(self, log_density):
        """Same reference paths with new (unnormalised) log-densities."""
        ld = np.asarray(log_density, dtype=float)
        log_z = float(logsumexp(ld) - math.log(ld.size))
        return replace(self, log_weights=ld - log_z, log_normalizer=log_z)

    def restricted(self, n_steps):
        """The measure on the first ``n_steps`` steps (weights unchanged)."""
        return replace(self, grid=self.grid.prefix(n_steps),
                       paths=self.paths[:, : n_steps + 1])


def picard_potential(mu, spec):
    """``-V1/2 + V2`` of every reference path against the marginals of ``mu``."""
    b = drifts_along(spec, mu.grid, mu.paths[None], mu.paths[None],
                     mu.probabilities, True)[0]
    v1, v2 = potentials(b, mu.paths, mu.grid.dt)
    return v2 - 0.5 * v1


def _check_collapse(mu):
    if mu.ess < COLLAPSE_FRACTION * mu.M:
        raise WeightCollapseError(mu.ess, mu.M)


def picard_map(mu, spec):
    """One application of the fixed-point map ``F``."""
    out = mu.reweighted(picard_potential(mu, spec))
    _check_collapse(out)
    return out


def lm_distance(w_a, w_b, m):
    """Monte Carlo ``L^m(W)`` norm of the difference of two density vectors."""
    return float(np.mean(np.abs(np.asarray(w_a) - np.asarray(w_b)) ** m) ** (1.0 / m))


@dataclass
class PicardReport:
    iterates: list
    converged: bool
    final: WeightedPathMeasure
    used_fallback: bool = False

    @property
    def distances(self):
        return [it[1] for it in self.iterates]

    def rows(self):
        return [{"iteration": i, "distance": dist, "entropy": ent}
                for i, dist, ent in self.iterates]


def _damped(mu, cand, damping):
    lw = (1.0 - damping) * mu.log_weights + damping * (
        cand.log_weights + cand.log_normalizer)
    return mu.reweighted(lw)


def _iterate(mu, spec, m_exponent, tol, max_iter, damping, start=0):
    iterates = []
    prev = math.inf
    for n in range(start + 1, start + max_iter + 1):
        cand = picard_map(mu, spec)
        dist = lm_distance(mu.weights, cand.weights, m_exponent)
        if dist > prev and damping:
            cand = _damped(mu, cand, damping)
            _check_collapse(cand)
            dist = lm_distance(mu.weights, cand.weights, m_exponent)
        iterates.append((n, dist, cand.entropy()))
        mu = cand
        if dist < tol:
            return iterates, True, mu
        prev = dist
    return iterates, False, mu


def picard_solve(spec, M, grid, law, m_exponent=4.0, tol=1e-3, max_iter=50,
                 damping=0.5, seed=0, fallback_levels=3, sampling="rqmc"):
    """Iterate ``F`` from the Wiener reference until consecutive densities agree.

    Stops once the ``L^m`` distance between consecutive weight vectors drops
    below ``tol``.  When the distance grows, the update is damped
    geometrically on log-weights.  If the full-horizon iteration does not
    converge, the solve is repeated on growing prefixes of the time grid
    (``n_steps / 2**L, ..., n_steps``), each warm-started from the previous
    prefix's weights.  Non-convergence is reported, not raised.

    ``sampling`` selects how the reference paths are drawn (``"rqmc"`` by
    default, ``"iid"`` for independent streams).
    """
    if not m_exponent > 2:
        raise ValueError("m_exponent must exceed 2")
    if not tol > 0:
        raise ValueError("tol must be positive")
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    reference = WeightedPathMeasure.wiener(grid, law, M, seed.master_seed,
                                           seed.replica, sampling)
    iterates, ok, mu = _iterate(reference, spec, m_exponent, tol, max_iter, damping)
    if ok or fallback_levels <= 0:
        return PicardReport(iterates, ok, mu)
    lw = np.zeros(M)
    done = len(iterates)
    for level in range(fallback_levels, -1, -1):
        steps = max(1, grid.n_steps >> level)
        part = replace(reference, grid=grid.prefix(steps),
                       paths=reference.paths[:, : steps + 1]).reweighted(lw)
        its, ok, part = _iterate(part, spec, m_exponent, tol, max_iter, damping,
                                 start=done)
        iterates.extend(its)
        done += len(its)
        lw = part.log_weights
    return PicardReport(iterates, ok, part, used_fallback=True)


def mv_particle_reference(spec, N_large, grid, law, seed):
    """Large-``N`` particle run whose empirical flow stands in for the MV law."""
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    return simulate_system(N_large, grid, law, spec, seed)


@dataclass(frozen=True)
class PocRow:
    N: int
    mean_distance: float
    stderr: float
    distances: tuple

    def to_record(self):
        return {"N": self.N, "mean_distance": self.mean_distance,
                "stderr": self.stderr}


def _reference_marginal(reference):
    if isinstance(reference, Ensemble):
        return reference.terminal()
    if isinstance(reference, WeightedPathMeasure):
        return reference.terminal()
    return reference


def poc_study(spec, N_list, replicas, grid, law, seed, reference,
              n_projections=128):
    """Distance between fresh ``N``-particle terminal marginals and a reference.

    Replica ``r`` of size ``N_list[a]`` uses stream replica coordinate
    ``seed.replica + 1 + a * replicas + r``, disjoint from the reference run.
    Distances are exact W1 in one dimension and sliced W1 otherwise.
    """
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    N_list = list(N_list)
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be increasing")
    target = _reference_marginal(reference)
    rows = []
    for a, N in enumerate(N_list):
        reps = seed.replica + 1 + a * replicas + np.arange(replicas)
        paths, _ = simulate_batch(N, grid, law, spec, seed.master_seed, reps)
        dist = np.array([
            marginal_distance(EmpiricalMarginal(p[:, -1]), target, n_projections,
                              seed.master_seed)
            for p in paths
        ])
        se = float(dist.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else math.nan
        rows.append(PocRow(N, float(dist.mean()), se, tuple(dist.tolist())))
    return rows
