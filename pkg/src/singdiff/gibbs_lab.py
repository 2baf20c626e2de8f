"""Exact computations for Gibbs measures on a finite alphabet.

Configurations ``x in {0..s-1}^N`` are drawn i.i.d. from ``mu0``.  The
diagonal-excluded energy

    E^N_V(x) = N^{-k} sum_{i_1..i_k distinct} V(x_{i_1}, ..., x_{i_k})

depends on ``x`` only through its type (occupancy counts ``c``): the number
of ordered distinct index tuples carrying the value pattern ``(a_1..a_k)``
is ``prod_a (c_a)_{m_a}``, a product of falling factorials over the
multiplicities ``m_a`` of each symbol in the pattern.  Every quantity below
is therefore an exact sum over the ``C(N+s-1, s-1)`` types.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammaln, logsumexp, rel_entr

from .errors import (
    ConfigError,
    DegenerateSystemError,
    EnumerationBudgetError,
    UnsupportedFamilyError,
)

ENUMERATION_BUDGET = 10**7
# Types processed per vectorised block.
_BLOCK = 1 << 15
# Largest N for which type probabilities are summed as exact rationals.
EXACT_N = 30


@dataclass(frozen=True)
class FiniteGibbsModel:
    """Alphabet ``{0..s-1}``, reference law ``mu0`` and a ``k``-body table ``V``.

    ``V`` has shape ``(s,) * k``; entries may be ``+inf``.
    """

    mu0: np.ndarray
    V: np.ndarray
    N: int

    def __post_init__(self):
        mu0 = np.asarray(self.mu0, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if mu0.ndim != 1 or mu0.size < 2:
            raise ConfigError("mu0 must be a probability vector with s >= 2")
        if np.any(mu0 <= 0) or abs(mu0.sum() - 1.0) > 1e-12:
            raise ConfigError("mu0 entries must be positive and sum to 1")
        if V.ndim < 1 or V.shape != (mu0.size,) * V.ndim:
            raise ConfigError(f"V must have shape (s,)*k with s = {mu0.size}")
        if np.any(np.isnan(V)) or np.any(V == -np.inf):
            raise ConfigError("V entries must be real or +inf")
        if V.ndim > 3:
            raise UnsupportedFamilyError("exact enumeration supports k <= 3")
        if int(self.N) < V.ndim:
            raise DegenerateSystemError(f"N = {self.N} is below k = {V.ndim}")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "N", int(self.N))

    @property
    def s(self):
        return self.mu0.size

    @property
    def k(self):
        return self.V.ndim

    def with_N(self, N):
        return FiniteGibbsModel(self.mu0, self.V, N)

    def with_V(self, V):
        return FiniteGibbsModel(self.mu0, V, self.N)


# ---------------------------------------------------------------- type classes


def n_types(N, s):
    return math.comb(N + s - 1, s - 1)


def type_classes(N, s, budget=ENUMERATION_BUDGET):
    """All count vectors of ``N`` into ``s`` parts, shape ``(T, s)``.

    Raises :class:`EnumerationBudgetError` when ``T`` exceeds ``budget``.
    """
    T = n_types(N, s)
    if T > budget:
        raise EnumerationBudgetError(f"{T} type classes exceed the budget {budget}")
    bars = np.array(list(itertools.combinations(range(N + s - 1), s - 1)),
                    dtype=np.int64).reshape(T, s - 1)
    edges = np.concatenate([np.full((T, 1), -1), bars, np.full((T, 1), N + s - 1)],
                           axis=1)
    return np.diff(edges, axis=1) - 1


@dataclass(frozen=True)
class TypeClass:
    counts: tuple
    multiplicity: int
    probability: float


def log_type_probabilities(mu0, counts):
    """``log( N!/prod c_a! * prod mu0_a^{c_a} )`` for each row of ``counts``."""
    counts = np.asarray(counts)
    N = counts.sum(axis=-1)
    return (gammaln(N + 1.0) - gammaln(counts + 1.0).sum(axis=-1)
            + counts @ np.log(mu0))


def exact_type_probabilities(mu0, counts):
    """Rational type probabilities with ``mu0`` read exactly and renormalised."""
    fr = [Fraction(float(m)) for m in mu0]
    total = sum(fr)
    fr = [f / total for f in fr]
    out = []
    for c in np.asarray(counts):
        mult = math.factorial(int(c.sum()))
        for ca in c:
            mult //= math.factorial(int(ca))
        p = Fraction(mult)
        for f, ca in zip(fr, c):
            p *= f ** int(ca)
        out.append(p)
    return out


def type_table(model, budget=ENUMERATION_BUDGET):
    """Every type class of ``model`` with multiplicity and probability."""
    counts = type_classes(model.N, model.s, budget)
    logp = log_type_probabilities(model.mu0, counts)
    logm = gammaln(model.N + 1.0) - gammaln(counts + 1.0).sum(axis=1)
    return [TypeClass(tuple(int(x) for x in c), int(round(math.exp(lm))), float(math.exp(lp)))
            for c, lm, lp in zip(counts, logm, logp)]


def probability_total(model, budget=ENUMERATION_BUDGET):
    """Sum of type probabilities: a ``Fraction`` for ``N <= 30``, else ``fsum``."""
    counts = type_classes(model.N, model.s, budget)
    if model.N <= EXACT_N:
        return sum(exact_type_probabilities(model.mu0, counts), Fraction(0))
    return math.fsum(np.exp(log_type_probabilities(model.mu0, counts)))


# -------------------------------------------------------------------- energies


def _pattern_counts(counts, k):
    """Ordered distinct index tuples per value pattern, shape ``(T,) + (s,)*k``."""
    c = np.asarray(counts, dtype=np.int64)
    s = c.shape[-1]
    eye = np.eye(s, dtype=np.int64)
    if k == 1:
        return c
    if k == 2:
        return c[:, :, None] * c[:, None, :] - eye * c[:, :, None]
    if k == 3:
        full = c[:, :, None, None] * c[:, None, :, None] * c[:, None, None, :]
        ab = eye[None, :, :, None] * (c[:, :, None, None] * c[:, None, None, :])
        bc = eye[None, None, :, :] * (c[:, :, None, None] * c[:, None, :, None])
        ac = eye[None, :, None, :] * (c[:, :, None, None] * c[:, None, :, None])
        diag = np.zeros((s, s, s), dtype=np.int64)
        diag[np.arange(s), np.arange(s), np.arange(s)] = 1
        return full - ab - bc - ac + 2 * diag[None] * c[:, :, None, None]
    raise UnsupportedFamilyError("exact enumeration supports k <= 3")


def _contract(weights, V):
    """``sum weights * V`` with ``0 * inf = 0``; a positive weight on ``inf`` gives ``inf``."""
    T = weights.shape[0]
    w = weights.reshape(T, -1).astype(float)
    v = V.reshape(-1)
    finite = np.isfinite(v)
    out = w[:, finite] @ v[finite]
    if not finite.all():
        hit = (w[:, ~finite] > 0).any(axis=1)
        out = np.where(hit, np.inf, out)
    return out


def energies(V, counts):
    """Diagonal-excluded energies ``E^N_V`` for each row of ``counts``."""
    V = np.asarray(V, dtype=float)
    counts = np.atleast_2d(np.asarray(counts, dtype=np.int64))
    k = V.ndim
    N = counts.sum(axis=1)
    if np.any(N < k):
        raise DegenerateSystemError("every type needs at least k particles")
    out = np.empty(counts.shape[0])
    for s in range(0, counts.shape[0], _BLOCK):
        blk = counts[s:s + _BLOCK]
        out[s:s + _BLOCK] = _contract(_pattern_counts(blk, k), V)
    return out / N.astype(float) ** k


def energy_of_type(model, counts):
    """Exact ``E^N_V`` of one type class."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (model.s,) or np.any(counts < 0):
        raise ConfigError("counts must be a nonnegative vector of length s")
    if counts.sum() != model.N:
        raise ConfigError(f"counts sum to {counts.sum()}, expected N = {model.N}")
    return float(energies(model.V, counts[None])[0])


def full_tensor_energy(V, mu):
    """``int V d mu^{(x) k}`` for probability vectors ``mu`` (shape ``(..., s)``)."""
    V = np.asarray(V, dtype=float)
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    k = V.ndim
    w = mu
    for _ in range(k - 1):
        w = (w[..., None] * mu.reshape(mu.shape[:1] + (1,) * (w.ndim - 1) + (-1,)))
    return _contract(w, V)


def brute_force_energy(V, config):
    """Direct sum over ordered distinct index tuples of one configuration."""
    V = np.asarray(V, dtype=float)
    k = V.ndim
    N = len(config)
    total = math.fsum(V[tuple(config[i] for i in idx)]
                      for idx in itertools.permutations(range(N), k))
    return total / N**k


def mixed_order_potential(U1, U2, U3, N):
    """Single 3-body table whose energy equals the sum of 1-, 2- and 3-body energies."""
    if N < 3:
        raise DegenerateSystemError("the mixed-order rewrite needs N >= 3")
    U1, U2, U3 = (np.asarray(u, dtype=float) for u in (U1, U2, U3))
    return (U3 + N / (N - 2) * U2[:, :, None]
            + N**2 / ((N - 1) * (N - 2)) * U1[:, None, None])


def mixed_order_energy(U1, U2, U3, counts):
    """``E^N_{U1} + E^N_{U2} + E^N_{U3}`` for each row of ``counts``."""
    return energies(U1, counts) + energies(U2, counts) + energies(U3, counts)


# ------------------------------------------------------------ partition sums


@dataclass(frozen=True)
class PartitionResult:
    Z: float
    log_Z: float
    counts: np.ndarray
    gibbs_weights: np.ndarray

    def rows(self):
        return [{"counts": " ".join(map(str, c)), "gibbs_weight": w}
                for c, w in zip(self.counts.tolist(), self.gibbs_weights)]


def _log_terms(model, counts, scale=-1.0):
    """``log prob + scale * N * energy`` per type (``-inf`` for infinite energy)."""
    e = energies(model.V, counts)
    with np.errstate(invalid="ignore"):
        t = log_type_probabilities(model.mu0, counts) + scale * model.N * e
    return np.where(np.isnan(t), -np.inf, t)


def exact_partition(model, budget=ENUMERATION_BUDGET):
    """``Z_N = sum_types prob * exp(-N E^N_V)`` and the Gibbs weight of each type."""
    counts = type_classes(model.N, model.s, budget)
    t = _log_terms(model, counts)
    log_z = float(logsumexp(t))
    return PartitionResult(math.exp(log_z), log_z, counts, np.exp(t - log_z))


# ------------------------------------------------------------ simplex grids


def simplex_grid(s, resolution):
    """Probability vectors with coordinates in ``{0, 1/R, ..., 1}``."""
    return type_classes(resolution, s, budget=ENUMERATION_BUDGET) / resolution


def relative_entropy(mu, mu0):
    """``R(mu || mu0) = sum mu_a log(mu_a / mu0_a)`` row-wise."""
    return rel_entr(np.asarray(mu, dtype=float), np.asarray(mu0, dtype=float)).sum(axis=-1)


@dataclass(frozen=True)
class RateTable:
    points: np.ndarray
    values: np.ndarray
    minimizer: np.ndarray
    minimum: float

    def rows(self):
        return [{**{f"mu_{a}": p[a] for a in range(p.size)}, "J": v}
                for p, v in zip(self.points, self.values)]


def rate_function_on_simplex(model, grid_resolution):
    """``J_V(mu) = int V d mu^{(x) k} + R(mu || mu0)`` on a uniform simplex grid."""
    if grid_resolution < 10:
        raise ConfigError("grid_resolution must be at least 10")
    pts = simplex_grid(model.s, grid_resolution)
    vals = full_tensor_energy(model.V, pts) + relative_entropy(pts, model.mu0)
    j = int(np.argmin(vals))
    return RateTable(pts, vals, pts[j], float(vals[j]))


@dataclass(frozen=True)
class GapRow:
    N: int
    exact: float
    grid_bound: float

    @property
    def gap(self):
        return abs(self.exact - self.grid_bound)

    def to_record(self):
        return {"N": self.N, "exact": self.exact, "neg_inf_J": self.grid_bound,
                "gap": self.gap}


def unnormalized_log_mass(model, predicate, budget=ENUMERATION_BUDGET):
    """``(1/N) log sum_{types in A} prob * exp(-N E^N_V)``; ``A`` given on ``counts / N``."""
    counts = type_classes(model.N, model.s, budget)
    inside = np.asarray(predicate(counts / model.N), dtype=bool)
    if not inside.any():
        return -math.inf
    return float(logsumexp(_log_terms(model, counts[inside]))) / model.N


def ldp_gap_study(model, predicate, N_list, grid_resolution=1000):
    """Exact finite-``N`` log-mass of ``A`` next to ``-inf_A J_V`` from a grid.

    ``predicate`` maps probability vectors ``(..., s)`` to booleans and is
    applied both to empirical measures ``counts / N`` and to the grid.
    """
    table = rate_function_on_simplex(model, grid_resolution)
    inside = np.asarray(predicate(table.points), dtype=bool)
    bound = -float(table.values[inside].min()) if inside.any() else -math.inf
    return [GapRow(N, unnormalized_log_mass(model.with_N(N), predicate), bound)
            for N in N_list]


# ------------------------------------------------------------ inequalities


@dataclass(frozen=True)
class HoeffdingRow:
    beta: float
    lhs: float
    rhs: float

    @property
    def holds(self):
        return self.lhs <= self.rhs + 1e-12 * max(1.0, abs(self.rhs))


def hoeffding_sides(model):
    """``(1/N) log E exp(N E^N_V)`` and ``(1/k) log int exp(k N/(N-1) V) d mu0^k``."""
    if np.any(model.V < 0):
        raise ConfigError("the decoupling bound is stated for V >= 0")
    counts = type_classes(model.N, model.s)
    lhs = float(logsumexp(_log_terms(model, counts, scale=1.0))) / model.N
    k, N = model.k, model.N
    logmu = np.log(model.mu0)
    logprod = sum(np.expand_dims(logmu, tuple(j for j in range(k) if j != i))
                  for i in range(k))
    with np.errstate(invalid="ignore"):
        expo = logprod + k * N / (N - 1) * model.V
    rhs = float(logsumexp(expo)) / k
    return lhs, rhs


def hoeffding_check(model, beta_grid):
    """Both sides of the decoupling inequality for ``beta * V`` on a grid of ``beta >= 0``."""
    rows = []
    for beta in beta_grid:
        if beta < 0:
            raise ConfigError("beta must be nonnegative")
        scaled = model.V * beta if beta > 0 else np.zeros_like(model.V)
        lhs, rhs = hoeffding_sides(model.with_V(scaled))
        rows.append(HoeffdingRow(float(beta), lhs, rhs))
    return rows


@dataclass(frozen=True)
class SelfInteractionGap:
    gap: float
    bound: float
    argmax: tuple

    @property
    def holds(self):
        return self.gap <= self.bound * (1 + 1e-12) + 1e-300


def self_interaction_gap(model, budget=ENUMERATION_BUDGET):
    """``max_types |E^N_V - int V d (z^N)^{(x) k}|`` against ``k(k-1)||V||/(2N)``."""
    if not np.all(np.isfinite(model.V)):
        raise ConfigError("the self-interaction bound needs a bounded V")
    counts = type_classes(model.N, model.s, budget)
    diff = np.abs(energies(model.V, counts)
                  - full_tensor_energy(model.V, counts / model.N))
    j = int(np.argmax(diff))
    k = model.k
    bound = k * (k - 1) * float(np.abs(model.V).max()) / (2 * model.N)
    return SelfInteractionGap(float(diff[j]), bound, tuple(int(c) for c in counts[j]))


@dataclass(frozen=True)
class VariationalResult:
    lhs: float
    sup_estimate: float
    argmax: np.ndarray
    tilted: np.ndarray


def entropy_variational_check(V, mu0, grid_resolution):
    """``log int e^V d mu0`` against ``max_nu (int V d nu - R(nu || mu0))`` on a grid.

    The grid maximum can only undershoot; its argmax is compared with the
    tilted law ``e^V mu0 / Z``.
    """
    V = np.asarray(V, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    if V.shape != mu0.shape or not np.all(np.isfinite(V)):
        raise ConfigError("V must be a finite vector matching mu0")
    lhs = float(logsumexp(V, b=mu0))
    pts = simplex_grid(mu0.size, grid_resolution)
    vals = pts @ V - relative_entropy(pts, mu0)
    j = int(np.argmax(vals))
    tilted = np.exp(V - V.max()) * mu0
    return VariationalResult(lhs, float(vals[j]), pts[j], tilted / tilted.sum())


def estrel_sides(F, nu, mu):
    """Both sides of ``log int exp(int F(x, y) dnu^{k-1}(y)) dmu(x) <= (k-1) R + log int e^F dmu^k``."""
    F = np.asarray(F, dtype=float)
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    k = F.ndim
    inner = F
    for _ in range(k - 1):
        inner = inner @ nu
    lhs = float(logsumexp(inner, b=mu))
    logprod = sum(np.expand_dims(np.log(mu), tuple(j for j in range(k) if j != i))
                  for i in range(k))
    rhs = (k - 1) * float(relative_entropy(nu, mu)) + float(logsumexp(logprod + F))
    return lhs, rhs
