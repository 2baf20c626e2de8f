"""Interaction kernels, drift specifications and their evaluation.

A drift is evaluated against a *weighted cloud*: support points ``y_l`` with
weights ``w_l`` summing to one.  The empirical measure of ``N`` particles is
the cloud with ``w_l = 1/N``; the weighted path measures of the Picard solver
give general weights.  Interaction sums never pair a point with itself: when
the query points are the support points, index ``i`` is excluded from the
sum for query ``i`` (and, for ``k``-point kernels, every tuple with a repeated
index is excluded).  Nearby but distinct points are handled by the clamp.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from ._philox import uniform_stream
from .errors import (
    ConfigError,
    DegenerateSystemError,
    DomainError,
    SingularEvaluationError,
)

TAG_SUBSAMPLE = 4

# Upper bound on the number of float64 entries held by one pairwise block.
_BLOCK_BUDGET = 1 << 21


def identity_direction(u):
    return u


def reflect_direction(u):
    return -u


def rotation_direction(angle):
    """Planar rotation of the unit vector by ``angle`` radians (``d = 2``)."""
    c, s = math.cos(angle), math.sin(angle)

    def g(u):
        out = np.empty_like(u)
        out[..., 0] = c * u[..., 0] - s * u[..., 1]
        out[..., 1] = s * u[..., 0] + c * u[..., 1]
        return out

    return g


@dataclass(frozen=True)
class PairKernel:
    """Translation-invariant kernel ``phi(z)``.

    Inside the cutoff, ``phi(z) = sign * strength * |z|**exponent *
    direction(z / |z|)``; beyond it ``phi(z) = tail(z)`` (zero when no tail is
    given).  ``tail_bound`` is the declared sup-norm of the tail.  A positive
    ``mollify_radius`` replaces ``|z|`` by ``max(|z|, eps)`` (see
    :func:`mollify_pair_kernel`).
    """

    exponent: float
    sign: int = 1
    cutoff: float = math.inf
    direction: Callable | None = None
    tail: Callable | None = None
    tail_bound: float = 0.0
    strength: float = 1.0
    mollify_radius: float = 0.0

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ConfigError("sign must be +1 or -1")
        if not self.cutoff > 0:
            raise ConfigError("cutoff must be positive")
        if not math.isfinite(self.exponent) or not math.isfinite(self.strength):
            raise ConfigError("exponent and strength must be finite")
        if self.tail is not None and not self.tail_bound >= 0:
            raise ConfigError("tail needs a nonnegative declared bound")
        if self.mollify_radius < 0:
            raise ConfigError("mollify_radius must be nonnegative")

    @property
    def is_linear(self):
        """True when ``phi(z) = c * z`` for a constant ``c``."""
        return (
            self.exponent == 1.0
            and self.direction is None
            and math.isinf(self.cutoff)
            and self.mollify_radius == 0.0
        )

    @property
    def is_singular(self):
        return self.exponent < 0 and self.mollify_radius == 0.0

    def sup_norm(self):
        """Upper bound on ``|phi|`` (``inf`` when unbounded)."""
        a, s = self.exponent, abs(self.strength)
        eps = self.mollify_radius
        if a < 0:
            inner = s * eps**a if eps > 0 else math.inf
        elif a == 0:
            inner = s
        else:
            inner = s * self.cutoff**a
        return max(inner, self.tail_bound)


@dataclass(frozen=True)
class KPointKernel:
    """General ``k``-point kernel ``phi(t, x, y_1, ..., y_{k-1})``.

    ``phi`` must accept broadcastable arrays of shape ``(..., d)`` and return
    ``(..., d)``.  ``p_list``/``q`` are the declared integrability exponents
    (optional).
    """

    k: int
    phi: Callable
    p_list: tuple | None = None
    q: float | None = None
    sup_bound: float = math.inf

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ConfigError("k must be an integer >= 2")
        params = inspect.signature(self.phi).parameters.values()
        if not any(p.kind is p.VAR_POSITIONAL for p in params):
            n_pos = sum(
                p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD)
                for p in params
            )
            if n_pos != self.k + 1:
                raise ConfigError(
                    f"phi takes {n_pos} positional arguments, expected t plus {self.k}"
                )
        if self.p_list is not None:
            object.__setattr__(self, "p_list", tuple(float(p) for p in self.p_list))


@dataclass(frozen=True)
class WeightedCloud:
    """Batched weighted point clouds: ``points (B, m, d)``, ``weights (B, m)``."""

    points: np.ndarray
    weights: np.ndarray

    def mean(self):
        return np.einsum("bm,bmd->bd", self.weights, self.points)


@dataclass(frozen=True)
class MeasureDrift:
    """Measure-dependent drift ``psi(x, y, a(x), a(y), mu)`` averaged over ``y``.

    ``a(x) = sum_l w_l phi(x - y_l)`` uses the inner kernel.  ``psi`` receives
    arrays broadcast to ``(B, n, m, d)`` and the :class:`WeightedCloud`.
    ``lipschitz`` and ``growth`` are the declared constants ``Lip(psi)`` and
    ``L`` in ``|psi| <= L (1 + |a| + |b|)``.
    """

    psi: Callable
    inner: PairKernel | KPointKernel
    lipschitz: float
    growth: float

    def __post_init__(self):
        if isinstance(self.inner, KPointKernel) and self.inner.k != 2:
            raise ConfigError("inner kernel must be a 2-point kernel")
        if self.lipschitz < 0 or self.growth < 0:
            raise ConfigError("declared constants must be nonnegative")


@dataclass(frozen=True)
class CustomDrift:
    """Arbitrary drift ``fn(t, x, cloud)`` with ``x`` of shape ``(B, n, d)``."""

    fn: Callable
    name: str = "custom"
    params: dict = field(default_factory=dict)


DriftFamily = PairKernel | KPointKernel | MeasureDrift | CustomDrift


@dataclass(frozen=True)
class DriftSpec:
    """A drift family plus optional truncation level and evaluation cap.

    ``truncation = lam`` clamps every kernel value componentwise to
    ``[-1/lam, 1/lam]``.  ``cap`` clamps the assembled drift componentwise.
    ``subsample`` is the number of index tuples drawn per query when a
    ``k``-point kernel with ``k > 3`` is evaluated by Monte Carlo.
    """

    family: DriftFamily
    truncation: float | None = None
    cap: float | None = None
    subsample: int = 256
    subsample_seed: int = 0

    def __post_init__(self):
        for name in ("truncation", "cap"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DomainError(f"{name} must be positive, got {v}")

    @property
    def clamp_level(self):
        return None if self.truncation is None else 1.0 / self.truncation

    def describe(self):
        """JSON-friendly summary used in provenance records."""
        fam = self.family
        if isinstance(fam, PairKernel):
            info = {
                "family": "pair",
                "exponent": fam.exponent,
                "sign": fam.sign,
                "strength": fam.strength,
                "cutoff": None if math.isinf(fam.cutoff) else fam.cutoff,
                "mollify_radius": fam.mollify_radius,
            }
        elif isinstance(fam, KPointKernel):
            info = {"family": "kpoint", "k": fam.k, "p": fam.p_list, "q": fam.q}
        elif isinstance(fam, MeasureDrift):
            info = {"family": "measure", "lipschitz": fam.lipschitz,
                    "growth": fam.growth}
        else:
            info = {"family": fam.name, **fam.params}
        info["truncation"] = self.truncation
        info["cap"] = self.cap
        return info


def pair_drift(exponent, sign=1, strength=1.0, cutoff=math.inf, truncation=None,
               cap=None, **kw):
    return DriftSpec(PairKernel(exponent, sign, cutoff, strength=strength, **kw),
                     truncation=truncation, cap=cap)


def ou_drift(theta=1.0):
    """Linear mean-field drift ``-theta (x - mean(mu))``."""
    return DriftSpec(PairKernel(1.0, sign=-1, strength=theta))


def constant_drift(c):
    c = np.atleast_1d(np.asarray(c, dtype=float))

    def fn(t, x, cloud):
        return np.broadcast_to(c, x.shape).copy()

    return DriftSpec(CustomDrift(fn, "constant", {"c": c.tolist()}))


def zero_drift():
    def fn(t, x, cloud):
        return np.zeros_like(x)

    return DriftSpec(CustomDrift(fn, "zero"))


def is_zero_drift(spec):
    fam = spec.family
    return isinstance(fam, CustomDrift) and fam.name == "zero"


# ---------------------------------------------------------------- evaluation


def _clamp(values, level):
    if level is None:
        return values
    return np.clip(values, -level, level, out=values)


def pair_values(kernel, t, z, truncation=None):
    """Kernel values at the displacements ``z`` (shape ``(..., d)``).

    Raises :class:`SingularEvaluationError` if a singular kernel without
    truncation meets ``z = 0``.  With truncation the value at ``z = 0`` is
    ``0`` (the direction is undefined there).
    """
    z = np.asarray(z, dtype=float)
    r2 = np.einsum("...d,...d->...", z, z)
    zero = r2 == 0
    if kernel.exponent < 0 and truncation is None and kernel.mollify_radius == 0:
        if zero.any():
            raise SingularEvaluationError(
                f"kernel with exponent {kernel.exponent} evaluated at z = 0"
            )
    outside = None
    if math.isfinite(kernel.cutoff):
        outside = r2 > kernel.cutoff**2
    scale = kernel.sign * kernel.strength
    eps2 = kernel.mollify_radius**2
    if kernel.direction is None:
        # rho^a * z / rho with rho = max(|z|, eps): identity direction,
        # extended radially inside the mollification ball
        f = np.maximum(r2, eps2) if eps2 > 0 else r2.copy()
        f[f == 0] = 1.0
        np.power(f, 0.5 * (kernel.exponent - 1.0), out=f)
        f *= scale
        vals = f[..., None] * z
    else:
        r = np.sqrt(r2)
        rho = np.maximum(r, kernel.mollify_radius)
        rho[rho == 0] = 1.0
        unit = z / np.where(zero, 1.0, r)[..., None]
        unit[zero] = 0.0
        unit[zero, 0] = 1.0
        g = np.asarray(kernel.direction(unit), dtype=float)
        vals = (scale * rho**kernel.exponent * (r / rho))[..., None] * g
    if outside is not None and outside.any():
        if kernel.tail is None:
            vals[outside] = 0.0
        else:
            vals[outside] = np.asarray(kernel.tail(z[outside]), dtype=float)
    return _clamp(vals, None if truncation is None else 1.0 / truncation)


def eval_pair_kernel(kernel, t, z, truncation=None):
    """Value of ``kernel`` at a single displacement ``z``, clamped last."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if not np.all(np.isfinite(z)):
        raise DomainError("z must be finite")
    return pair_values(kernel, t, z[None], truncation)[0]


def eval_spec_kernel(spec, t, *points):
    """Clamped kernel values of ``spec`` at explicit argument tuples.

    For a pair kernel pass ``(x, y)`` and the value is ``phi(x - y)``; for a
    ``k``-point kernel pass ``k`` arrays; for a measure drift the inner kernel
    is evaluated.
    """
    fam = spec.family
    if isinstance(fam, MeasureDrift):
        fam = fam.inner
    if isinstance(fam, PairKernel):
        x, y = points
        return pair_values(fam, t, np.asarray(x) - np.asarray(y), spec.truncation)
    if isinstance(fam, KPointKernel):
        vals = np.array(fam.phi(t, *points), dtype=float)
        return _clamp(vals, spec.clamp_level)
    raise ConfigError("custom drifts have no kernel")


def _kernel2(kernel, t, x, y, truncation):
    if isinstance(kernel, PairKernel):
        return pair_values(kernel, t, x - y, truncation)
    vals = np.array(kernel.phi(t, x, y), dtype=float)
    return _clamp(vals, None if truncation is None else 1.0 / truncation)


def _as_batch(queries, support, weights):
    x = np.asarray(queries, dtype=float)
    y = np.asarray(support, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        w = np.broadcast_to(w, y.shape[:2])
    return x, y, w


def _row_chunk(n, m, d, extra=1):
    return max(1, min(n, _BLOCK_BUDGET // max(1, m * d * extra)))


def _pair_block(kernel, t, x, y, w, rows, truncation):
    """Weighted 2-point sums for a block of query rows.

    ``x`` is ``(b, c, d)``, ``y`` ``(b, m, d)``, ``w`` ``(b, m)``.  ``rows``
    gives the support index of each query row (self-exclusion) or is None.
    """
    wb = np.broadcast_to(w[:, None, :], (x.shape[0], x.shape[1], w.shape[1])).copy()
    if isinstance(kernel, PairKernel):
        z = x[:, :, None, :] - y[:, None, :, :]
        if rows is not None:
            r = np.arange(len(rows))
            wb[:, r, rows] = 0.0
            z[:, r, rows] = 1.0  # placeholder, its weight is zero
        vals = pair_values(kernel, t, z, truncation)
    else:
        z_or_y = np.broadcast_to(y[:, None, :, :],
                                 (x.shape[0], x.shape[1]) + y.shape[1:])
        if rows is not None:
            z_or_y = z_or_y.copy()
            r = np.arange(len(rows))
            wb[:, r, rows] = 0.0
            z_or_y[:, r, rows] += 1.0
        vals = _kernel2(kernel, t, x[:, :, None, :], z_or_y, truncation)
        vals = np.broadcast_to(vals, wb.shape + (x.shape[2],))
    return np.einsum("bcmd,bcm->bcd", vals, wb)


def _two_point_sum(kernel, t, x, y, w, exclude_self, truncation):
    """``sum_{l != i} w_l phi(x_i, y_l)`` for batched clouds."""
    B, n, d = x.shape
    m = y.shape[1]
    if isinstance(kernel, PairKernel) and kernel.is_linear:
        c = kernel.sign * kernel.strength
        total_w = w.sum(axis=1)[:, None, None]
        first = np.einsum("bm,bmd->bd", w, y)[:, None, :]
        if exclude_self:
            return c * (x * (total_w - w[..., None]) - (first - w[..., None] * y))
        return c * (x * total_w - first)
    out = np.empty((B, n, d))
    per_batch = n * m * d
    if per_batch <= _BLOCK_BUDGET:
        step = max(1, _BLOCK_BUDGET // per_batch)
        rows = np.arange(n) if exclude_self else None
        for s in range(0, B, step):
            e = min(B, s + step)
            out[s:e] = _pair_block(kernel, t, x[s:e], y[s:e], w[s:e], rows,
                                   truncation)
        return out
    chunk = _row_chunk(n, m, d)
    for b in range(B):
        for s in range(0, n, chunk):
            e = min(n, s + chunk)
            rows = np.arange(s, e) if exclude_self else None
            out[b:b + 1, s:e] = _pair_block(kernel, t, x[b:b + 1, s:e],
                                            y[b:b + 1], w[b:b + 1], rows,
                                            truncation)
    return out


def _three_point_sum(phi, t, x, y, w, exclude_self, level):
    """Distinct-index sum ``sum w_j w_l phi(x_i, y_j, y_l)``."""
    B, n, d = x.shape
    m = y.shape[1]
    out = np.zeros((B, n, d))
    pair_mask = 1.0 - np.eye(m)
    for b in range(B):
        for i in range(n):
            vals = np.array(
                phi(t, x[b, i], y[b, :, None, :], y[b, None, :, :]), dtype=float
            )
            vals = np.broadcast_to(_clamp(vals, level), (m, m, d))
            ww = np.outer(w[b], w[b]) * pair_mask
            if exclude_self:
                ww[i, :] = 0.0
                ww[:, i] = 0.0
            out[b, i] = np.einsum("jld,jl->d", vals, ww)
    return out


def _distinct_draws(u, m, excluded):
    """Map uniforms to distinct indices in ``range(m)`` avoiding ``excluded``.

    ``u`` has shape ``(..., r)``; ``excluded`` has shape ``(...,)`` or is
    ``None``.  Draw ``j`` picks uniformly among indices not yet used.
    """
    taken = [] if excluded is None else [excluded]
    draws = []
    for j in range(u.shape[-1]):
        free = m - len(taken)
        r = np.minimum((u[..., j] * free).astype(np.int64), free - 1)
        for e in _sorted_columns(taken):
            r = r + (r >= e)
        taken.append(r)
        draws.append(r)
    return np.stack(draws, axis=-1)


def _sorted_columns(columns):
    """Sort a list of equally shaped integer arrays elementwise."""
    if not columns:
        return []
    stacked = np.sort(np.stack(columns, axis=-1), axis=-1)
    return [stacked[..., j] for j in range(stacked.shape[-1])]


def _subsampled_sum(spec, t, x, y, w, exclude_self, step):
    """Unbiased Monte Carlo estimate of the distinct-tuple sum for ``k > 3``.

    Each query draws ``S = spec.subsample`` tuples uniformly among ordered
    tuples of distinct indices; the estimator is ``T_count * mean(prod w *
    phi)`` whose variance is ``T_count**2 Var(prod w * phi) / S``.
    """
    kern = spec.family
    k, S = kern.k, spec.subsample
    B, n, d = x.shape
    m = y.shape[1]
    avail = m - 1 if exclude_self else m
    count = math.perm(avail, k - 1)
    out = np.zeros((B, n, d))
    for b in range(B):
        u = uniform_stream(
            spec.subsample_seed, TAG_SUBSAMPLE, b, np.arange(n)[:, None],
            S * (k - 1), offset=int(step) * S * (k - 1),
        ).reshape(n, S, k - 1)
        excl = np.broadcast_to(np.arange(n)[:, None], (n, S)) if exclude_self else None
        idx = _distinct_draws(u, m, excl)
        ys = [y[b][idx[..., j]] for j in range(k - 1)]
        vals = np.array(kern.phi(t, x[b][:, None, :], *ys), dtype=float)
        vals = _clamp(vals, spec.clamp_level)
        prod_w = np.prod(w[b][idx], axis=-1)
        out[b] = count * np.einsum("nsd,ns->nd", vals, prod_w) / S
    return out


def weighted_drift(spec, t, queries, support, weights, exclude_self, step=0):
    """Drift at ``queries`` against the weighted cloud ``(support, weights)``.

    ``queries`` has shape ``(B, n, d)``; ``support`` ``(B, m, d)``; ``weights``
    ``(m,)`` or ``(B, m)`` summing to one.  ``exclude_self`` declares that
    query ``i`` is support point ``i`` (``n == m``), which removes every
    index tuple containing ``i``.  ``step`` keys the random tuples used for
    ``k > 3``.
    """
    x, y, w = _as_batch(queries, support, weights)
    fam = spec.family
    if exclude_self and x.shape[1] != y.shape[1]:
        raise ConfigError("exclude_self requires queries to be the support")
    if isinstance(fam, CustomDrift):
        out = np.array(fam.fn(t, x, WeightedCloud(y, w)), dtype=float)
    elif isinstance(fam, PairKernel):
        out = _two_point_sum(fam, t, x, y, w, exclude_self, spec.truncation)
    elif isinstance(fam, KPointKernel):
        avail = y.shape[1] - (1 if exclude_self else 0)
        if fam.k - 1 > avail:
            raise DegenerateSystemError(
                f"{fam.k}-point kernel needs at least {fam.k - 1} other points"
            )
        if fam.k == 2:
            out = _two_point_sum(fam, t, x, y, w, exclude_self, spec.truncation)
        elif fam.k == 3:
            out = _three_point_sum(fam.phi, t, x, y, w, exclude_self,
                                   spec.clamp_level)
        else:
            out = _subsampled_sum(spec, t, x, y, w, exclude_self, step)
    else:
        out = _measure_sum(spec, t, x, y, w, exclude_self)
    if spec.cap is not None:
        np.clip(out, -spec.cap, spec.cap, out=out)
    return out


def _measure_sum(spec, t, x, y, w, exclude_self):
    fam = spec.family
    trunc = spec.truncation
    a_support = _two_point_sum(fam.inner, t, y, y, w, True, trunc)
    if exclude_self:
        a_query = a_support
    else:
        a_query = _two_point_sum(fam.inner, t, x, y, w, False, trunc)
    cloud = WeightedCloud(y, w)
    B, n, d = x.shape
    m = y.shape[1]
    out = np.empty((B, n, d))
    chunk = _row_chunk(n, m, d, extra=4)
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        vals = np.array(
            fam.psi(
                x[:, s:e, None, :],
                y[:, None, :, :],
                a_query[:, s:e, None, :],
                a_support[:, None, :, :],
                cloud,
            ),
            dtype=float,
        )
        vals = np.broadcast_to(vals, (B, e - s, m, d))
        wrow = np.broadcast_to(w[:, None, :], (B, e - s, m)).copy()
        if exclude_self:
            idx = np.arange(s, e)
            wrow[:, idx - s, idx] = 0.0
        out[:, s:e] = np.einsum("bnmd,bnm->bnd", vals, wrow)
    return out


def check_growth(drift, d, n_samples=1000, seed=0, scale=3.0):
    """Sample ``|psi| <= L (1 + |a| + |b|)``; returns the worst ratio found."""
    from ._philox import normal_stream

    z = normal_stream(seed, 5, 0, np.arange(4)[:, None], n_samples * d)
    x, y, a, b = (scale * zi.reshape(1, n_samples, 1, d) for zi in z)
    cloud = WeightedCloud(
        scale * z[0].reshape(1, n_samples, d), np.full((1, n_samples), 1.0 / n_samples)
    )
    vals = np.broadcast_to(np.asarray(drift.psi(x, y, a, b, cloud)), x.shape)
    bound = 1.0 + np.linalg.norm(a, axis=-1) + np.linalg.norm(b, axis=-1)
    return float(np.max(np.linalg.norm(vals, axis=-1) / bound))


# ------------------------------------------------------------- admissibility


def _frac(x):
    return Fraction(0) if math.isinf(x) else Fraction(x)


def power_law_admissible(d, alpha):
    """Exponent threshold for ``|z|**alpha`` kernels (strict inequalities)."""
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    bound = Fraction(-1, 2) if d == 1 else Fraction(-1)
    return Fraction(alpha) > bound


def _check_exponent(p):
    if not (p >= 2):
        raise DomainError(f"integrability exponents must lie in [2, inf], got {p}")


def lpq_sum(d, p_list, q):
    """Exact value of ``sum d/p_i + 2/q`` as a fraction."""
    for p in list(p_list) + [q]:
        _check_exponent(p)
    total = sum((d * (1 / _frac(p)) if not math.isinf(p) else Fraction(0))
                for p in p_list)
    return total + (Fraction(0) if math.isinf(q) else Fraction(2) / _frac(q))


def lpq_admissible(d, p_list, q):
    """Whether ``sum d/p_i + 2/q < 1`` holds strictly."""
    return lpq_sum(d, p_list, q) < 1


def spec_admissibility(spec, d):
    """Static admissibility of a drift in dimension ``d``: ``(ok, reason)``."""
    fam = spec.family
    if isinstance(fam, MeasureDrift):
        fam = fam.inner
    if isinstance(fam, PairKernel):
        if not fam.is_singular:
            return True, "kernel is bounded near the origin"
        ok = power_law_admissible(d, fam.exponent)
        thr = "-1/2 for d = 1" if d == 1 else "-1 for d >= 2"
        verdict = "satisfies" if ok else "violates"
        return ok, (f"exponent {fam.exponent} {verdict} the power-law threshold "
                    f"alpha > {thr}")
    if isinstance(fam, KPointKernel):
        if fam.p_list is None or fam.q is None:
            return True, "no integrability exponents declared"
        total = lpq_sum(d, fam.p_list, fam.q)
        ok = total < 1
        return ok, f"sum d/p_i + 2/q = {float(total):g} (needs < 1)"
    return True, "custom drift is not checked"


# ------------------------------------------------------ truncation/mollifier


def truncate_kernel(spec, lam):
    """Spec whose kernel values are clamped to ``[-1/lam, 1/lam]``."""
    if not lam > 0:
        raise DomainError(f"truncation level must be positive, got {lam}")
    if spec.truncation is not None:
        lam = max(lam, spec.truncation)
    return replace(spec, truncation=float(lam))


def mollify_pair_kernel(kernel, eps):
    """Lipschitz surrogate using ``max(|z|, eps)`` in place of ``|z|``.

    The direction field is extended radially inside the ball of radius
    ``eps``, so the surrogate equals the original for ``|z| >= eps``, has
    norm ``eps**alpha`` on the sphere ``|z| = eps`` and tends to zero at the
    origin.
    """
    if not eps > 0:
        raise DomainError(f"mollification radius must be positive, got {eps}")
    return replace(kernel, mollify_radius=float(eps))

