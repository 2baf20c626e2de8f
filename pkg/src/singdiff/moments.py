"""Exponential moments along Brownian paths and the bounds that control them.

Finiteness of an exponential moment cannot be decided by sampling, so every
Monte Carlo verdict is one of ``"pass"`` (stable estimate), ``"inconclusive"``
(effective sample size collapsed or overflow) or ``"fail"`` (an analytic
admissibility condition is violated, decided before any sampling).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.special import erfc, logsumexp

from .errors import DomainError, UnsupportedFamilyError
from .girsanov import mean_with_stderr
from .kernels import (
    CustomDrift,
    KPointKernel,
    MeasureDrift,
    PairKernel,
    pair_values,
    spec_admissibility,
)
from .paths import Gaussian, PointMass, TimeGrid, brownian_array

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

# Paths per chunk when accumulating time integrals.
_CHUNK = 4096


def _laws(law, k):
    laws = list(law) if isinstance(law, (list, tuple)) else [law] * k
    if len(laws) != k:
        raise DomainError(f"expected {k} initial laws, got {len(laws)}")
    return laws


def path_integrals(g, k, law, grid, M, seed, start=None):
    """Left-point sums ``sum_i g(t_i, X_1(t_i), ..., X_k(t_i)) dt``.

    ``X_j`` are independent Brownian motions with initial law ``law`` (or
    ``law[j]``), drawn from streams ``(replica=r, particle=j)`` for
    ``r < M``.  ``g`` maps ``(t, xs)`` with ``xs`` of shape ``(..., k, d)`` to
    ``(...)``.  ``start`` optionally lists extra start-point shifts of shape
    ``(S, k, d)``; the same Brownian sample is reused for every shift and the
    result then has shape ``(S, M)``.
    """
    laws = _laws(law, k)
    d = laws[0].dim
    shifts = np.zeros((1, k, d)) if start is None else np.asarray(start, float)
    out = np.empty((shifts.shape[0], M))
    times = grid.times()[:-1]
    for s in range(0, M, _CHUNK):
        e = min(M, s + _CHUNK)
        reps = np.arange(s, e)[:, None]
        paths = np.stack(
            [brownian_array(grid, d, laws[j], seed, reps[:, 0], j) for j in range(k)],
            axis=1,
        )  # (m, k, n+1, d)
        x = np.moveaxis(paths[:, :, :-1], 2, 1)  # (m, n, k, d)
        for a, shift in enumerate(shifts):
            vals = np.asarray(g(times[None, :], x + shift), dtype=float)
            out[a, s:e] = vals.sum(axis=1) * grid.dt
    return out if start is not None else out[0]


@dataclass(frozen=True)
class MomentReport:
    betas: tuple
    estimates: tuple
    stderrs: tuple
    ess: tuple
    verdicts: tuple
    M: int
    ess_fraction: float

    @property
    def max_finite_beta(self):
        ok = [b for b, v in zip(self.betas, self.verdicts) if v == PASS]
        return max(ok) if ok else None

    def rows(self):
        return [
            {"beta": b, "estimate": e, "stderr": s, "ess": n, "verdict": v}
            for b, e, s, n, v in zip(self.betas, self.estimates, self.stderrs,
                                     self.ess, self.verdicts)
        ]


def moments_from_integrals(integrals, betas, ess_fraction=0.05):
    """Exponential moments ``E[exp(beta * I)]`` from a fixed sample of ``I``."""
    integrals = np.asarray(integrals, dtype=float)
    M = integrals.size
    est, se, ess, verdicts = [], [], [], []
    for beta in betas:
        z = beta * integrals
        log_mean = logsumexp(z) - math.log(M)
        n_eff = math.exp(2 * logsumexp(z) - logsumexp(2 * z))
        if log_mean > 700:
            est.append(math.inf)
            se.append(math.inf)
            verdicts.append(INCONCLUSIVE)
        else:
            mean, err = mean_with_stderr(np.exp(z))
            est.append(mean)
            se.append(err)
            verdicts.append(PASS if n_eff >= ess_fraction * M else INCONCLUSIVE)
        ess.append(n_eff)
    return MomentReport(tuple(float(b) for b in betas), tuple(est), tuple(se),
                        tuple(ess), tuple(verdicts), M, ess_fraction)


def mc_exp_moment(g, beta, k, law, grid, M, seed, ess_fraction=0.05):
    """Monte Carlo ``E[exp(beta * int_0^T g(t, W^1_t, ..., W^k_t) dt)]``.

    ``beta`` may be a number or a sequence; one Brownian sample is shared by
    every ``beta`` so the estimates are monotone in ``beta`` for ``g >= 0``.
    An estimate is ``"pass"`` when its importance weights keep an effective
    sample size of at least ``ess_fraction * M``.
    """
    betas = np.atleast_1d(np.asarray(beta, dtype=float))
    return moments_from_integrals(path_integrals(g, k, law, grid, M, seed),
                                  betas, ess_fraction)


def khasminskii_bound(alpha_f):
    """Bound ``1 / (1 - alpha_f)`` on ``sup_x E exp(int f(x + W))``."""
    if not 0 <= alpha_f < 1:
        raise DomainError(f"alpha_f must lie in [0, 1), got {alpha_f}")
    return 1.0 / (1.0 - alpha_f)


@dataclass(frozen=True)
class AlphaEstimate:
    """Maximum over a start-point grid of ``E int_0^T f``: a lower bound on the sup."""

    value: float
    stderr: float
    argmax: int
    means: tuple
    stderrs: tuple


def _start_shifts(x_grid, k, d):
    pts = np.asarray(x_grid, dtype=float)
    return pts.reshape(len(pts), k, d)


def estimate_alpha(f, k, x_grid, grid, M, seed, d=1):
    """``max`` over start tuples of the MC mean of ``int_0^T f(t, x + W_t) dt``.

    Brownian motions start at the origin and are shifted by each start tuple
    (one shared sample).  The maximum over a finite grid only bounds the true
    supremum from below; for translation-invariant ``f`` any single start
    point already attains it.
    """
    if len(x_grid) == 0:
        raise DomainError("x_grid must be nonempty")
    shifts = _start_shifts(x_grid, k, d)
    law = PointMass(np.zeros(d))
    ints = path_integrals(f, k, law, grid, M, seed, start=shifts)
    stats = [mean_with_stderr(row) for row in ints]
    means = tuple(m for m, _ in stats)
    errs = tuple(s for _, s in stats)
    j = int(np.argmax(means))
    return AlphaEstimate(means[j], errs[j], j, means, errs)


@dataclass(frozen=True)
class KhasminskiiRow:
    start: tuple
    alpha_upper: float
    moment: float
    moment_stderr: float
    bound: float

    @property
    def holds(self):
        return self.moment <= self.bound + 3 * self.moment_stderr


def khasminskii_check(f, k, x_grid, grid, M, seed, d=1):
    """Compare ``E exp(int f)`` at each start tuple with ``1/(1 - alpha - 3 se)``.

    Rows are produced only when ``alpha + 3 se < 1``; otherwise no bound
    applies and an empty list is returned.
    """
    shifts = _start_shifts(x_grid, k, d)
    ints = path_integrals(f, k, PointMass(np.zeros(d)), grid, M, seed, start=shifts)
    stats = [mean_with_stderr(row) for row in ints]
    j = int(np.argmax([m for m, _ in stats]))
    upper = stats[j][0] + 3 * stats[j][1]
    if upper >= 1:
        return []
    bound = khasminskii_bound(max(upper, 0.0))
    rows = []
    for shift, row in zip(shifts, ints):
        m, s = mean_with_stderr(np.exp(row))
        rows.append(KhasminskiiRow(tuple(shift.ravel()), upper, m, s, bound))
    return rows


# ----------------------------------------------------------- L^q(L^p) bounds


def _conj(p):
    if math.isinf(p):
        return 1.0
    if p == 1:
        return math.inf
    return p / (p - 1.0)


def heat_kernel_norm(t, d, p_conj):
    """``L^{p'}`` norm of the heat kernel ``(2 pi t)^{-d/2} exp(-|y|^2 / 2t)``.

    Closed form ``(2 pi t)^{-d/2} (p')^{-d/(2p')} (2 pi t)^{d/(2p')}``; the
    ``p' = inf`` case is the peak value.
    """
    if math.isinf(p_conj):
        return (2 * math.pi * t) ** (-d / 2)
    return ((2 * math.pi * t) ** (-d / 2) * p_conj ** (-d / (2 * p_conj))
            * (2 * math.pi * t) ** (d / (2 * p_conj)))


def lpq_exponent_sum(d, p_list, q):
    for p in list(p_list) + [q]:
        if not p >= 1:
            raise DomainError(f"exponents must be at least 1, got {p}")
    total = sum(0.0 if math.isinf(p) else d / p for p in p_list)
    return total + (0.0 if math.isinf(q) else 2.0 / q)


def lpq_constant(d, p_list, q, T):
    """Constant ``C_T`` in ``E int_0^T f(t, x + W_t) dt <= C_T ||f||_{L^q(L^p)}``.

    For ``k`` independent Brownian motions and exponents ``p_1..p_k``,
    iterated Hölder gives ``C_T = c (int_0^T t^{-a q'} dt)^{1/q'}`` with
    ``c t^{-a} = prod_i ||p_t||_{p_i'}`` and ``a = sum d/(2 p_i)``, that is
    ``C_T = c T^{1/q' - a} / (1 - a q')^{1/q'}``.  Requires
    ``sum d/p_i + 2/q < 2``.
    """
    if not lpq_exponent_sum(d, p_list, q) < 2:
        raise DomainError("need sum d/p_i + 2/q < 2")
    if not T > 0:
        raise DomainError("T must be positive")
    a = sum(0.0 if math.isinf(p) else d / (2 * p) for p in p_list)
    c = 1.0
    for p in p_list:
        pc = _conj(p)
        c *= heat_kernel_norm(1.0, d, pc)
    qc = _conj(q)
    if math.isinf(qc):
        return c  # a == 0 here, the time factor is sup_t t^0 = 1
    return c * T ** (1.0 / qc - a) / (1.0 - a * qc) ** (1.0 / qc)


def ball_volume(d, r=1.0):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d


def indicator_lpq_norm(d, r, p, q, T):
    """``L^q(0,T; L^p)`` norm of ``1_{|x| <= r}`` (constant in time)."""
    space = 1.0 if math.isinf(p) else ball_volume(d, r) ** (1.0 / p)
    time = 1.0 if math.isinf(q) else T ** (1.0 / q)
    return space * time


# ----------------------------------------------------- truncation conditions


def _kernel_excess(spec):
    """``(k, h)`` with ``h(t, xs)`` the unclamped kernel value at ``xs``."""
    fam = spec.family
    if isinstance(fam, CustomDrift):
        raise UnsupportedFamilyError("custom drifts have no kernel to truncate")
    if isinstance(fam, MeasureDrift):
        fam = fam.inner
    if isinstance(fam, PairKernel):
        return 2, lambda t, xs: pair_values(fam, t, xs[..., 0, :] - xs[..., 1, :])
    kern: KPointKernel = fam
    return kern.k, lambda t, xs: np.asarray(
        kern.phi(t, *(xs[..., j, :] for j in range(kern.k))), dtype=float)


def truncation_excess(spec, lam):
    """``g_lam = |phi - clamp(phi, 1/lam)|^2`` as a function of ``(t, xs)``."""
    k, h = _kernel_excess(spec)
    level = 1.0 / lam

    def g(t, xs):
        v = h(t, xs)
        diff = v - np.clip(v, -level, level)
        return np.einsum("...d,...d->...", diff, diff)

    return k, g


def step_averaged_heat_kernel(u, h, var):
    """``(1/h) int_0^h p_{var s}(u) ds`` for the one-dimensional heat kernel."""
    u = np.abs(np.asarray(u, dtype=float))
    s2h = var * h
    return (np.sqrt(2 * h / (math.pi * var)) * np.exp(-u * u / (2 * s2h))
            - u / var * erfc(u / np.sqrt(2 * s2h))) / h


def heat_smoothed_excess(spec, lam, dt, var=2.0, n_table=4001, n_quad=400):
    """Step-averaged version of ``g_lam`` for a one-dimensional pair kernel.

    Returns ``g~(t, xs) = (g_lam * K_dt)(x_1 - x_2)`` where ``K_dt`` is the
    heat kernel of the difference process (variance ``var`` per unit time)
    averaged over one step.  ``dt * g~(x_i)`` is the expected integral of
    ``g_lam`` over a step started at ``x_i``, so the rule has the same mean
    as the continuous integral but stays bounded.  Point evaluation of a
    singular ``g_lam`` has infinite exponential moments at every step size,
    which is why this rule is used for the truncation-condition check.
    """
    fam = spec.family.inner if isinstance(spec.family, MeasureDrift) else spec.family
    if not isinstance(fam, PairKernel):
        raise UnsupportedFamilyError("heat smoothing needs a pair kernel")
    level = 1.0 / lam
    # support of g_lam: where |phi| exceeds the clamp level
    if fam.exponent < 0:
        r = (level / abs(fam.sign * fam.strength)) ** (1.0 / fam.exponent)
        r = min(r, fam.cutoff) * 1.001
    else:
        r = fam.cutoff if math.isfinite(fam.cutoff) else 0.0
    if r == 0.0:
        return lambda t, xs: np.zeros(xs.shape[:-2])
    # y = r w^m removes an integrable singularity |y|^(2 alpha) at zero
    m = max(1, math.ceil(1.0 / max(1e-6, 1.0 + 2.0 * min(fam.exponent, 0.0)))) + 1
    w, wt = np.polynomial.legendre.leggauss(n_quad)
    w, wt = 0.5 * (w + 1.0), 0.5 * wt
    y = r * w**m
    _, g = truncation_excess(spec, lam)
    gy = g(0.0, np.stack([y, np.zeros_like(y)], axis=-1)[:, :, None])
    mass = gy * r * m * w ** (m - 1) * wt
    reach = r + 12.0 * math.sqrt(var * dt)
    xs = np.linspace(-reach, reach, n_table)
    table = ((step_averaged_heat_kernel(xs[:, None] - y[None], dt, var)
              + step_averaged_heat_kernel(xs[:, None] + y[None], dt, var))
             * mass[None]).sum(axis=1)

    def smoothed(t, pts):
        return np.interp(pts[..., 0, 0] - pts[..., 1, 0], xs, table,
                         left=0.0, right=0.0)

    return smoothed


@dataclass
class DriftConditionReport:
    admissible: bool
    reason: str
    lambdas: tuple = ()
    reports: list = field(default_factory=list)
    quadrature: str = "left"

    def trend(self, beta_index=0):
        """Estimates at one ``beta`` across the ``lambda`` list."""
        return [r.estimates[beta_index] for r in self.reports]

    def monotone_fit(self, beta_index=0):
        """Isotonic fit of the trend, decreasing as ``lambda`` decreases."""
        lam = np.asarray(self.lambdas)
        order = np.argsort(lam)
        y = np.asarray(self.trend(beta_index))[order]
        fit = np.empty_like(y)
        fit[order] = isotonic_regression(y, increasing=True).x
        return fit

    def rows(self):
        out = []
        for lam, rep in zip(self.lambdas, self.reports):
            for row in rep.rows():
                out.append({"lambda": lam, **row})
        return out


def verify_drift_conditions(spec, lambdas, betas, M, seed, grid=None, law=None,
                            d=1, quadrature="auto"):
    """Exponential moments of ``beta * int g_lam`` for each truncation level.

    Admissibility is checked first; an inadmissible spec returns a report
    with ``admissible = False`` and no sampling.  The same Brownian sample is
    used for every ``lambda`` and ``beta``, so the estimates are monotone in
    both.  The expected behaviour is convergence to one as ``lambda -> 0``.

    ``quadrature="heat"`` integrates ``g_lam`` with the step-averaged heat
    rule (:func:`heat_smoothed_excess`, one-dimensional pair kernels only);
    ``"left"`` uses point evaluation.  ``"auto"`` picks ``"heat"`` when it
    applies.
    """
    _kernel_excess(spec)  # rejects custom drifts
    grid = grid or TimeGrid(1.0, 256)
    law = law or Gaussian(np.zeros(d), np.ones(d))
    ok, reason = spec_admissibility(spec, law.dim)
    report = DriftConditionReport(ok, reason)
    if not ok:
        return report
    fam = spec.family.inner if isinstance(spec.family, MeasureDrift) else spec.family
    heat_ok = isinstance(fam, PairKernel) and law.dim == 1
    if quadrature == "auto":
        quadrature = "heat" if heat_ok else "left"
    if quadrature == "heat" and not heat_ok:
        raise UnsupportedFamilyError("heat quadrature needs a 1-d pair kernel")
    if quadrature not in ("heat", "left"):
        raise DomainError(f"unknown quadrature {quadrature!r}")
    report.quadrature = quadrature
    report.lambdas = tuple(float(x) for x in lambdas)
    for lam in report.lambdas:
        k, g = truncation_excess(spec, lam)
        if quadrature == "heat":
            g = heat_smoothed_excess(spec, lam, grid.dt)
        report.reports.append(mc_exp_moment(g, betas, k, law, grid, M, seed))
    return report
