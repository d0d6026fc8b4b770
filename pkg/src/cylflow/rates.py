"""Discrete decay-rate machinery and Gaussian tail integrals.

Nothing here touches geometry: the inputs are plain sequences of ``F``
values (or their excess over a limit) and radii.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from . import numerics
from .errors import DomainError, InputError

# --------------------------------------------------------------------------
# Gaussian tails: gamma_q(R) = int_R^inf r^q exp(-r^2/4) dr


def _gamma0_quad(R):
    val, _ = integrate.quad(lambda r: math.exp(-r * r / 4), R, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def gamma_quad(q, R):
    """Direct adaptive quadrature of ``gamma_q(R)``."""
    val, _ = integrate.quad(lambda r: r**q * math.exp(-r * r / 4), R, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def gamma_table(R, qmax):
    """``gamma_0 .. gamma_qmax`` by the upward recursion.

    ``gamma_1 = 2 e^{-R^2/4}`` is exact and ``gamma_0`` comes from quadrature;
    then ``gamma_{p+1} = 2 R^p e^{-R^2/4} + 2 p gamma_{p-1}``.
    """
    if R < 1:
        raise DomainError(f"the tail lemma needs R >= 1, got {R}")
    e = math.exp(-R * R / 4)
    g = np.zeros(max(qmax, 1) + 1)
    g[0] = _gamma0_quad(R)
    g[1] = 2 * e
    for p in range(1, qmax):
        g[p + 1] = 2 * R**p * e + 2 * p * g[p - 1]
    return g[: qmax + 1]


def tail_constants(qmax):
    """Constants with ``gamma_q(R) <= c_q R^{q-1} e^{-R^2/4}`` for ``R >= 1``."""
    c = np.zeros(max(qmax, 1) + 1)
    c[0] = c[1] = 2.0
    for q in range(1, qmax):
        c[q + 1] = 2 + 2 * q * c[q - 1]
    return c[: qmax + 1]


def sphere_area(m):
    """Area of the unit sphere ``S^{m-1}`` in ``R^m``."""
    return 2 * math.pi ** (m / 2) / math.gamma(m / 2)


def tail_constant(m, k_pow):
    return sphere_area(m) * tail_constants(m + k_pow - 1)[m + k_pow - 1]


def tail_bound(m, k_pow, R):
    """``c_{m,k} R^{m+k-2} e^{-R^2/4}``, bounding the ``|x|^k``-moment outside ``B_R``."""
    if R < 1:
        raise DomainError(f"the tail lemma needs R >= 1, got {R}")
    if m < 1 or k_pow < 0:
        raise DomainError("need m >= 1 and k_pow >= 0")
    return tail_constant(m, k_pow) * R ** (m + k_pow - 2) * math.exp(-R * R / 4)


@dataclass(frozen=True)
class TailResult:
    m: int
    k_pow: int
    R: float
    gammas: np.ndarray
    bound: float
    quadrature: float

    @property
    def holds(self):
        # for odd q the bound is attained at R = 1, so allow rounding-level slack
        return bool(self.quadrature <= self.bound * (1 + 1e-12))

    def as_dict(self):
        return dict(m=self.m, k_pow=self.k_pow, R=self.R, gammas=self.gammas.tolist(),
                    bound=self.bound, quadrature=self.quadrature, holds=self.holds)


def gaussian_tail(m, k_pow, R):
    """Tail of ``|x|^k e^{-|x|^2/4}`` outside ``B_R`` in ``R^m``: recursion, bound, quadrature."""
    if R < 1:
        raise DomainError(f"the tail lemma needs R >= 1, got {R}")
    q = m + k_pow - 1
    gammas = gamma_table(R, max(q, 1))
    bound = tail_bound(m, k_pow, R)
    quad = sphere_area(m) * gamma_quad(q, R)
    return TailResult(m, k_pow, float(R), gammas, bound, quad)


# --------------------------------------------------------------------------
# sequences


@dataclass
class SequenceRecord:
    """A sequence ``F_j`` (``j = 1..J``) with its limit and derived quantities.

    ``excess`` holds ``F_j - F_inf`` separately so that power-law tails are
    not lost to cancellation against ``F_inf``.
    """

    j: np.ndarray
    excess: np.ndarray
    F_inf: float = 0.0
    alpha: float | None = None
    K: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.j = np.asarray(self.j, dtype=int)
        self.excess = np.asarray(self.excess, dtype=float)
        if self.j.shape != self.excess.shape or self.j.ndim != 1:
            raise InputError("index and value arrays must be 1-d and equal length")
        if not np.all(np.isfinite(self.excess)):
            raise InputError("sequence has non-finite values")

    @property
    def F(self):
        return self.F_inf + self.excess

    @property
    def drops(self):
        """``F_{j-1} - F_{j+1}`` for interior ``j`` (aligned with ``j[1:-1]``)."""
        return self.excess[:-2] - self.excess[2:]

    @property
    def delta(self):
        """``delta_j = sqrt(F_{j-1} - F_{j+2})``, aligned with ``j[1:-2]``."""
        d = self.excess[:-3] - self.excess[3:]
        return np.sqrt(np.maximum(d, 0.0))

    @property
    def delta_index(self):
        return self.j[1:-2]

    def tail_sums(self):
        """``sum_{i >= j} delta_i^2``, aligned with ``delta_index``.

        The sum telescopes to ``e_{j-1} + e_j + e_{j+1}`` once the sequence
        reaches its limit; the finite sum is closed with that remainder.
        """
        d2 = self.delta**2
        finite = np.cumsum(d2[::-1])[::-1]
        e = self.excess
        # after the last delta (index J-3 in array terms) the remainder is e_{J-2}+e_{J-1}+e_J
        rest = e[-3] + e[-2] + e[-1]
        return finite + rest

    def minimal_K(self, alpha=None):
        """Pointwise minimal ``K_j = |F_j - F_inf|^{1+alpha} / (F_{j-1} - F_{j+1})``."""
        a = self.alpha if alpha is None else alpha
        if a is None:
            raise InputError("alpha is needed for the discrete inequality")
        lhs = np.abs(self.excess[1:-1]) ** (1 + a)
        drops = self.drops
        with np.errstate(divide="ignore", invalid="ignore"):
            K = np.where(lhs == 0, 0.0, lhs / drops)
        return K

    def to_json(self):
        out = dict(j=self.j.tolist(), F=self.F.tolist(), F_inf=self.F_inf, alpha=self.alpha, K=self.K,
                   delta=self.delta.tolist(), extra=self.extra)
        return json.dumps(out, sort_keys=True)

    def to_csv(self):
        lines = ["j,F_j,delta_j,tail_sum"]
        d = dict(zip(self.delta_index.tolist(), self.delta))
        t = dict(zip(self.delta_index.tolist(), self.tail_sums()))
        for jj, F in zip(self.j.tolist(), self.F):
            dd = d.get(jj)
            tt = t.get(jj)
            lines.append(f"{jj},{F!r},{'' if dd is None else repr(float(dd))},{'' if tt is None else repr(float(tt))}")
        return "\n".join(lines) + "\n"


def synth_sequence(alpha, K_scale=None, F_inf=0.0, c=1.0, J_max=400):
    """Power-law sequence ``F_j = F_inf + c j^{-1/alpha}`` and its inequality scan.

    Records the minimal ``K`` for the discrete inequality over ``2 <= j <
    J_max`` and whether it holds with the proposed ``K_scale``.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    j = np.arange(1, J_max + 1)
    excess = c * j ** (-1.0 / alpha)
    rec = SequenceRecord(j, excess, F_inf, alpha)
    K = rec.minimal_K()
    K_min = float(np.max(K)) if K.size else 0.0
    rec.K = K_min if K_scale is None else float(K_scale)
    rec.extra.update(K_min=K_min, K_profile=K.tolist(), holds=bool(K_min <= rec.K))
    return rec


def geometric_record(ratio=0.5, J_max=60, F_inf=0.0):
    """Sequence with ``delta_j`` decaying geometrically (excess ``~ ratio^{2j}``)."""
    j = np.arange(1, J_max + 1)
    return SequenceRecord(j, ratio ** (2.0 * j), F_inf)


# --------------------------------------------------------------------------
# summability


def summation_by_parts(a, b, k, N):
    """Both sides of ``sum_{j=k}^N b_j (a_j - a_{j+1}) = b_k a_k - b_N a_{N+1} + sum a_{j+1}(b_{j+1} - b_j)``.

    ``a`` and ``b`` are indexable by ``j`` (``a`` up to ``N + 1``).
    """
    lhs = math.fsum(b[j] * (a[j] - a[j + 1]) for j in range(k, N + 1))
    rhs = math.fsum([b[k] * a[k], -b[N] * a[N + 1]] + [a[j + 1] * (b[j + 1] - b[j]) for j in range(k, N)])
    return lhs, rhs


def holder_split(delta, j, beta, a):
    """Both sides of the Hoelder split of ``sum delta_j^beta`` with weight ``j^a``."""
    lhs = float(np.sum(delta**beta))
    first = float(np.sum(delta**2 * j ** (2 * a / beta))) ** (beta / 2)
    second = float(np.sum(j ** (-2 * a / (2 - beta)))) ** ((2 - beta) / 2)
    return lhs, first * second


@dataclass(frozen=True)
class DecayFit:
    kind: str  # "power" or "geometric"
    exponent: float  # sigma for power law, rate for geometric
    residual: float


def _tail_window(x, frac=0.25, min_points=6):
    start = int(len(x) * frac)
    if len(x) - start < min_points:
        start = max(0, len(x) - min_points)
    return slice(start, None)


def fit_decay(j, values, frac=0.25):
    """Power-law and geometric fits of a positive sequence over its tail."""
    j = np.asarray(j, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    j, v = j[keep], v[keep]
    if len(v) < 6:
        return None, None
    sl = _tail_window(v, frac)
    pf = numerics.loglog_fit(j[sl], v[sl])
    power = DecayFit("power", -pf.slope, pf.residual)
    lv = np.log(v[sl])
    design = np.column_stack([j[sl], np.ones_like(j[sl])])
    coef, *_ = np.linalg.lstsq(design, lv, rcond=None)
    resid = float(np.sqrt(np.mean((lv - design @ coef) ** 2)))
    geometric = DecayFit("geometric", -float(coef[0]), resid)
    return power, geometric


RESIDUAL_GATE = 0.05


@dataclass(frozen=True)
class SummabilityVerdict:
    beta: float
    verdict: str  # summable | not-established | inconclusive
    sigma: float | None
    residual: float | None
    sbp_relative_error: float
    holder_lhs: float
    holder_rhs: float
    partial_sums: np.ndarray

    def as_dict(self):
        d = asdict(self)
        d["partial_sums"] = self.partial_sums.tolist()
        return d


def summability_check(record, beta, q=None):
    """Empirical verdict on ``sum delta_j^beta`` plus the two algebraic audits."""
    if isinstance(record, SequenceRecord):
        j = record.delta_index.astype(float)
        delta = record.delta
    else:
        j, delta = (np.asarray(x, dtype=float) for x in record)
    if len(delta) < 4:
        raise InputError("need at least four terms")
    # (i) summation by parts on the sampled range, a_j = finite tail sums of delta^2
    qq = 1.0 if q is None else q
    d2 = delta**2
    a = np.append(np.cumsum(d2[::-1])[::-1], 0.0)
    b = j**qq
    b = np.append(b, (j[-1] + 1) ** qq)
    lhs, rhs = summation_by_parts(a, b, 0, len(delta) - 1)
    sbp_err = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    # (ii) Hoelder split with a weight exponent inside the admissible window when possible
    a_exp = 0.5 * (1 - beta / 2) + 0.25 * beta
    h_lhs, h_rhs = holder_split(delta, j, beta, a_exp)
    # (iii) fitted tail of the increments
    inc = delta**beta
    power, geometric = fit_decay(j, inc)
    partial = np.cumsum(inc)
    if power is None:
        verdict, sigma, resid = "inconclusive", None, None
    elif geometric.residual < RESIDUAL_GATE and geometric.exponent > 0 and geometric.residual <= power.residual:
        verdict, sigma, resid = "summable", float("inf"), geometric.residual
    elif power.residual < RESIDUAL_GATE:
        sigma, resid = power.exponent, power.residual
        verdict = "summable" if sigma > 1 else "not-established"
    else:
        verdict, sigma, resid = "inconclusive", power.exponent, power.residual
    return SummabilityVerdict(beta, verdict, sigma, resid, sbp_err, h_lhs, h_rhs, partial)


def beta_threshold(alpha):
    """Exponent separating summable from unproven for power-law sequences."""
    return 2 * alpha / (1 + alpha)


@dataclass(frozen=True)
class RateFit:
    rho: float | None
    residual: float | None
    superpolynomial: bool

    def as_dict(self):
        return asdict(self)


def rate_extraction(record):
    """Fit ``rho`` in ``sum_{i >= j} delta_i^2 ~ j^{-rho}``."""
    tails = record.tail_sums()
    j = record.delta_index
    power, geometric = fit_decay(j, tails)
    if power is None:
        return RateFit(None, None, False)
    if geometric.residual < RESIDUAL_GATE and geometric.exponent > 0 and geometric.residual <= power.residual:
        return RateFit(None, geometric.residual, True)
    return RateFit(power.exponent, power.residual, False)


@dataclass(frozen=True)
class LojaFit:
    status: str  # ok | inconclusive
    slope: float | None = None
    alpha: float | None = None
    K: float | None = None
    residual: float | None = None
    n_points: int = 0

    def as_dict(self):
        return asdict(self)


def loja_fit(excess, drops, min_points=6, frac=0.0):
    """Regress ``log|F_T - F_lim|`` on ``log(F_{T-1} - F_{T+1})``.

    The slope is ``1/(1+alpha)``; the intercept gives ``K``.
    """
    e = np.abs(np.asarray(excess, dtype=float))
    d = np.asarray(drops, dtype=float)
    keep = (e > 0) & (d > 0)
    e, d = e[keep], d[keep]
    if len(e) < min_points:
        return LojaFit("inconclusive", n_points=len(e))
    sl = _tail_window(e, frac, min_points)
    fit = numerics.loglog_fit(d[sl], e[sl])
    if not fit.slope > 0:
        return LojaFit("inconclusive", slope=fit.slope, residual=fit.residual, n_points=len(e))
    alpha = 1.0 / fit.slope - 1.0
    # |e|^{1+alpha} = K d  at the fitted line
    K = math.exp(fit.intercept * (1 + alpha))
    return LojaFit("ok", fit.slope, alpha, K, fit.residual, len(e))
