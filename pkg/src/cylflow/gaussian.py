"""Gaussian-weighted integration, the functional F, norms and entropy.

Every integral carries an error bar for the omitted mass beyond the axis box,
taken from the tail lemma in :mod:`cylflow.rates`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from . import numerics, rates
from .chart import ChartGrid, Immersion, NormalField, build_cylinder
from .errors import InputError
from .geometry import GeometryJet, gaussian_density, jet


def cylinder_F(k):
    """``F`` of the round cylinder with sphere factor ``S^k_{sqrt(2k)}``."""
    r = math.sqrt(2 * k)
    return (4 * math.pi) ** (-k / 2) * rates.sphere_area(k + 1) * r**k * math.exp(-k / 2)


def _sphere_factor(grid):
    # (4 pi)^{-n/2} |S^k_r| e^{-k/2}: the sphere part of the cylinder density
    k, n = grid.k, grid.n
    r = grid.radius
    return (4 * math.pi) ** (-n / 2) * rates.sphere_area(k + 1) * r**k * math.exp(-k / 2)


def cylinder_box_complement(grid):
    """Exact cylinder mass outside the axis box ``[-R, R]^{n-k}``."""
    m = grid.axis_dim
    if m == 0:
        return 0.0
    R = grid.R_box
    full = (4 * math.pi) ** (m / 2)
    return _sphere_factor(grid) * full * (-math.expm1(m * math.log(special.erf(R / 2))))


@dataclass(frozen=True)
class QuadratureRule:
    """Weights of the Gaussian measure on a grid plus the truncation bound.

    ``tail_bound`` bounds the omitted ``|y| > R_box`` mass of a cylindrical
    end per unit sup of the integrand.
    """

    grid: ChartGrid
    weights: np.ndarray
    tail_bound: float

    @classmethod
    def from_jets(cls, jets: GeometryJet):
        return cls(jets.grid, gaussian_density(jets), truncation_bound(jets.grid))


def truncation_bound(grid):
    m = grid.axis_dim
    if m == 0:
        return 0.0
    return _sphere_factor(grid) * rates.tail_bound(m, 0, grid.R_box)


def rule_for(obj):
    """Accept a rule, jets, immersion or grid and return a quadrature rule."""
    if isinstance(obj, QuadratureRule):
        return obj
    if isinstance(obj, GeometryJet):
        return QuadratureRule.from_jets(obj)
    if isinstance(obj, Immersion):
        return QuadratureRule.from_jets(jet(obj))
    if isinstance(obj, ChartGrid):
        return QuadratureRule.from_jets(jet(obj.cylinder()))
    raise InputError(f"cannot build a quadrature rule from {type(obj).__name__}")


@dataclass(frozen=True)
class Integral:
    value: float
    tail: float

    def __iter__(self):
        yield self.value
        yield self.tail


def integrate(f, rule):
    """Gaussian integral of a scalar grid field, with its truncation error bar."""
    rule = rule_for(rule)
    f = np.asarray(f, dtype=float)
    if f.shape != rule.grid.shape:
        raise InputError(f"field shape {f.shape} does not match grid {rule.grid.shape}")
    value = float(np.sum(rule.weights * f))
    edge = rule.grid.boundary_mask(width=1)
    sup_edge = float(np.max(np.abs(f[edge]))) if edge.any() else 0.0
    return Integral(value, rule.tail_bound * sup_edge)


def coarse_weights(jets):
    """Gaussian weights using every other axis row (spacing 2h)."""
    grid = jets.grid
    w = gaussian_density(jets)
    if grid.axis_dim == 0 or grid.m_y % 2 == 0:
        return None
    if (grid.m_y + 1) // 2 < 7:
        return None
    coarse = np.zeros(grid.m_y)
    coarse[::2] = numerics.axis_weights((grid.m_y + 1) // 2, 2 * grid.h)
    fine = numerics.axis_weights(grid.m_y, grid.h)
    ratio = np.ones(grid.shape)
    for j in range(grid.axis_dim):
        shape = [1] * len(grid.shape)
        shape[grid.k + j] = grid.m_y
        ratio = ratio * (coarse / fine).reshape(shape)
    return w * ratio


@dataclass(frozen=True)
class FValue:
    value: float
    bound: float  # total error bar (quadrature estimate + untreated tail)
    quadrature_error: float
    tail_bound: float  # the tail-lemma bound for the box truncation
    tail_added: float  # closed-form cylindrical mass added beyond the box

    def as_dict(self):
        return asdict(self)


def F_value(immersion, jets=None):
    """Gaussian area ``F`` of an immersion.

    When the surface is exactly cylindrical near the axis ends, the mass
    beyond the box is added in closed form; otherwise the tail-lemma bound
    enters the error bar.
    """
    if jets is None:
        jets = jet(immersion)
    w = gaussian_density(jets)
    box = float(np.sum(w))
    wc = coarse_weights(jets)
    quad_err = abs(box - float(np.sum(wc))) if wc is not None else 0.0
    tb = truncation_bound(immersion.grid)
    if immersion.cylindrical_tail:
        added = cylinder_box_complement(immersion.grid)
        return FValue(box + added, quad_err, quad_err, tb, added)
    return FValue(box, quad_err + tb, quad_err, tb, 0.0)


# --------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class NormReport:
    L1: float
    L2: float
    W12: float
    W22: float
    norm2: float
    pointwise_C2: np.ndarray

    def as_dict(self):
        d = asdict(self)
        d.pop("pointwise_C2")
        d["pointwise_C2_max"] = float(np.max(self.pointwise_C2)) if self.pointwise_C2.size else 0.0
        return d


def _derivs(field, jets):
    """``|V|``, ``|nabla V|``, ``|Hess V|`` of a normal field (or scalar) on the cylinder."""
    if isinstance(field, NormalField):
        V = field.ambient()
        d = jets.cov(V)
        dd = jets.cov(d)
        nd = jets.nd
        mag = np.linalg.norm(V, axis=-1)
        g1 = jets.to_frame(d, 1)
        g2 = jets.to_frame(dd, 2)
        grad = np.sqrt(np.sum(g1**2, axis=(nd, nd + 1)))
        hess = np.sqrt(np.sum(g2**2, axis=(nd, nd + 1, nd + 2)))
        return mag, grad, hess
    f = np.asarray(field, dtype=float)
    d = jets.grid.gradient(f)
    dd = jets.cov(d, normal=False)
    g1 = jets.to_frame(d, 1)
    g2 = jets.to_frame(dd, 2)
    return np.abs(f), np.linalg.norm(g1, axis=-1), np.sqrt(np.sum(g2**2, axis=(-1, -2)))


def norm2_integrand(field, jets):
    """Pointwise integrand of the custom ``||.||_2`` quantity."""
    mag, grad, hess = _derivs(field, jets)
    grid = jets.grid
    # derivative of |nabla U| along the axis directions
    axis = [grid.diff(grad, grid.k + j) for j in range(grid.axis_dim)]
    axis_sq = sum(a**2 for a in axis) if axis else np.zeros_like(grad)
    r = np.linalg.norm(jets.X, axis=-1)
    return mag**2 + grad**2 + axis_sq + hess**2 / (1 + r)


def norms(field, rule=None, jets=None):
    """Gaussian ``L^1``, ``L^2``, ``W^{1,2}``, ``W^{2,2}``, ``||.||_2`` and ``|V|_2``.

    Derivatives of normal fields use the normal connection of the reference
    surface carried by ``jets`` (the model cylinder by default).
    """
    grid = field.grid if isinstance(field, NormalField) else None
    if jets is None:
        if grid is None:
            raise InputError("scalar fields need jets")
        jets = jet(grid.cylinder())
    rule = rule_for(rule if rule is not None else jets)
    w = rule.weights
    mag, grad, hess = _derivs(field, jets)
    L1 = float(np.sum(w * mag))
    L2sq = float(np.sum(w * mag**2))
    G = float(np.sum(w * grad**2))
    Hs = float(np.sum(w * hess**2))
    n2 = float(np.sqrt(np.sum(w * norm2_integrand(field, jets) ** 2)))
    return NormReport(L1, math.sqrt(L2sq), math.sqrt(L2sq + G), math.sqrt(L2sq + G + Hs), n2, mag + grad + hess)


def inner(V, W, rule):
    """Gaussian ``L^2`` inner product of two normal fields."""
    rule = rule_for(rule)
    return float(np.sum(rule.weights * np.sum(V.comps * W.comps, axis=-1)))


# --------------------------------------------------------------------------
# entropy


DEFAULT_DILATIONS = np.geomspace(0.5, 2.0, 11)  # contains c = 1; nests under doubling
DEFAULT_TRANSLATIONS = np.linspace(-2.0, 2.0, 9)


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    c: float
    x0: tuple
    approximate: bool = True
    evaluations: int = 0

    def as_dict(self):
        return asdict(self)


def _extended(immersion, margin):
    """Immersion continued cylindrically on a longer axis with the same spacing."""
    grid = immersion.grid
    extra = int(math.ceil(margin / grid.h))
    big = build_cylinder(grid.k, grid.n, grid.N, grid.m_theta, grid.R_box + extra * grid.h, grid.m_y + 2 * extra)
    X = big.positions()
    idx = (slice(None),) * grid.k + (slice(extra, extra + grid.m_y),) * grid.axis_dim
    X[idx] = immersion.X
    return Immersion(big, X, "explicit")


def F_transformed(X, area, n, c, x0):
    """``F(c Sigma + x0)`` from positions and the area weights of ``Sigma``."""
    y = c * X + x0
    return float(np.sum(area * c**n * (4 * np.pi) ** (-n / 2) * np.exp(-np.sum(y**2, axis=-1) / 4)))


def entropy_estimate(immersion, dilations=None, translations=None, margin=None):
    """Largest ``F(c Sigma + x0)`` over a coarse search grid.

    Translations are applied along each ambient axis separately.  Surfaces
    with cylindrical ends are continued analytically on a longer axis so that
    shrunk or shifted copies keep their full Gaussian mass.
    """
    dil = DEFAULT_DILATIONS if dilations is None else np.asarray(dilations, dtype=float)
    tr = DEFAULT_TRANSLATIONS if translations is None else np.asarray(translations, dtype=float)
    grid = immersion.grid
    if immersion.cylindrical_tail and grid.axis_dim:
        if margin is None:
            margin = (12.0 + np.max(np.abs(tr))) / np.min(dil)
        surf = _extended(immersion, margin)
    else:
        surf = immersion
    js = jet(surf)
    area = surf.grid.cell_measure() * js.sqrt_det_g
    X = surf.X
    N, n = grid.N, grid.n
    shifts = [np.zeros(N)]
    for a in range(N):
        for t in tr:
            if t != 0.0:
                v = np.zeros(N)
                v[a] = t
                shifts.append(v)
    best = (-np.inf, None, None)
    count = 0
    for c in dil:
        for v in shifts:
            val = F_transformed(X, area, n, c, v)
            count += 1
            if val > best[0]:
                best = (val, float(c), tuple(float(t) for t in v))
    return EntropyEstimate(best[0], best[1], best[2], True, count)
