"""First variation of the geometry under ``F_s = F + s V`` for a normal field ``V``.

Every analytic formula is assembled from the same discrete jets
(``X_a, X_ab, V, V_a, V_ab``) the geometry module uses, so it is the exact
``s``-derivative of the discrete quantities and the finite-difference oracle
converges at ``O(s^2)`` with no discretization floor.  The oracle itself is
the nonlinear geometry module re-evaluated at ``F +- s V``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .chart import Immersion, NormalField, graph
from .errors import ContractError, FitRejected, InputError
from .geometry import GeometryJet, compute_P, gaussian_density, jet

DEFAULT_STEPS = (1e-2, 5e-3, 2.5e-3)
ORDER_GATE = 1.8
NORMALITY_TOL = 1e-9


@dataclass
class VariationResult:
    op: str
    label: str
    analytic: np.ndarray
    fd: np.ndarray  # Richardson-extrapolated centered differences
    steps: tuple
    errors: tuple  # max |D(s) - analytic| per step
    order: float
    max_discrepancy: float  # max |analytic - fd|

    @property
    def passed(self):
        return self.order >= ORDER_GATE

    def as_dict(self):
        return dict(op=self.op, direction_label=self.label, analytic_vs_fd_order=self.order,
                    max_discrepancy=self.max_discrepancy)

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True)


def _as_ambient(V, jets):
    if isinstance(V, NormalField):
        if V.grid != jets.grid:
            raise InputError("variation field lives on a different grid")
        return V.ambient()
    V = np.asarray(V, dtype=float)
    if V.shape != jets.X.shape:
        raise InputError(f"variation field has shape {V.shape}, expected {jets.X.shape}")
    return V


def _check_normal(V, jets):
    tang = V - jets.project(V)
    scale = max(1.0, float(np.max(np.abs(V))))
    bad = float(np.max(np.abs(tang))) if V.size else 0.0
    if bad > NORMALITY_TOL * scale:
        raise ContractError(f"variation field has a tangential part of size {bad:.2e}")


class _Jet1:
    """Base jets plus the jets of ``V`` and the derivative of the projection."""

    def __init__(self, jets: GeometryJet, V):
        self.jets = jets
        grid = jets.grid
        V = _as_ambient(V, jets)
        _check_normal(V, jets)
        self.V = V
        self.Va = grid.gradient(V)  # (..., n, N)
        self.Vab = grid.hessian(V)  # (..., n, n, N)
        Xa, Xab, gi = jets.Xa, jets.Xab, jets.ginv
        # d_b g_ac and d_b g^ac
        dg = np.einsum("...bai,...ci->...bac", Xab, Xa)
        dg = dg + np.swapaxes(dg, -1, -2)
        dgi = -np.einsum("...ae,...bef,...fc->...bac", gi, dg, gi)
        Y = np.einsum("...ac,...ci->...ai", gi, Xa)  # g^{ac} X_c
        dPi = np.einsum("...bai,...aj->...bij", Xab, Y)
        dPi = dPi + np.swapaxes(dPi, -1, -2)
        dPi = dPi + np.einsum("...ai,...bac,...cj->...bij", Xa, dgi, Xa)
        self.dPi = -dPi  # d_b Pi, (..., n, N, N)
        self.nV = jets.project(self.Va)  # nabla^perp_a V
        inner = np.einsum("...bij,...aj->...bai", self.dPi, self.Va) + self.Vab
        # D2[b, a] = nabla_b nabla_a V (normal connection, Levi-Civita on the slot)
        self.D2 = jets.project(inner) - np.einsum("...cba,...ci->...bai", jets.gamma, self.nV)
        self.AV = np.einsum("...abi,...i->...ab", jets.A, V)

    @property
    def lap(self):
        return np.einsum("...ab,...bai->...i", self.jets.ginv, self.D2)

    def tangent_from(self, W):
        """``X_j g^{ij} <nabla^perp_i V, W>`` for a normal vector field ``W``."""
        c = np.einsum("...ai,...i->...a", self.nV, W)
        return np.einsum("...a,...ab,...bi->...i", c, self.jets.ginv, self.jets.Xa)

    def L_V(self):
        """``L V = Delta V - nabla_{x^T} V / 2 + V / 2 + <V, A_kl> A_kl``."""
        jets = self.jets
        gi = jets.ginv
        xT = np.einsum("...ab,...bi,...i->...a", gi, jets.Xa, jets.X)  # chart components of x^T
        out = self.lap - 0.5 * np.einsum("...a,...ai->...i", xT, self.nV) + 0.5 * self.V
        out += np.einsum("...ka,...lb,...ab,...kli->...i", gi, gi, self.AV, jets.A)
        return out


# --------------------------------------------------------------------------
# analytic formulas


def Pi_prime(j1: _Jet1):
    """``Pi_s`` as a matrix field: ``Pi_s W = -Pi(nabla_{W^T} V) - X_j g^{ij} <Pi nabla_i V, W>``."""
    jets = j1.jets
    Y = np.einsum("...ab,...bi->...ai", jets.ginv, jets.Xa)
    M = np.einsum("...ai,...aj->...ij", j1.nV, Y)
    return -M - np.swapaxes(M, -1, -2)


def H_prime(j1: _Jet1):
    """``-H_s = Delta V + g^{ik} A^V_km g^{mj} A_ij + X_k g^{mk} <V_m, H>``."""
    jets = j1.jets
    gi = jets.ginv
    term = np.einsum("...ik,...km,...mj,...iju->...u", gi, j1.AV, gi, jets.A)
    c = np.einsum("...mi,...i->...m", j1.Va, jets.H)
    tang = np.einsum("...m,...mk,...ku->...u", c, gi, jets.Xa)
    return -(j1.lap + term + tang)


def A_prime(j1: _Jet1):
    """Chart components ``A_ab' = -X_k <nabla^k V, A_ab> + nabla_b nabla_a V - A^V_ac A^c_b``."""
    jets = j1.jets
    gi = jets.ginv
    c = np.einsum("...ki,...abi->...kab", j1.nV, jets.A)
    tang = np.einsum("...kab,...kl,...lu->...abu", c, gi, jets.Xa)
    hess = np.swapaxes(j1.D2, -2, -3)  # [a, b] = nabla_b nabla_a V
    quad = np.einsum("...ac,...cd,...dbu->...abu", j1.AV, gi, jets.A)
    return -tang + hess - quad


def phi_prime(j1: _Jet1):
    """``phi_s = L V - X_j g^{ij} <nabla^perp_i V, phi>``."""
    return j1.L_V() - j1.tangent_from(j1.jets.phi)


# --------------------------------------------------------------------------
# finite-difference oracle


def _richardson(D_coarse, D_fine, ratio):
    r2 = ratio * ratio
    return (r2 * D_fine - D_coarse) / (r2 - 1)


def fd_oracle(quantity, X, V, grid, steps=DEFAULT_STEPS):
    """Centered differences ``(Q(X + sV) - Q(X - sV)) / 2s`` over the step ladder."""
    steps = tuple(sorted((float(s) for s in steps), reverse=True))
    if len(steps) < 2:
        raise InputError("the step ladder needs at least two steps")
    D = []
    for s in steps:
        qp = quantity(jet(Immersion(grid, X + s * V, "explicit")))
        qm = quantity(jet(Immersion(grid, X - s * V, "explicit")))
        D.append((qp - qm) / (2 * s))
    fd = _richardson(D[-2], D[-1], steps[-2] / steps[-1])
    return steps, D, fd


def _compare(op, label, analytic, quantity, jets, V, steps):
    steps, D, fd = fd_oracle(quantity, jets.X, V, jets.grid, steps)
    errors = tuple(float(np.max(np.abs(d - analytic))) for d in D)
    scale = max(1.0, float(np.max(np.abs(analytic))))
    floor = 1e-11 * scale
    if max(errors) <= floor:
        order = math.inf  # the difference quotient is exact to rounding
    else:
        e = np.maximum(np.array(errors), floor)
        order = numerics.convergence_order(steps, e)
    return VariationResult(op, label, analytic, fd, steps, errors, float(order),
                           float(np.max(np.abs(analytic - fd))))


def _setup(jets, V):
    if not isinstance(jets, GeometryJet):
        jets = jet(jets)
    return jets, _Jet1(jets, V)


def dPi(jets, V, W=None, label="V", steps=DEFAULT_STEPS):
    """``Pi_s`` (or ``Pi_s W`` for a probe field ``W``) against the oracle."""
    jets, j1 = _setup(jets, V)
    P1 = Pi_prime(j1)
    if W is None:
        return _compare("dPi", label, P1, lambda J: J.Pi, jets, j1.V, steps)
    W = np.broadcast_to(np.asarray(W, dtype=float), jets.X.shape)
    an = np.einsum("...ij,...j->...i", P1, W)
    return _compare("dPi", label, an, lambda J: np.einsum("...ij,...j->...i", J.Pi, W), jets, j1.V, steps)


def dH(jets, V, label="V", steps=DEFAULT_STEPS):
    jets, j1 = _setup(jets, V)
    return _compare("dH", label, H_prime(j1), lambda J: J.H, jets, j1.V, steps)


def dA(jets, V, label="V", steps=DEFAULT_STEPS):
    jets, j1 = _setup(jets, V)
    return _compare("dA", label, A_prime(j1), lambda J: J.A, jets, j1.V, steps)


def dphi(jets, V, label="V", steps=DEFAULT_STEPS):
    jets, j1 = _setup(jets, V)
    return _compare("dphi", label, phi_prime(j1), lambda J: J.phi, jets, j1.V, steps)


def projection_sandwich(jets, V):
    """``max |Pi Pi_s Pi|``; zero because ``Pi`` stays a projection."""
    jets, j1 = _setup(jets, V)
    P = jets.Pi
    return float(np.max(np.abs(P @ Pi_prime(j1) @ P)))


# --------------------------------------------------------------------------
# the cylinder formulas


def _cylinder_parts(U: NormalField):
    grid = U.grid
    jets = jet(grid.cylinder())
    k = grid.k
    comps = U.comps
    gi = jets.ginv
    sphere = np.zeros(grid.n)
    sphere[:k] = 1.0
    gs = jets.g * sphere[:, None] * sphere[None, :]  # metric of the sphere factor
    gsi = gi * sphere[:, None] * sphere[None, :]

    def hess(f):
        # same second-derivative stencils as the immersion jets
        return grid.hessian(f) - np.einsum("...cab,...c->...ab", jets.gamma, grid.gradient(f))

    u = comps[..., 0]
    Hu = hess(u)
    lap_theta = np.einsum("...ab,...ab->...", gsi, Hu)
    lap = np.einsum("...ab,...ab->...", gi, Hu)
    grad_u = np.einsum("...a,...ab,...bi->...i", grid.gradient(u), gi, jets.Xa)
    frame = grid.normal_frame()
    N = frame[..., 0]
    return jets, k, comps, gs, gi, hess, u, Hu, lap_theta, lap, grad_u, frame, N


def cylinder_variation_table(U: NormalField, steps=DEFAULT_STEPS, label="U"):
    """The explicit first variations on the cylinder for ``V = u N + u^a dz_a``.

    Returns a dict of :class:`VariationResult` keyed by quantity: ``A_sq``,
    ``AN_sq``, ``A2_sq``, ``H_norm``, ``N`` and ``A`` (chart components).
    """
    jets, k, comps, gs, gi, hess, u, Hu, lap_theta, lap, grad_u, frame, N = _cylinder_parts(U)
    c = math.sqrt(2.0 / k)
    base = (lap_theta + 0.5 * u)
    dN = -grad_u
    dA = np.einsum("...ab,...i->...abi", gs, grad_u) / math.sqrt(2 * k)
    dA = dA + np.einsum("...ab,...i->...abi", Hu - u[..., None, None] * gs / (2 * k), N)
    for a in range(1, comps.shape[-1]):
        ua = comps[..., a]
        dN = dN - c * np.einsum("...ab,...ab->...", gi, hess(ua))[..., None] * frame[..., a]
        dA = dA + np.einsum("...ab,...i->...abi", hess(ua), frame[..., a])
    analytic = dict(
        A_sq=-c * base,
        AN_sq=-c * base,
        A2_sq=-(math.sqrt(2.0) / (k * math.sqrt(k))) * base,
        H_norm=-lap - 0.5 * u,
        N=dN,
        A=dA,
    )

    def A2_sq(J):
        A2 = np.einsum("...ikz,...kjz->...ij", J.Af, J.Af)
        return np.sum(A2**2, axis=(-1, -2))

    quantities = dict(
        A_sq=lambda J: J.A_sq,
        AN_sq=lambda J: np.sum(J.AN**2, axis=(-1, -2)),
        A2_sq=A2_sq,
        H_norm=lambda J: J.H_norm,
        N=lambda J: J.N_vec,
        A=lambda J: J.A,
    )
    V = U.ambient()
    return {key: _compare(f"cylinder:{key}", label, analytic[key], quantities[key], jets, V, steps)
            for key in analytic}


# --------------------------------------------------------------------------
# Taylor onset of P


DEFAULT_TAYLOR_STEPS = (0.04, 0.02, 0.01)
TAYLOR_RESIDUAL_GATE = 0.05
VANISHING = 1e-9


@dataclass(frozen=True)
class TaylorFit:
    p: float
    residual: float
    steps: tuple
    P_L1: tuple
    vanishing: bool = False

    def as_dict(self):
        return dict(p=self.p, residual=self.residual, steps=list(self.steps), P_L1=list(self.P_L1),
                    vanishing=self.vanishing)


def P_L1(immersion):
    """Gaussian ``L^1`` norm of ``P`` on an immersion."""
    J = jet(immersion)
    return float(np.sum(gaussian_density(J) * np.abs(compute_P(J).value)))


def taylor_P(U, s_list=DEFAULT_TAYLOR_STEPS):
    """Fit ``||P_{sU}||_{L^1} ~ s^p``.

    ``U`` is a normal field (the graph of ``sU`` is used) or a callable
    returning the immersion for a given ``s``, which covers deformations that
    are not normal graphs such as reparametrizations.
    """
    s_list = tuple(float(s) for s in s_list)
    if len(s_list) < 3:
        raise InputError("taylor_P needs at least three amplitudes")
    if isinstance(U, NormalField):
        make = lambda s: graph(U.grid, U.scaled(s))  # noqa: E731
    elif callable(U):
        make = U
    else:
        raise InputError("taylor_P expects a NormalField or a callable")
    vals = tuple(P_L1(make(s)) for s in s_list)
    if max(vals) <= VANISHING:
        return TaylorFit(math.inf, 0.0, s_list, vals, True)
    if min(vals) <= 0:
        raise FitRejected("P vanishes at some amplitudes but not others", math.inf)
    fit = numerics.loglog_fit(s_list, vals)
    if fit.residual > TAYLOR_RESIDUAL_GATE:
        raise FitRejected("log-log fit of ||P||_L1 is not a power law", fit.residual)
    return TaylorFit(fit.slope, fit.residual, s_list, vals)
