"""Pointwise second-order geometry of a discretized immersion.

Conventions: ``A(X, Y)`` is the normal part of ``D_X Y``, ``H = -trace A``,
``phi = x_perp / 2 - H``, ``N = H / |H|`` and ``tau = A / |H|``.  Some
references state the Simons identity with ``H = +trace A``; the residuals here
are written for the sign above, so terms odd in ``H`` flip relative to them.

Tensors are stored with the grid dimensions first, then tensor slots, then
(for normal-valued tensors) an ambient ``R^N`` slot.  Covariant derivatives
are taken in chart coordinates (ambient partials, projection, Christoffel
correction per slot) and then moved to an orthonormal tangent frame, where the
curvature identities are assembled with plain index sums.  For derivative
tensors the derivative slot comes first: ``DT[k, i, j] = (nabla_k T)_ij``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import numerics
from .chart import Immersion
from .errors import ConfigurationError, DegenerateCurvatureError, ResolutionError

H_MIN = 1e-6
_SLOT_LETTERS = "abdefghijkl"  # never 'c' (derivative), 'm' (dummy) or 'z' (ambient)


def _gamma_correction(gam, T, p, vector_valued):
    """Sum over slots of ``Gamma^m_{c a_s} T_{.. m ..}``; derivative slot ``c`` leads."""
    idx = _SLOT_LETTERS[:p]
    tail = "z" if vector_valued else ""
    out = 0.0
    for s in range(p):
        src = idx[:s] + "m" + idx[s + 1 :]
        out = out + np.einsum(f"...mc{idx[s]},...{src}{tail}->...c{idx}{tail}", gam, T)
    return out


class GeometryJet:
    """All pointwise geometric quantities of an immersion, computed lazily."""

    def __init__(self, immersion: Immersion, h_min=H_MIN):
        self.immersion = immersion
        self.grid = grid = immersion.grid
        self.h_min = h_min
        self.nd = len(grid.shape)
        X = immersion.X
        self.X = X
        self.Xa = grid.gradient(X)  # (..., n, N)
        self.Xab = grid.hessian(X)  # (..., n, n, N)
        g = np.einsum("...ai,...bi->...ab", self.Xa, self.Xa)
        self.g = 0.5 * (g + np.swapaxes(g, -1, -2))
        self.ginv = np.linalg.inv(self.g)
        self.sqrt_det_g = np.sqrt(np.linalg.det(self.g))
        self.gamma = np.einsum("...ml,...li,...abi->...mab", self.ginv, self.Xa, self.Xab)
        eye = np.eye(grid.N)
        self.Pi = eye - np.einsum("...ai,...ab,...bj->...ij", self.Xa, self.ginv, self.Xa)
        idem = np.max(np.abs(np.einsum("...ij,...jk->...ik", self.Pi, self.Pi) - self.Pi))
        if idem > 1e-8:
            raise ResolutionError(f"normal projector idempotency residual {idem:.2e} exceeds 1e-8")
        # orthonormal frame E_i = e[a, i] X_a from the Cholesky factor of g
        chol = np.linalg.cholesky(self.g)
        self.e = np.swapaxes(np.linalg.inv(chol), -1, -2)
        self.E = np.einsum("...ai,...aj->...ij", self.e, self.Xa)  # (..., n, N) frame vectors

    # ---- helpers

    def project(self, V):
        """Apply ``Pi`` to a field whose last axis is ambient; extra slots broadcast."""
        extra = V.ndim - self.nd - 1
        P = self.Pi.reshape(self.grid.shape + (1,) * extra + (self.grid.N, self.grid.N))
        return np.einsum("...ij,...j->...i", P, V)

    def to_frame(self, T, p):
        """Contract the first ``p`` tensor slots with the orthonormal frame."""
        for s in range(p):
            T = _frame_slot(self.e, T, s, self.nd)
        return T

    def cov(self, T, normal=True):
        """Covariant derivative: ``nabla^perp`` for normal-valued, Levi-Civita otherwise."""
        p = T.ndim - self.nd - (1 if normal else 0)
        dT = self.grid.gradient(T)
        if normal:
            dT = self.project(dT)
        if p:
            dT = dT - _gamma_correction(self.gamma, T, p, normal)
        return dT

    # ---- basic fields

    @cached_property
    def A(self):
        """Second fundamental form in chart coordinates ``(..., n, n, N)``."""
        A = self.project(self.Xab)
        return 0.5 * (A + np.swapaxes(A, -2, -3))

    @cached_property
    def H(self):
        return -np.einsum("...ab,...abi->...i", self.ginv, self.A)

    @cached_property
    def H_norm(self):
        return np.linalg.norm(self.H, axis=-1)

    @cached_property
    def x_perp(self):
        return self.project(self.X)

    @cached_property
    def x_tan(self):
        return self.X - self.x_perp

    @cached_property
    def xT(self):
        """Frame components of the tangential position ``x^T``."""
        return np.einsum("...ij,...j->...i", self.E, self.X)

    @cached_property
    def phi(self):
        return 0.5 * self.x_perp - self.H

    @cached_property
    def degenerate_points(self):
        return np.argwhere(self.H_norm < self.h_min)

    def require_tau(self):
        bad = self.degenerate_points
        if len(bad):
            raise DegenerateCurvatureError(f"|H| < {self.h_min:g} at {len(bad)} grid points", bad)

    @cached_property
    def N_vec(self):
        self.require_tau()
        return self.H / self.H_norm[..., None]

    @cached_property
    def tau(self):
        self.require_tau()
        return self.A / self.H_norm[..., None, None, None]

    # ---- frame components

    @cached_property
    def Af(self):
        return self.to_frame(self.A, 2)

    @cached_property
    def A_sq(self):
        return np.einsum("...ijz,...ijz->...", self.Af, self.Af)

    @cached_property
    def A_norm(self):
        return np.sqrt(self.A_sq)

    @cached_property
    def AN(self):
        return np.einsum("...ijz,...z->...ij", self.Af, self.N_vec)

    @cached_property
    def A_xT(self):
        """``A(x^T, E_i)`` as ``(..., n, N)``."""
        return np.einsum("...j,...jiz->...iz", self.xT, self.Af)

    @cached_property
    def tauN(self):
        return np.einsum("...ijz,...z->...ij", self.to_frame(self.tau, 2), self.N_vec)

    # ---- derivatives (frame components)

    @cached_property
    def dA_coord(self):
        return self.cov(self.A)

    @cached_property
    def dA(self):
        return self.to_frame(self.dA_coord, 3)

    @cached_property
    def ddA(self):
        return self.to_frame(self.cov(self.dA_coord), 4)

    def _first_second(self, V):
        d = self.cov(V)
        return self.to_frame(d, 1), self.to_frame(self.cov(d), 2)

    @cached_property
    def _phi_derivs(self):
        return self._first_second(self.phi)

    @property
    def dphi(self):
        """``nabla^perp_i phi``, shape ``(..., n, N)``."""
        return self._phi_derivs[0]

    @property
    def hess_phi(self):
        """``Hess_phi(E_i, E_j) = nabla_j nabla_i phi - nabla_{nabla_j E_i} phi``."""
        return np.swapaxes(self._phi_derivs[1], -2, -3)

    @cached_property
    def _H_derivs(self):
        return self._first_second(self.H)

    @property
    def dH(self):
        return self._H_derivs[0]

    @property
    def hess_H(self):
        return np.swapaxes(self._H_derivs[1], -2, -3)

    @cached_property
    def dN(self):
        return self.to_frame(self.cov(self.N_vec), 1)

    def scalar_grad(self, f):
        """Frame components of the gradient of a scalar grid field."""
        return np.einsum("...ai,...a->...i", self.e, self.grid.gradient(f))

    def drift_scalar(self, f):
        """``Lcal f = Delta f - <grad f, x^T> / 2`` for a scalar field."""
        d = self.grid.gradient(f)
        dd = self.cov(d, normal=False)
        lap = np.einsum("...ab,...ab->...", self.ginv, dd)
        return lap - 0.5 * np.einsum("...i,...ai,...a->...", self.xT, self.e, d)

    def drift_normal(self, T, p):
        """``Lcal`` on a normal-valued ``p``-tensor given in chart coordinates.

        Returns frame components of ``Delta T - nabla_{x^T} T / 2``.
        """
        d = self.cov(T)
        dd = self.to_frame(self.cov(d), p + 2)
        df = self.to_frame(d, p + 1)
        lap = np.trace(dd, axis1=self.nd, axis2=self.nd + 1)
        xT = self.xT.reshape(self.xT.shape + (1,) * (df.ndim - self.nd - 1))
        return lap - 0.5 * np.sum(xT * df, axis=self.nd)

    # ---- the P functional

    @cached_property
    def P_field(self):
        self.require_tau()
        return compute_P(self)


def _frame_slot(e, T, s, nd):
    """Contract tensor slot ``s`` of ``T`` with ``e[a, i]``."""
    Tm = np.moveaxis(T, nd + s, -1)
    # broadcast e over the non-grid axes of Tm
    shape = e.shape[:nd] + (1,) * (Tm.ndim - nd - 1) + e.shape[nd:]
    out = np.matmul(Tm[..., None, :], e.reshape(shape))[..., 0, :]
    return np.moveaxis(out, -1, nd + s)


def jet(immersion, h_min=H_MIN):
    return GeometryJet(immersion, h_min)


# --------------------------------------------------------------------------
# P


@dataclass(frozen=True)
class PField:
    value: np.ndarray
    terms: dict = field(default_factory=dict)

    TERM_NAMES = ("A2_AN2", "A_squared", "cross", "gram", "position")


def compute_P(jets: GeometryJet) -> PField:
    """The codimension defect ``P`` with its five constituent terms."""
    jets.require_tau()
    Af = jets.Af
    A2n = jets.A_sq
    AN = jets.AN
    G = np.einsum("...ijz,...klz->...ijkl", Af, Af)
    A2 = np.einsum("...ikkj->...ij", G)
    t1 = A2n * np.einsum("...ij,...ij->...", AN, AN)
    t2 = -2.0 * np.einsum("...ij,...ij->...", A2, A2)
    t3 = 2.0 * np.einsum("...jlik,...lkij->...", G, G)
    t4 = -np.einsum("...ijkl,...ijkl->...", G, G)
    AxT = jets.A_xT
    ANxT = np.einsum("...iz,...z->...i", AxT, jets.N_vec)
    t5 = A2n / (4 * jets.H_norm**2) * (np.sum(ANxT**2, axis=-1) - np.sum(AxT**2, axis=(-1, -2)))
    terms = dict(zip(PField.TERM_NAMES, (t1, t2, t3, t4, t5)))
    return PField(t1 + t2 + t3 + t4 + t5, terms)


def tauN_spectrum(jets: GeometryJet):
    """Eigenvalues of ``tau^N`` under the ``T x + lambda x = 0`` convention."""
    vals, _ = numerics.sym_eig_batch(-jets.tauN)
    return vals


# --------------------------------------------------------------------------
# identity residuals


def gaussian_density(jets: GeometryJet):
    """Quadrature weight: cell measure, area element and normalized Gaussian."""
    n = jets.grid.n
    r2 = np.sum(jets.X**2, axis=-1)
    return jets.grid.cell_measure() * jets.sqrt_det_g * (4 * np.pi) ** (-n / 2) * np.exp(-r2 / 4)


@dataclass(frozen=True)
class Residual:
    name: str
    field: np.ndarray
    L2: float
    max: float

    def record(self, resolution, fitted_order=None):
        return dict(identity_name=self.name, resolution=resolution, residual_L2=self.L2,
                    residual_max=self.max, fitted_order=fitted_order)


def _residual(jets, name, R):
    nd = jets.nd
    pointwise = np.sqrt(np.sum(R.reshape(R.shape[:nd] + (-1,)) ** 2, axis=-1))
    w = gaussian_density(jets)
    return Residual(name, R, float(np.sqrt(np.sum(w * pointwise**2))), float(np.max(pointwise)))


def L_on_A(jets):
    """``(L A)_ij`` in frame components."""
    Af = jets.Af
    LA = jets.drift_normal(jets.A, 2) + 0.5 * Af
    LA += np.einsum("...ijy,...kly,...klz->...ijz", Af, Af, Af)
    return LA


def simons_rhs(jets):
    Af = jets.Af
    out = Af.copy()
    out += 2 * np.einsum("...jly,...iky,...lkz->...ijz", Af, Af, Af)
    out -= np.einsum("...mly,...ily,...jmz->...ijz", Af, Af, Af)
    out -= np.einsum("...jly,...mly,...imz->...ijz", Af, Af, Af)
    out += jets.hess_phi
    Aphi = np.einsum("...jmz,...z->...jm", Af, jets.phi)
    out += np.einsum("...jm,...imz->...ijz", Aphi, Af)
    return out


def cubic_terms(jets):
    """The cubic ``A`` combination of the Simons identity (zero for hypersurfaces)."""
    Af = jets.Af
    out = 2 * np.einsum("...jly,...iky,...lkz->...ijz", Af, Af, Af)
    out -= np.einsum("...mly,...ily,...jmz->...ijz", Af, Af, Af)
    out -= np.einsum("...jly,...mly,...imz->...ijz", Af, Af, Af)
    return out


def L_on_H(jets):
    Af = jets.Af
    LH = jets.drift_normal(jets.H, 0) + 0.5 * jets.H
    LH += np.einsum("...y,...kly,...klz->...z", jets.H, Af, Af)
    return LH


def simons_residual(jets):
    """Residuals of the Simons identity for ``L A`` and its trace for ``L H``."""
    R_A = L_on_A(jets) - simons_rhs(jets)
    Aphi = np.einsum("...imz,...z->...im", jets.Af, jets.phi)
    lap_phi = np.trace(jets._phi_derivs[1], axis1=jets.nd, axis2=jets.nd + 1)
    rhs_H = jets.H - lap_phi - np.einsum("...im,...imz->...z", Aphi, jets.Af)
    R_H = L_on_H(jets) - rhs_H
    return _residual(jets, "simons_LA", R_A), _residual(jets, "simons_LH", R_H)


def gradH_residual(jets):
    """Residuals of the first and second derivative identities for ``H``."""
    Af = jets.Af
    R1 = jets.dH + 0.5 * jets.A_xT + jets.dphi
    xperp_A = np.einsum("...jkz,...z->...jk", Af, jets.x_perp)
    nabla_xT_A = np.einsum("...k,...kijz->...ijz", jets.xT, jets.dA)
    rhs = jets.hess_phi + 0.5 * nabla_xT_A + 0.5 * Af + 0.5 * np.einsum("...ikz,...jk->...ijz", Af, xperp_A)
    R2 = -jets.hess_H - rhs
    return _residual(jets, "gradH", R1), _residual(jets, "hessH", R2)


def nablaN_terms(jets):
    """The three expressions of the ``|H|^2 |nabla N|^2`` corollary."""
    jets.require_tau()
    Nv = jets.N_vec
    lhs = jets.H_norm**2 * np.sum(jets.dN**2, axis=(-1, -2))
    grad_absH = jets.scalar_grad(jets.H_norm)
    middle = np.sum(jets.dH**2, axis=(-1, -2)) - np.sum(grad_absH**2, axis=-1)
    AxT = jets.A_xT
    ANxT = np.einsum("...iz,...z->...i", AxT, Nv)
    dphi = jets.dphi
    dphiN = np.einsum("...iz,...z->...i", dphi, Nv)
    right = (0.25 * np.sum(AxT**2, axis=(-1, -2)) - 0.25 * np.sum(ANxT**2, axis=-1)
             + np.einsum("...iz,...iz->...", AxT, dphi) + np.sum(dphi**2, axis=(-1, -2))
             - np.einsum("...i,...i->...", ANxT, dphiN) - np.sum(dphiN**2, axis=-1))
    return lhs, middle, right


def nablaN_residual(jets):
    lhs, middle, right = nablaN_terms(jets)
    return (_residual(jets, "nablaN_first", lhs - middle), _residual(jets, "nablaN_second", lhs - right),
            _residual(jets, "nablaN_cross", middle - right))


def drift_tau_lhs(jets):
    """``|H| <A, L_{|H|^2} tau>`` with the weighted drift Laplacian."""
    jets.require_tau()
    tau = jets.tau
    d = jets.cov(tau)
    dd = jets.to_frame(jets.cov(d), 4)
    df = jets.to_frame(d, 3)
    lap = np.trace(dd, axis1=jets.nd, axis2=jets.nd + 1)
    glog = jets.scalar_grad(np.log(jets.H_norm**2))
    drift = -0.5 * jets.xT + glog
    Ltau = lap + np.einsum("...k,...kijz->...ijz", drift, df)
    return jets.H_norm * np.einsum("...ijz,...ijz->...", jets.Af, Ltau)


def drift_tau_rhs(jets):
    Af = jets.Af
    Nv = jets.N_vec
    Hn = jets.H_norm
    A2 = jets.A_sq
    Aphi = np.einsum("...ijz,...z->...ij", Af, jets.phi)
    AN = jets.AN
    dphi = jets.dphi
    dphiN = np.einsum("...iz,...z->...i", dphi, Nv)
    AxT = jets.A_xT
    ANxT = np.einsum("...iz,...z->...i", AxT, Nv)
    lap_phi = np.trace(jets._phi_derivs[1], axis1=jets.nd, axis2=jets.nd + 1)
    rhs = jets.P_field.value
    rhs = rhs + np.einsum("...jm,...imz,...ijz->...", Aphi, Af, Af)
    rhs = rhs + np.einsum("...ijz,...ijz->...", jets.hess_phi, Af)
    rhs = rhs + A2 / Hn * (np.einsum("...z,...z->...", lap_phi, Nv) + np.einsum("...ij,...ij->...", Aphi, AN))
    rhs = rhs + A2 / Hn**2 * (np.einsum("...i,...i->...", ANxT, dphiN) + np.sum(dphiN**2, axis=-1)
                              - np.einsum("...iz,...iz->...", AxT, dphi) - np.sum(dphi**2, axis=(-1, -2)))
    return rhs


def drift_tau_residual(jets):
    return _residual(jets, "drift_tau", drift_tau_lhs(jets) - drift_tau_rhs(jets))


@dataclass(frozen=True)
class KappaReport:
    lhs: float
    explicit_term: float
    phi_terms: tuple
    implied_C: float
    P_contribution: float

    def as_dict(self):
        return dict(lhs=self.lhs, rhs_terms=dict(explicit=self.explicit_term, phi_A=self.phi_terms[0],
                    phi_grad=self.phi_terms[1]), implied_C=self.implied_C, P_contribution=self.P_contribution)


EXPLICIT_CONSTANT = 4.0


def kappa_audit(jets, psi):
    """Both sides of the weighted integral bound for ``nabla tau``.

    Reports the smallest constant ``C`` in front of the ``phi`` terms that
    makes the inequality hold; the cutoff term keeps its constant 4.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape != jets.grid.shape:
        raise ConfigurationError("cutoff has the wrong shape")
    if np.any(psi[jets.grid.boundary_mask(width=3)] != 0):
        raise ConfigurationError("cutoff support touches the grid boundary")
    supp = psi != 0
    bad = np.argwhere(supp & (jets.H_norm < jets.h_min))
    if len(bad):
        raise DegenerateCurvatureError("|H| vanishes on the cutoff support", bad)
    w = gaussian_density(jets)
    Hn = jets.H_norm
    d = jets.cov(jets.tau)
    dtau2 = np.sum(jets.to_frame(d, 3) ** 2, axis=tuple(range(jets.nd, d.ndim)))
    P = jets.P_field.value
    psi2 = psi**2
    lhs = float(np.sum(w * psi2 * (dtau2 * Hn**2 + 2 * P)))
    P_part = float(np.sum(w * psi2 * 2 * P))
    grad_psi = jets.scalar_grad(psi)
    explicit = EXPLICIT_CONSTANT * float(np.sum(w * jets.A_sq * np.sum(grad_psi**2, axis=-1)))
    Anorm = jets.A_norm
    phi_norm = np.linalg.norm(jets.phi, axis=-1)
    hess_norm = np.sqrt(np.sum(jets.hess_phi**2, axis=(-1, -2, -3)))
    dphi_norm = np.sqrt(np.sum(jets.dphi**2, axis=(-1, -2)))
    AxT_norm = np.sqrt(np.sum(jets.A_xT**2, axis=(-1, -2)))
    with np.errstate(divide="ignore", invalid="ignore"):
        f1 = np.where(supp, (Anorm + jets.A_sq / Hn) * (jets.A_sq * phi_norm + hess_norm), 0.0)
        f2 = np.where(supp, jets.A_sq * dphi_norm / Hn**2 * (AxT_norm + dphi_norm), 0.0)
    t1 = float(np.sum(w * psi2 * f1))
    t2 = float(np.sum(w * psi2 * f2))
    excess = lhs - explicit
    if excess <= 0:
        C = 0.0
    elif t1 + t2 > 0:
        C = excess / (t1 + t2)
    else:
        C = float("inf")
    return KappaReport(lhs, explicit, (t1, t2), C, P_part)
