"""Rescaled mean curvature flow of normal graphs over the cylinder.

The surface ``p + U(p)`` moves with normal velocity ``phi``.  The
parametrization is kept in the normal-graph gauge by adding the tangential
field that makes the ambient velocity a section of the cylinder's normal
bundle; to first order this is ``Pi_cyl(phi) - nabla_{phi^T_cyl} U``.

Time stepping is IMEX: the cylinder's Jacobi operator ``L`` is implicit (one
dense LU per theta-Fourier mode) and the remainder explicit.  The two
rows at each axis end stay pinned at zero so the tail remains cylindrical.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import numerics, rates
from .chart import ChartGrid, NormalField, graph, tube_radius
from .errors import ConfigurationError, GeometryError, InputError, StiffnessError
from .gaussian import F_value, coarse_weights, cylinder_box_complement, inner, norms, rule_for
from .geometry import compute_P, gaussian_density, jet
from .spectral import apply_L, jacobi_basis, project_jacobi

PIN_WIDTH = 2
MAX_HALVINGS = 10
MONOTONE_TOL = 1e-8  # allowed F increase per unit time
TRACE_COLUMNS = ("t", "F", "tail_bound", "phi_L2", "phi_W12", "U_L2", "dt")


# --------------------------------------------------------------------------
# velocity in the normal-graph gauge


def gauge_velocity(U: NormalField, jets=None):
    """Normal-frame components of ``dU/dt`` and the graph jets.

    Solves ``<p_b, phi + w^a G_a> = 0`` for the tangential correction ``w``
    so that ``G_t = phi + w^a G_a`` is normal to the cylinder.
    """
    grid = U.grid
    if jets is None:
        jets = jet(graph(grid, U))
    phi = jets.phi
    pa = _cylinder_tangents(grid)
    M = np.einsum("...bi,...ai->...ba", pa, jets.Xa)
    rhs = -np.einsum("...bi,...i->...b", pa, phi)
    w = np.linalg.solve(M, rhs[..., None])[..., 0]
    Gt = phi + np.einsum("...a,...ai->...i", w, jets.Xa)
    comps = np.einsum("...ia,...i->...a", grid.normal_frame(), Gt)
    return comps, jets


_TANGENTS = {}


def _cylinder_tangents(grid):
    if grid not in _TANGENTS:
        _TANGENTS[grid] = grid.gradient(grid.positions())
    return _TANGENTS[grid]


def first_order_gauge(U: NormalField, jets=None):
    """``Pi_cyl(phi) - nabla_{phi^T_cyl} U`` in normal-frame components."""
    grid = U.grid
    if jets is None:
        jets = jet(graph(grid, U))
    cyl = jet(grid.cylinder())
    phi = jets.phi
    normal = np.einsum("...ia,...i->...a", grid.normal_frame(), phi)
    tang = np.einsum("...ab,...bi,...i->...a", cyl.ginv, cyl.Xa, phi)  # chart components of phi^T
    dU = grid.gradient(U.comps)  # (..., n, c)
    return normal - np.einsum("...a,...ac->...c", tang, dU)


# --------------------------------------------------------------------------
# implicit part


class _ImplicitL:
    """``(I - dt L)^{-1}`` on the k = 1, n = 2 cylinder with pinned axis ends."""

    def __init__(self, grid: ChartGrid, dt, pin=PIN_WIDTH):
        if grid.k != 1 or grid.axis_dim != 1:
            raise ConfigurationError("the IMEX stepper supports k = 1, n = 2; use scheme='explicit'")
        self.grid = grid
        self.dt = dt
        m = grid.m_y
        y = grid.y
        D1 = numerics.axis_diff_matrix(m, grid.h, 1)
        D2 = numerics.axis_diff_matrix(m, grid.h, 2)
        Ly = D2 - 0.5 * y[:, None] * D1
        wav = np.fft.rfftfreq(grid.m_theta, d=1.0 / grid.m_theta)
        self.pinned = np.r_[0:pin, m - pin : m]
        self.lu = []
        eye = np.eye(m)
        for shift in [1.0] + [0.5] * grid.codim_extra:
            per_mode = []
            for kk in wav:
                A = eye - dt * (Ly + (shift - kk**2 / grid.radius**2) * eye)
                A[self.pinned] = eye[self.pinned]
                per_mode.append(linalg.lu_factor(A))
            self.lu.append(per_mode)

    def solve(self, rhs):
        """``rhs`` has shape ``(m_theta, m_y, c)``."""
        out = np.empty_like(rhs)
        for c in range(rhs.shape[-1]):
            coef = np.fft.rfft(rhs[..., c], axis=0)
            coef[:, self.pinned] = 0.0
            for i, lu in enumerate(self.lu[c]):
                coef[i] = linalg.lu_solve(lu, coef[i].real) + 1j * linalg.lu_solve(lu, coef[i].imag)
            out[..., c] = np.fft.irfft(coef, n=self.grid.m_theta, axis=0)
        return out


def explicit_dt_max(grid):
    """Explicit-Euler bound ``0.2 h_min^2`` with ``h_min`` the smallest arc spacing."""
    arc = grid.radius * 2 * np.pi / grid.m_theta
    h_min = min(arc, grid.h) if grid.axis_dim else arc
    return 0.2 * h_min**2


# --------------------------------------------------------------------------
# states and steps


@dataclass
class FlowState:
    t: float
    U: NormalField
    jets: object = field(repr=False)
    F: float = float("nan")
    F_bound: float = 0.0
    dt: float = 0.0
    max_velocity: float = 0.0
    rejections: int = 0
    excess_error: float = 0.0  # quadrature error of F - F_cyl on the same grid


def _pin(comps, grid, width=PIN_WIDTH):
    comps = comps.copy()
    comps[grid.boundary_mask(width)] = 0.0
    return comps


_CYL_F = {}


def discrete_cylinder_F(grid):
    """``F`` of the cylinder on ``grid`` with the fine and coarse axis rules."""
    if grid not in _CYL_F:
        J = jet(grid.cylinder())
        wc = coarse_weights(J)
        _CYL_F[grid] = (F_value(J.immersion, J).value, float(np.sum(wc)) if wc is not None else None)
    return _CYL_F[grid]


def _excess_error(J, fv):
    """Quadrature error estimate of ``F - F_cyl`` (same grid, so the tails cancel)."""
    wc = coarse_weights(J)
    fine_c, coarse_c = discrete_cylinder_F(J.grid)
    if wc is None or coarse_c is None:
        return fv.bound
    box = fv.value - fv.tail_added
    return abs((box - (fine_c - cylinder_box_complement(J.grid))) - (float(np.sum(wc)) - coarse_c))


def _state(t, U, J, dt=0.0, vmax=0.0, rejections=0):
    fv = F_value(J.immersion, J)
    return FlowState(t, U, J, fv.value, fv.bound, dt, vmax, rejections, _excess_error(J, fv))


def initial_state(U0: NormalField, t=0.0):
    U = NormalField(U0.grid, _pin(U0.comps, U0.grid))
    return _state(t, U, jet(graph(U.grid, U)))


class Stepper:
    """Time stepper with cached implicit factorizations."""

    def __init__(self, grid: ChartGrid, scheme="imex"):
        if scheme not in ("imex", "explicit"):
            raise ConfigurationError(f"unknown scheme {scheme!r}")
        self.grid = grid
        self.scheme = scheme
        self._lu = {}

    def _implicit(self, dt):
        key = round(dt, 15)
        if key not in self._lu:
            if len(self._lu) > 16:
                self._lu.clear()
            self._lu[key] = _ImplicitL(self.grid, dt)
        return self._lu[key]

    def advance(self, state: FlowState, dt):
        """One update without acceptance checks; returns the new components."""
        grid = self.grid
        vel, _ = gauge_velocity(state.U, state.jets)
        U = state.U.comps
        if self.scheme == "explicit":
            if dt > explicit_dt_max(grid) * (1 + 1e-12):
                raise ConfigurationError(f"dt={dt:g} exceeds the explicit bound {explicit_dt_max(grid):.3g}")
            new = U + dt * vel
        else:
            lin = apply_L(state.U).comps
            new = self._implicit(dt).solve(U + dt * (vel - lin))
        return _pin(new, grid), vel

    def step(self, state: FlowState, dt):
        """Advance by ``dt``; halve on ``F`` increase (at most ten times)."""
        if not dt > 0:
            raise InputError("dt must be positive")
        grid = self.grid
        h = dt
        for attempt in range(MAX_HALVINGS + 1):
            comps, vel = self.advance(state, h)
            U = NormalField(grid, comps)
            if U.sup() >= tube_radius(grid):
                raise GeometryError(f"graph left the tube at t={state.t + h:.4g} (|U| = {U.sup():.3g})")
            J = jet(graph(grid, U))
            vmax = float(np.max(np.linalg.norm(vel, axis=-1)))
            new = _state(state.t + h, U, J, h, vmax, attempt)
            if new.F <= state.F + MONOTONE_TOL * h:
                return new
            last = new.F
            h *= 0.5
        raise StiffnessError(f"F increased after {MAX_HALVINGS} halvings at t={state.t:.4g} "
                             f"(last dt {2 * h:.3g}, F {state.F:.12g} -> {last:.12g})")


_STEPPERS = {}


def step(state: FlowState, dt, scheme="imex"):
    key = (state.U.grid, scheme)
    if key not in _STEPPERS:
        _STEPPERS[key] = Stepper(state.U.grid, scheme)
    return _STEPPERS[key].step(state, dt)


# --------------------------------------------------------------------------
# traces


def phi_norms(jets):
    """``||phi||_{L^2}`` and ``||phi||_{W^{1,2}}`` in the Gaussian measure of the surface."""
    w = gaussian_density(jets)
    phi = jets.phi
    L2sq = float(np.sum(w * np.sum(phi**2, axis=-1)))
    d = jets.to_frame(jets.cov(phi), 1)
    G = float(np.sum(w * np.sum(d**2, axis=(-1, -2))))
    return math.sqrt(L2sq), math.sqrt(L2sq + G)


@dataclass
class FlowTrace:
    grid: ChartGrid
    rows: list = field(default_factory=list)
    sample_times: list = field(default_factory=list)
    sample_F: list = field(default_factory=list)
    sample_bound: list = field(default_factory=list)
    final: FlowState | None = field(default=None, repr=False)

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def record(self, state, rule):
        phi_L2, phi_W12 = phi_norms(state.jets)
        U_L2 = math.sqrt(max(inner(state.U, state.U, rule), 0.0))
        self.rows.append(dict(t=state.t, F=state.F, tail_bound=state.F_bound, phi_L2=phi_L2,
                              phi_W12=phi_W12, U_L2=U_L2, dt=state.dt))

    def add_sample(self, state):
        self.sample_times.append(int(round(state.t)))
        self.sample_F.append(state.F)
        self.sample_bound.append(state.excess_error)

    def to_csv(self):
        buf = io.StringIO()
        buf.write(",".join(TRACE_COLUMNS) + "\n")
        for r in self.rows:
            buf.write(",".join(repr(float(r[c])) for c in TRACE_COLUMNS) + "\n")
        return buf.getvalue()

    def sequence(self, F_ref=None):
        """Integer-time samples as a :class:`rates.SequenceRecord`."""
        F = np.array(self.sample_F)
        ref = F[-1] if F_ref is None else F_ref
        return rates.SequenceRecord(np.array(self.sample_times), F - ref, float(ref))

    @property
    def delta(self):
        """``delta_j = sqrt(F_{j-1} - F_{j+2})`` on the integer samples."""
        F = np.array(self.sample_F)
        return np.sqrt(np.maximum(F[:-3] - F[3:], 0.0))

    def shrinker_scales(self):
        return [shrinker_scale(self, T) for T in self.sample_times[1:-1]]


def evolve(U0: NormalField, T_end, dt=0.01, scheme="imex", sample_every=1.0, stepper=None):
    """Run the flow to ``T_end`` recording every accepted step and integer-time samples."""
    if T_end < 0:
        raise InputError("T_end must be nonnegative")
    grid = U0.grid
    stepper = stepper or Stepper(grid, scheme)
    rule = rule_for(grid)
    state = initial_state(U0)
    trace = FlowTrace(grid)
    trace.record(state, rule)
    trace.add_sample(state)
    next_sample = sample_every
    eps = 1e-12
    while state.t < T_end - eps:
        h = min(dt, next_sample - state.t, T_end - state.t)
        state = stepper.step(state, h)
        trace.record(state, rule)
        if abs(state.t - next_sample) < 1e-9:
            state.t = next_sample
            trace.add_sample(state)
            next_sample += sample_every
    trace.final = state
    return trace


def energy_audit(trace: FlowTrace):
    """Compare the total ``F`` drop with the time integral of ``||phi||^2``.

    The integral uses the left-endpoint rule, matching the explicit
    evaluation of the velocity in each step.
    """
    F = trace.column("F")
    phi = trace.column("phi_L2")
    t = trace.column("t")
    drop = float(F[0] - F[-1])
    integral = float(np.sum(np.diff(t) * phi[:-1] ** 2))
    if drop > 1e-14:
        rel = abs(integral - drop) / drop
    else:
        # stationary data: both sides vanish to rounding
        rel = 0.0 if integral <= 1e-14 else math.inf
    return dict(F_drop=drop, phi_integral=integral, relative_error=rel)


def monotone(trace: FlowTrace):
    """True when ``F`` never rose by more than ``1e-8 dt`` in one step."""
    F = trace.column("F")
    dt = trace.column("dt")[1:]
    return bool(np.all(np.diff(F) <= MONOTONE_TOL * dt))


# --------------------------------------------------------------------------
# shrinker scale and the discrete inequality


@dataclass(frozen=True)
class ShrinkerScale:
    T: int
    drop: float
    R: float | None
    status: str  # ok | undefined
    extrapolated: bool = False

    def as_dict(self):
        return dict(T=self.T, drop=self.drop, R=self.R, status=self.status, extrapolated=self.extrapolated)


def shrinker_radius(drop):
    """``R`` with ``exp(-R^2/2) = drop``; ``None`` when the drop is not in ``(0, 1]``."""
    if not 0 < drop <= 1:
        return None
    return math.sqrt(max(-2.0 * math.log(drop), 0.0))


def shrinker_scale(trace: FlowTrace, T):
    times = list(trace.sample_times)
    if T - 1 not in times or T + 1 not in times:
        raise InputError(f"trace has no samples at {T - 1} and {T + 1}")
    drop = trace.sample_F[times.index(T - 1)] - trace.sample_F[times.index(T + 1)]
    R = shrinker_radius(drop)
    if R is None:
        return ShrinkerScale(T, drop, None, "undefined")
    return ShrinkerScale(T, drop, R, "ok", R > trace.grid.R_box)


@dataclass(frozen=True)
class LojaAudit:
    fit: rates.LojaFit
    resolved: int
    passed: bool

    @property
    def alpha(self):
        return self.fit.alpha

    def as_dict(self):
        return dict(fit=self.fit.as_dict(), resolved=self.resolved, passed=self.passed)


def loja_audit(source, F_cyl=None, min_points=6):
    """Fit the exponent of ``|F_T - F_cyl|^{1+alpha} <= K (F_{T-1} - F_{T+1})``.

    ``source`` is a :class:`FlowTrace` or a :class:`rates.SequenceRecord`.
    For traces ``F_cyl`` defaults to the cylinder's ``F`` on the same grid,
    so quadrature errors largely cancel; points whose excess is below ten
    times the error estimate of that difference are discarded.  Fewer than
    ``min_points`` usable points is inconclusive.
    """
    if isinstance(source, FlowTrace):
        F = np.array(source.sample_F)
        bound = np.array(source.sample_bound)
        if F_cyl is None:
            F_cyl = discrete_cylinder_F(source.grid)[0]
        excess = F[1:-1] - F_cyl
        drops = F[:-2] - F[2:]
        ok = (np.abs(excess) > 10 * bound[1:-1]) & (drops > 0)
    elif isinstance(source, rates.SequenceRecord):
        shift = 0.0 if F_cyl is None else source.F_inf - F_cyl
        excess = source.excess[1:-1] + shift
        drops = source.drops
        ok = drops > 0
    else:
        raise InputError("loja_audit expects a FlowTrace or a SequenceRecord")
    n = int(np.sum(ok))
    if n < min_points:
        return LojaAudit(rates.LojaFit("inconclusive", n_points=n), n, False)
    fit = rates.loja_fit(excess[ok], drops[ok], min_points=min_points)
    passed = fit.status == "ok" and fit.alpha > 0 and fit.residual < 0.1
    return LojaAudit(fit, n, bool(passed))


# --------------------------------------------------------------------------
# audits of the graph estimates


@dataclass(frozen=True)
class GradientReport:
    F_excess: float
    phi_L2: float
    U_L2: float
    h_W22: float
    C_gradient: float  # |F(U) - F_cyl| / (||phi|| ||U|| + ||U||^3)
    C_h: float  # ||h||_{W22} / (||U||^2 + ||phi||)

    def as_dict(self):
        return dict(self.__dict__)


def _ratio(num, den):
    if den > 0:
        return num / den
    return 0.0 if num == 0 else math.inf


def gradient_inequality_audit(U: NormalField, jets=None, basis=None):
    """Both gradient-inequality bounds for the graph of ``U``."""
    grid = U.grid
    rule = rule_for(grid)
    if jets is None:
        jets = jet(graph(grid, U))
    basis = basis or jacobi_basis(grid, rule)
    fv = F_value(jets.immersion, jets)
    # box integrals on both sides; the exterior is cylindrical or bounded separately
    F_ex = (fv.value - fv.tail_added) - (discrete_cylinder_F(grid)[0] - cylinder_box_complement(grid))
    phi_L2, _ = phi_norms(jets)
    U_L2 = math.sqrt(inner(U, U, rule))
    _, h = project_jacobi(U, basis)
    h_W22 = norms(h, rule).W22
    C1 = _ratio(abs(F_ex), phi_L2 * U_L2 + U_L2**3)
    C2 = _ratio(h_W22, U_L2**2 + phi_L2)
    return GradientReport(F_ex, phi_L2, U_L2, h_W22, C1, C2)


@dataclass(frozen=True)
class PL1Report:
    P_L1: float
    U_L2: float
    terms: dict
    implied_C: float

    def as_dict(self):
        return dict(P_L1=self.P_L1, U_L2=self.U_L2, terms=self.terms, implied_C=self.implied_C)


def p_l1_audit(U: NormalField, jets=None, kappa=1.0):
    """``||P_U||_{L^1}`` against the four terms of its bound (all constants set to one)."""
    grid = U.grid
    rule = rule_for(grid)
    if jets is None:
        jets = jet(graph(grid, U))
    w = gaussian_density(jets)
    P = float(np.sum(w * np.abs(compute_P(jets).value)))
    phi_L2, phi_W12 = phi_norms(jets)
    U_L2 = math.sqrt(inner(U, U, rule))
    terms = dict(U_cubed=U_L2**3, phi_power=phi_L2 ** (6.0 / (3.0 + kappa)), U_phi=U_L2 * phi_L2,
                 phi_W12_sq=phi_W12**2)
    return PL1Report(P, U_L2, terms, _ratio(P, sum(terms.values())))


@dataclass(frozen=True)
class SweepResult:
    eps: tuple
    values: tuple  # implied constants
    stability: float  # max / min over nonzero constants (1 when all vanish)
    slope: float | None = None  # log-log slope of the measured quantity vs ||U||

    @property
    def stable(self):
        return self.stability <= 2.0

    def as_dict(self):
        return dict(eps=list(self.eps), values=list(self.values), stability=self.stability, slope=self.slope)


DEFAULT_SWEEP = (0.04, 0.02, 0.01)


def _stability(values):
    v = np.array([x for x in values if x > 0 and np.isfinite(x)])
    if len(v) == 0:
        return 1.0 if all(x == 0 for x in values) else math.inf
    if len(v) < len(values):
        return math.inf
    return float(v.max() / v.min())


def amplitude_sweep(U0: NormalField, audit, eps=DEFAULT_SWEEP, **kw):
    """Run ``audit`` on ``eps * U0`` and summarize the implied constants.

    ``audit`` is ``"gradient"`` (both constants), ``"p_l1"`` or ``"kappa"``.
    """
    eps = tuple(float(e) for e in eps)
    if audit == "gradient":
        basis = jacobi_basis(U0.grid)
        reps = [gradient_inequality_audit(U0.scaled(e), basis=basis) for e in eps]
        return (SweepResult(eps, tuple(r.C_gradient for r in reps), _stability([r.C_gradient for r in reps])),
                SweepResult(eps, tuple(r.C_h for r in reps), _stability([r.C_h for r in reps])))
    if audit == "p_l1":
        reps = [p_l1_audit(U0.scaled(e), **kw) for e in eps]
        vals = [r.implied_C for r in reps]
        P = [r.P_L1 for r in reps]
        Un = [r.U_L2 for r in reps]
        slope = numerics.loglog_fit(Un, P).slope if min(P) > 0 else math.inf
        return SweepResult(eps, tuple(vals), _stability(vals), slope)
    if audit == "kappa":
        from .geometry import kappa_audit

        psi = kw.get("psi")
        if psi is None:
            psi = default_cutoff(U0.grid)
        vals = [kappa_audit(jet(graph(U0.grid, U0.scaled(e))), psi).implied_C for e in eps]
        return SweepResult(eps, tuple(vals), _stability(vals))
    raise InputError(f"unknown audit {audit!r}")


def default_cutoff(grid, inner_r=None, outer_r=None):
    """Smooth axis cutoff equal to one on the inner half of the box and zero near its ends."""
    from .chart import taper_profile

    R = grid.R_box
    inner_r = 0.5 * R if inner_r is None else inner_r
    outer_r = 0.8 * R if outer_r is None else outer_r
    return taper_profile(grid.axis_radius(), inner_r, outer_r)


# --------------------------------------------------------------------------
# re-graphing oracle


def regraph(Y, grid: ChartGrid, tol=1e-13, max_iter=100):
    """Normal-graph components of the surface parametrized by ``Y`` on ``grid``.

    For every grid point ``q`` finds the parameter ``p`` whose image lies in
    the normal fiber of the cylinder at ``q`` (fixed-point iteration on
    quintic interpolating splines of ``Y``), then reads off the fiber offset.
    Supports ``k = 1``, ``n = 2``.
    """
    from scipy.interpolate import RectBivariateSpline

    if grid.k != 1 or grid.axis_dim != 1:
        raise ConfigurationError("regraph supports k = 1, n = 2")
    pad = 6
    th = grid.theta
    th_ext = np.concatenate([th[-pad:] - 2 * np.pi, th, th[:pad] + 2 * np.pi])
    Y_ext = np.concatenate([Y[-pad:], Y, Y[:pad]], axis=0)
    splines = [RectBivariateSpline(th_ext, grid.y, Y_ext[..., i], kx=5, ky=5, s=0) for i in range(grid.N)]

    def interp(pts):
        return np.stack([sp(pts[:, 0], pts[:, 1], grid=False) for sp in splines], axis=-1)

    T, Yq = grid.coords()
    q = np.stack([T.ravel(), Yq.ravel()], axis=-1)
    p = q.copy()
    lo, hi = grid.y[0], grid.y[-1]
    for _ in range(max_iter):
        Yp = interp(np.stack([p[:, 0], np.clip(p[:, 1], lo, hi)], axis=-1))
        c_th = np.arctan2(Yp[:, 1], Yp[:, 0])
        d_th = (c_th - q[:, 0] + np.pi) % (2 * np.pi) - np.pi
        d_y = Yp[:, 2] - q[:, 1]
        p[:, 0] = (p[:, 0] - d_th - th[0]) % (2 * np.pi) + th[0]
        p[:, 1] = p[:, 1] - d_y
        if max(np.max(np.abs(d_th)), np.max(np.abs(d_y))) < tol:
            break
    Yp = interp(np.stack([p[:, 0], np.clip(p[:, 1], lo, hi)], axis=-1))
    comps = np.empty((len(q), grid.N - grid.n))
    comps[:, 0] = np.hypot(Yp[:, 0], Yp[:, 1]) - grid.radius
    comps[:, 1:] = Yp[:, 3:]
    return comps.reshape(grid.shape + (grid.N - grid.n,))


def gauge_consistency(U: NormalField, dts=(0.02, 0.01, 0.005)):
    """Explicit gauge step versus moving points by ``dt phi`` and re-graphing.

    Returns the discrepancies and their fitted order in ``dt``.
    """
    vel, J = gauge_velocity(U)
    errs = []
    for dt in dts:
        euler = U.comps + dt * vel
        moved = regraph(J.X + dt * J.phi, U.grid)
        errs.append(float(np.max(np.abs(euler - moved))))
    return dict(dts=list(dts), errors=errs, order=numerics.convergence_order(dts, errs))


# --------------------------------------------------------------------------
# converging trajectories


@dataclass
class ShootResult:
    c: float  # amplitude added along the tapered constant mode
    U0: NormalField
    trace: FlowTrace
    history: list  # (c, final coefficient) pairs


def _constant_mode(grid, inner_r, outer_r):
    from .chart import taper

    return taper(NormalField.from_components(grid, u=np.ones(grid.shape)), inner_r, outer_r)


def shoot(U0: NormalField, T_end, dt=0.02, iters=3, taper_radii=(4.0, 5.5), scheme="imex"):
    """Tune the constant radial mode so the flow stays near the cylinder up to ``T_end``.

    The cylinder is unstable along ``u = const`` (the singular-time shift);
    the amplitude ``c`` of that mode is found by secant iteration on the
    Gaussian projection of ``U(T)`` onto it, over horizons ``T`` doubling up
    to ``T_end`` so that the exponential sensitivity never overshoots.  Other
    unstable directions must be excluded by symmetry of ``U0`` (even in
    ``y``, no odd theta modes).
    """
    grid = U0.grid
    mode = _constant_mode(grid, *taper_radii)
    rule = rule_for(grid)
    stepper = Stepper(grid, scheme)
    mm = inner(mode, mode, rule)

    def run(c, T):
        tr = evolve(U0 + mode * c, T, dt=dt, stepper=stepper)
        return tr, inner(tr.final.U, mode, rule)

    horizons = []
    T = float(T_end)
    while T > 1.0:
        horizons.append(T)
        T /= 2
    horizons = horizons[::-1] or [float(T_end)]
    c = 0.0
    history = []
    for T in horizons:
        tr, a = run(c, T)
        history.append((T, c, a))
        slope = mm * math.exp(T)  # growth of the mode at rate one
        for _ in range(iters):
            c_new = c - a / slope
            try:
                tr_new, a_new = run(c_new, T)
            except GeometryError:
                slope *= 2
                continue
            history.append((T, c_new, a_new))
            if a_new != a:
                slope = (a_new - a) / (c_new - c)
            c, a, tr = c_new, a_new, tr_new
    return ShootResult(c, U0 + mode * c, tr, history)
