"""Drift operators on the model cylinder and its Jacobi fields.

On the cylinder ``L = Lcal + 1/2 + (1/2) Pi_N`` so ``L`` acts on the
components of ``V = V^0 N + V^a dz_a`` as ``(Lcal + 1) V^0`` and
``(Lcal + 1/2) V^a``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .chart import ChartGrid, NormalField
from .errors import InputError
from .gaussian import QuadratureRule, inner, norms, rule_for
from .geometry import jet


def drift(u, grid, jets=None):
    """``Lcal u = Delta u - <grad u, x^T>/2`` for a scalar field on the cylinder."""
    if grid.k == 1:
        out = grid.diff(u, 0, order=2) / grid.radius**2
        for j in range(grid.axis_dim):
            a = 1 + j
            y = grid.coords()[a]
            out = out + grid.diff(u, a, order=2) - 0.5 * y * grid.diff(u, a)
        return out
    jets = jets or jet(grid.cylinder())
    return jets.drift_scalar(u)


def apply_L(V: NormalField, jets=None):
    """The Jacobi operator of the cylinder applied to a normal field."""
    grid = V.grid
    comps = V.comps
    out = np.empty_like(comps)
    if grid.k != 1 and jets is None:
        jets = jet(grid.cylinder())
    out[..., 0] = drift(comps[..., 0], grid, jets) + comps[..., 0]
    for a in range(1, comps.shape[-1]):
        out[..., a] = drift(comps[..., a], grid, jets) + 0.5 * comps[..., a]
    return NormalField(grid, out)


def sphere_laplacian(f, grid, jets=None):
    """Laplacian of a function of the sphere angles (constant along the axis)."""
    if grid.k == 1:
        return grid.diff(f, 0, order=2) / grid.radius**2
    jets = jets or jet(grid.cylinder())
    d = grid.gradient(f)
    lap = np.einsum("...ab,...ab->...", jets.ginv, jets.cov(d, normal=False))
    return lap


# --------------------------------------------------------------------------
# Jacobi fields


@dataclass(frozen=True)
class JacobiElement:
    family: str  # "yf" | "b" | "f_alpha" | "a"
    label: str
    field: NormalField


def raw_jacobi_fields(grid: ChartGrid):
    """Unnormalized Jacobi fields in family order, indices ascending."""
    coords = grid.coords()
    y = coords[grid.k :]
    xs = grid.radius * np.moveaxis(grid.sphere_unit(), -1, 0)  # sphere coordinate functions
    ncomp = grid.N - grid.n
    out = []

    def make(comp, values, family, label):
        raw = np.zeros(grid.shape + (ncomp,))
        raw[..., comp] = values
        out.append(JacobiElement(family, label, NormalField(grid, raw)))

    for j in range(grid.axis_dim):
        for i in range(grid.k + 1):
            make(0, y[j] * xs[i], "yf", f"y{j + 1}*x{i + 1}")
    for i in range(grid.axis_dim):
        for j in range(i, grid.axis_dim):
            make(0, y[i] * y[j] - 2.0 * (i == j), "b", f"y{i + 1}*y{j + 1}" + ("-2" if i == j else ""))
    for a in range(grid.codim_extra):
        for i in range(grid.k + 1):
            make(1 + a, xs[i], "f_alpha", f"z{a + 1}:x{i + 1}")
    for a in range(grid.codim_extra):
        for j in range(grid.axis_dim):
            make(1 + a, y[j], "a", f"z{a + 1}:y{j + 1}")
    return out


def jacobi_dimension(k, n, N):
    m = n - k
    return (k + 1) * m + m * (m + 1) // 2 + (N - n - 1) * (k + 1) + (N - n - 1) * m


@dataclass
class JacobiBasis:
    grid: ChartGrid
    raw: list
    fields: list  # orthonormal, same order
    R: np.ndarray  # raw_i = sum_j R[j, i] fields_j (upper triangular)
    rule: QuadratureRule

    def __len__(self):
        return len(self.fields)

    def gram(self):
        return np.array([[inner(a, b, self.rule) for b in self.fields] for a in self.fields])


def jacobi_basis(grid: ChartGrid, rule=None):
    """Gaussian-orthonormal basis of the Jacobi fields (modified Gram-Schmidt, two passes)."""
    rule = rule_for(rule if rule is not None else grid)
    raw = raw_jacobi_fields(grid)
    q = []
    R = np.zeros((len(raw), len(raw)))
    for i, el in enumerate(raw):
        v = el.field.comps.copy()
        for _ in range(2):
            for j, e in enumerate(q):
                c = float(np.sum(rule.weights * np.sum(v * e, axis=-1)))
                R[j, i] += c
                v = v - c * e
        nrm = math.sqrt(float(np.sum(rule.weights * np.sum(v * v, axis=-1))))
        R[i, i] = nrm
        q.append(v / nrm)
    fields = [NormalField(grid, e) for e in q]
    return JacobiBasis(grid, raw, fields, R, rule)


@dataclass
class JacobiCoefficients:
    """Coefficients of a Jacobi field in the raw family basis."""

    labels: list
    families: list
    values: np.ndarray

    def by_family(self):
        out = {}
        for fam, lab, v in zip(self.families, self.labels, self.values):
            out.setdefault(fam, {})[lab] = float(v)
        return out

    def b_matrix(self, m):
        B = np.zeros((m, m))
        k = 0
        vals = [v for f, v in zip(self.families, self.values) if f == "b"]
        for i in range(m):
            for j in range(i, m):
                B[i, j] = B[j, i] = vals[k]
                k += 1
        return B

    def to_field(self, basis: JacobiBasis):
        comps = sum(v * el.field.comps for v, el in zip(self.values, basis.raw))
        return NormalField(basis.grid, np.asarray(comps))

    def to_json(self):
        return json.dumps(dict(families=self.by_family()), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)["families"]
        labels, fams, vals = [], [], []
        for fam in ("yf", "b", "f_alpha", "a"):
            for lab, v in data.get(fam, {}).items():
                labels.append(lab)
                fams.append(fam)
                vals.append(v)
        return cls(labels, fams, np.array(vals))


def project_jacobi(V: NormalField, basis: JacobiBasis):
    """Gaussian-orthogonal projection onto the Jacobi fields, and the remainder."""
    if V.grid != basis.grid:
        raise InputError("field and basis live on different grids")
    w = basis.rule.weights
    comps = V.comps
    c = np.array([float(np.sum(w * np.sum(comps * e.comps, axis=-1))) for e in basis.fields])
    Jc = sum(ci * e.comps for ci, e in zip(c, basis.fields))
    h = comps - Jc
    # one refinement pass keeps the remainder orthogonal at rounding level
    c2 = np.array([float(np.sum(w * np.sum(h * e.comps, axis=-1))) for e in basis.fields])
    h = h - sum(ci * e.comps for ci, e in zip(c2, basis.fields))
    c = c + c2
    d = np.linalg.solve(basis.R, c)
    coeffs = JacobiCoefficients([el.label for el in basis.raw], [el.family for el in basis.raw], d)
    return coeffs, NormalField(V.grid, h)


def effective_ratio(V: NormalField, basis: JacobiBasis, jets=None):
    """``||V - J||_{W^{2,2}} / ||L V||_{L^2}``, the empirical constant of the decomposition."""
    _, h = project_jacobi(V, basis)
    jets = jets or jet(V.grid.cylinder())
    hn = norms(h, basis.rule, jets).W22
    LV = norms(apply_L(V), basis.rule, jets).L2
    return hn / LV if LV > 0 else float("inf")


# --------------------------------------------------------------------------
# pointwise bounds


@dataclass(frozen=True)
class PointwiseReport:
    label: str
    ball_L2: float
    C_value: float
    C_gradient: float
    C_axis_hessian: float
    axis_hessian_y_variation: float | None  # only for the quadratic family

    def as_dict(self):
        return dict(self.__dict__)


def ball_L2(J: NormalField, rule, radius=None):
    grid = J.grid
    rad = math.sqrt(2 * grid.n) + 1 if radius is None else radius
    r = np.linalg.norm(grid.positions(), axis=-1)
    mask = r <= rad
    return math.sqrt(float(np.sum(rule.weights * mask * np.sum(J.comps**2, axis=-1))))


def _hessians(J, jets):
    d = jets.cov(J.ambient())
    dd = jets.cov(d)
    nd = jets.nd
    grad = jets.to_frame(d, 1)
    hess = np.swapaxes(jets.to_frame(dd, 2), nd, nd + 1)  # Hess_J(i, j)
    return grad, hess


def jacobi_pointwise_bounds(J, label="J", jets=None, rule=None, family=None):
    """Empirical constants in the pointwise bounds for a Jacobi field."""
    grid = J.grid
    jets = jets or jet(grid.cylinder())
    rule = rule_for(rule if rule is not None else jets)
    nrm = ball_L2(J, rule)
    x2 = np.sum(grid.positions() ** 2, axis=-1)
    nd = jets.nd
    grad, hess = _hessians(J, jets)
    gmag = np.sqrt(np.sum(grad**2, axis=(nd, nd + 1)))
    hmag = np.sqrt(np.sum(hess**2, axis=(nd, nd + 1, nd + 2)))
    axis_h = hess[..., :, grid.k :, :]
    amag = np.sqrt(np.sum(axis_h**2, axis=(nd, nd + 1, nd + 2)))
    Jmag = np.linalg.norm(J.comps, axis=-1)
    interior = ~grid.boundary_mask(width=2)
    C0 = float(np.max(Jmag / (1 + x2))) / nrm
    C1 = float(np.max(((gmag + hmag) / (1 + np.sqrt(x2)))[interior])) / nrm
    C2 = float(np.max(amag[interior])) / nrm
    yvar = None
    if family == "b":
        # the axis Hessian of a quadratic-family field does not depend on y
        yvar = 0.0
        for j in range(grid.axis_dim):
            ax = nd - grid.axis_dim + j
            sl = [slice(None)] * axis_h.ndim
            sl[ax] = slice(2, -2)
            inner_h = axis_h[tuple(sl)]
            ref = np.take(inner_h, [0], axis=ax)
            yvar = max(yvar, float(np.max(np.abs(inner_h - ref))))
    return PointwiseReport(label, nrm, C0, C1, C2, yvar)
