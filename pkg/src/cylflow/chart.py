"""The discretized model cylinder and normal graphs over it.

The cylinder ``S^k_{sqrt(2k)} x R^{n-k}`` sits in ``R^N`` with ambient
coordinates ordered as: sphere factor (``k+1`` entries), axis ``y_1..y_{n-k}``,
then the flat normal directions ``z_1..z_{N-n-1}``.

Chart coordinates are the sphere angles followed by the axis coordinates.
For ``k = 1`` the angle is a uniform periodic ``theta``.  For ``k = 2`` the
sphere is covered twice by a doubled latitude/longitude grid (colatitude
extended to a full period, offset to avoid the poles) so both angles can be
differentiated spectrally; this case is experimental.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import numerics
from .errors import ConfigurationError, GeometryError, InputError, ResolutionError

SUPPORTED_K = (1, 2)


@dataclass(frozen=True)
class ChartGrid:
    k: int
    n: int
    N: int
    m_theta: int
    R_box: float
    m_y: int

    def __post_init__(self):
        k, n, N = self.k, self.n, self.N
        if k not in SUPPORTED_K:
            raise ConfigurationError(f"sphere dimension k={k} is not supported (k in {SUPPORTED_K})")
        if n < k:
            raise ConfigurationError(f"need n >= k, got n={n}, k={k}")
        if N < n + 1:
            raise ConfigurationError(f"need N >= n+1, got N={N}, n={n}")
        if k == 1 and self.m_theta < 16:
            raise ResolutionError(f"m_theta={self.m_theta} is below the floor 16 for k=1")
        if k == 2 and (self.m_theta < 8 or self.m_theta % 2):
            raise ResolutionError("k=2 needs an even m_theta >= 8")
        if self.axis_dim > 0:
            if self.m_y < 7:
                raise ResolutionError(f"m_y={self.m_y} is below the floor 7")
            floor = np.sqrt(2 * n) + 2
            if self.R_box < floor:
                raise ConfigurationError(f"R_box={self.R_box} is below sqrt(2n)+2={floor:.4f}")

    # ---- dimensions

    @property
    def radius(self):
        return float(np.sqrt(2 * self.k))

    @property
    def axis_dim(self):
        return self.n - self.k

    @property
    def codim_extra(self):
        """Number of flat normal directions ``z_alpha``."""
        return self.N - self.n - 1

    @property
    def experimental(self):
        return self.k != 1

    @property
    def shape(self):
        return (self.m_theta,) * self.k + (self.m_y,) * self.axis_dim

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def theta(self):
        return 2 * np.pi * np.arange(self.m_theta) / self.m_theta

    @property
    def colatitude(self):
        # doubled colatitude, offset half a cell so no node sits on a pole
        return 2 * np.pi * (np.arange(self.m_theta) + 0.5) / self.m_theta

    @property
    def y(self):
        return np.linspace(-self.R_box, self.R_box, self.m_y)

    @property
    def h(self):
        return 2 * self.R_box / (self.m_y - 1)

    def is_periodic(self, a):
        return a < self.k

    def spacing(self, a):
        return 2 * np.pi / self.m_theta if self.is_periodic(a) else self.h

    # ---- coordinates

    def coords(self):
        """Chart coordinate arrays, one per chart axis, each of ``shape``."""
        axes = []
        if self.k == 1:
            axes.append(self.theta)
        else:
            axes.extend([self.colatitude, self.theta])
        axes.extend([self.y] * self.axis_dim)
        return np.meshgrid(*axes, indexing="ij")

    def axis_coords(self):
        """Axis coordinates stacked on a trailing dimension ``(..., n-k)``."""
        c = self.coords()[self.k :]
        if not c:
            return np.zeros(self.shape + (0,))
        return np.stack(c, axis=-1)

    def axis_radius(self):
        return np.linalg.norm(self.axis_coords(), axis=-1)

    def sphere_unit(self):
        """Unit radial vector of the sphere factor, shape ``(..., k+1)``."""
        c = self.coords()
        if self.k == 1:
            return np.stack([np.cos(c[0]), np.sin(c[0])], axis=-1)
        vt, ph = c[0], c[1]
        return np.stack([np.sin(vt) * np.cos(ph), np.sin(vt) * np.sin(ph), np.cos(vt)], axis=-1)

    def positions(self):
        """Cylinder positions, shape ``shape + (N,)``."""
        x = np.zeros(self.shape + (self.N,))
        x[..., : self.k + 1] = self.radius * self.sphere_unit()
        x[..., self.k + 1 : self.n + 1] = self.axis_coords()
        return x

    def principal_normal(self):
        """Outward unit normal ``N`` of the cylinder (the direction of ``H``)."""
        nu = np.zeros(self.shape + (self.N,))
        nu[..., : self.k + 1] = self.sphere_unit()
        return nu

    def normal_frame(self):
        """Orthonormal normal frame ``[N, dz_1, ...]``, shape ``shape + (N, N-n)``."""
        frame = np.zeros(self.shape + (self.N, self.N - self.n))
        frame[..., 0] = self.principal_normal()
        for a in range(self.codim_extra):
            frame[..., self.n + 1 + a, 1 + a] = 1.0
        return frame

    # ---- calculus on the grid

    def diff(self, f, a, order=1):
        """Derivative of a grid field along chart axis ``a``; grid dims lead."""
        if self.is_periodic(a):
            return numerics.periodic_diff(f, order=order, axis=a)
        return numerics.axis_diff(f, self.h, order=order, axis=a)

    def diff2(self, f, a, b):
        if a == b:
            return self.diff(f, a, order=2)
        return self.diff(self.diff(f, a), b)

    def gradient(self, f):
        """All first partials, stacked on a new axis after the grid dims."""
        nd = len(self.shape)
        return np.stack([self.diff(f, a) for a in range(self.n)], axis=nd)

    def hessian(self, f):
        nd = len(self.shape)
        rows = []
        for a in range(self.n):
            rows.append(np.stack([self.diff2(f, a, b) for b in range(self.n)], axis=nd))
        return np.stack(rows, axis=nd)

    def cell_measure(self):
        """Coordinate cell measure (without the Jacobian)."""
        w = np.full(self.shape, (2 * np.pi / self.m_theta) ** self.k)
        if self.k == 2:
            w *= 0.5  # the doubled grid covers the sphere twice
        if self.axis_dim:
            wy = numerics.axis_weights(self.m_y, self.h)
            for j in range(self.axis_dim):
                shape = [1] * len(self.shape)
                shape[self.k + j] = self.m_y
                w = w * wy.reshape(shape)
        return w

    def boundary_mask(self, width=1):
        """Grid points within ``width`` rows of an axis end."""
        mask = np.zeros(self.shape, dtype=bool)
        for j in range(self.axis_dim):
            idx = [slice(None)] * len(self.shape)
            idx[self.k + j] = np.r_[0:width, self.m_y - width : self.m_y]
            mask[tuple(idx)] = True
        return mask

    def header(self):
        return dict(k=self.k, n=self.n, N=self.N, m_theta=self.m_theta, R_box=self.R_box, m_y=self.m_y)

    def refined(self, m_y=None, m_theta=None):
        return replace(self, m_y=m_y or self.m_y, m_theta=m_theta or self.m_theta)

    def cylinder(self):
        return Immersion(self, self.positions(), "cylinder", NormalField.zeros(self))


def build_cylinder(k, n, N, m_theta, R_box, m_y):
    """Validated grid on ``S^k_{sqrt(2k)} x R^{n-k}`` inside ``R^N``."""
    return ChartGrid(int(k), int(n), int(N), int(m_theta), float(R_box), int(m_y))


# --------------------------------------------------------------------------
# normal fields


def smoothstep5(t):
    """Quintic smoothstep: C^2, monotone, 0 at t<=0 and 1 at t>=1."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10 - 15 * t + 6 * t**2)


def taper_profile(radius, inner, outer):
    return 1.0 - smoothstep5((np.asarray(radius) - inner) / (outer - inner))


@dataclass(frozen=True)
class NormalField:
    """Section of the cylinder's normal bundle sampled on a grid.

    ``raw[..., 0]`` is the component along ``N`` and ``raw[..., 1 + a]`` the
    component along ``dz_{a+1}``.  ``profile`` is an optional ``(inner,
    outer)`` taper that multiplies the raw values.
    """

    grid: ChartGrid
    raw: np.ndarray
    profile: tuple | None = None

    def __post_init__(self):
        want = self.grid.shape + (self.grid.N - self.grid.n,)
        if self.raw.shape != want:
            raise InputError(f"normal field has shape {self.raw.shape}, expected {want}")
        if not np.all(np.isfinite(self.raw)):
            raise InputError("normal field has non-finite values")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape + (grid.N - grid.n,)))

    @classmethod
    def from_components(cls, grid, u=None, ua=()):
        raw = np.zeros(grid.shape + (grid.N - grid.n,))
        if len(ua) > grid.codim_extra:
            raise InputError(f"{len(ua)} flat components given, the grid has {grid.codim_extra}")
        if u is not None:
            raw[..., 0] = u
        for a, comp in enumerate(ua):
            if comp is not None:
                raw[..., 1 + a] = comp
        return cls(grid, raw)

    @property
    def weight(self):
        if self.profile is None:
            return np.ones(self.grid.shape)
        return taper_profile(self.grid.axis_radius(), *self.profile)

    @property
    def comps(self):
        return self.raw * self.weight[..., None]

    @property
    def u(self):
        return self.comps[..., 0]

    def ambient(self):
        """The field as ambient vectors, shape ``shape + (N,)``."""
        return np.einsum("...ia,...a->...i", self.grid.normal_frame(), self.comps)

    def scaled(self, s):
        return NormalField(self.grid, self.raw * s, self.profile)

    def __add__(self, other):
        return NormalField(self.grid, self.comps + other.comps)

    def __sub__(self, other):
        return NormalField(self.grid, self.comps - other.comps)

    def __mul__(self, s):
        return self.scaled(float(s))

    __rmul__ = __mul__

    def sup(self):
        return float(np.max(np.linalg.norm(self.comps, axis=-1))) if self.raw.size else 0.0


def taper(U, inner, outer):
    """Blend ``U`` to zero between axis radii ``inner`` and ``outer``.

    Applying the same taper twice is a no-op: profiles combine by pointwise
    minimum rather than by repeated multiplication.
    """
    if not inner < outer:
        raise ConfigurationError(f"taper needs inner < outer, got {inner} >= {outer}")
    if outer > U.grid.R_box:
        raise ConfigurationError(f"taper outer radius {outer} exceeds R_box={U.grid.R_box}")
    if U.profile is None:
        return NormalField(U.grid, U.raw, (float(inner), float(outer)))
    if U.profile == (float(inner), float(outer)):
        return U
    # different profiles: bake the old one in and keep the new one as the profile
    baked = U.raw * np.minimum(U.weight, 1.0)[..., None]
    return NormalField(U.grid, baked, (float(inner), float(outer)))


# --------------------------------------------------------------------------
# immersions


@dataclass(frozen=True)
class Immersion:
    grid: ChartGrid
    X: np.ndarray
    provenance: str = "explicit"
    field: NormalField | None = None

    def __post_init__(self):
        if self.X.shape != self.grid.shape + (self.grid.N,):
            raise InputError(f"immersion has shape {self.X.shape}")
        if not np.all(np.isfinite(self.X)):
            raise InputError("immersion has non-finite positions")

    @property
    def cylindrical_tail(self):
        """True when the surface coincides with the cylinder at the axis ends."""
        if self.provenance == "cylinder":
            return True
        if self.field is None:
            return False
        edge = self.grid.boundary_mask(width=2)
        return bool(np.all(self.field.comps[edge] == 0.0))


def tube_radius(grid):
    return grid.radius / 2


def graph(grid, U):
    """Graph ``p + U(p)`` of a normal field over the cylinder."""
    if U.grid != grid:
        raise InputError("field lives on a different grid")
    sup = U.sup()
    if sup >= tube_radius(grid):
        raise GeometryError(f"|U| reaches {sup:.4f}, beyond the tube radius {tube_radius(grid):.4f}")
    return Immersion(grid, grid.positions() + U.ambient(), "graph", U)


# --------------------------------------------------------------------------
# serialization: CSV with a header line, or a flat little-endian float64 blob


def _flat_columns(U):
    grid = U.grid
    cols = {}
    for name, c in zip(_coord_names(grid), grid.coords()):
        cols[name] = c.reshape(-1)
    comps = U.comps.reshape(-1, grid.N - grid.n)
    cols["u"] = comps[:, 0]
    for a in range(grid.codim_extra):
        cols[f"u{a + 1}"] = comps[:, 1 + a]
    return cols


def _coord_names(grid):
    names = ["theta"] if grid.k == 1 else ["colatitude", "theta"]
    return names + [f"y{j + 1}" for j in range(grid.axis_dim)]


def save_field_csv(path, U):
    """Write ``U`` with a ``# {grid header}`` line; rows run theta-major, then y."""
    cols = _flat_columns(U)
    header = json.dumps(U.grid.header(), sort_keys=True)
    data = np.column_stack(list(cols.values()))
    buf = io.StringIO()
    buf.write(f"# {header}\n")
    buf.write(",".join(cols) + "\n")
    np.savetxt(buf, data, delimiter=",", fmt="%.17g")
    Path(path).write_text(buf.getvalue())


def _grid_from_header(line):
    meta = json.loads(line.lstrip("#").strip())
    return build_cylinder(**meta)


def load_field_csv(path):
    text = Path(path).read_text().splitlines()
    grid = _grid_from_header(text[0])
    names = text[1].split(",")
    data = np.loadtxt(text[2:], delimiter=",", ndmin=2)
    ncomp = grid.N - grid.n
    if data.shape != (grid.size, len(names)) or len(names) != grid.n + ncomp:
        raise InputError(f"{path}: column layout does not match its header")
    comps = data[:, grid.n :].reshape(grid.shape + (ncomp,))
    return NormalField(grid, comps)


def save_field_binary(path, U):
    """Header JSON line, newline, then the component array as raw float64."""
    header = json.dumps(U.grid.header(), sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(header + b"\n")
        fh.write(np.ascontiguousarray(U.comps, dtype="<f8").tobytes())


def load_field_binary(path):
    blob = Path(path).read_bytes()
    line, _, payload = blob.partition(b"\n")
    grid = _grid_from_header(line.decode())
    comps = np.frombuffer(payload, dtype="<f8")
    want = grid.size * (grid.N - grid.n)
    if comps.size != want:
        raise InputError(f"{path}: expected {want} values, found {comps.size}")
    return NormalField(grid, comps.reshape(grid.shape + (grid.N - grid.n,)).copy())
