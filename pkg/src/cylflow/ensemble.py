"""Standard normal fields used by the verification suite, the audits and the demos."""
from __future__ import annotations

import numpy as np

from .chart import NormalField, taper
from .spectral import raw_jacobi_fields


def _angle_axis(grid):
    c = grid.coords()
    th = c[grid.k - 1]  # longitude
    y = c[grid.k:]
    r2 = sum(v**2 for v in y) if y else np.zeros(grid.shape)
    return th, y, r2


def analytic_graph(grid, amplitude=0.05):
    """``u = a sin(theta) exp(-|y|^2)``, plus ``0.6 a cos(theta) exp(-|y|^2)`` along ``z_1`` if present."""
    th, _, r2 = _angle_axis(grid)
    env = np.exp(-r2)
    ua = [0.6 * amplitude * np.cos(th) * env] if grid.codim_extra else []
    return NormalField.from_components(grid, u=amplitude * np.sin(th) * env, ua=ua)


def generic_direction(grid, taper_radii=(4.0, 5.5)):
    """A tapered direction with no special structure (not Jacobi, not a hypersurface)."""
    th, _, r2 = _angle_axis(grid)
    u = (np.sin(th) + 0.5 * np.cos(2 * th)) * np.exp(-r2 / 4)
    ua = [np.cos(th) * np.exp(-r2 / 3) + 0.5 * np.cos(2 * th) * np.exp(-r2 / 4)] if grid.codim_extra else []
    U = NormalField.from_components(grid, u=u, ua=ua)
    inner, outer = taper_radii
    return taper(U, inner, min(outer, grid.R_box)) if grid.axis_dim else U


def jacobi_direction(grid):
    """Sum of the axis-quadratic field and a flat-normal rotation, each scaled to unit sup.

    A single Jacobi family stays inside a hypersurface slice of ``R^N`` where
    ``P`` vanishes identically; mixing the quadratic family with a rotation
    into ``z_1`` gives a direction where the cubic onset of ``P`` is visible.
    Falls back to the quadratic field alone in codimension one.
    """
    raw = {el.label: el.field for el in raw_jacobi_fields(grid)}
    b = raw["y1*y1-2"]
    out = b * (1.0 / b.sup())
    if grid.codim_extra:
        rot = raw["z1:x1"]
        out = out + rot * (1.0 / rot.sup())
    return out
