"""Dense linear algebra, differentiation and fitting kernels.

Spectral collocation is used along periodic directions and fourth-order
finite differences along the truncated axis.  Everything here is a pure
function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import ConditioningError, InputError, ResolutionError

SPD_TOL = 1e-10


class SymMatrix:
    """Real symmetric matrix; symmetry is enforced by storage."""

    __slots__ = ("_m",)

    def __init__(self, entries):
        m = np.array(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputError(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InputError("matrix has non-finite entries")
        iu = np.triu_indices(m.shape[0])
        sym = np.zeros_like(m)
        sym[iu] = m[iu]
        sym.T[iu] = m[iu]
        sym.setflags(write=False)
        self._m = sym

    @property
    def dim(self):
        return self._m.shape[0]

    def to_array(self):
        return self._m

    def __array__(self, dtype=None, copy=None):
        return self._m if dtype is None else self._m.astype(dtype)

    def __repr__(self):
        return f"SymMatrix({self._m.tolist()!r})"


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns


def _fix_signs(vecs, tol=1e-12):
    # first component with magnitude above tol made positive, per column
    mags = np.abs(vecs)
    scale = np.max(mags, axis=-2, keepdims=True)
    lead = np.argmax(mags > tol * np.maximum(scale, 1e-300), axis=-2)
    picked = np.take_along_axis(vecs, lead[..., None, :], axis=-2)
    signs = np.where(picked < 0, -1.0, 1.0)
    return vecs * signs


def sym_eig(m) -> EigenResult:
    """Ascending eigenpairs with a deterministic eigenvector sign."""
    if not isinstance(m, SymMatrix):
        m = SymMatrix(m)
    vals, vecs = np.linalg.eigh(m.to_array())
    return EigenResult(vals, _fix_signs(vecs))


def sym_eig_batch(stack):
    """Eigenpairs of a stack of symmetric matrices ``(..., d, d)``."""
    a = np.asarray(stack, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InputError("matrix stack has non-finite entries")
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    vals, vecs = np.linalg.eigh(a)
    return vals, _fix_signs(vecs)


def solve(m, rhs):
    """Solve ``m x = rhs`` for symmetric positive definite ``m``."""
    if not isinstance(m, SymMatrix):
        m = SymMatrix(m)
    rhs = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise InputError("right-hand side has non-finite entries")
    lam_min = sym_eig(m).eigenvalues[0]
    if lam_min <= SPD_TOL:
        raise ConditioningError("matrix is not safely positive definite", lam_min)
    factor = scipy.linalg.cho_factor(m.to_array(), lower=True)
    return scipy.linalg.cho_solve(factor, rhs)


# --------------------------------------------------------------------------
# periodic directions


def periodic_diff(values, order=1, axis=0, period=2 * np.pi):
    """Spectral derivative along a uniformly sampled periodic axis.

    Exact (to rounding) for trigonometric polynomials below the Nyquist mode.
    For even sample counts the Nyquist coefficient is dropped in first
    derivatives and kept in second derivatives.
    """
    if order not in (1, 2):
        raise InputError(f"order must be 1 or 2, got {order}")
    f = np.asarray(values, dtype=float)
    m = f.shape[axis]
    if m < 8:
        raise ResolutionError(f"periodic grid needs at least 8 points, got {m}")
    wav = np.fft.rfftfreq(m, d=1.0 / m) * (2 * np.pi / period)
    coef = np.fft.rfft(f, axis=axis)
    if order == 1:
        mult = 1j * wav
        if m % 2 == 0:
            mult[-1] = 0.0
    else:
        mult = -(wav**2)
    shape = [1] * f.ndim
    shape[axis] = wav.size
    return np.fft.irfft(coef * mult.reshape(shape), n=m, axis=axis)


# --------------------------------------------------------------------------
# truncated axis


@lru_cache(maxsize=None)
def fd_weights(offsets, order):
    """Finite-difference weights on integer ``offsets`` (unit spacing)."""
    offs = np.asarray(offsets, dtype=float)
    p = offs.size
    vander = np.vander(offs, p, increasing=True).T
    rhs = np.zeros(p)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    w = np.linalg.solve(vander, rhs)
    w.setflags(write=False)
    return w


_STENCILS = {
    # order: (interior offsets, [(offsets for row 0), (offsets for row 1)])
    1: ((-2, -1, 0, 1, 2), [(0, 1, 2, 3, 4), (-1, 0, 1, 2, 3)]),
    2: ((-2, -1, 0, 1, 2), [(0, 1, 2, 3, 4, 5), (-1, 0, 1, 2, 3, 4)]),
}


def axis_diff(values, h, order=1, axis=0):
    """Fourth-order finite-difference derivative along a uniform axis.

    Centered five-point stencils in the interior; the two rows nearest each
    end use one-sided stencils of the same order.
    """
    if order not in (1, 2):
        raise InputError(f"order must be 1 or 2, got {order}")
    f = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    m = f.shape[0]
    if m < 7:
        raise ResolutionError(f"axis grid needs at least 7 points, got {m}")
    interior, edge = _STENCILS[order]
    out = np.zeros_like(f)
    w = fd_weights(interior, order)
    for wk, k in zip(w, interior):
        out[2 : m - 2] += wk * f[2 + k : m - 2 + k]
    for row, offs in enumerate(edge):
        w = fd_weights(offs, order)
        acc_lo = np.zeros_like(f[0])
        acc_hi = np.zeros_like(f[0])
        for wk, k in zip(w, offs):
            acc_lo += wk * f[row + k]
            # mirrored stencil; odd derivatives flip sign
            acc_hi += wk * f[m - 1 - row - k]
        out[row] = acc_lo
        out[m - 1 - row] = acc_hi if order % 2 == 0 else -acc_hi
    return np.moveaxis(out / h**order, 0, axis)


_GREGORY_ENDS = (3 / 8, 7 / 6, 23 / 24)


def axis_weights(m, h):
    """Quadrature weights on a uniform axis: trapezoid with fourth-order end corrections."""
    if m < 7:
        raise ResolutionError(f"axis quadrature needs at least 7 points, got {m}")
    w = np.full(m, float(h))
    for i, c in enumerate(_GREGORY_ENDS):
        w[i] = w[m - 1 - i] = c * h
    return w


def axis_diff_matrix(m, h, order):
    """Dense matrix of :func:`axis_diff` on ``m`` points."""
    return axis_diff(np.eye(m), h, order=order, axis=0)


# --------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class PowerFit:
    slope: float
    intercept: float
    residual: float  # rms of log residuals


def loglog_fit(x, y):
    """Least-squares fit of ``log y = slope * log x + intercept``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2:
        raise InputError("need at least two points for a fit")
    if not (np.all(np.isfinite(lx)) and np.all(np.isfinite(ly))):
        raise InputError("log-log fit needs positive finite data")
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ coef
    return PowerFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2))))


def convergence_order(spacings, errors):
    """Observed order ``p`` in ``error ~ spacing**p``."""
    return loglog_fit(spacings, errors).slope
