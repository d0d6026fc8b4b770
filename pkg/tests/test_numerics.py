import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cylflow import numerics
from cylflow.errors import ConditioningError, InputError, ResolutionError

finite = st.floats(-10, 10, allow_nan=False)


def test_sym_eig_identity_and_diagonal():
    assert np.allclose(numerics.sym_eig(np.eye(3)).eigenvalues, [1, 1, 1])
    assert np.allclose(numerics.sym_eig(np.diag([1.0, 0.0])).eigenvalues, [0, 1])


def test_symmetry_enforced_by_storage():
    m = numerics.SymMatrix([[1.0, 2.0], [5.0, 3.0]])
    a = m.to_array()
    assert a[1, 0] == a[0, 1] == 2.0
    with pytest.raises(ValueError):
        a[0, 0] = 7.0


@given(a=finite, b=finite, c=finite)
def test_two_by_two_matches_quadratic_formula(a, b, c):
    vals = numerics.sym_eig([[a, b], [b, c]]).eigenvalues
    mean, rad = (a + c) / 2, np.hypot((a - c) / 2, b)
    assert np.allclose(vals, [mean - rad, mean + rad], atol=1e-12 * (1 + abs(mean) + rad))


@given(arrays(float, (4, 4), elements=finite))
def test_reassembly_and_orthonormality(m):
    m = m + m.T
    res = numerics.sym_eig(m)
    V, lam = res.eigenvectors, res.eigenvalues
    scale = max(np.linalg.norm(m), 1.0)
    assert np.all(np.diff(lam) >= 0)
    assert np.max(np.abs(V @ np.diag(lam) @ V.T - m)) <= 1e-10 * scale
    assert np.max(np.abs(V.T @ V - np.eye(4))) <= 1e-12 * 4
    assert np.max(np.abs(m @ V - V * lam)) <= 1e-12 * scale * 10


def test_sign_convention_first_nonzero_positive(rng):
    m = rng.standard_normal((5, 5))
    V = numerics.sym_eig(m + m.T).eigenvectors
    for col in V.T:
        lead = col[np.argmax(np.abs(col) > 1e-12)]
        assert lead > 0


def test_sym_eig_rejects_nonfinite():
    with pytest.raises(InputError):
        numerics.sym_eig([[1.0, np.nan], [np.nan, 1.0]])


def test_solve_examples(rng):
    assert np.allclose(numerics.solve(np.eye(3), [1, 0, 0]), [1, 0, 0])
    assert np.allclose(numerics.solve(np.diag([2.0, 4.0]), [2, 4]), [1, 1])
    B = rng.standard_normal((4, 4))
    M = B @ B.T + 4 * np.eye(4)
    rhs = rng.standard_normal(4)
    x = numerics.solve(M, rhs)
    assert np.linalg.norm(M @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_solve_near_singular_reports_eigenvalue():
    with pytest.raises(ConditioningError) as info:
        numerics.solve(np.diag([1.0, 1e-12]), [1, 1])
    assert info.value.smallest_eigenvalue == pytest.approx(1e-12)


def test_periodic_diff_exact_modes():
    th = 2 * np.pi * np.arange(32) / 32
    assert np.max(np.abs(numerics.periodic_diff(np.sin(th)) - np.cos(th))) <= 1e-10
    assert np.max(np.abs(numerics.periodic_diff(np.cos(2 * th), order=2) + 4 * np.cos(2 * th))) <= 1e-10


def test_periodic_diff_spectral_convergence():
    errs = []
    for m in (8, 16, 32):
        th = 2 * np.pi * np.arange(m) / m
        f = np.exp(np.sin(th))
        errs.append(np.max(np.abs(numerics.periodic_diff(f) - np.cos(th) * f)))
    assert errs[2] < 1e-12 and errs[1] < 1e-5 * errs[0] ** 0.5


def test_periodic_diff_floor():
    with pytest.raises(ResolutionError):
        numerics.periodic_diff(np.ones(7))


@given(st.integers(0, 31), arrays(float, 32, elements=finite))
def test_periodic_diff_shift_equivariance(shift, f):
    d1 = numerics.periodic_diff(np.roll(f, shift))
    d2 = np.roll(numerics.periodic_diff(f), shift)
    assert np.allclose(d1, d2, atol=1e-9 * (1 + np.max(np.abs(f))))


def test_axis_diff_polynomials():
    y = np.linspace(-6, 6, 49)
    h = y[1] - y[0]
    assert np.max(np.abs(numerics.axis_diff(y**2, h, order=2) - 2)) <= 1e-10
    d = numerics.axis_diff(y**4, h)
    assert np.max(np.abs(d[2:-2] - 4 * y[2:-2] ** 3)) <= 1e-11 * np.max(np.abs(y**3))


@given(arrays(float, 5, elements=st.floats(-3, 3)))
def test_axis_diff_quartic_exact_interior(c):
    y = np.linspace(-2, 2, 21)
    h = y[1] - y[0]
    p = np.polynomial.Polynomial(c)
    for order in (1, 2):
        d = numerics.axis_diff(p(y), h, order=order)
        assert np.max(np.abs(d - p.deriv(order)(y))) <= 1e-11 * (1 + np.max(np.abs(c))) * 100


def test_axis_diff_order():
    errs, hs = [], []
    for m in (41, 81, 161):
        y = np.linspace(-3, 3, m)
        h = y[1] - y[0]
        errs.append(np.max(np.abs(numerics.axis_diff(np.sin(y), h) - np.cos(y))))
        hs.append(h)
    assert numerics.convergence_order(hs, errs) >= 3.8


def test_axis_diff_floor():
    with pytest.raises(ResolutionError):
        numerics.axis_diff(np.ones(6), 0.1)


def test_axis_weights_integrate_quartics_and_gaussian():
    y = np.linspace(-6, 6, 97)
    w = numerics.axis_weights(97, y[1] - y[0])
    assert np.sum(w * y**3) == pytest.approx(0, abs=1e-12)
    assert np.sum(w * y**2) == pytest.approx(144.0, rel=1e-12)
    assert np.sum(w * np.exp(-y**2 / 4)) == pytest.approx(2 * np.sqrt(np.pi), rel=1e-4)


def test_loglog_fit_recovers_power():
    x = np.array([1.0, 2.0, 4.0])
    fit = numerics.loglog_fit(x, 3 * x**2.5)
    assert fit.slope == pytest.approx(2.5) and fit.residual < 1e-12
