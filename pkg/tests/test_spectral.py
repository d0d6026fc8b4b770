import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cylflow import spectral
from cylflow.chart import NormalField, build_cylinder, taper
from cylflow.errors import InputError
from cylflow.gaussian import inner, rule_for
from cylflow.spectral import apply_L, jacobi_basis, project_jacobi


@pytest.fixture(scope="module")
def basis(grid):
    return jacobi_basis(grid)


def _l2(V, rule):
    return np.sqrt(inner(V, V, rule))


def test_drift_of_axis_coordinate(grid):
    th, y = grid.coords()
    LV = apply_L(NormalField.from_components(grid, u=y))
    assert np.max(np.abs(LV.u - 0.5 * y)) <= 1e-10


def test_first_family_is_annihilated(grid):
    th, y = grid.coords()
    V = NormalField.from_components(grid, u=y * np.sqrt(2) * np.cos(th))
    assert np.max(np.abs(apply_L(V).comps)) <= 1e-8


def test_constant_flat_component(grid):
    LV = apply_L(NormalField.from_components(grid, ua=[np.full(grid.shape, 3.0)]))
    assert np.max(np.abs(LV.comps[..., 1] - 1.5)) <= 1e-12 and np.max(np.abs(LV.u)) == 0.0


def test_sphere_eigenfunctions(grid):
    th, _ = grid.coords()
    for f in (np.cos(th), np.sin(th)):
        assert np.max(np.abs(spectral.sphere_laplacian(f, grid) + 0.5 * f)) <= 1e-9


def test_dimension_formula():
    assert spectral.jacobi_dimension(1, 2, 4) == 6
    assert spectral.jacobi_dimension(1, 2, 3) == 3
    assert spectral.jacobi_dimension(2, 3, 5) == 3 + 1 + 3 + 1


def test_basis_dimension_and_labels(basis):
    assert len(basis) == 6
    assert [el.family for el in basis.raw] == ["yf", "yf", "b", "f_alpha", "f_alpha", "a"]
    assert basis.raw[2].label == "y1*y1-2"


def test_basis_elements_are_jacobi(basis):
    for J in basis.fields:
        assert _l2(apply_L(J), basis.rule) <= 1e-7 * _l2(J, basis.rule)


def test_gram_is_identity(basis):
    assert np.max(np.abs(basis.gram() - np.eye(len(basis)))) <= 1e-10


def test_projection_of_member(basis):
    for i, el in enumerate(basis.raw):
        coeffs, h = project_jacobi(el.field, basis)
        assert np.max(np.abs(h.comps)) <= 1e-10 * el.field.sup()
        assert np.allclose(coeffs.values, np.eye(len(basis))[i], atol=1e-10)


def test_recovery_with_orthogonal_noise(grid, basis):
    th, y = grid.coords()
    W = NormalField.from_components(grid, u=np.cos(5 * th) * np.exp(-y**2 / 4), ua=[y**3 * np.exp(-y**2 / 4)])
    _, W_perp = project_jacobi(W, basis)
    true = np.array([0.3, -0.2, 0.1, 0.5, 0.0, -0.4])
    J = sum((c * el.field for c, el in zip(true, basis.raw)), NormalField.zeros(grid))
    eps = 1e-2
    coeffs, h = project_jacobi(J + W_perp * eps, basis)
    assert np.max(np.abs(coeffs.values - true)) <= 1e-8
    assert _l2(h, basis.rule) == pytest.approx(eps * _l2(W_perp, basis.rule), rel=1e-8)


def test_remainder_orthogonal_and_idempotent(grid, basis, rng):
    V = NormalField(grid, rng.standard_normal(grid.shape + (2,)) * np.exp(-grid.coords()[1] ** 2 / 8)[..., None])
    coeffs, h = project_jacobi(V, basis)
    scale = _l2(V, basis.rule)
    assert max(abs(inner(h, e, basis.rule)) for e in basis.fields) <= 1e-10 * scale
    c2, h2 = project_jacobi(coeffs.to_field(basis), basis)
    assert np.max(np.abs(c2.values - coeffs.values)) <= 1e-10
    assert np.max(np.abs(h2.comps)) <= 1e-10 * (1 + np.max(np.abs(coeffs.values)))


def test_projection_grid_mismatch(basis, small_grid):
    with pytest.raises(InputError):
        project_jacobi(NormalField.zeros(small_grid), basis)


def test_coefficient_json_round_trip(grid, basis):
    th, y = grid.coords()
    coeffs, _ = project_jacobi(NormalField.from_components(grid, u=y * np.cos(th) + y**2 - 2), basis)
    back = spectral.JacobiCoefficients.from_json(coeffs.to_json())
    assert back.labels == coeffs.labels and np.array_equal(back.values, coeffs.values)
    assert coeffs.b_matrix(1)[0, 0] == pytest.approx(1.0, abs=1e-8)


def test_effective_ratio_bounded(grid, basis):
    r = np.random.default_rng(5)
    th, y = grid.coords()
    ratios = []
    for _ in range(4):
        u = sum(r.standard_normal() * np.cos(m * th + r.uniform(0, 6)) for m in range(4)) * np.exp(-y**2 / 4)
        ua = r.standard_normal() * (1 + y) * np.exp(-y**2 / 4)
        V = taper(NormalField.from_components(grid, u=u, ua=[ua]), 4.0, 5.5)
        ratios.append(spectral.effective_ratio(V, basis))
    assert max(ratios) < 50 and min(ratios) > 0


@given(seed=st.integers(0, 50))
def test_self_adjoint(seed):
    # fourth-order axis stencils need a fine axis for the 1e-8 tolerance
    g = build_cylinder(1, 2, 4, 16, 6.0, 385)
    r = np.random.default_rng(seed)
    th, y = g.coords()

    def field():
        u = sum(r.standard_normal() * np.cos(m * th + r.uniform(0, 6)) for m in range(3)) * np.exp(-y**2 / 6)
        ua = r.standard_normal() * np.sin(th) * y * np.exp(-y**2 / 6)
        return taper(NormalField.from_components(g, u=u, ua=[ua]), 3.5, 5.5)

    V, W = field(), field()
    rule = rule_for(g)
    lhs, rhs = inner(apply_L(V), W, rule), inner(V, apply_L(W), rule)
    assert abs(lhs - rhs) <= 1e-8 * _l2(V, rule) * _l2(W, rule)


def test_pointwise_bounds(grid, basis):
    reps = {}
    for el in basis.raw:
        reps[el.label] = spectral.jacobi_pointwise_bounds(el.field, el.label, rule=basis.rule, family=el.family)
    assert reps["y1*y1-2"].axis_hessian_y_variation <= 1e-9
    assert all(np.isfinite(r.C_value) and r.C_value > 0 for r in reps.values())


def test_pointwise_constants_stable_in_R_box():
    Cs = []
    for R in (6.0, 7.0):
        g = build_cylinder(1, 2, 4, 32, R, 97 if R == 6.0 else 113)
        raw = {el.label: el for el in spectral.raw_jacobi_fields(g)}
        el = raw["y1*y1-2"]
        Cs.append(spectral.jacobi_pointwise_bounds(el.field, family="b").C_value)
    assert Cs[1] / Cs[0] == pytest.approx(1.0, rel=0.05)


def test_k2_basis_dimension():
    g = build_cylinder(2, 3, 4, 16, 6.0, 25)
    assert len(spectral.raw_jacobi_fields(g)) == spectral.jacobi_dimension(2, 3, 4)
