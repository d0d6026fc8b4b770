import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cylflow import chart
from cylflow.chart import NormalField, build_cylinder, graph, taper
from cylflow.errors import ConfigurationError, GeometryError, InputError, ResolutionError


def test_reference_grid_shape_and_radius(ref_grid):
    assert ref_grid.shape == (64, 97) and ref_grid.size == 64 * 97
    X = ref_grid.positions()
    assert np.max(np.abs(X[..., 0] ** 2 + X[..., 1] ** 2 - 2)) <= 1e-14
    assert np.all(X[..., 3] == 0)


def test_hypersurface_grid_has_no_z(hyper_grid):
    assert hyper_grid.codim_extra == 0 and hyper_grid.positions().shape[-1] == 3


def test_grid_point_count_tensor_product():
    g = build_cylinder(1, 3, 4, 16, 6.0, 13)
    assert g.size == 16 * 13**2


@pytest.mark.parametrize("kw, err", [
    (dict(k=1, n=2, N=2, m_theta=32, R_box=6, m_y=97), ConfigurationError),
    (dict(k=1, n=2, N=4, m_theta=8, R_box=6, m_y=97), ResolutionError),
    (dict(k=1, n=2, N=4, m_theta=32, R_box=3, m_y=97), ConfigurationError),
    (dict(k=1, n=2, N=4, m_theta=32, R_box=6, m_y=5), ResolutionError),
    (dict(k=3, n=3, N=4, m_theta=32, R_box=6, m_y=97), ConfigurationError),
])
def test_floors(kw, err):
    with pytest.raises(err):
        build_cylinder(**kw)


def test_k2_is_experimental():
    g = build_cylinder(2, 3, 4, 16, 6.0, 25)
    assert g.experimental
    X = g.positions()
    assert np.allclose(np.sum(X[..., :3] ** 2, axis=-1), 4.0)


def test_zero_graph_is_cylinder_bit_exact(grid):
    imm = graph(grid, NormalField.zeros(grid))
    assert np.array_equal(imm.X, grid.positions())


def test_radial_offset_and_translation(grid):
    c = 0.1
    X = graph(grid, NormalField.from_components(grid, u=np.full(grid.shape, c))).X
    assert np.allclose(np.hypot(X[..., 0], X[..., 1]), np.sqrt(2) + c, atol=1e-14)
    X = graph(grid, NormalField.from_components(grid, ua=[np.full(grid.shape, c)])).X
    assert np.allclose(X - grid.positions(), [0, 0, 0, c], atol=1e-15)


def test_tube_radius_breach(grid):
    with pytest.raises(GeometryError):
        graph(grid, NormalField.from_components(grid, u=np.full(grid.shape, 0.8)))


@given(st.integers(0, 31))
def test_graph_rotation_equivariance(shift):
    g = build_cylinder(1, 2, 4, 32, 6.0, 25)
    th, y = g.coords()
    U = NormalField.from_components(g, u=0.1 * np.sin(th + 0.3) * np.exp(-y**2), ua=[0.05 * np.cos(2 * th)])
    rolled = NormalField(g, np.roll(U.comps, shift, axis=0))
    X1 = graph(g, rolled).X
    a = 2 * np.pi * shift / 32
    R = np.eye(4)
    R[:2, :2] = [[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]
    X2 = np.roll(graph(g, U).X, shift, axis=0) @ R.T
    assert np.max(np.abs(X1 - X2)) <= 1e-13


def test_taper_examples(grid):
    th, y = grid.coords()
    U = taper(NormalField.from_components(grid, u=np.ones(grid.shape)), 3.0, 5.0)
    assert np.all(U.u[np.abs(y) >= 5] == 0)
    assert np.all(U.u[np.abs(y) <= 3] == 1)
    assert np.all(taper(NormalField.zeros(grid), 3, 5).comps == 0)
    assert chart.taper_profile(4.0, 3.0, 5.0) == pytest.approx(0.5)


def test_taper_is_projection(grid):
    th, y = grid.coords()
    U = NormalField.from_components(grid, u=np.cos(th) * (1 + y**2))
    once = taper(U, 3.0, 5.0)
    assert np.array_equal(taper(once, 3.0, 5.0).comps, once.comps)


def test_taper_rejects_bad_radii(grid):
    U = NormalField.zeros(grid)
    with pytest.raises(ConfigurationError):
        taper(U, 5, 3)
    with pytest.raises(ConfigurationError):
        taper(U, 3, 7)


def test_smoothstep_c2():
    t = np.linspace(-0.5, 1.5, 4001)
    s = chart.smoothstep5(t)
    assert np.all(np.diff(s) >= 0)
    d2 = np.gradient(np.gradient(s, t), t)
    assert np.max(np.abs(np.diff(d2))) < 0.05


def test_nonfinite_field_rejected(grid):
    raw = np.zeros(grid.shape + (2,))
    raw[0, 0, 0] = np.inf
    with pytest.raises(InputError):
        NormalField(grid, raw)


@pytest.mark.parametrize("fmt", ["csv", "binary"])
def test_field_round_trip(tmp_path, small_grid, fmt):
    th, y = small_grid.coords()
    U = NormalField.from_components(small_grid, u=np.sin(th) * y, ua=[np.cos(3 * th)])
    path = tmp_path / f"u.{fmt}"
    save = chart.save_field_csv if fmt == "csv" else chart.save_field_binary
    load = chart.load_field_csv if fmt == "csv" else chart.load_field_binary
    save(path, U)
    V = load(path)
    assert V.grid == small_grid and np.array_equal(V.comps, U.comps)
