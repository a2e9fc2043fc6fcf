import numpy as np
import pytest

from sigmak.fields import DualField, GraphField, Grid, field_on_domain, masks_from_inside


def disc_field(h=0.1, n=2):
    g = Grid.covering(n, 1.0, h)
    inside = np.linalg.norm(g.coords(), axis=1) < 1.0
    return field_on_domain("graph", g, inside, lambda p: np.sqrt(1 + np.sum(p ** 2, 1)))


def test_covering_grid_is_centred():
    g = Grid.covering(2, 1.0, 0.25)
    assert g.shape == (13, 13)
    c = g.coords()
    assert np.allclose(c.mean(axis=0), 0.0)
    assert np.isclose(np.abs(c).max(), 1.5)


def test_masks_halo():
    g = Grid.box((0, 0), (1, 1), 11)
    inside = np.zeros(g.shape, bool)
    inside[5, 5] = True
    interior, boundary = masks_from_inside(g, inside)
    assert interior.sum() == 1
    assert boundary.sum() == 8
    inside[:, 0] = True
    interior, _ = masks_from_inside(g, inside)
    assert not interior[:, 0].any()


def test_gradient_and_stencil_exact_on_quadratics():
    g = Grid.covering(3, 1.0, 0.25)
    f = field_on_domain("graph", g, np.linalg.norm(g.coords(), axis=1) < 1.0,
                        lambda p: 0.3 * p[:, 0] ** 2 + 0.1 * p[:, 0] * p[:, 2] - 0.2 * p[:, 1])
    x, u, du, d2 = f.interior_jets()
    assert np.allclose(du[:, 0], 0.6 * x[:, 0] + 0.1 * x[:, 2])
    assert np.allclose(du[:, 1], -0.2)
    H = np.array([[0.6, 0, 0.1], [0, 0, 0], [0.1, 0, 0]])
    assert np.allclose(d2, H[None], atol=1e-12)
    ga = f.gradient_active()
    act = f.active
    assert np.allclose(ga[act][:, 1], -0.2)


def test_interpolate_nan_off_domain():
    f = disc_field()
    v = f.interpolate([[0.0, 0.0], [5.0, 5.0]])
    assert v[0] == pytest.approx(1.0)
    assert np.isnan(v[1])


def test_save_load_round_trip(tmp_path):
    f = disc_field()
    f.meta["note"] = "disc"
    f.save(tmp_path / "f")
    g = GraphField.load(tmp_path / "f")
    assert isinstance(g, GraphField)
    assert np.array_equal(g.active, f.active)
    assert np.array_equal(g.interior, f.interior)
    assert np.allclose(g.values[f.active], f.values[f.active], rtol=1e-15, atol=0)
    assert g.meta["note"] == "disc"


def test_dual_kind_preserved(tmp_path):
    g = Grid.covering(2, 0.5, 0.1)
    d = field_on_domain("dual", g, np.linalg.norm(g.coords(), axis=1) < 0.5,
                        lambda p: -np.sqrt(1 - np.sum(p ** 2, 1)))
    d.save(tmp_path / "d")
    assert isinstance(GraphField.load(tmp_path / "d"), DualField)


def test_csv_columns(tmp_path):
    f = disc_field()
    f.to_csv(tmp_path / "f.csv")
    head = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert head == "x1,x2,u,interior"
