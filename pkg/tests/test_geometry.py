import numpy as np
import pytest
import shapely
from hypothesis import given, settings, strategies as st
from scipy.special import ellipe

from perfhom.geometry import (GeometryError, LameParams, build_perforation, closest_parameter, make_curve, panelize,
                              parse_hole, upsample_density)


def test_lame_constants_unit_moduli():
    p = LameParams(1.0, 1.0)
    assert p.c1 == pytest.approx(2 / 3, abs=1e-15)
    assert p.c2 == pytest.approx(1 / 3, abs=1e-15)
    assert p.c1 / (2 * np.pi) == pytest.approx(1 / (3 * np.pi), abs=1e-15)


@pytest.mark.parametrize("lam,mu", [(1.0, 0.0), (-2.0, 1.0)])
def test_lame_rejects_non_elliptic(lam, mu):
    with pytest.raises(GeometryError):
        LameParams(lam, mu)


def test_circle_length_area_and_radii():
    c = make_curve("circle", (0.25,))
    pan = panelize(c, 64)
    assert pan.length == pytest.approx(2 * np.pi * 0.25, abs=1e-14)
    assert c.area == pytest.approx(np.pi / 16, abs=1e-14)
    assert c.r1 == pytest.approx(0.25, abs=1e-14) and c.r2 == pytest.approx(0.25, abs=1e-14)


def test_ellipse_perimeter_matches_complete_elliptic_integral():
    a, b = 0.3, 0.2
    pan = panelize(make_curve("ellipse", (a, b)), 256)
    exact = 4 * a * ellipe(1 - (b / a) ** 2)
    assert pan.length == pytest.approx(exact, abs=1e-12)
    assert exact == pytest.approx(1.586544, abs=1e-6)


def test_kite_area_closed_form_and_polygon():
    k = make_curve("kite")
    assert k.area == pytest.approx(0.09375 * np.pi * 0.36, abs=1e-13)
    t = np.linspace(0, 2 * np.pi, 20000, endpoint=False)
    assert shapely.Polygon(k.point(t)).area == pytest.approx(k.area, rel=1e-7)


def test_normals_are_outward_and_unit():
    for spec in ("circle:0.25", "ellipse:0.3,0.2", "kite", "star:0.2,0.2,5"):
        c = parse_hole(spec)
        pan = panelize(c, 128)
        assert np.allclose(np.linalg.norm(pan.normals, axis=1), 1.0, atol=1e-14)
        probe = pan.points + 1e-4 * pan.normals
        assert not c.contains(probe).any()
        assert c.contains(pan.points - 1e-4 * pan.normals).all()


def test_curvature_of_circle():
    pan = panelize(make_curve("circle", (0.2,)), 64)
    assert np.allclose(pan.curvature, 5.0, atol=1e-12)


@pytest.mark.parametrize("n", [31, 30, 33])
def test_panelize_rejects_bad_node_counts(n):
    with pytest.raises(GeometryError):
        panelize(make_curve("circle", (0.25,)), n)


@pytest.mark.parametrize("kind,params", [("circle", (0.6,)), ("ellipse", (0.55, 0.1)), ("star", (0.2, 1.5, 5)),
                                         ("blob", ())])
def test_make_curve_rejects(kind, params):
    with pytest.raises(GeometryError):
        make_curve(kind, params)


def test_parse_hole_specs():
    assert parse_hole("circle:0.25") == make_curve("circle", (0.25,))
    assert parse_hole("kite:default") == make_curve("kite")
    scaled = parse_hole("circle:0.25@2.0")
    assert scaled.r2 == pytest.approx(0.5) and not scaled.fits_cell


@given(st.integers(min_value=1, max_value=7), st.floats(0, 2 * np.pi))
@settings(max_examples=25, deadline=None)
def test_upsample_density_is_exact_for_trigonometric_data(m, phase):
    n = 32
    t = 2 * np.pi * np.arange(n) / n
    f = np.stack([np.cos(m * t + phase), np.sin(m * t)], -1)
    up = upsample_density(f, 4)
    tt = 2 * np.pi * np.arange(4 * n) / (4 * n)
    exact = np.stack([np.cos(m * tt + phase), np.sin(m * tt)], -1)
    assert np.abs(up - exact).max() < 1e-12


@given(st.floats(0, 2 * np.pi), st.floats(-0.05, 0.05))
@settings(max_examples=25, deadline=None)
def test_closest_parameter_on_ellipse(t0, off):
    c = make_curve("ellipse", (0.3, 0.2))
    x = c.point(t0) + off * c.normal(t0)
    t = closest_parameter(c, x[None])[0]
    d = np.angle(np.exp(1j * (t - t0)))
    assert abs(d) < 1e-8


def test_perforation_lattice_and_hole_mask():
    c = make_curve("circle", (0.25,))
    perf = build_perforation(0.25, 0.25, c)
    # holes at eps*z strictly inside (0,1)^2: z in {1,2,3}^2
    assert perf.count == 9
    assert perf.in_hole(np.array([[0.25, 0.25], [0.25 + 0.015, 0.25]])).all()
    assert not perf.in_hole(np.array([[0.25 + 0.016, 0.25], [0.0, 0.0], [0.125, 0.125]])).any()
    loc = perf.local_coords(np.array([[0.26, 0.74]]))
    assert np.allclose(loc, [[0.16, -0.16]])


def test_perforation_rejects_hole_leaving_cell():
    with pytest.raises(GeometryError):
        build_perforation(0.25, 2.5, make_curve("circle", (0.25,)))
