import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from manisob import (
    check_transition_consistency,
    christoffel,
    make_manifold,
    make_pair,
    make_submanifold,
    mean_curvature_tensor,
    metric_at,
    presets,
)
from manisob._errors import ConfigError, DomainError
from manisob.geometry import (
    christoffel_from_metric,
    wrap_angle,
    wrap_pm,
    wrap_unit,
)

from conftest import PRESETS


def test_presets_listing():
    names = presets()
    for p in PRESETS:
        assert p in names


@pytest.mark.parametrize("preset", ["euclidean", "flat-torus"])
def test_flat_charts_have_zero_christoffel(preset):
    m = make_manifold(preset)
    rng = np.random.default_rng(0)
    for c in m.charts:
        x = c.domain.sample(40, rng, margin=0.8)
        G = c.christoffel(x)
        np.testing.assert_allclose(G, 0.0, atol=1e-9)


def test_sphere_normal_metric_eigenvalues():
    # in normal coordinates at radius rho the eigenvalues are 1 (radial)
    # and (sin rho / rho)^2 (tangential)
    m = make_manifold("sphere2")
    c = m.chart_by_id("norm+z")
    rng = np.random.default_rng(3)
    x = c.domain.sample(60, rng, margin=0.9)
    rho = np.linalg.norm(x, axis=1)
    g = c.metric(x)
    ev = np.sort(np.linalg.eigvalsh(g), axis=1)
    expected = np.sort(np.stack([np.ones_like(rho),
                                 (np.sin(rho) / rho) ** 2], axis=1), axis=1)
    np.testing.assert_allclose(ev, expected, atol=1e-12)


def test_hyperbolic_normal_metric_eigenvalues():
    m = make_manifold("hyperbolic2")
    c = m.chart_by_id("disk0")
    rng = np.random.default_rng(3)
    x = c.domain.sample(60, rng, margin=0.9)
    rho = np.linalg.norm(x, axis=1)
    g = c.metric(x)
    ev = np.sort(np.linalg.eigvalsh(g), axis=1)
    expected = np.sort(np.stack([np.ones_like(rho),
                                 (np.sinh(rho) / rho) ** 2], axis=1), axis=1)
    np.testing.assert_allclose(ev, expected, atol=1e-12)


def test_fd_christoffel_against_symbolic_oracle():
    """christoffel_from_metric matches exact symbols on an analytic metric."""
    xs, ys = sp.symbols("x y", real=True)
    g_sym = sp.Matrix([[1 + xs**2, xs * ys / 2],
                       [xs * ys / 2, 2 + ys**2]])
    ginv = g_sym.inv()
    coords = (xs, ys)
    gam = {}
    for k in range(2):
        for i in range(2):
            for j in range(2):
                expr = sum(
                    ginv[k, l] * (sp.diff(g_sym[j, l], coords[i])
                                  + sp.diff(g_sym[i, l], coords[j])
                                  - sp.diff(g_sym[i, j], coords[l])) / 2
                    for l in range(2))
                gam[(k, i, j)] = sp.lambdify((xs, ys), sp.simplify(expr))

    def metric_fn(x):
        x = np.atleast_2d(x)
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = 1 + x[:, 0] ** 2
        g[:, 0, 1] = g[:, 1, 0] = x[:, 0] * x[:, 1] / 2
        g[:, 1, 1] = 2 + x[:, 1] ** 2
        return g

    rng = np.random.default_rng(5)
    pts = rng.uniform(-0.4, 0.4, size=(25, 2))
    G = christoffel_from_metric(metric_fn, pts)
    for k in range(2):
        for i in range(2):
            for j in range(2):
                exact = np.array([gam[(k, i, j)](*p) for p in pts])
                np.testing.assert_allclose(G[:, k, i, j], exact,
                                           atol=1e-8, rtol=1e-6)


def test_revolution_closed_form_christoffel_matches_fd():
    m = make_manifold("surface-of-revolution")
    c = m.chart_by_id("rev-0")
    rng = np.random.default_rng(7)
    x = c.domain.sample(30, rng, margin=0.7)
    G_closed = c.christoffel(x)
    G_fd = christoffel_from_metric(c.metric, x)
    np.testing.assert_allclose(G_closed, G_fd, atol=1e-7, rtol=1e-5)


@pytest.mark.parametrize("preset", PRESETS)
def test_transition_consistency(preset):
    m = make_manifold(preset)
    rep = check_transition_consistency(m, samples=120, seed=0)
    assert rep["max_metric_residual"] < 1e-7
    assert rep["max_roundtrip"] < 1e-9


@pytest.mark.parametrize("preset", PRESETS)
def test_exp_log_roundtrip(preset):
    m = make_manifold(preset)
    p = m.random_points(200, seed=4)
    q = m.random_points(200, seed=8)
    d = m.distance(p, q)
    near = d < 0.8 * m.r_M
    p, q = p[near][:40], q[near][:40]
    assert len(p) >= 5
    v = m.log(p, q)
    back = m.exp(p, v)
    # distance() is a lookup table on the revolution preset; the smooth
    # variant is exact for every preset
    err = m.smooth_distance(back, q)
    np.testing.assert_allclose(err, 0.0, atol=5e-7)


@pytest.mark.parametrize("preset", PRESETS)
def test_log_length_matches_distance(preset):
    m = make_manifold(preset)
    p = m.random_points(200, seed=14)
    q = m.random_points(200, seed=15)
    near = m.distance(p, q) < 0.8 * m.r_M
    p, q = p[near][:40], q[near][:40]
    assert len(p) >= 5
    v = m.log(p, q)
    lv = np.sqrt(m.metric_dot(p, v, v))
    ref = m.distance(p, q)
    if preset == "surface-of-revolution":
        # table distance overestimates the true one by a bounded margin
        gap = ref - lv
        assert np.all(gap > -1e-6)
        assert np.all(gap < 0.06)
    else:
        np.testing.assert_allclose(lv, ref, atol=1e-7, rtol=1e-7)


@pytest.mark.parametrize("preset", PRESETS)
def test_metric_positive_definite(preset):
    m = make_manifold(preset)
    rng = np.random.default_rng(6)
    for c in m.charts:
        x = c.domain.sample(30, rng, margin=0.85)
        ev = np.linalg.eigvalsh(c.metric(x))
        assert np.all(ev > 0)


def test_metric_at_and_christoffel_lookup():
    m = make_manifold("sphere2")
    x = np.array([[0.1, 0.2]])
    g = metric_at(m, "norm+z", x)
    assert g.shape == (1, 2, 2)
    G = christoffel(m, "norm+z", x)
    assert G.shape == (1, 2, 2, 2)
    with pytest.raises(ConfigError):
        metric_at(m, "no-such-chart", x)


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError):
        make_manifold("klein-bottle")


def test_best_chart_outside_atlas():
    m = make_manifold("euclidean")
    with pytest.raises(DomainError):
        m.best_chart(np.array([50.0, 50.0]))


def test_equator_is_geodesic():
    m, sub = make_pair("sphere2")
    s = np.linspace(0.1, 5.0, 7)
    rep = mean_curvature_tensor(sub, s)
    np.testing.assert_allclose(rep["norm"], 0.0, atol=1e-5)


def test_latitude_curvature_oracle():
    # geodesic curvature of the theta0 latitude circle is |cot theta0|
    m = make_manifold("sphere2")
    sub = make_submanifold(m, "latitude", theta0=np.pi / 3)
    s = np.linspace(0.2, 3.0, 5)
    rep = mean_curvature_tensor(sub, s)
    np.testing.assert_allclose(rep["norm"], 1.0 / np.tan(np.pi / 3),
                               atol=1e-4, rtol=1e-3)


def test_torus_circle_is_geodesic():
    m, sub = make_pair("flat-torus")
    s = np.linspace(0.05, 0.9, 6)
    rep = mean_curvature_tensor(sub, s)
    np.testing.assert_allclose(rep["norm"], 0.0, atol=1e-6)


def test_fermi_coordinates_roundtrip():
    for preset in PRESETS:
        m, sub = make_pair(preset)
        lo, hi = sub.arc_window()
        s0 = 0.5 * (lo + hi)
        x = np.linspace(-0.05, 0.05, 9)
        t = np.linspace(-0.04, 0.04, 9)
        P = sub.fermi_forward(s0, t, x)
        t2, dx2, ok = sub.fermi_inverse(s0, P)
        assert ok.all()
        np.testing.assert_allclose(t2, t, atol=1e-9)
        np.testing.assert_allclose(dx2, x, atol=1e-9)


def test_submanifold_points_on_curve():
    for preset in PRESETS:
        m, sub = make_pair(preset)
        lo, hi = sub.arc_window()
        s = np.linspace(lo + 0.1, hi - 0.1, 11)
        P = sub.point_at(s)
        t, s_proj, ok = sub.tube_coords(P)
        assert ok.all()
        np.testing.assert_allclose(t, 0.0, atol=1e-9)


def test_curve_parameterization_is_unit_speed():
    h = 1e-5
    for preset in PRESETS:
        m, sub = make_pair(preset)
        lo, hi = sub.arc_window()
        s = np.linspace(lo + 0.2, hi - 0.2, 9)
        d = m.distance(sub.point_at(s), sub.point_at(s + h))
        np.testing.assert_allclose(d / h, 1.0, atol=1e-4)


@given(st.floats(-50, 50))
@settings(max_examples=80, deadline=None)
def test_wrap_unit_range_and_period(x):
    w = wrap_unit(x)
    assert 0.0 <= w < 1.0
    # shifting by an integer may round across a wrap boundary, so compare
    # as points on the circle
    d = abs(float(wrap_unit(x + 3.0)) - float(w))
    assert min(d, 1.0 - d) < 1e-9


@given(st.floats(-50, 50), st.floats(0.1, 7.0))
@settings(max_examples=80, deadline=None)
def test_wrap_pm_range_and_period(x, period):
    w = wrap_pm(x, period)
    assert -period / 2 <= w < period / 2
    d = abs(float(wrap_pm(x + period, period)) - float(w))
    assert min(d, period - d) < 1e-9 * max(1.0, abs(x))


@given(st.floats(-30, 30))
@settings(max_examples=60, deadline=None)
def test_wrap_angle_identity_on_representative(a):
    w = wrap_angle(a)
    assert -np.pi <= w <= np.pi
    np.testing.assert_allclose(np.sin(w), np.sin(a), atol=1e-12)
    np.testing.assert_allclose(np.cos(w), np.cos(a), atol=1e-12)
