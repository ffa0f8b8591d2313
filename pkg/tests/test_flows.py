import numpy as np
import pytest

from manisob import (
    exp_map,
    integrate_geodesic,
    make_manifold,
    normal_frame,
    parallel_transport,
)
from manisob._errors import DomainError, IntegrationError

from conftest import PRESETS


def test_sphere_great_circle_endpoint():
    m = make_manifold("sphere2")
    p = np.array([1.0, 0.0, 0.0])
    v = np.array([0.0, 1.0, 0.0])
    for T in (0.5, 1.3, 2.4):
        res = integrate_geodesic(m, p, v, T, h=1e-3)
        expected = np.array([np.cos(T), np.sin(T), 0.0])
        np.testing.assert_allclose(res.point, expected, atol=1e-7)
        np.testing.assert_allclose(
            res.velocity, [-np.sin(T), np.cos(T), 0.0], atol=1e-6)
        assert res.energy_drift < 1e-8


def test_hyperbolic_vertical_geodesic():
    m = make_manifold("hyperbolic2")
    p = np.array([0.3, 1.0])
    v = np.array([0.0, 1.0])
    T = 0.8
    res = integrate_geodesic(m, p, v, T, h=1e-3)
    np.testing.assert_allclose(res.point, [0.3, np.exp(T)], atol=1e-7)


def test_revolution_meridian_stays_meridian():
    m = make_manifold("surface-of-revolution")
    p = np.array([0.1, 1.3])
    sp = np.sqrt(m.metric_dot(p[None], np.array([[1.0, 0.0]]),
                              np.array([[1.0, 0.0]]))[0])
    v = np.array([0.6 / sp, 0.0])
    res = integrate_geodesic(m, p, v, 1.0, h=1e-3)
    np.testing.assert_allclose(res.point[1], 1.3, atol=1e-9)
    assert res.energy_drift < 1e-8


@pytest.mark.parametrize("preset", PRESETS)
def test_energy_conservation(preset):
    m = make_manifold(preset)
    p = m.random_points(4, seed=21)
    F = normal_frame(m, p)
    for b in range(len(p)):
        v = 0.35 * m.r_M * F[b, 0]
        res = integrate_geodesic(m, p[b], v, 1.0, h=1e-3)
        assert res.energy_drift < 1e-8


@pytest.mark.parametrize("preset", PRESETS)
def test_exp_map_matches_preset_exp(preset):
    m = make_manifold(preset)
    p = m.random_points(6, seed=31)
    F = normal_frame(m, p)
    rng = np.random.default_rng(9)
    a = rng.uniform(-0.4, 0.4, size=(len(p), F.shape[1]))
    v = np.einsum("bk,bkd->bd", a, F) * m.r_M
    for b in range(len(p)):
        got = exp_map(m, p[b], v[b])
        want = m.exp(p[b][None], v[b][None])[0]
        err = m.smooth_distance(got[None], want[None])[0]
        assert err < 2e-6


def test_exp_map_rejects_large_velocity():
    m = make_manifold("sphere2")
    p = np.array([0.0, 0.0, 1.0])
    v = np.array([2.0 * m.r_M, 0.0, 0.0])
    with pytest.raises(DomainError):
        exp_map(m, p, v)


def test_exp_map_zero_velocity_is_identity():
    m = make_manifold("flat-torus")
    p = np.array([0.3, 0.7])
    np.testing.assert_array_equal(exp_map(m, p, np.zeros(2)), p)


def test_energy_guard_trips():
    m = make_manifold("sphere2")
    p = np.array([1.0, 0.0, 0.0])
    v = np.array([0.0, 0.6, 0.8])
    with pytest.raises(IntegrationError):
        integrate_geodesic(m, p, v, 2.0, h=0.05, energy_tol=1e-16)


def test_negative_time_reverses_velocity():
    m = make_manifold("sphere2")
    p = np.array([1.0, 0.0, 0.0])
    v = np.array([0.0, 0.6, 0.8])
    a = integrate_geodesic(m, p, v, -1.1, h=1e-3)
    b = integrate_geodesic(m, p, -v, 1.1, h=1e-3)
    np.testing.assert_allclose(a.point, b.point, atol=1e-12)


def test_recorded_path_stays_on_sphere():
    m = make_manifold("sphere2")
    p = np.array([0.0, 1.0, 0.0])
    v = np.array([0.8, 0.0, 0.6])
    res = integrate_geodesic(m, p, v, 2.0, h=1e-3, record_every=100)
    assert len(res.path) >= 10
    ts = [t for t, _ in res.path]
    assert all(t2 > t1 for t1, t2 in zip(ts, ts[1:]))
    for _, pt in res.path:
        np.testing.assert_allclose(np.linalg.norm(pt), 1.0, atol=1e-7)


def test_transport_preserves_metric_pairings():
    m = make_manifold("sphere2")
    p = np.array([1.0, 0.0, 0.0])
    F = normal_frame(m, p)[0]
    v = 1.2 * F[0]
    w = 0.7 * F[0] + 0.4 * F[1]
    res = parallel_transport(m, p, v, w, T=1.0)
    q = res.point[None]
    wq = res.transported[None]
    np.testing.assert_allclose(
        m.metric_dot(q, wq, wq)[0],
        m.metric_dot(p[None], w[None], w[None])[0], atol=1e-8)
    np.testing.assert_allclose(
        m.metric_dot(q, res.velocity[None], wq)[0],
        m.metric_dot(p[None], v[None], w[None])[0], atol=1e-8)


def test_transport_of_tangent_is_velocity():
    # a geodesic parallel-transports its own tangent vector
    for preset in ("sphere2", "hyperbolic2", "surface-of-revolution"):
        m = make_manifold(preset)
        p = m.random_points(1, seed=40)[0]
        v = 0.5 * m.r_M * normal_frame(m, p[None])[0, 0]
        res = parallel_transport(m, p, v, v, T=1.0)
        np.testing.assert_allclose(res.transported, res.velocity, atol=1e-6)


def test_sphere_transport_around_quarter_loop_rotates():
    # transport around a closed spherical triangle with three right angles
    # rotates a tangent vector by the enclosed area, pi/2
    m = make_manifold("sphere2")
    p = np.array([1.0, 0.0, 0.0])
    w0 = np.array([0.0, 0.0, 1.0])
    legs = [
        (p, np.array([0.0, 1.0, 0.0])),
        (np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])),
        (np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])),
    ]
    w = w0
    for start, vdir in legs:
        res = parallel_transport(m, start, (np.pi / 2) * vdir, w, T=1.0)
        w = res.transported
    # holonomy angle of the right-angled octant triangle
    cosang = float(w @ w0) / (np.linalg.norm(w) * np.linalg.norm(w0))
    np.testing.assert_allclose(np.arccos(np.clip(cosang, -1, 1)),
                               np.pi / 2, atol=1e-5)
