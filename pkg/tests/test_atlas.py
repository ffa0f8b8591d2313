import json

import numpy as np
import pytest

from manisob import (
    admissibility_report,
    bounded_geometry_report,
    build_fermi_trivialization,
    build_geodesic_trivialization,
    build_separated_net,
    coverage_check,
    load_trivialization,
    make_corrupted_trivialization,
    make_manifold,
    make_pair,
)
from manisob._errors import ConfigError


@pytest.mark.parametrize("preset", ["flat-torus", "sphere2"])
def test_net_separation_brute_force(preset):
    m = make_manifold(preset)
    sep = 0.4 * m.r_M
    net = build_separated_net(m, sep, seed=3)
    pts = net.points
    K = len(pts)
    assert K >= 4
    for i in range(K):
        d = m.distance(np.broadcast_to(pts[i], pts.shape).copy(), pts)
        d[i] = np.inf
        assert d.min() >= sep * (1 - 1e-9)
    slack = getattr(m.ops, "distance_slack", 0.0)
    assert net.coverage_radius <= 2 * sep + slack + 1e-9


def test_net_deterministic_and_canonically_ordered():
    m = make_manifold("flat-torus")
    a = build_separated_net(m, 0.2, seed=5)
    b = build_separated_net(m, 0.2, seed=5)
    np.testing.assert_array_equal(a.points, b.points)
    order = np.lexsort(a.points.T[::-1])
    np.testing.assert_array_equal(order, np.arange(len(a.points)))


def test_net_guards():
    m = make_manifold("flat-torus")
    with pytest.raises(ConfigError):
        build_separated_net(m, 0.0)
    with pytest.raises(ConfigError) as ei:
        build_separated_net(m, 0.02, budget=3)
    assert ei.value.code == "net-budget-exhausted"
    with pytest.raises(ConfigError):
        build_separated_net(m, 0.2, region_mask=lambda P: np.zeros(len(P), bool))


def test_geodesic_radius_guard():
    m = make_manifold("sphere2")
    with pytest.raises(ConfigError) as ei:
        build_geodesic_trivialization(m, r=m.r_M)
    assert ei.value.code == "radius-too-large"


def test_fermi_radius_guard():
    m, sub = make_pair("flat-torus")
    with pytest.raises(ConfigError) as ei:
        build_fermi_trivialization(m, sub, R=10 * sub.r_collar)
    assert ei.value.code == "radius-too-large"


def test_partition_sums_to_one_geodesic(torus_geo, sphere_geo):
    for triv in (torus_geo, sphere_geo):
        rep = coverage_check(triv, count=800, seed=2)
        assert rep["max_defect"] < 1e-10
        assert rep["min_cover"] == 1.0
        assert rep["multiplicity"] >= 2


def test_partition_sums_to_one_fermi(torus_fermi, sphere_fermi):
    for triv in (torus_fermi, sphere_fermi):
        rep = coverage_check(triv, count=800, seed=2)
        assert rep["max_defect"] < 1e-10
        assert rep["min_cover"] == 1.0


def test_partition_rows_bounded(torus_fermi):
    pts = torus_fermi.manifold.random_points(400, seed=11)
    H, cov = torus_fermi.partition_with_cover(pts)
    assert H.min() >= 0.0
    assert H.max() <= 1.0 + 1e-12
    assert cov.min() >= 0.0 and cov.max() <= 1.0


def test_partition_ignores_nonfinite_points(torus_geo):
    pts = np.array([[0.2, 0.3], [np.nan, 0.1], [0.7, 0.9]])
    H, cov = torus_geo.partition_with_cover(pts)
    assert np.all(H[:, 1] == 0.0)
    assert cov[1] == 0.0
    np.testing.assert_allclose(H[:, [0, 2]].sum(axis=0), 1.0, atol=1e-12)


def test_manifest_roundtrip_bitwise(tmp_path, torus_fermi):
    path = str(tmp_path / "triv.json")
    torus_fermi.save(path)
    loaded = load_trivialization(path)
    assert loaded.uid == torus_fermi.uid
    pts = torus_fermi.manifold.random_points(300, seed=7)
    H0 = torus_fermi.partition_values(pts)
    H1 = loaded.partition_values(pts)
    np.testing.assert_array_equal(H0, H1)

    with open(path) as fh:
        man = json.load(fh)
    loaded2 = load_trivialization(man)
    assert loaded2.uid == torus_fermi.uid


def test_uid_distinguishes_builds(torus_geo):
    other = build_geodesic_trivialization(torus_geo.manifold, seed=1)
    assert other.uid != torus_geo.uid


def test_corrupted_partition_loses_mass(torus_fermi):
    bad = make_corrupted_trivialization(torus_fermi)
    assert bad.manifest()["corruption"] == "discontinuous-cutoff"
    assert bad.uid != torus_fermi.uid
    pts = torus_fermi.manifold.random_points(4000, seed=3)
    H = bad.partition_values(pts)
    defect = np.abs(H.sum(axis=0) - 1.0)
    # the corrupted member is zeroed on half its carrier, so mass is
    # missing wherever it was the only plateau
    assert defect.max() > 0.05
    with pytest.raises(ConfigError):
        make_corrupted_trivialization(torus_fermi, mode="melted")


def test_induced_partition_matches_collar_restriction(torus_fermi):
    sub = torus_fermi.submanifold
    ind = torus_fermi.induced_on_submanifold()
    assert ind.kind == "geodesic"
    lo, hi = sub.arc_window()
    s = np.linspace(lo, hi, 37, endpoint=False)
    P = sub.point_at(s)
    Hf = torus_fermi.partition_values(P)
    Hi = ind.partition_values(s[:, None])
    rows_n = [i for i, tc in enumerate(torus_fermi.tcharts)
              if tc.role == "fermi-n"]
    np.testing.assert_allclose(Hf[rows_n], Hi, atol=1e-12)


def test_induced_requires_fermi(torus_geo):
    with pytest.raises(ConfigError):
        torus_geo.induced_on_submanifold()


def test_partition_smooth_along_path(torus_fermi):
    # the members sampled along a line have no visible jumps
    t = np.linspace(0.0, 1.0, 2001, endpoint=False)
    P = np.stack([t, 0.37 + 0.11 * np.sin(2 * np.pi * t)], axis=1)
    P = np.mod(P, 1.0)
    H = torus_fermi.partition_values(P)
    jumps = np.max(np.abs(np.diff(H, axis=1)))
    assert jumps < 0.02


def test_corrupted_partition_jumps_across_tube(torus_fermi):
    # the corrupted member drops discontinuously on one side of the curve;
    # sample a transversal through the first collar anchor
    bad = make_corrupted_trivialization(torus_fermi)
    sub = bad.submanifold
    s0 = bad.tcharts[0].s_anchor
    R = bad.params["R"]
    t = np.linspace(-0.5 * R, 0.5 * R, 1001)
    P = sub.fermi_forward(s0, t, np.zeros_like(t))
    H = bad.partition_values(P)
    clean = torus_fermi.partition_values(P)
    assert np.max(np.abs(np.diff(clean, axis=1))) < 0.02
    assert np.max(np.abs(np.diff(H, axis=1))) > 0.05


def test_chart_index_lookup(torus_geo):
    cid = torus_geo.tcharts[0].chart.chart_id
    assert torus_geo.chart_index(cid) == 0
    with pytest.raises(ConfigError):
        torus_geo.chart_index("nope")


def test_multiplicity_reported(torus_geo):
    pts = torus_geo.manifold.random_points(500, seed=9)
    mult = torus_geo.multiplicity(pts)
    assert 2 <= mult <= len(torus_geo.tcharts)


def test_admissibility_clean_torus(torus_geo):
    rep = admissibility_report(torus_geo, max_order=2, samples=8,
                               max_pairs=12, max_charts=6)
    assert rep["all_finite"]
    assert rep["all_stable"]
    assert rep["transitions"] and rep["cutoffs"]


def test_admissibility_flags_corruption(torus_fermi):
    bad = make_corrupted_trivialization(torus_fermi)
    rep = admissibility_report(bad, max_order=2, samples=8,
                               check_transitions=False, max_charts=4)
    assert not rep["all_stable"]


def test_bounded_geometry_report_finite(sphere_geo):
    rep = bounded_geometry_report(sphere_geo, max_order=2, samples=8)
    assert rep["all_finite"]
    orders = rep["charts"][0]["orders"]
    assert orders[0]["max_abs_metric"] >= 1.0
