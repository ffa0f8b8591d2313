"""Uniformly locally finite atlases subordinate to ball covers.

Two constructions on every model manifold:

* geodesic trivialization: a maximal separated net of ball centers,
  normal-coordinate charts over the balls, and a partition of unity from
  normalized radial cutoffs;

* collar (Fermi) trivialization around a model curve: charts in
  (normal, arc) coordinates along the curve plus geodesic complement
  charts away from it, with a partition that restricts to a partition of
  unity on the curve itself.

Both carry admissibility diagnostics: FD bounds for chart transition
derivatives and cutoff derivatives, with a step-halving stability check
and a deliberately corrupted variant as a negative control.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from ._bump import DEFAULT_PROFILE
from ._errors import ConfigError, CoverageError, IntegrationError
from .geometry import (BoxDomain, Chart, Manifold, Submanifold,
                       christoffel_from_metric, make_manifold,
                       make_submanifold, pullback_metric_fn)

__all__ = [
    "Net",
    "TrivChart",
    "Trivialization",
    "build_separated_net",
    "build_geodesic_trivialization",
    "build_fermi_trivialization",
    "coverage_check",
    "load_trivialization",
    "make_corrupted_trivialization",
    "admissibility_report",
    "bounded_geometry_report",
]

_NET_TOL = 1e-9      # relative slack in the separation acceptance test


def _soft_floor(s, profile=DEFAULT_PROFILE):
    """Smooth positive denominator equal to s wherever s >= 1.

    Normalizing cutoffs by this instead of s keeps the partition exact
    on the plateau-covered region while members decay smoothly (instead
    of jumping) where a truncated cover runs out.
    """
    return s + (1.0 - s) * profile.window(s, 0.5, 1.0)

_GEO_R_DEFAULTS = {
    "euclidean": 1.0,
    "flat-torus": 0.3,
    "sphere2": np.pi / 4,
    "hyperbolic2": 0.8,
    "surface-of-revolution": 0.3,
    "interval": 0.5,
}


# -- separated nets ----------------------------------------------------------


@dataclass
class Net:
    points: np.ndarray
    sep: float
    seed: int
    coverage_radius: float = np.nan


def build_separated_net(m, sep, seed=0, pool_size=4096, budget=4000,
                        region_mask=None, check_coverage=True, mc=2048):
    """Greedy maximal sep-separated net from a deterministic candidate pool.

    Farthest-point selection accepts candidates while the best minimum
    distance stays >= sep (up to relative tolerance), so the result is
    maximal with respect to the pool: every pool point lies within 2 sep
    of the net. Coverage is verified on a Monte Carlo sample.
    """
    if sep <= 0:
        raise ConfigError("separation must be positive")
    pool = m.pool_points(pool_size, seed)
    if region_mask is not None:
        keep = region_mask(pool)
        pool = pool[keep]
    if len(pool) == 0:
        raise ConfigError("empty candidate pool for net construction")
    tol = _NET_TOL * sep
    sel = [0]
    base = np.broadcast_to(pool[0], pool.shape).copy()
    dmin = m.distance(base, pool)
    while True:
        i = int(np.argmax(dmin))
        if dmin[i] < sep - tol:
            break
        if len(sel) >= budget:
            raise ConfigError(
                f"net exceeded its budget of {budget} points",
                code="net-budget-exhausted")
        sel.append(i)
        d_new = m.distance(np.broadcast_to(pool[i], pool.shape).copy(), pool)
        dmin = np.minimum(dmin, d_new)
    pts = pool[np.array(sel)]
    # canonical ordering so ids are deterministic regardless of pool layout
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    cov = np.nan
    if check_coverage:
        sample = m.random_points(mc, seed=seed + 1)
        if region_mask is not None:
            sample = sample[region_mask(sample)]
        if len(sample):
            dmat = np.stack([
                m.distance(np.broadcast_to(c, sample.shape).copy(), sample)
                for c in pts])
            cov = float(np.max(np.min(dmat, axis=0)))
            if cov > 2 * sep + getattr(m.ops, "distance_slack", 0.0) + tol:
                raise CoverageError(
                    f"net coverage radius {cov:.4f} exceeds 2 sep = {2 * sep:.4f}")
    return Net(points=pts, sep=float(sep), seed=int(seed),
               coverage_radius=cov)


# -- trivialization charts ---------------------------------------------------


@dataclass
class TrivChart:
    chart: Chart
    role: str                 # "geodesic" | "fermi-n" | "fermi-c"
    radius: float             # cutoff plateau scale
    center: np.ndarray = None  # manifold point for ball charts
    s_anchor: float = None     # arc position for collar charts


def _normal_chart(m, center, frame, radius, cid, domain_radius=None):
    """Normal-coordinate chart: x -> exp_c(sum x_i E_i), ball domain."""
    center = np.asarray(center, dtype=float)
    frame = np.asarray(frame, dtype=float)  # (n, point_dim)
    dr = 1.5 * radius if domain_radius is None else domain_radius

    def fwd(x):
        x = np.atleast_2d(x)
        v = x @ frame
        return m.exp(np.broadcast_to(center, v.shape).copy(), v)

    def inv(p):
        p = np.atleast_2d(p)
        base = np.broadcast_to(center, p.shape).copy()
        v = m.log(base, p)
        return np.stack([m.metric_dot(base, v, np.broadcast_to(e, v.shape).copy())
                         for e in frame], axis=1)

    met = pullback_metric_fn(m.ops, fwd)
    return Chart(cid, m.n, BoxDomain(np.zeros(m.n), np.full(m.n, dr), ball=True),
                 fwd, inv, met, None, kind="normal")


def _collar_chart(m, sub, s_anchor, R, cid):
    """Collar chart (t, x) -> normal geodesic through the curve point."""

    def fwd(xx):
        xx = np.atleast_2d(xx)
        return sub.fermi_forward(s_anchor, xx[:, 0], xx[:, 1])

    def inv(p):
        t, x, ok = sub.fermi_inverse(s_anchor, p)
        out = np.stack([t, x], axis=1)
        out[~ok] = np.nan
        return out

    met = pullback_metric_fn(m.ops, fwd)
    dom = BoxDomain(np.zeros(2), np.full(2, 2.0 * R))
    return Chart(cid, m.n, dom, fwd, inv, met, None, kind="collar")


# -- trivializations ---------------------------------------------------------


@dataclass
class Trivialization:
    """A cover by charts plus the subordinate partition of unity."""

    manifold: Manifold
    kind: str                     # "geodesic" | "fermi"
    tcharts: list
    params: dict = field(default_factory=dict)
    submanifold: Submanifold = None
    corruption: str = None

    @property
    def charts(self):
        return [tc.chart for tc in self.tcharts]

    def chart_index(self, cid):
        for i, tc in enumerate(self.tcharts):
            if tc.chart.chart_id == cid:
                return i
        raise ConfigError(f"no chart with id {cid!r}")

    # ---- partition of unity ----

    def _ball_raw(self, tcs, P):
        """Radial cutoff values chi(d(p, center)/r) for ball-type charts.

        Points are classified into plateau / transition / outside zones
        with the fast distance estimate (an overestimate on the table
        preset), and the smooth distance is evaluated only on the
        transition annulus.
        """
        m = self.manifold
        B = len(P)
        A = len(tcs)
        raw = np.zeros((A, B))
        slack = getattr(m.ops, "distance_slack", 0.0)
        ann_rows, ann_cols = [], []
        for a, tc in enumerate(tcs):
            r = tc.radius
            dest = m.distance(np.broadcast_to(tc.center, P.shape).copy(), P)
            plateau = dest <= r
            outside = dest >= 1.5 * r + slack
            raw[a, plateau] = 1.0
            ann = ~plateau & ~outside
            if np.any(ann):
                idx = np.nonzero(ann)[0]
                ann_rows.append(np.full(len(idx), a))
                ann_cols.append(idx)
        if ann_rows:
            rows = np.concatenate(ann_rows)
            cols = np.concatenate(ann_cols)
            bases = np.stack([tcs[a].center for a in rows])
            d = m.smooth_distance(bases, P[cols])
            bad = ~np.isfinite(d)
            if np.any(bad):
                raise IntegrationError(
                    f"{int(bad.sum())} smooth distance evaluations failed "
                    "in the cutoff transition zone")
            rr = np.array([tcs[a].radius for a in rows])
            raw[rows, cols] = DEFAULT_PROFILE.window(d / rr, 1.0, 1.5)
        return raw

    def _apply_corruption(self, tcs, P, raw):
        if self.corruption == "discontinuous-cutoff" and len(tcs):
            x = tcs[0].chart.inverse(P)
            jump = np.where(np.isfinite(x[:, 0]) & (x[:, 0] > 0), 1.0, 0.0)
            raw[0] = raw[0] * jump
        return raw

    def partition_values(self, points, profile=DEFAULT_PROFILE):
        """Partition member values, one row per chart: shape (A, B).

        Rows sum to 1 wherever the cover reaches (and to less than 1
        outside); use coverage_check to assert coverage on a region.
        """
        return self.partition_with_cover(points, profile)[0]

    def partition_with_cover(self, points, profile=DEFAULT_PROFILE):
        """Partition rows plus the cover strength at each point.

        Cover strength is the clipped raw cutoff mass: exactly 1 where
        some plateau reaches the point, dropping to 0 outside the cover.
        Normalized rows are only trustworthy where it is near 1; the
        smoothness checks mask on it.
        """
        P = np.atleast_2d(np.asarray(points, dtype=float))
        fin = np.isfinite(P).all(axis=1)
        if not fin.all():
            H = np.zeros((len(self.tcharts), len(P)))
            cov = np.zeros(len(P))
            if fin.any():
                Hf, cf = self.partition_with_cover(P[fin], profile)
                H[:, fin] = Hf
                cov[fin] = cf
            return H, cov
        if self.kind == "geodesic":
            raw = self._ball_raw(self.tcharts, P)
            raw = self._apply_corruption(self.tcharts, P, raw)
            s = raw.sum(axis=0)
            return raw / _soft_floor(s, profile), np.minimum(s, 1.0)

        sub = self.submanifold
        R = self.params["R"]
        ncs = [tc for tc in self.tcharts if tc.role == "fermi-n"]
        ccs = [tc for tc in self.tcharts if tc.role == "fermi-c"]
        t, s_proj, ok = sub.tube_coords(P)
        psi = np.where(ok, profile.window(np.abs(t), R, 1.5 * R), 0.0)
        chiN = np.zeros((len(ncs), len(P)))
        on_tube = psi > 0
        if np.any(on_tube):
            dN = np.stack([sub.dist(tc.s_anchor, s_proj[on_tube])
                           for tc in ncs])
            chiN[:, on_tube] = profile.window(dN, 2 * R / 3.0, R)
        sN = chiN.sum(axis=0)
        sigN = _soft_floor(sN, profile)
        hN = (chiN / sigN) * psi
        # collar group mass: psi where the arc is plateau-anchored, and
        # smoothly less where the anchored range runs out
        wC = 1.0 - psi * (sN / sigN)

        rawC = self._ball_raw(ccs, P)
        rawC = self._apply_corruption(ccs, P, rawC) if not ncs else rawC
        sC = rawC.sum(axis=0)
        hC = (rawC / _soft_floor(sC, profile)) * wC
        if self.corruption == "discontinuous-cutoff" and ncs:
            x = ncs[0].chart.inverse(P)
            jump = np.where(np.isfinite(x[:, 0]) & (x[:, 0] > 0), 1.0, 0.0)
            hN[0] = hN[0] * jump
        out = np.zeros((len(self.tcharts), len(P)))
        i_n = i_c = 0
        for i, tc in enumerate(self.tcharts):
            if tc.role == "fermi-n":
                out[i] = hN[i_n]
                i_n += 1
            else:
                out[i] = hC[i_c]
                i_c += 1
        cN = psi * np.minimum(sN, 1.0)
        cov = cN + (1.0 - cN) * np.minimum(sC, 1.0)
        return out, cov

    def multiplicity(self, points):
        H = self.partition_values(points)
        return int(np.max(np.sum(H > 0, axis=0)))

    # ---- manifest / identity ----

    def manifest(self):
        m = self.manifold
        chs = []
        for tc in self.tcharts:
            entry = {"id": tc.chart.chart_id, "role": tc.role,
                     "radius": float(tc.radius)}
            if tc.center is not None:
                entry["center"] = [float(v) for v in tc.center]
            if tc.s_anchor is not None:
                entry["s"] = float(tc.s_anchor)
            if tc.role in ("geodesic", "fermi-c"):
                entry["frame"] = [[float(v) for v in row]
                                  for row in tc.chart._frame]
            chs.append(entry)
        man = {"kind": self.kind, "preset": m.preset,
               "m_params": _jsonable(m.params),
               "params": _jsonable(self.params),
               "charts": chs}
        if self.submanifold is not None:
            man["submanifold"] = {"name": self.submanifold.name,
                                  "params": _jsonable(self.submanifold.params)}
        if self.corruption:
            man["corruption"] = self.corruption
        return man

    @property
    def uid(self):
        blob = json.dumps(self.manifest(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha1(blob.encode()).hexdigest()[:16]

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.manifest(), fh, sort_keys=True, indent=1)

    # ---- induced structure on the curve ----

    def induced_on_submanifold(self):
        """Restriction to the curve: a geodesic trivialization of it.

        The collar partition members restrict on the curve to normalized
        arc cutoffs with plateau 2R/3, which is exactly a geodesic
        trivialization of the 1-d model at radius 2R/3.
        """
        if self.kind != "fermi":
            raise ConfigError("only collar trivializations restrict to the curve")
        R = self.params["R"]
        mN = self.submanifold.as_manifold()
        anchors = np.array([[tc.s_anchor] for tc in self.tcharts
                            if tc.role == "fermi-n"])
        return build_geodesic_trivialization(
            mN, r=2 * R / 3.0, net_points=anchors,
            seed=self.params.get("seed", 0), check_coverage=False)


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, float)):
            out[k] = float(v)
        elif isinstance(v, (np.integer, int)):
            out[k] = int(v)
        elif isinstance(v, (tuple, list, np.ndarray)):
            out[k] = [float(x) for x in np.asarray(v).ravel()]
        else:
            out[k] = v
    return out


def _attach_frame(chart, frame):
    chart._frame = np.asarray(frame, dtype=float)
    return chart


def build_geodesic_trivialization(m, r=None, seed=0, pool_size=4096,
                                  budget=4000, net_points=None,
                                  check_coverage=True):
    """Ball-cover trivialization: net at separation r/2, charts over the
    exp images of 3r/2 balls, normalized radial cutoffs with plateau r."""
    if r is None:
        r = m.r_M / 2 if m.preset == "circle" else _GEO_R_DEFAULTS.get(m.preset)
        if r is None:
            raise ConfigError(f"no default radius for preset {m.preset!r}")
    r = float(r)
    if 1.5 * r > m.r_M * (1 + 1e-12):
        raise ConfigError(
            f"chart radius {1.5 * r:.4f} exceeds the injectivity radius "
            f"{m.r_M:.4f}", code="radius-too-large")
    if net_points is None:
        net = build_separated_net(m, r / 2.0, seed=seed, pool_size=pool_size,
                                  budget=budget, check_coverage=check_coverage)
        centers = net.points
    else:
        centers = np.atleast_2d(np.asarray(net_points, dtype=float))
    tcs = []
    frames = m.frame_at(centers)
    for i, c in enumerate(centers):
        cid = f"g{i:03d}"
        ch = _attach_frame(_normal_chart(m, c, frames[i], r, cid), frames[i])
        tcs.append(TrivChart(chart=ch, role="geodesic", radius=r, center=c))
    return Trivialization(manifold=m, kind="geodesic", tcharts=tcs,
                          params={"r": r, "seed": int(seed),
                                  "pool_size": int(pool_size)})


def build_fermi_trivialization(m, sub, R=None, complement_radius=None,
                               seed=0, pool_size=4096, budget=4000):
    """Collar trivialization around a model curve.

    R defaults to min(r_N/2, r_M/4, collar/2). Collar charts sit at a
    maximal R/2-separated net of arc positions; complement charts are
    geodesic charts whose centers avoid the inner tube |t| < R.
    """
    R_cap = min(sub.r_N / 2.0, m.r_M / 4.0, sub.r_collar / 2.0)
    if R is None:
        R = R_cap
    R = float(R)
    if R > R_cap * (1 + 1e-12):
        raise ConfigError(
            f"collar width {R:.4f} exceeds the admissible bound {R_cap:.4f}",
            code="radius-too-large")
    rc = complement_radius
    if rc is None:
        # complement members inherit the tube cutoff's R/3 arc ramp, so
        # their chart boxes must stay small enough to resolve it on the
        # same grids that resolve the collar charts
        rc = min(R, 2.0 * m.r_M / 3.0)
    rc = float(rc)
    if 1.5 * rc > m.r_M * (1 + 1e-12):
        raise ConfigError(
            f"complement chart radius {1.5 * rc:.4f} exceeds the injectivity "
            f"radius {m.r_M:.4f}", code="radius-too-large")

    mN = sub.as_manifold()
    nnet = build_separated_net(mN, R / 2.0, seed=seed, pool_size=pool_size,
                               budget=budget)
    tcs = []
    for i, srow in enumerate(nnet.points):
        s0 = float(srow[0])
        cid = f"n{i:03d}"
        tcs.append(TrivChart(chart=_collar_chart(m, sub, s0, R, cid),
                             role="fermi-n", radius=R, s_anchor=s0))

    def off_tube(P):
        t, _, ok = sub.tube_coords(P)
        return ok & (np.abs(t) >= R)

    cnet = build_separated_net(m, rc / 2.0, seed=seed, pool_size=pool_size,
                               budget=budget, region_mask=off_tube,
                               check_coverage=False)
    frames = m.frame_at(cnet.points)
    for i, c in enumerate(cnet.points):
        cid = f"c{i:03d}"
        ch = _attach_frame(_normal_chart(m, c, frames[i], rc, cid), frames[i])
        tcs.append(TrivChart(chart=ch, role="fermi-c", radius=rc, center=c))
    return Trivialization(manifold=m, kind="fermi", tcharts=tcs,
                          params={"R": R, "complement_radius": rc,
                                  "seed": int(seed), "pool_size": int(pool_size)},
                          submanifold=sub)


def coverage_check(triv, count=2048, seed=0, tol=1e-10):
    """Partition and cover diagnostics over a Monte Carlo window sample.

    max_defect is the worst |sum of members - 1|; min_cover is the worst
    clipped raw cutoff mass (1.0 means every sampled point sits on some
    plateau, not merely on overlapping tails).
    """
    pts = triv.manifold.random_points(count, seed=seed)
    H, cov = triv.partition_with_cover(pts)
    defect = float(np.max(np.abs(H.sum(axis=0) - 1.0)))
    return {"points": int(len(pts)), "max_defect": defect,
            "min_cover": float(np.min(cov)),
            "multiplicity": int(np.max(np.sum(H > 0, axis=0)))}


def load_trivialization(manifest):
    """Rebuild a trivialization from its manifest (dict or JSON path).

    Chart centers, frames and radii are taken from the manifest, not
    re-derived, so the loaded partition matches the saved one exactly.
    """
    if isinstance(manifest, str):
        with open(manifest) as fh:
            manifest = json.load(fh)
    mp = dict(manifest.get("m_params", {}))
    m = make_manifold(manifest["preset"], **mp)
    params = dict(manifest["params"])
    sub = None
    if manifest.get("submanifold"):
        sd = manifest["submanifold"]
        sub = make_submanifold(m, sd["name"], **sd.get("params", {}))
    tcs = []
    for entry in manifest["charts"]:
        role = entry["role"]
        radius = float(entry["radius"])
        cid = entry["id"]
        if role == "fermi-n":
            R = params["R"]
            tcs.append(TrivChart(chart=_collar_chart(m, sub, entry["s"], R, cid),
                                 role=role, radius=radius,
                                 s_anchor=float(entry["s"])))
        else:
            center = np.asarray(entry["center"], dtype=float)
            frame = np.asarray(entry["frame"], dtype=float)
            ch = _attach_frame(_normal_chart(m, center, frame, radius, cid),
                               frame)
            tcs.append(TrivChart(chart=ch, role=role, radius=radius,
                                 center=center))
    return Trivialization(manifold=m, kind=manifest["kind"], tcharts=tcs,
                          params=params, submanifold=sub,
                          corruption=manifest.get("corruption"))


def make_corrupted_trivialization(triv, mode="discontinuous-cutoff"):
    """Negative control: same cover, one cutoff made discontinuous."""
    if mode != "discontinuous-cutoff":
        raise ConfigError(f"unknown corruption mode {mode!r}")
    return Trivialization(manifold=triv.manifold, kind=triv.kind,
                          tcharts=triv.tcharts, params=dict(triv.params),
                          submanifold=triv.submanifold, corruption=mode)


# -- FD derivative diagnostics -----------------------------------------------


def _multi_indices(n, order):
    out = []
    for comb in itertools.combinations_with_replacement(range(n), order):
        a = [0] * n
        for c in comb:
            a[c] += 1
        out.append(tuple(a))
    return out


def _fd_derivative(fn, x, alpha, step):
    """Iterated central difference for the multi-index alpha at points x.

    fn maps (B, n) -> (B, ...). Composes the two-point first-difference
    operator per axis, so the stencil for order k has k+1 nodes at
    spacing 2*step along that axis. All stencil nodes go to fn in a
    single batched call.
    """
    x = np.atleast_2d(x)
    # build tensor-product stencil: offsets and binomial weights per axis
    offs = [np.zeros(x.shape[1])]
    wts = [1.0]
    for axis, k in enumerate(alpha):
        if k == 0:
            continue
        new_offs, new_wts = [], []
        coef = [(-1) ** j * _binom(k, j) for j in range(k + 1)]
        for off, w in zip(offs, wts):
            for j in range(k + 1):
                e = off.copy()
                e[axis] += (k - 2 * j) * step
                new_offs.append(e)
                new_wts.append(w * coef[j] / (2 * step) ** k)
        offs, wts = new_offs, new_wts
    batch = np.concatenate([x + off for off in offs], axis=0)
    out = np.asarray(fn(batch), dtype=float)
    out = out.reshape((len(offs), len(x)) + out.shape[1:])
    w = np.asarray(wts).reshape((len(offs),) + (1,) * (out.ndim - 1))
    return np.sum(w * out, axis=0)


def _binom(k, j):
    out = 1
    for i in range(j):
        out = out * (k - i) // (i + 1)
    return out


def _strided_diff(V, k, s):
    """k-th finite difference of rows of V with node stride s, all starts."""
    W = V.shape[1] - s * k
    out = np.zeros((V.shape[0], W))
    for j in range(k + 1):
        out += (-1) ** j * _binom(k, j) * V[:, s * (k - j): s * (k - j) + W]
    return out


def _contig_ok(ok, k, s):
    """Mask of starts whose k stride-s difference nodes are all covered."""
    W = len(ok) - s * k
    out = ok[:W].copy()
    for j in range(1, k + 1):
        out &= ok[s * j: s * j + W]
    return out


def _chart_reach(tc):
    dom = tc.chart.domain
    return float(np.max(dom.radii)) * (1.0 if dom.ball else np.sqrt(dom.n))


def _overlapping_pairs(triv, margin=1.2):
    """Candidate chart pairs by center/anchor proximity."""
    m = triv.manifold
    sub = triv.submanifold
    reps = []
    for tc in triv.tcharts:
        if tc.center is not None:
            reps.append(np.asarray(tc.center, dtype=float))
        else:
            reps.append(sub.point_at(np.array([tc.s_anchor]))[0])
    reps = np.stack(reps)
    A = len(reps)
    pairs = []
    for i in range(A):
        d = m.distance(np.broadcast_to(reps[i], reps.shape).copy(), reps)
        for j in range(A):
            if i == j:
                continue
            if d[j] <= margin * (_chart_reach(triv.tcharts[i])
                                 + _chart_reach(triv.tcharts[j])):
                pairs.append((i, j))
    return pairs


def admissibility_report(triv, max_order=3, fd_step=5e-3, samples=12,
                         seed=0, check_transitions=True, check_cutoffs=True,
                         max_pairs=48, max_charts=32):
    """FD bounds for transition and cutoff derivatives up to max_order.

    Transition maps get iterated central differences at steps h and h/2
    on interior samples; stable means the bound grows by at most 2x
    under halving. Cutoffs get divided differences along axis scans
    through each host chart, restricted to scan nodes with cover
    strength at least 1/2 (outside the covered carrier the normalized
    members are not claimed smooth). The worst spot of each scan is
    re-measured on a zoomed grid at two spacings: a smooth derivative
    peak converges there (ratio near 1) while a jump keeps scaling like
    (1/h)^k, so cutoff entries are stable when the zoomed ratio stays
    below 1.7. Large atlases are subsampled (deterministically) to
    max_pairs transitions and max_charts cutoff hosts.
    """
    rng = np.random.default_rng(seed)
    m = triv.manifold
    n = m.n
    report = {"kind": triv.kind, "transitions": [], "cutoffs": [],
              "max_order": int(max_order)}

    if check_transitions:
        pairs = _overlapping_pairs(triv)
        if len(pairs) > max_pairs:
            pick = rng.choice(len(pairs), size=max_pairs, replace=False)
            pairs = [pairs[k] for k in sorted(pick)]
        for (i, j) in pairs:
            A = triv.tcharts[i].chart
            B = triv.tcharts[j].chart
            x = A.domain.sample(samples * 4, rng, margin=0.8)
            inside = B.contains_point(A.forward(x), margin=0.98)
            x = x[inside][:samples]
            if len(x) < max(4, samples // 4):
                continue

            def mu(xx):
                return B.inverse(A.forward(xx))

            entry = {"pair": [A.chart_id, B.chart_id], "samples": int(len(x)),
                     "orders": {}}
            for k in range(1, max_order + 1):
                vmax = vmax2 = 0.0
                for alpha in _multi_indices(n, k):
                    d1 = _fd_derivative(mu, x, alpha, fd_step)
                    d2 = _fd_derivative(mu, x, alpha, fd_step / 2)
                    vmax = max(vmax, float(np.nanmax(np.abs(d1))))
                    vmax2 = max(vmax2, float(np.nanmax(np.abs(d2))))
                ratio = vmax2 / max(vmax, 1e-12)
                entry["orders"][k] = {
                    "max_abs": vmax, "max_abs_half_step": vmax2,
                    "stable": bool(np.isfinite(vmax) and np.isfinite(vmax2)
                                   and (ratio <= 2.0 or vmax2 < 1e-6))}
            report["transitions"].append(entry)

    if check_cutoffs:
        hosts = list(range(len(triv.tcharts)))
        if len(hosts) > max_charts:
            # always keep chart 0: the corrupted fixture targets it
            pick = rng.choice(len(hosts) - 1, size=max_charts - 1,
                              replace=False) + 1
            hosts = [0] + sorted(int(k) for k in pick)
        S = 96        # scan resolution for locating derivative hotspots
        refine = 128  # node count of the fine window around each hotspot
        per_axis = max(2, samples // 4)
        for i in hosts:
            tc = triv.tcharts[i]
            A = tc.chart
            dom = A.domain
            acc = {k: 0.0 for k in range(1, max_order + 1)}
            rat = {k: 1.0 for k in range(1, max_order + 1)}
            nscan = 0
            for ax in range(A.n):
                for _ in range(per_axis):
                    base = dom.sample(1, rng, margin=0.9)[0]
                    lo = dom.center[ax] - 0.9 * dom.radii[ax]
                    hi = dom.center[ax] + 0.9 * dom.radii[ax]
                    ts = np.linspace(lo, hi, S + 1)
                    X = np.tile(base, (S + 1, 1))
                    X[:, ax] = ts
                    H, cov = triv.partition_with_cover(A.forward(X))
                    okm = cov >= 0.5
                    if int(okm.sum()) < 8:
                        continue
                    nscan += 1
                    hf = ts[1] - ts[0]
                    hot = []
                    for k in range(1, max_order + 1):
                        D = _strided_diff(H, k, 1) / hf ** k
                        good = _contig_ok(okm, k, 1)
                        if not good.any():
                            continue
                        cols = np.nonzero(good)[0]
                        Dg = np.abs(D[:, good])
                        acc[k] = max(acc[k], float(Dg.max()))
                        c = cols[np.argmax(Dg.max(axis=0))]
                        hot.append(int(round(c + k / 2)))
                    spots = []
                    for c in sorted(set(hot)):
                        if not spots or c - spots[-1] > 6:
                            spots.append(c)
                    # zoom on each hotspot: a smooth peak converges under
                    # refinement, a jump keeps scaling like (1/h)^k. Peaks
                    # narrower than the first zoom (stacked cutoff ramps
                    # steepen the normalization crossing) get re-zoomed at
                    # the offending position until the ratio settles; a
                    # jump never settles, so the negative control stays
                    # flagged no matter how deep the zoom goes.
                    for c in spots:
                        mid = ts[min(max(c, 0), S)]
                        half = 6 * hf
                        pend = set(range(1, max_order + 1))
                        spot_rat = {}
                        for _level in range(3):
                            lo2 = max(lo, mid - half)
                            hi2 = min(hi, mid + half)
                            t2 = np.linspace(lo2, hi2, refine + 1)
                            X2 = np.tile(base, (refine + 1, 1))
                            X2[:, ax] = t2
                            H2, cov2 = triv.partition_with_cover(A.forward(X2))
                            ok2 = cov2 >= 0.5
                            h2 = t2[1] - t2[0]
                            nxt = set()
                            re_mid, re_rat = mid, 0.0
                            for k in sorted(pend):
                                Df = _strided_diff(H2, k, 1) / h2 ** k
                                gf = _contig_ok(ok2, k, 1)
                                Dc = _strided_diff(H2, k, 2) / (2 * h2) ** k
                                gc = _contig_ok(ok2, k, 2)
                                if not (gf.any() and gc.any()):
                                    continue
                                cols = np.nonzero(gf)[0]
                                Dg = np.abs(Df[:, gf])
                                af = float(Dg.max())
                                ac = float(np.abs(Dc[:, gc]).max())
                                acc[k] = max(acc[k], af)
                                r = af / max(ac, 1e-12)
                                spot_rat[k] = r
                                if r > 1.7:
                                    nxt.add(k)
                                    j = cols[int(np.argmax(Dg.max(axis=0)))]
                                    pos = t2[min(j + (k + 1) // 2, refine)]
                                    if r > re_rat:
                                        re_mid, re_rat = float(pos), r
                            if not nxt:
                                break
                            pend = nxt
                            mid = re_mid
                            half = 6 * h2
                        for k, r in spot_rat.items():
                            rat[k] = max(rat[k], r)
            entry = {"chart": A.chart_id, "scans": int(nscan), "orders": {}}
            for k in range(1, max_order + 1):
                entry["orders"][k] = {
                    "max_abs": acc[k], "refine_ratio": rat[k],
                    "stable": bool(np.isfinite(acc[k]) and np.isfinite(rat[k])
                                   and (rat[k] <= 1.7 or acc[k] < 1e-6))}
            report["cutoffs"].append(entry)

    def agg(entries):
        out = {}
        for k in range(1, max_order + 1):
            vals = [e["orders"][k]["max_abs"] for e in entries if k in e["orders"]]
            stab = [e["orders"][k]["stable"] for e in entries if k in e["orders"]]
            out[k] = {"max_abs": max(vals) if vals else 0.0,
                      "all_stable": bool(all(stab)) if stab else True}
        return out

    report["transition_summary"] = agg(report["transitions"])
    report["cutoff_summary"] = agg(report["cutoffs"])
    report["all_finite"] = bool(np.isfinite(
        max([report["transition_summary"][k]["max_abs"]
             for k in report["transition_summary"]] +
            [report["cutoff_summary"][k]["max_abs"]
             for k in report["cutoff_summary"]] + [0.0])))
    report["all_stable"] = bool(
        all(report["transition_summary"][k]["all_stable"]
            for k in report["transition_summary"])
        and all(report["cutoff_summary"][k]["all_stable"]
                for k in report["cutoff_summary"]))
    return report


def bounded_geometry_report(triv_or_manifold, max_order=2, fd_step=5e-3,
                            samples=16, seed=0):
    """FD bounds for metric and inverse-metric derivatives per chart."""
    rng = np.random.default_rng(seed)
    if isinstance(triv_or_manifold, Trivialization):
        charts = triv_or_manifold.charts
        n = triv_or_manifold.manifold.n
    else:
        charts = triv_or_manifold.charts
        n = triv_or_manifold.n
    rows = []
    for ch in charts:
        x = ch.domain.sample(samples, rng, margin=0.85)

        def gfun(xx, _ch=ch):
            return _ch.metric(xx).reshape(len(xx), -1)

        def ginvfun(xx, _ch=ch):
            return np.linalg.inv(_ch.metric(xx)).reshape(len(xx), -1)

        entry = {"chart": ch.chart_id, "orders": {}}
        for k in range(0, max_order + 1):
            if k == 0:
                vg = float(np.max(np.abs(gfun(x))))
                vgi = float(np.max(np.abs(ginvfun(x))))
            else:
                vg = max(float(np.nanmax(np.abs(_fd_derivative(gfun, x, a, fd_step))))
                         for a in _multi_indices(n, k))
                vgi = max(float(np.nanmax(np.abs(_fd_derivative(ginvfun, x, a, fd_step))))
                          for a in _multi_indices(n, k))
            entry["orders"][k] = {"max_abs_metric": vg,
                                  "max_abs_inverse": vgi}
        rows.append(entry)
    finite = all(np.isfinite(e["orders"][k][key]) for e in rows
                 for k in e["orders"] for key in e["orders"][k])
    return {"charts": rows, "all_finite": bool(finite)}
