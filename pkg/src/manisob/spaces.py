"""Localized function-space norms on manifolds, plus trace and extension.

A trivialization turns a global norm into chart work: multiply by the
partition member, pull back to the chart box, take a flat-space norm
there, and aggregate over charts. This module hosts that pipeline, the
classical covariant Sobolev cross-check, the trace onto a model curve,
its right inverse, and the norm-equivalence experiment that compares
trivializations.

Grids are the chart domains padded by 25% and the pullbacks are extended
by zero outside the cutoff support, so the flat-space FFT guards
(boundary decay, aliasing) stay meaningful. Everything reduces in chart
order, which makes reports bit-reproducible for a fixed manifest.
"""

from __future__ import annotations

import csv
import json
import time
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import CubicSpline

from ._bump import DEFAULT_PROFILE
from ._errors import ConfigError, DomainError, IntegrationError
from .euclid import (DEFAULT_EXTENSION_PROFILE, GridFunction, bessel_norm,
                     besov_norm, dyadic_decompose, euclid_trace, fourier_eval,
                     triebel_norm)

__all__ = [
    "ManifoldFunction",
    "NormReport",
    "function_family",
    "localized_norm",
    "covariant_norm",
    "trace",
    "extend",
    "equivalence_experiment",
]


@dataclass
class ManifoldFunction:
    """A scalar field given by a smooth evaluator on point rows.

    The evaluator must accept (B, point_dim) arrays for every chart image
    of any trivialization the field is used with; fields on a model curve
    take (B, 1) arc positions. Arithmetic produces derived fields, which
    keeps linearity of the operators directly testable.
    """

    evaluator: object
    function_id: str = "field"
    smoothness: str = "smooth"
    family: str = ""
    meta: dict = field(default_factory=dict)

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.asarray(self.evaluator(pts), dtype=np.complex128)
        return out.reshape(len(pts))

    def __add__(self, other):
        if not isinstance(other, ManifoldFunction):
            return NotImplemented
        return ManifoldFunction(
            lambda P, a=self, b=other: a(P) + b(P),
            function_id=f"({self.function_id}+{other.function_id})",
            smoothness=self.smoothness, family=self.family)

    def __sub__(self, other):
        if not isinstance(other, ManifoldFunction):
            return NotImplemented
        return self + (-1.0) * other

    def __mul__(self, c):
        if isinstance(c, ManifoldFunction):
            return ManifoldFunction(
                lambda P, a=self, b=c: a(P) * b(P),
                function_id=f"({self.function_id}*{c.function_id})",
                smoothness=self.smoothness, family=self.family)
        cc = complex(c)
        return ManifoldFunction(
            lambda P, a=self, cc=cc: cc * a(P),
            function_id=f"({cc!r}*{self.function_id})",
            smoothness=self.smoothness, family=self.family)

    __rmul__ = __mul__


def function_family(m, count=10, seed=0, kind="smooth", freq_max=2.0,
                    terms=4, modes=3):
    """Deterministic families of test fields on a model manifold.

    kind="smooth" builds random cosine ridges in the embedded coordinates,
    defined and smooth on the whole preset. kind="bandlimited" builds
    trigonometric polynomials with `modes` harmonics in the arc coordinate
    of a 1-d model (the curve side of trace/extension experiments).
    kind="zero" and kind="mode" (single torus sine modes) are fixed
    reference families used by the command-line runner and the tests.
    """
    rng = np.random.default_rng(int(seed))
    fam = []
    if kind == "zero":
        for i in range(count):
            fam.append(ManifoldFunction(
                lambda P: np.zeros(len(np.atleast_2d(P)), dtype=np.complex128),
                function_id=f"{m.preset}-z{seed}-{i:02d}",
                smoothness="smooth", family=f"{m.preset}/zero/{seed}"))
        return fam
    if kind == "mode":
        if m.preset != "flat-torus":
            raise ConfigError("mode families live on the flat torus")
        for i in range(count):
            def ev(P, k=i + 1):
                return np.sin(2.0 * np.pi * k * np.asarray(P)[:, 0]) + 0j

            fam.append(ManifoldFunction(
                ev, function_id=f"{m.preset}-m{seed}-{i:02d}",
                smoothness="bandlimited", family=f"{m.preset}/mode/{seed}"))
        return fam
    if kind == "smooth":
        for i in range(count):
            probe = m.embed(m.random_points(1, seed=seed))
            E = probe.shape[1]
            W = rng.normal(size=(terms, E))
            W *= (rng.uniform(0.4, freq_max, size=(terms, 1))
                  / np.linalg.norm(W, axis=1, keepdims=True))
            phase = rng.uniform(0.0, 2.0 * np.pi, size=terms)
            amp = rng.normal(size=terms) / np.sqrt(terms)
            base = 0.3 * rng.normal()

            def ev(P, W=W, phase=phase, amp=amp, base=base, emb=m.embed):
                return base + np.cos(emb(P) @ W.T + phase) @ amp

            fam.append(ManifoldFunction(
                ev, function_id=f"{m.preset}-s{seed}-{i:02d}",
                smoothness="smooth", family=f"{m.preset}/smooth/{seed}"))
        return fam
    if kind == "bandlimited":
        if m.n != 1:
            raise ConfigError("band-limited families live on 1-d models")
        if m.preset == "circle":
            span = float(m.params["length"])
            w0 = 2.0 * np.pi / span
            shift = 0.0
        elif m.preset == "flat-torus":
            w0 = 2.0 * np.pi
            shift = 0.0
        else:
            lo, hi = float(m.params["lo"]), float(m.params["hi"])
            w0 = np.pi / (hi - lo)
            shift = lo
        for i in range(count):
            a = rng.normal(size=modes + 1) / np.sqrt(modes + 1)
            b = rng.normal(size=modes + 1) / np.sqrt(modes + 1)
            b[0] = 0.0

            def ev(P, a=a, b=b, w0=w0, shift=shift):
                th = np.multiply.outer((P[:, 0] - shift) * w0, np.arange(len(a)))
                return np.cos(th) @ a + np.sin(th) @ b

            fam.append(ManifoldFunction(
                ev, function_id=f"{m.preset}-b{seed}-{i:02d}",
                smoothness="bandlimited", family=f"{m.preset}/bandlimited/{seed}"))
        return fam
    raise ConfigError(f"unknown family kind {kind!r}")


# -- chart grids ------------------------------------------------------------

_GRID_CACHE = OrderedDict()
_GRID_CACHE_CAP = 5


def _cache_get(key):
    hit = _GRID_CACHE.get(key)
    if hit is not None:
        _GRID_CACHE.move_to_end(key)
    return hit


def _cache_put(key, val):
    _GRID_CACHE[key] = val
    _GRID_CACHE.move_to_end(key)
    while len(_GRID_CACHE) > _GRID_CACHE_CAP:
        _GRID_CACHE.popitem(last=False)


def _support_mask(tc, X, params):
    """Nodes where the chart's cutoff can be nonzero."""
    if tc.role == "fermi-n":
        R = params["R"]
        return (np.abs(X[:, 0]) < 1.5 * R) & (np.abs(X[:, 1]) < R)
    return tc.chart.domain.rel(X) < 1.0


def _grid_entries(triv, res, pad=1.25):
    """Function-independent pullback geometry per chart, cached.

    Each entry holds the padded grid box, the in-support nodes, their
    mapped manifold points, and the partition member values there, so
    repeated norms over one trivialization share a single build.
    """
    res = int(res)
    if res < 8 or res % 2:
        raise ConfigError("grid resolution must be even and at least 8")
    key = (triv.uid, res, round(float(pad), 9))
    hit = _cache_get(key)
    if hit is not None:
        return hit
    entries = []
    for i, tc in enumerate(triv.tcharts):
        dom = tc.chart.domain
        radii = dom.radii
        if tc.role == "fermi-n":
            # the collar box (+-2R) is looser than the cutoff support
            # (1.5R tube, R arc); hugging the support keeps the node
            # density across the ramps equal to the geodesic charts'
            R = float(triv.params["R"])
            radii = np.array([1.5 * R, R])
        hw = radii * pad
        lo = dom.center - hw
        hi = dom.center + hw
        shape = (res,) * dom.n
        axes = [lo[a] + (hi[a] - lo[a]) / res * np.arange(res)
                for a in range(dom.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.stack([mm.ravel() for mm in mesh], axis=-1)
        mask = _support_mask(tc, X, triv.params)
        P = tc.chart.forward(X[mask]) if np.any(mask) else np.zeros((0, 1))
        if len(P):
            fin = np.all(np.isfinite(P), axis=1)
            if not fin.all():
                keep = np.zeros(len(X), dtype=bool)
                keep[np.nonzero(mask)[0][fin]] = True
                mask = keep
                P = P[fin]
        h = triv.partition_values(P)[i] if len(P) else np.zeros(0)
        entries.append({"lo": lo, "hi": hi, "shape": shape, "mask": mask,
                        "X": X[mask], "P": P, "h": h})
    out = {"entries": entries, "res": res, "pad": pad}
    _cache_put(key, out)
    return out


def _eval_field(f, P):
    try:
        v = np.asarray(f(P), dtype=np.complex128).reshape(len(P))
    except (ConfigError, DomainError, IntegrationError):
        raise
    except Exception as exc:
        raise IntegrationError(
            f"field evaluation failed on a chart grid: {exc}",
            code="chart-evaluation-failure") from exc
    if len(v) and not np.all(np.isfinite(v.real) & np.isfinite(v.imag)):
        raise IntegrationError(
            "field returned non-finite values on a chart grid",
            code="chart-evaluation-failure")
    return v


def _chart_grid_function(entry, f):
    """(cutoff * f) pulled back to the padded box, zero-extended."""
    vals = np.zeros(int(np.prod(entry["shape"])), dtype=np.complex128)
    if len(entry["P"]):
        vals[entry["mask"]] = entry["h"] * _eval_field(f, entry["P"])
    return GridFunction(entry["lo"], entry["hi"], vals.reshape(entry["shape"]))


# -- reports ------------------------------------------------------------------


def _aggregate(vals, p):
    vals = np.asarray(list(vals), dtype=float)
    if len(vals) == 0:
        return 0.0
    if np.isinf(p):
        return float(vals.max())
    return float(np.sum(vals**p) ** (1.0 / p))


@dataclass
class NormReport:
    """Localized-norm result carrying enough parts to recompute the total."""

    space: str
    s: float
    p: float
    q: float
    trivialization: str
    res: int
    value: float
    contributions: dict
    timings: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def recompute(self):
        """Re-aggregate the per-chart contributions (bitwise equal to value)."""
        return _aggregate(self.contributions.values(), self.p)

    def to_dict(self):
        d = {"space": self.space, "s": self.s, "p": self.p,
             "trivialization": self.trivialization, "res": self.res,
             "value": self.value,
             "contributions": dict(self.contributions)}
        if self.q is not None:
            d["q"] = self.q
        if self.meta:
            d["meta"] = dict(self.meta)
        return d

    def to_json(self, path=None):
        """Deterministic JSON; wall-clock timings are deliberately dropped."""
        blob = json.dumps(self.to_dict(), sort_keys=True, indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(blob + "\n")
        return blob


# -- localized norms ----------------------------------------------------------


def localized_norm(f, triv, space="H", s=0.0, p=2.0, q=None, res=64, pad=1.25):
    """Chartwise flat-space norm of the cutoff-localized pullbacks.

    Per chart: sample (cutoff * f) through the chart map on the padded
    grid box (zero outside the cutoff support), take the flat-space norm
    of tag `space` there, then aggregate the per-chart values in l_p.
    space "H" is the Bessel scale (q unused), "F" the Triebel scale, and
    "B" the Besov scale with q == p, where it coincides bitwise with "F".
    """
    if space not in ("H", "B", "F"):
        raise ConfigError(f"unknown space tag {space!r}")
    s = float(s)
    p = float(p)
    if not p > 0:
        raise ConfigError("p must be positive")
    if space == "H":
        q = None
    else:
        q = float(p if q is None else q)
        if space == "B" and q != p:
            raise ConfigError("the manifold Besov scale requires q == p")
    t0 = time.perf_counter()
    data = _grid_entries(triv, res, pad)
    t_grid = time.perf_counter() - t0
    t0 = time.perf_counter()
    contribs = {}
    for tc, entry in zip(triv.tcharts, data["entries"]):
        g = _chart_grid_function(entry, f)
        if space == "H":
            c = bessel_norm(g, s, p)
        elif space == "F":
            c = triebel_norm(g, s, p, q)
        else:
            c = besov_norm(g, s, p, q)
        contribs[tc.chart.chart_id] = float(c)
    value = _aggregate(contribs.values(), p)
    return NormReport(space=space, s=s, p=p, q=q, trivialization=triv.uid,
                      res=int(res), value=value, contributions=contribs,
                      timings={"grids": t_grid,
                               "norms": time.perf_counter() - t0})


def covariant_norm(f, m, triv, k, p, res=48, fd_step=1e-3, pad=1.25):
    """Classical Sobolev norm: sum over orders l <= k of the L_p norms of
    the covariant derivative magnitudes.

    The global integrals run through the partition of unity: per chart,
    quadrature of cutoff * |derivative|^p * sqrt(det g) over the grid.
    Derivatives are central differences in chart coordinates; the second
    order subtracts the connection correction to make the Hessian tensorial.
    """
    k = int(k)
    if k not in (0, 1, 2):
        raise ConfigError("covariant order must be 0, 1, or 2")
    p = float(p)
    if not (0 < p < np.inf):
        raise ConfigError("covariant norms need finite positive p")
    data = _grid_entries(triv, res, pad)
    n = m.n
    totals = np.zeros(k + 1)

    def fwd_checked(ch, X, hmask):
        P = ch.forward(X)
        bad = ~np.all(np.isfinite(P), axis=1)
        if np.any(bad & (hmask > 1e-9)):
            raise IntegrationError(
                "difference stencil left the chart's valid region; "
                "reduce fd_step", code="fd-step-underflow")
        P[bad] = 0.0
        return P, bad

    for tc, entry in zip(triv.tcharts, data["entries"]):
        if not len(entry["P"]):
            continue
        X = entry["X"]
        h = entry["h"]
        ch = tc.chart
        cell = float(np.prod((entry["hi"] - entry["lo"]) / data["res"]))
        g = ch.metric(X)
        w = h * np.sqrt(np.linalg.det(g)) * cell
        F0 = _eval_field(f, entry["P"])
        dens = [np.abs(F0)]
        if k >= 1:
            ginv = np.linalg.inv(g)
            dF = np.empty((len(X), n), dtype=np.complex128)
            Fp, Fm = {}, {}
            for a in range(n):
                e = np.zeros(n)
                e[a] = fd_step
                Pp, badp = fwd_checked(ch, X + e, h)
                Pm, badm = fwd_checked(ch, X - e, h)
                vp = _eval_field(f, Pp)
                vm = _eval_field(f, Pm)
                vp[badp] = 0.0
                vm[badm] = 0.0
                Fp[a], Fm[a] = vp, vm
                dF[:, a] = (vp - vm) / (2.0 * fd_step)
            quad = np.einsum("bij,bi,bj->b", ginv, dF, dF.conj())
            dens.append(np.sqrt(np.maximum(quad.real, 0.0)))
        if k >= 2:
            gam = ch.christoffel(X)
            hess = np.empty((len(X), n, n), dtype=np.complex128)
            for a in range(n):
                hess[:, a, a] = (Fp[a] - 2.0 * F0 + Fm[a]) / fd_step**2
            for a in range(n):
                for b in range(a + 1, n):
                    ea = np.zeros(n)
                    eb = np.zeros(n)
                    ea[a] = fd_step
                    eb[b] = fd_step
                    vals = []
                    for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                        Ps, bad = fwd_checked(ch, X + sa * ea + sb * eb, h)
                        v = _eval_field(f, Ps)
                        v[bad] = 0.0
                        vals.append(v)
                    cross = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * fd_step**2)
                    hess[:, a, b] = cross
                    hess[:, b, a] = cross
            hess -= np.einsum("bkij,bk->bij", gam, dF)
            quad2 = np.einsum("bia,bjc,bij,bac->b", ginv, ginv, hess, hess.conj())
            dens.append(np.sqrt(np.maximum(quad2.real, 0.0)))
        for l, d in enumerate(dens):
            totals[l] += float(np.sum(w * d**p))
    return float(np.sum(totals ** (1.0 / p)))


# -- trace and extension -------------------------------------------------------


def _trace_grid_geometry(triv, res):
    """Thin collar pullback grids for slicing: function-independent, cached.

    The tube axis only has to host the zero slice, so it gets a token 8
    nodes while the arc axis gets the full resolution; slicing such a grid
    is node-for-node identical to slicing a square one, at a fraction of
    the evaluations.
    """
    res = int(res)
    if res < 8 or res % 2:
        raise ConfigError("grid resolution must be even and at least 8")
    key = (triv.uid, res, "trace")
    hit = _cache_get(key)
    if hit is not None:
        return hit
    R = float(triv.params["R"])
    t_hw = 1.875 * R   # tube support 1.5R, padded 25%
    x_hw = 1.25 * R    # arc support R, padded 25%
    t_res = 8
    t_ax = -t_hw + (2.0 * t_hw / t_res) * np.arange(t_res)
    x_ax = -x_hw + (2.0 * x_hw / res) * np.arange(res)
    T, Xa = np.meshgrid(t_ax, x_ax, indexing="ij")
    X = np.stack([T.ravel(), Xa.ravel()], axis=-1)
    mask = (np.abs(X[:, 0]) < 1.5 * R) & (np.abs(X[:, 1]) < R)
    entries = []
    for i, tc in enumerate(triv.tcharts):
        if tc.role != "fermi-n":
            continue
        P = tc.chart.forward(X[mask])
        h = triv.partition_values(P)[i]
        entries.append({"lo": np.array([-t_hw, -x_hw]),
                        "hi": np.array([t_hw, x_hw]),
                        "shape": (t_res, res), "mask": mask, "P": P, "h": h})
    out = {"entries": entries, "res": res}
    _cache_put(key, out)
    return out


def trace(f, triv, res=384):
    """Restriction to the curve via chartwise flat traces of the pullbacks.

    Each collar chart contributes the zero-slice of its localized pullback;
    the contributions glue into a field on the 1-d model of the curve whose
    evaluator takes (B, 1) arc positions. For continuous f this equals the
    pointwise restriction.
    """
    if getattr(triv, "kind", None) != "fermi":
        raise ConfigError("trace needs a collar trivialization")
    sub = triv.submanifold
    data = _trace_grid_geometry(triv, res)
    ind = triv.induced_on_submanifold()
    slices = []
    for entry in data["entries"]:
        g2 = _chart_grid_function(entry, f)
        slices.append(euclid_trace(g2, 1))
    charts_n = [tc.chart for tc in ind.tcharts]
    closed = sub.length is not None
    window = sub.arc_window()

    def ev(S, slices=slices, charts=charts_n):
        S = np.atleast_2d(np.asarray(S, dtype=float))
        if not closed:
            off = (S[:, 0] < window[0] - 1e-9) | (S[:, 0] > window[1] + 1e-9)
            if np.any(off):
                raise DomainError(
                    "arc position outside the curve's parameter window",
                    code="point-not-on-N")
        out = np.zeros(len(S), dtype=np.complex128)
        for ch, sl in zip(charts, slices):
            x = ch.inverse(S)[:, 0]
            ok = np.abs(x) <= float(sl.hi[0])
            if np.any(ok):
                out[ok] += fourier_eval(sl, x[ok, None])
        return out

    return ManifoldFunction(
        ev, function_id=f"Tr[{f.function_id}]", smoothness=f.smoothness,
        family=f.family,
        meta={"trivialization": triv.uid, "res": int(res), "domain": "curve"})


_RHO_TABLES = {}


class _RhoTable:
    """Spline table of the even slab profile; exact value 1 at 0."""

    def __init__(self, profile, du=0.01, floor=1e-13):
        probe = np.arange(0.0, 400.0, 0.5)
        vals = profile(probe)
        big = np.nonzero(np.abs(vals) > floor)[0]
        reach = probe[big[-1]] + 1.0 if len(big) else 1.0
        u = np.arange(0.0, reach + du, du)
        self.reach = float(u[-1])
        self._spline = CubicSpline(u, profile(u))

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        out = np.zeros(t.shape)
        inside = t <= self.reach
        if np.any(inside):
            out[inside] = self._spline(t[inside])
        return out


def _rho_table(profile):
    key = (float(profile.bandwidth), len(profile._tau))
    tab = _RHO_TABLES.get(key)
    if tab is None:
        tab = _RhoTable(profile)
        _RHO_TABLES[key] = tab
    return tab


def extend(fp, triv, s=1.0, p=2.0, res=256,
           profile=DEFAULT_EXTENSION_PROFILE):
    """Right inverse of the trace: dyadic slab extension into the collar.

    Per collar anchor, the localized curve field is decomposed into dyadic
    pieces on a doubled arc box; each piece is carried into the tube by the
    slab profile at its own scale, cut off in both the arc offset and the
    tube coordinate so every term is compactly supported in its chart box.
    The result vanishes outside the tube of width twice the collar radius,
    and its trace recovers the input.
    """
    if getattr(triv, "kind", None) != "fermi":
        raise ConfigError("extension needs a collar trivialization")
    sub = triv.submanifold
    R = float(triv.params["R"])
    if 2.0 * R > sub.r_collar * (1.0 + 1e-12):
        raise DomainError(
            "extension tube exceeds the collar reach of the curve",
            code="tube-escape")
    ind = triv.induced_on_submanifold()
    data = _grid_entries(ind, res, pad=2.0)   # arc boxes of halfwidth 2R
    # per chart: stacked piece spectra so the evaluator pays for the phase
    # matrix once, not once per dyadic scale
    tables = []
    for entry, tc in zip(data["entries"], ind.tcharts):
        g = _chart_grid_function(entry, fp)
        pcs = dyadic_decompose(g)
        spec_t = np.stack(
            [sfft.fft(p.values) / float(g.res[0]) for p in pcs], axis=-1)
        tables.append({"chart": tc.chart, "lo": float(g.lo[0]),
                       "freqs": g.freqs()[0],
                       "spec_t": spec_t,
                       "scales": 2.0 ** np.arange(len(pcs))})
    rho = _rho_table(profile)
    prof = DEFAULT_PROFILE

    def ev(P, tables=tables):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        t, s_arc, ok = sub.tube_coords(P)
        out = np.zeros(len(P), dtype=np.complex128)
        act = ok & np.isfinite(t) & (np.abs(t) < 2.0 * R)
        if not np.any(act):
            return out
        ta = t[act]
        rows = s_arc[act][:, None]
        psi2 = prof.window(np.abs(ta), 1.5 * R, 2.0 * R)
        acc = np.zeros(int(act.sum()), dtype=np.complex128)
        for tab in tables:
            x = tab["chart"].inverse(rows)[:, 0]
            psi1 = prof.window(np.abs(x), R, 2.0 * R)
            nz = psi1 > 0
            if not np.any(nz):
                continue
            ph = np.exp(1j * np.multiply.outer(x[nz] - tab["lo"],
                                               tab["freqs"]))
            piece_vals = ph @ tab["spec_t"]                   # (B, J+1)
            rhom = rho(np.multiply.outer(ta[nz], tab["scales"]))
            acc[nz] += psi1[nz] * np.sum(piece_vals * rhom, axis=1)
        out[act] = psi2 * acc
        return out

    return ManifoldFunction(
        ev, function_id=f"Ex[{fp.function_id}]", smoothness=fp.smoothness,
        family=fp.family,
        meta={"trivialization": triv.uid, "res": int(res),
              "s": float(s), "p": float(p)})


# -- equivalence experiments ---------------------------------------------------


def equivalence_experiment(fns, t1, t2, s, p, space="H", q=None, res=64,
                           csv_path=None):
    """Norm ratios of a family across two trivializations.

    Callers are expected to have checked admissibility of both
    trivializations; this only evaluates and compares. Identically zero
    members report ratio 1 (0/0 carries no band information).
    """
    ids, vals1, vals2 = [], [], []
    for f in fns:
        r1 = localized_norm(f, t1, space=space, s=s, p=p, q=q, res=res)
        r2 = localized_norm(f, t2, space=space, s=s, p=p, q=q, res=res)
        ids.append(f.function_id)
        vals1.append(r1.value)
        vals2.append(r2.value)
    ratios = [1.0 if (a == 0.0 and b == 0.0) else a / b
              for a, b in zip(vals1, vals2)]
    report = {
        "space": space, "s": float(s), "p": float(p), "res": int(res),
        "trivializations": {"t1": t1.uid, "t2": t2.uid},
        "function_ids": ids,
        "values": {"t1": vals1, "t2": vals2},
        "ratios": ratios,
        "min_ratio": float(min(ratios)),
        "max_ratio": float(max(ratios)),
        "spread": float(max(ratios) / min(ratios)),
    }
    if csv_path is not None:
        write_equivalence_csv(csv_path, report)
    return report


def write_equivalence_csv(path, report):
    """Flat table of the experiment: one row per (function, trivialization)."""
    uids = report["trivializations"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["function_id", "s", "p", "trivialization", "value", "ratio"])
        for i, fid in enumerate(report["function_ids"]):
            ratio = repr(float(report["ratios"][i]))
            for slot in ("t1", "t2"):
                w.writerow([fid, repr(report["s"]), repr(report["p"]),
                            uids[slot], repr(float(report["values"][slot][i])),
                            ratio])
