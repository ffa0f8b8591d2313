"""Lattice quotients: adapted covers of the plane, weights, periodic norms.

The integer lattice acts on flat space by translations; the quotient is the
flat torus. A torus trivialization lifts to a locally finite cover of the
plane by translated chart copies, an enumeration of the lattice turns that
cover into a summable weight, and the weighted localized norm of a periodic
function over the lifted cover is the periodic counterpart of the torus
norm. Everything here instantiates that one family of group actions;
nothing is generalized beyond translations, where the isometry claims are
exact instead of approximate.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from ._bump import DEFAULT_PROFILE
from ._errors import ConfigError, SymmetryError
from .euclid import GridFunction, bessel_norm
from .geometry import Manifold, make_manifold, pullback_metric_fn, wrap_unit
from .spaces import NormReport, _aggregate, _eval_field, _grid_entries

__all__ = [
    "GroupAction",
    "AdaptedWeight",
    "LiftedTrivialization",
    "make_group_action",
    "lift_trivialization",
    "build_weight",
    "weighted_periodic_norm",
]


# -- lattice enumeration -------------------------------------------------------

_SHELL_CACHE = {}


def _shell(n, k):
    """Lattice vectors of sup-norm exactly k, lexicographically sorted."""
    key = (n, k)
    hit = _SHELL_CACHE.get(key)
    if hit is None:
        if k == 0:
            hit = [tuple([0] * n)]
        else:
            rng = range(-k, k + 1)
            hit = sorted(t for t in itertools.product(rng, repeat=n)
                         if max(abs(c) for c in t) == k)
        _SHELL_CACHE[key] = hit
    return hit


def _shell_index(n, k):
    """tuple -> 0-based position within shell k."""
    key = ("idx", n, k)
    hit = _SHELL_CACHE.get(key)
    if hit is None:
        hit = {t: i for i, t in enumerate(_shell(n, k))}
        _SHELL_CACHE[key] = hit
    return hit


def _shells_before(n, k):
    """Number of lattice vectors with sup-norm < k."""
    return (2 * k - 1) ** n if k > 0 else 0


@dataclass
class GroupAction:
    """Integer-lattice translations on flat space with a torus quotient.

    The enumeration orders the lattice by increasing sup-norm with
    lexicographic ties, so indices are deterministic and start at 1 for
    the identity.
    """

    n: int
    basis: np.ndarray
    quotient: Manifold
    cover: Manifold

    def act(self, h, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return pts + np.asarray(h, dtype=float) @ self.basis

    def project(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return wrap_unit(pts)

    def elements(self, count):
        """The first `count` lattice vectors in enumeration order."""
        if count < 1:
            raise ConfigError("need at least the identity element",
                              code="budget-too-small-for-domain")
        out = []
        k = 0
        while len(out) < count:
            out.extend(_shell(self.n, k))
            k += 1
        return np.array(out[:count], dtype=int)

    def iota(self, h):
        """1-based enumeration index of a lattice vector."""
        t = tuple(int(v) for v in np.asarray(h).ravel())
        if len(t) != self.n:
            raise ConfigError("lattice vector dimension mismatch")
        k = max(abs(v) for v in t) if t else 0
        return _shells_before(self.n, k) + _shell_index(self.n, k)[t] + 1

    def iota_rows(self, H):
        """Vectorized iota over rows of an integer array."""
        H = np.asarray(H, dtype=int)
        if self.n == 1:
            h = H[:, 0]
            return np.where(h == 0, 1,
                            2 * np.abs(h) + (h > 0).astype(int))
        return np.array([self.iota(row) for row in H])

    def isometry_residual(self, count=64, seed=0):
        """Max metric deviation under a translation: exactly 0 here."""
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-2.0, 3.0, size=(count, self.n))
        g0 = self.cover.ops.metric_dot(pts, *(np.eye(self.n)[None, 0]
                                              .repeat(count, 0),) * 2)
        g1 = self.cover.ops.metric_dot(self.act([1] + [0] * (self.n - 1), pts),
                                       *(np.eye(self.n)[None, 0]
                                         .repeat(count, 0),) * 2)
        return float(np.max(np.abs(g1 - g0)))


def make_group_action(n=1):
    """Lattice translations on flat n-space over the unit torus."""
    n = int(n)
    if n < 1:
        raise ConfigError("dimension must be at least 1")
    return GroupAction(n=n, basis=np.eye(n),
                       quotient=make_manifold("flat-torus", n=n),
                       cover=make_manifold("euclidean", n=n))


# -- lifted covers ---------------------------------------------------------------


@dataclass
class LiftedTrivialization:
    """Translated copies of a torus trivialization tiling flat space.

    Chart (alpha, h) is the alpha-th torus chart composed with the
    translation by lattice vector h; its cutoff pullback equals the torus
    one identically, which is what makes weighted sums chart-reusable.
    """

    quotient: object
    action: GroupAction
    h_budget: int
    elements: np.ndarray

    @property
    def uid(self):
        blob = json.dumps({"quotient": self.quotient.uid,
                           "budget": int(self.h_budget)},
                          sort_keys=True, separators=(",", ":"))
        return hashlib.sha1(blob.encode()).hexdigest()[:16]

    @property
    def chart_count(self):
        return len(self.quotient.tcharts) * len(self.elements)

    def chart_affine(self, alpha):
        """(center, frame) of the torus chart's affine representative."""
        tc = self.quotient.tcharts[alpha]
        return np.asarray(tc.center, dtype=float), np.asarray(tc.chart._frame,
                                                              dtype=float)

    def lifted_forward(self, alpha, h):
        c, frame = self.chart_affine(alpha)
        off = np.asarray(h, dtype=float) @ self.action.basis

        def fwd(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            return c + x @ frame + off

        return fwd

    def lifted_metric(self, alpha, h, x):
        """Metric of the lifted chart, computed independently per copy."""
        fwd = self.lifted_forward(alpha, h)
        return pullback_metric_fn(self.action.cover.ops, fwd)(x)

    def member_values(self, alpha, h, pts):
        """Cutoff of chart (alpha, h) at flat-space points.

        Equal to the torus member at the projection when the point lies in
        copy h of the chart, zero otherwise; chart spread below half a
        lattice step makes the copy unique.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c, _ = self.chart_affine(alpha)
        H = self.quotient.partition_values(self.action.project(pts))
        hvec = np.rint(pts - c).astype(int)
        match = np.all(hvec == np.asarray(h, dtype=int), axis=1)
        return np.where(match, H[alpha], 0.0)


def lift_trivialization(quot_t, ga, h_budget):
    """Lift a torus trivialization through the quotient projection."""
    if getattr(quot_t, "kind", None) != "geodesic" \
            or quot_t.manifold.preset != "flat-torus":
        raise ConfigError("lifting expects a ball-cover trivialization "
                          "of the flat torus")
    if quot_t.manifold.n != ga.n:
        raise ConfigError("group action dimension mismatch")
    h_budget = int(h_budget)
    if h_budget < 1:
        raise ConfigError("the element budget must be at least 1",
                          code="budget-too-small-for-domain")
    return LiftedTrivialization(quotient=quot_t, action=ga,
                                h_budget=h_budget,
                                elements=ga.elements(h_budget))


# -- adapted weights -------------------------------------------------------------


@dataclass
class AdaptedWeight:
    """Positive weight from enumeration-damped cutoff copies.

    At any flat-space point only the finitely many charts whose copy
    contains it contribute, so the evaluator computes the full lattice sum
    exactly; no truncation is involved in the weight itself.
    """

    lifted: LiftedTrivialization
    decay: float = 2.0

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        quot = self.lifted.quotient
        ga = self.lifted.action
        H = quot.partition_values(ga.project(pts))
        out = np.zeros(len(pts))
        for a, tc in enumerate(quot.tcharts):
            hvec = np.rint(pts - np.asarray(tc.center, dtype=float)).astype(int)
            out += H[a] * ga.iota_rows(hvec).astype(float) ** (-self.decay)
        return out

    def derivative_report(self, max_order=2, fd_step=1e-3, samples=6, seed=0):
        """Truncated-sum bound on copy-pullback derivatives per order.

        For sampled charts, sums sup |FD^k of (weight through the lifted
        chart)| over the budget's copies; the identity copy dominates and
        the tail scales like the enumeration damping.
        """
        rng = np.random.default_rng(int(seed))
        lifted = self.lifted
        quot = lifted.quotient
        pick = range(len(quot.tcharts)) if len(quot.tcharts) <= samples else \
            sorted(rng.choice(len(quot.tcharts), size=samples, replace=False))
        orders = {k: 0.0 for k in range(1, max_order + 1)}
        for a in pick:
            dom = quot.tcharts[a].chart.domain
            xs = dom.sample(4, rng, margin=0.6)
            for k in range(1, max_order + 1):
                tot = 0.0
                for h in lifted.elements:
                    fwd = lifted.lifted_forward(a, h)
                    worst = 0.0
                    for ax in range(dom.n):
                        e = np.zeros(dom.n)
                        e[ax] = fd_step
                        acc = np.zeros(len(xs))
                        for j in range(k + 1):
                            pts = fwd(xs + (k / 2.0 - j) * e)
                            sign = (-1.0) ** j
                            acc += sign * _binom(k, j) * self(pts)
                        worst = max(worst, float(np.max(np.abs(acc)))
                                    / fd_step**k)
                    tot += worst
                orders[k] = max(orders[k], tot)
        finite = all(np.isfinite(v) for v in orders.values())
        return {"orders": orders, "finite": finite,
                "budget": int(lifted.h_budget)}


def _binom(k, j):
    out = 1
    for i in range(j):
        out = out * (k - i) // (i + 1)
    return out


def build_weight(lifted, decay=2.0):
    """Adapted weight over a lifted cover; damping exponent defaults to 2."""
    decay = float(decay)
    if decay <= 0:
        raise ConfigError("weight damping exponent must be positive")
    return AdaptedWeight(lifted=lifted, decay=decay)


# -- weighted periodic norms -------------------------------------------------------


def weighted_periodic_norm(f, w, lifted, s, p, res=64,
                           invariance_samples=256, invariance_tol=1e-9,
                           tail_tol=1e-2, seed=0):
    """Weighted localized norm of a lattice-periodic function.

    Sums flat-space Bessel norms of (copy cutoff * weight * f) over all
    lifted charts in the budget, after verifying lattice invariance of f by
    sampling. The truncation tail is estimated from the enumeration damping
    and recorded; a tail above `tail_tol` relative to the value raises.
    """
    s = float(s)
    p = float(p)
    if not (0 < p < np.inf):
        raise ConfigError("weighted norms need finite positive p")
    ga = lifted.action
    quot = lifted.quotient

    rng = np.random.default_rng(int(seed))
    pts = rng.uniform(-1.5, 2.5, size=(int(invariance_samples), ga.n))
    base = _eval_field(f, pts)
    worst = 0.0
    for h in lifted.elements[1:4]:
        shifted = _eval_field(f, ga.act(h, pts))
        worst = max(worst, float(np.max(np.abs(shifted - base))))
    scale = float(np.max(np.abs(base))) or 1.0
    if worst > invariance_tol * max(scale, 1.0):
        raise SymmetryError(
            f"function changes by {worst:.2e} under lattice translations",
            code="not-G-invariant")

    data = _grid_entries(quot, res)
    decay = getattr(w, "decay", 2.0)
    contribs = {}
    copy_peak = {}
    for a, (tc, entry) in enumerate(zip(quot.tcharts, data["entries"])):
        c, frame = lifted.chart_affine(a)
        P_aff = c + entry["X"] @ frame
        size = int(np.prod(entry["shape"]))
        for h in lifted.elements:
            pts_h = P_aff + np.asarray(h, dtype=float) @ ga.basis
            vals = np.zeros(size, dtype=np.complex128)
            if len(pts_h):
                vals[entry["mask"]] = (entry["h"] * w(pts_h)
                                       * _eval_field(f, pts_h))
            g = GridFunction(entry["lo"], entry["hi"],
                             vals.reshape(entry["shape"]))
            cval = float(bessel_norm(g, s, p))
            key = f"{tc.chart.chart_id}@{tuple(int(v) for v in h)}"
            contribs[key] = cval
            it = ga.iota(h)
            copy_peak[a] = max(copy_peak.get(a, 0.0), cval * it**decay)
    value = _aggregate(contribs.values(), p)

    # tail over indices beyond the budget, using the damping envelope
    if decay * p <= 1.0:
        raise SymmetryError("enumeration damping too weak to truncate",
                            code="truncation-tail-too-large")
    K = len(lifted.elements)
    tail_factor = K ** (1.0 - decay * p) / (decay * p - 1.0)
    tail_p = sum(peak**p for peak in copy_peak.values()) * tail_factor
    tail = tail_p ** (1.0 / p)
    tail_rel = tail / value if value > 0 else 0.0
    if tail_rel > tail_tol:
        raise SymmetryError(
            f"truncation tail estimate {tail_rel:.2e} of the value exceeds "
            f"{tail_tol:.0e}; raise the element budget",
            code="truncation-tail-too-large")
    return NormReport(space="H", s=s, p=p, q=None,
                      trivialization=lifted.uid, res=int(res), value=value,
                      contributions=contribs,
                      meta={"h_budget": int(lifted.h_budget),
                            "weight_decay": float(decay),
                            "truncation_tail_rel": float(tail_rel)})
