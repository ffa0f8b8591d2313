"""Model Riemannian manifolds with chart atlases and closed-form geometry.

Five presets: euclidean, flat-torus, sphere2, hyperbolic2 and
surface-of-revolution, plus the 1-d circle/interval models that
submanifolds induce. Each preset supplies reference charts (with metric
evaluators and transitions), geodesic distance, exponential and
logarithm maps, all vectorized over batches of points.

Point representations: euclidean and hyperbolic2 use plane coordinates,
flat-torus coordinates live in [0,1)^n, sphere2 points are embedded unit
3-vectors, surface-of-revolution points are (u, phi) with phi in
[0, 2 pi). Tangent vectors use the same coordinates as the point.

Non-compact presets carry a bounded sampling window; Monte Carlo checks
and net construction operate on that window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.interpolate import RegularGridInterpolator
from scipy.stats import qmc

from ._errors import ConfigError, DomainError

__all__ = [
    "BoxDomain",
    "Chart",
    "TransitionMap",
    "Manifold",
    "Submanifold",
    "make_manifold",
    "make_submanifold",
    "make_pair",
    "metric_at",
    "christoffel",
    "check_transition_consistency",
    "mean_curvature_tensor",
    "christoffel_from_metric",
]


# -- small numeric helpers -------------------------------------------------


def wrap_unit(x):
    # applied twice: x slightly below an integer rounds the remainder
    # up to exactly 1.0, and the second pass folds that back to 0.0
    w = x - np.floor(x)
    return w - np.floor(w)


def wrap_pm(x, period=1.0):
    """Wrap into [-period/2, period/2)."""
    w = x - period * np.floor(x / period + 0.5)
    return w - period * np.floor(w / period + 0.5)


def wrap_angle(a):
    return wrap_pm(a, 2.0 * np.pi)


def _rows(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[-1] != n:
        raise DomainError(f"expected points of dimension {n}, got {x.shape}")
    return x


def _horner(c, u):
    """Power-basis polynomial evaluation without Polynomial call overhead."""
    u = np.asarray(u, dtype=float)
    out = np.full(u.shape, c[-1], dtype=float)
    for a in c[-2::-1]:
        out = out * u + a
    return out


def _sinc_like(t):
    """sin(t)/t with the removable singularity filled in."""
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    nz = np.abs(t) > 1e-12
    out[nz] = np.sin(t[nz]) / t[nz]
    return out


def _ratio_sq(fn, t):
    """fn(t)^2 / t^2 for fn in {sin, sinh}, series-safe near 0."""
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    nz = np.abs(t) > 1e-8
    out[nz] = (fn(t[nz]) / t[nz]) ** 2
    sm = ~nz
    sign = -1.0 if fn is np.sin else 1.0
    out[sm] = 1.0 + sign * t[sm] ** 2 / 3.0
    return out


def _seed_frac(seed):
    """Deterministic dyadic fraction in [0,1) derived from the seed."""
    return ((int(seed) * 2654435761) % 4096) / 4096.0


# -- chart atlas types -----------------------------------------------------


@dataclass
class BoxDomain:
    """Axis-aligned box, optionally with a ball membership predicate."""

    center: np.ndarray
    radii: np.ndarray
    ball: bool = False

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        self.radii = np.atleast_1d(np.asarray(self.radii, dtype=float))

    @property
    def n(self):
        return self.center.size

    def rel(self, x):
        """Scaled distance from the center: <= 1 means inside."""
        x = _rows(x, self.n)
        off = (x - self.center) / self.radii
        if self.ball:
            return np.sqrt(np.sum(off**2, axis=1))
        return np.max(np.abs(off), axis=1)

    def contains(self, x, margin=1.0):
        return self.rel(x) <= margin

    def sample(self, count, rng, margin=0.95):
        """Uniform interior samples (rejection inside scaled ball)."""
        out = []
        need = count
        while need > 0:
            cand = self.center + (rng.uniform(-margin, margin, size=(2 * need + 8, self.n))
                                  * self.radii)
            keep = cand[self.contains(cand, margin=margin)]
            out.append(keep[:need])
            need -= len(keep[:need])
        return np.concatenate(out, axis=0)


@dataclass
class Chart:
    """A coordinate chart: box domain in R^n plus forward/inverse maps.

    metric_fn(x) returns the pulled-back metric matrices (B, n, n);
    christoffel_fn is optional and finite differences of the metric are
    used when it is absent.
    """

    chart_id: str
    n: int
    domain: BoxDomain
    forward_fn: object
    inverse_fn: object
    metric_fn: object
    christoffel_fn: object = None
    kind: str = "reference"

    def forward(self, x):
        return self.forward_fn(_rows(x, self.n))

    def inverse(self, p):
        return self.inverse_fn(np.atleast_2d(np.asarray(p, dtype=float)))

    def metric(self, x):
        return self.metric_fn(_rows(x, self.n))

    def christoffel(self, x, fd_step=1e-5):
        x = _rows(x, self.n)
        if self.christoffel_fn is not None:
            return self.christoffel_fn(x)
        return christoffel_from_metric(self.metric_fn, x, fd_step)

    def contains_point(self, p, margin=1.0):
        x = self.inverse(p)
        ok = np.all(np.isfinite(x), axis=1)
        res = np.zeros(len(x), dtype=bool)
        if np.any(ok):
            res[ok] = self.domain.contains(x[ok], margin=margin)
        return res


def christoffel_from_metric(metric_fn, x, step=1e-5):
    """Levi-Civita symbols from central differences of the metric.

    Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    B, n = x.shape
    g = metric_fn(x)
    dg = np.empty((B, n, n, n))  # dg[b, a, i, j] = d_a g_ij
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        dg[:, a] = (metric_fn(x + e) - metric_fn(x - e)) / (2.0 * step)
    ginv = np.linalg.inv(g)
    # S[b, i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    S = (dg
         + np.transpose(dg, (0, 2, 1, 3))
         - np.transpose(dg, (0, 2, 3, 1)))
    return 0.5 * np.einsum("bkl,bijl->bkij", ginv, S)


@dataclass
class TransitionMap:
    """Coordinate change between two overlapping charts."""

    from_id: str
    to_id: str
    apply_fn: object
    overlap_fn: object  # predicate on from-chart coordinates

    def apply(self, x):
        return self.apply_fn(np.atleast_2d(np.asarray(x, dtype=float)))

    def in_overlap(self, x):
        return self.overlap_fn(np.atleast_2d(np.asarray(x, dtype=float)))


# -- preset operation backends ---------------------------------------------


class _OpsBase:
    """Vectorized geometric primitives shared by every preset."""

    name = "base"
    n = 2
    point_dim = 2
    periodic_point_axes = ()  # axes of the point representation that wrap
    distance_is_exact = True  # False when distance() is a lookup-table estimate
    distance_slack = 0.0      # absolute overestimate bound of distance()

    def exp(self, p, v):
        raise NotImplementedError

    def log(self, p, q):
        raise NotImplementedError

    def distance(self, p, q):
        p = _rows(p, self.point_dim)
        q = _rows(q, self.point_dim)
        v = self.log(p, q)
        return np.sqrt(self.metric_dot(p, v, v))

    def smooth_distance(self, p, q):
        """Geodesic distance through the log map: smooth in its arguments.

        Matches distance() for the closed-form presets; the revolution
        preset overrides distance() with a table but keeps this exact.
        """
        p = _rows(p, self.point_dim)
        q = _rows(q, self.point_dim)
        v = self.log(p, q)
        return np.sqrt(np.maximum(self.metric_dot(p, v, v), 0.0))

    def isometric_embed(self, p):
        """Isometric embedding coordinates for FD metric pullbacks.

        None signals that the point representation itself is global and
        smooth, so pullbacks should pair FD Jacobians with metric_dot.
        """
        return None

    def metric_dot(self, p, v, w):
        raise NotImplementedError

    def frame_at(self, p):
        """Deterministic orthonormal tangent frame, shape (B, n, point_dim)."""
        raise NotImplementedError

    def embed(self, p):
        """Smooth embedding-style coordinates used by function families."""
        return _rows(p, self.point_dim)

    def random_points(self, count, rng):
        raise NotImplementedError

    def pool_points(self, count, seed):
        """Deterministic candidate pool: structured lattice then Halton."""
        raise NotImplementedError

    def volume_estimate(self):
        raise NotImplementedError


def _halton(count, dim, seed):
    eng = qmc.Halton(d=dim, scramble=False)
    skip = 64 * (int(seed) % 31)
    if skip:
        eng.fast_forward(skip)
    return eng.random(count)


class _EuclideanOps(_OpsBase):
    name = "euclidean"

    def __init__(self, n=2, half=2.5):
        self.n = n
        self.point_dim = n
        self.half = float(half)

    def exp(self, p, v):
        return _rows(p, self.n) + _rows(v, self.n)

    def log(self, p, q):
        return _rows(q, self.n) - _rows(p, self.n)

    def distance(self, p, q):
        return np.linalg.norm(_rows(q, self.n) - _rows(p, self.n), axis=1)

    def metric_dot(self, p, v, w):
        return np.sum(_rows(v, self.n) * _rows(w, self.n), axis=1)

    def frame_at(self, p):
        p = _rows(p, self.n)
        return np.broadcast_to(np.eye(self.n), (len(p), self.n, self.n)).copy()

    def random_points(self, count, rng):
        return rng.uniform(-self.half, self.half, size=(count, self.n))

    def pool_points(self, count, seed):
        m = max(3, int(round(count ** (1.0 / self.n) / 2)) * 2 + 1)  # odd side
        axes = [np.linspace(-self.half, self.half, m) for _ in range(self.n)]
        lat = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        shift = (_seed_frac(seed) - 0.5) * (self.half / m)
        lat = np.clip(lat + shift, -self.half, self.half)
        hal = -self.half + 2 * self.half * _halton(max(0, count - len(lat)), self.n, seed)
        return np.concatenate([lat, hal], axis=0)

    def volume_estimate(self):
        return (2 * self.half) ** self.n


class _TorusOps(_OpsBase):
    name = "flat-torus"

    def __init__(self, n=2):
        self.n = n
        self.point_dim = n
        self.periodic_point_axes = tuple(range(n))

    def exp(self, p, v):
        return wrap_unit(_rows(p, self.n) + _rows(v, self.n))

    def log(self, p, q):
        return wrap_pm(_rows(q, self.n) - _rows(p, self.n))

    def distance(self, p, q):
        return np.linalg.norm(self.log(p, q), axis=1)

    def metric_dot(self, p, v, w):
        return np.sum(_rows(v, self.n) * _rows(w, self.n), axis=1)

    def frame_at(self, p):
        p = _rows(p, self.n)
        return np.broadcast_to(np.eye(self.n), (len(p), self.n, self.n)).copy()

    def embed(self, p):
        p = _rows(p, self.n)
        cols = []
        for a in range(self.n):
            cols.append(np.cos(2 * np.pi * p[:, a]))
            cols.append(np.sin(2 * np.pi * p[:, a]))
        return np.stack(cols, axis=1)

    def isometric_embed(self, p):
        # radius 1/(2 pi) circles make the flat product metric exact
        return self.embed(p) / (2 * np.pi)

    def random_points(self, count, rng):
        return rng.uniform(0.0, 1.0, size=(count, self.n))

    def pool_points(self, count, seed):
        if self.n == 1:
            m = 1 << max(3, int(np.ceil(np.log2(max(8, count // 2)))))
            lat = (np.arange(m) / m)[:, None]
        else:
            side = max(3, int(round((count // 2) ** (1.0 / self.n))) | 1)  # odd
            axes = [np.arange(side) / side for _ in range(self.n)]
            lat = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        shift = _seed_frac(seed)
        lat = wrap_unit(lat + shift)
        hal = wrap_unit(_halton(max(0, count - len(lat)), self.n, seed) + shift)
        return np.concatenate([lat, hal], axis=0)

    def volume_estimate(self):
        return 1.0


class _SphereOps(_OpsBase):
    name = "sphere2"
    n = 2
    point_dim = 3

    def exp(self, p, v):
        p = _rows(p, 3)
        v = _rows(v, 3)
        t = np.linalg.norm(v, axis=1)
        out = np.cos(t)[:, None] * p + _sinc_like(t)[:, None] * v
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    def log(self, p, q):
        p = _rows(p, 3)
        q = _rows(q, 3)
        c = np.clip(np.sum(p * q, axis=1), -1.0, 1.0)
        t = np.arccos(c)
        rej = q - c[:, None] * p
        nr = np.linalg.norm(rej, axis=1)
        scale = np.ones_like(t)
        nz = nr > 1e-14
        scale[nz] = t[nz] / nr[nz]
        return scale[:, None] * rej

    def distance(self, p, q):
        c = np.clip(np.sum(_rows(p, 3) * _rows(q, 3), axis=1), -1.0, 1.0)
        return np.arccos(c)

    def metric_dot(self, p, v, w):
        return np.sum(_rows(v, 3) * _rows(w, 3), axis=1)

    def frame_at(self, p):
        p = _rows(p, 3)
        B = len(p)
        out = np.empty((B, 2, 3))
        basis = np.eye(3)
        for b in range(B):
            vecs = []
            for cand in basis:
                u = cand - np.dot(cand, p[b]) * p[b]
                for w in vecs:
                    u = u - np.dot(u, w) * w
                nu = np.linalg.norm(u)
                if nu > 1e-6:
                    vecs.append(u / nu)
                if len(vecs) == 2:
                    break
            out[b] = np.stack(vecs)
        return out

    def random_points(self, count, rng):
        v = rng.normal(size=(count, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def pool_points(self, count, seed):
        octa = np.concatenate([np.eye(3), -np.eye(3)], axis=0)
        cube = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                         for sz in (-1, 1)], dtype=float) / np.sqrt(3.0)
        m = max(32, count - 14)
        i = np.arange(m) + 0.5
        golden = (1 + 5**0.5) / 2
        z = 1 - 2 * i / m
        r = np.sqrt(np.maximum(0.0, 1 - z * z))
        th = 2 * np.pi * i / golden
        fib = np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)
        pts = np.concatenate([octa, cube, fib], axis=0)
        if seed:
            rng = np.random.default_rng(int(seed))
            q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            pts = pts @ q.T
        return pts / np.linalg.norm(pts, axis=1, keepdims=True)

    def volume_estimate(self):
        return 4.0 * np.pi

    def embed(self, p):
        return _rows(p, 3)

    def isometric_embed(self, p):
        return _rows(p, 3)


class _HyperbolicOps(_OpsBase):
    """Upper half-plane with metric (dx^2 + dy^2) / y^2."""

    name = "hyperbolic2"
    n = 2
    point_dim = 2

    def __init__(self, window_radius=1.8):
        self.window_radius = float(window_radius)

    @staticmethod
    def _to_c(p):
        return p[:, 0] + 1j * p[:, 1]

    @staticmethod
    def _from_c(z):
        return np.stack([z.real, z.imag], axis=1)

    def exp(self, p, v):
        p = _rows(p, 2)
        v = _rows(v, 2)
        y0 = p[:, 1]
        w = (v[:, 0] + 1j * v[:, 1]) / y0  # tangent moved to the point i
        rho = np.abs(w)
        # unit disk model centered at the image of i
        phase = np.where(rho > 0, w / np.where(rho > 0, rho, 1.0), 0.0)
        wd = np.tanh(rho / 2.0) * phase * (-1j)
        z = 1j * (1 + wd) / (1 - wd)
        return self._from_c(z * y0 + p[:, 0])

    def log(self, p, q):
        p = _rows(p, 2)
        q = _rows(q, 2)
        zp = (self._to_c(q) - p[:, 0]) / p[:, 1]  # q moved so that p -> i
        wd = (zp - 1j) / (zp + 1j)
        r = np.abs(wd)
        rho = 2.0 * np.arctanh(np.minimum(r, 1 - 1e-16))
        phase = np.where(r > 0, wd / np.where(r > 0, r, 1.0), 0.0)
        w = rho * phase * 1j
        return self._from_c(w * p[:, 1])

    def distance(self, p, q):
        p = _rows(p, 2)
        q = _rows(q, 2)
        d2 = np.sum((p - q) ** 2, axis=1)
        arg = 1.0 + d2 / (2.0 * p[:, 1] * q[:, 1])
        return np.arccosh(np.maximum(arg, 1.0))

    def metric_dot(self, p, v, w):
        p = _rows(p, 2)
        return np.sum(_rows(v, 2) * _rows(w, 2), axis=1) / p[:, 1] ** 2

    def frame_at(self, p):
        p = _rows(p, 2)
        out = np.zeros((len(p), 2, 2))
        out[:, 0, 0] = p[:, 1]
        out[:, 1, 1] = p[:, 1]
        return out

    def _from_polar(self, rho, th):
        v = np.stack([rho * np.cos(th), rho * np.sin(th)], axis=1)
        base = np.tile([0.0, 1.0], (len(rho), 1))
        return self.exp(base, v)

    def random_points(self, count, rng):
        R = self.window_radius
        u = rng.uniform(0.0, 1.0, count)
        rho = np.arccosh(1.0 + u * (np.cosh(R) - 1.0))
        th = rng.uniform(0.0, 2 * np.pi, count)
        return self._from_polar(rho, th)

    def pool_points(self, count, seed):
        R = self.window_radius
        rings = max(4, int(np.sqrt(count) / 2))
        pts = [np.array([[0.0, 1.0]])]
        shift = _seed_frac(seed)
        for k in range(1, rings + 1):
            rho = R * k / rings
            mcirc = max(8, int(8 * k))
            th = 2 * np.pi * (wrap_unit(np.arange(mcirc) / mcirc + shift))
            pts.append(self._from_polar(np.full(mcirc, rho), th))
        u = _halton(max(0, count - sum(len(q) for q in pts)), 2, seed)
        rho = np.arccosh(1.0 + u[:, 0] * (np.cosh(R) - 1.0))
        th = 2 * np.pi * wrap_unit(u[:, 1] + shift)
        pts.append(self._from_polar(rho, th))
        return np.concatenate(pts, axis=0)

    def volume_estimate(self):
        return 2 * np.pi * (np.cosh(self.window_radius) - 1.0)


class _RevolutionOps(_OpsBase):
    """Surface of revolution from a polynomial profile u -> (r(u), z(u))."""

    name = "surface-of-revolution"
    n = 2
    point_dim = 2
    periodic_point_axes = (1,)
    distance_is_exact = False
    distance_slack = 0.045  # 2x the observed table - true bound below 0.55

    def __init__(self, r_coeffs=(1.0, 0.2, 0.1), z_coeffs=(0.0, 1.0),
                 u_range=(-2.0, 2.0), sample_u=(-0.35, 0.85),
                 exp_steps=48):
        # plain power-basis coefficient arrays; evaluated by Horner in the
        # flow inner loop, where Polynomial.__call__ overhead dominates
        pder = np.polynomial.polynomial.polyder
        self._c_r = np.asarray(list(r_coeffs), dtype=float)
        self._c_z = np.asarray(list(z_coeffs), dtype=float)
        self._c_rp = pder(self._c_r)
        self._c_zp = pder(self._c_z)
        self._c_rpp = pder(self._c_rp)
        self._c_zpp = pder(self._c_zp)
        self._c_rppp = pder(self._c_rpp)
        self._c_zppp = pder(self._c_zpp)
        self.u_range = tuple(float(u) for u in u_range)
        self.sample_u = tuple(float(u) for u in sample_u)
        self.exp_steps = int(exp_steps)
        us = np.linspace(*self.u_range, 257)
        if np.min(_horner(self._c_r, us)) <= 1e-6:
            raise ConfigError("profile radius must stay positive on u_range")
        self._dist_interp = None

    # profile pieces
    def r_poly(self, u):
        return _horner(self._c_r, u)

    def z_poly(self, u):
        return _horner(self._c_z, u)

    def rp(self, u):
        return _horner(self._c_rp, u)

    def rpp(self, u):
        return _horner(self._c_rpp, u)

    def zp(self, u):
        return _horner(self._c_zp, u)

    def E(self, u):
        return self.rp(u) ** 2 + self.zp(u) ** 2

    def Ep(self, u):
        return 2.0 * (self.rp(u) * self.rpp(u)
                      + self.zp(u) * _horner(self._c_zpp, u))

    def _stage(self, state, with_jac, J=None):
        """Geodesic rhs (B,4); with_jac also applies the rhs Jacobian to J.

        The state Jacobian has six nonzero entries, so the tangent stage
        K = A @ J is assembled directly instead of through a batched
        matmul; J and K have shape (B, 4, m).
        """
        u = state[:, 0]
        vu = state[:, 2]
        vp = state[:, 3]
        r = _horner(self._c_r, u)
        rp = _horner(self._c_rp, u)
        rpp = _horner(self._c_rpp, u)
        zp = _horner(self._c_zp, u)
        zpp = _horner(self._c_zpp, u)
        E = rp * rp + zp * zp
        Ep = 2.0 * (rp * rpp + zp * zpp)
        c1 = Ep / (2 * E)
        c2 = r * rp / E
        c3 = rp / r
        k = np.stack([vu, vp, -c1 * vu ** 2 + c2 * vp ** 2,
                      -2.0 * c3 * vu * vp], axis=1)
        if not with_jac:
            return k, None
        rppp = _horner(self._c_rppp, u)
        zppp = _horner(self._c_zppp, u)
        Epp = 2.0 * (rpp * rpp + rp * rppp + zpp * zpp + zp * zppp)
        c1u = Epp / (2 * E) - Ep ** 2 / (2 * E ** 2)
        c2u = (rp ** 2 + r * rpp) / E - r * rp * Ep / E ** 2
        c3u = rpp / r - c3 ** 2
        a20 = (-c1u * vu ** 2 + c2u * vp ** 2)[:, None]
        a22 = (-2.0 * c1 * vu)[:, None]
        a23 = (2.0 * c2 * vp)[:, None]
        a30 = (-2.0 * c3u * vu * vp)[:, None]
        a32 = (-2.0 * c3 * vp)[:, None]
        a33 = (-2.0 * c3 * vu)[:, None]
        K = np.empty_like(J)
        K[:, 0] = J[:, 2]
        K[:, 1] = J[:, 3]
        K[:, 2] = a20 * J[:, 0] + a22 * J[:, 2] + a23 * J[:, 3]
        K[:, 3] = a30 * J[:, 0] + a32 * J[:, 2] + a33 * J[:, 3]
        return k, K

    def _gamma_rhs(self, state):
        """Geodesic acceleration for states (B,4) = (u, phi, vu, vphi)."""
        return self._stage(state, False)[0]

    def exp(self, p, v, steps=None):
        """Fixed-step RK4 geodesic flow; a smooth map of its inputs."""
        p = _rows(p, 2)
        v = _rows(v, 2)
        state = np.concatenate([p, v], axis=1).astype(float)
        m = self.exp_steps if steps is None else int(steps)
        h = 1.0 / m
        for _ in range(m):
            k1 = self._gamma_rhs(state)
            k2 = self._gamma_rhs(state + 0.5 * h * k1)
            k3 = self._gamma_rhs(state + 0.5 * h * k2)
            k4 = self._gamma_rhs(state + h * k3)
            state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out = state[:, :2].copy()
        bad = (out[:, 0] < self.u_range[0]) | (out[:, 0] > self.u_range[1])
        out[bad] = np.nan
        out[:, 1] = wrap_unit(out[:, 1] / (2 * np.pi)) * 2 * np.pi
        return out

    def _exp_with_jac(self, p, v):
        """exp plus its exact Jacobian in v through the discrete flow."""
        p = _rows(p, 2)
        v = _rows(v, 2)
        s = np.concatenate([p, v], axis=1).astype(float)
        J = np.zeros((len(s), 4, 2))
        J[:, 2, 0] = 1.0
        J[:, 3, 1] = 1.0
        m = self.exp_steps
        h = 1.0 / m
        for _ in range(m):
            k1, K1 = self._stage(s, True, J)
            k2, K2 = self._stage(s + 0.5 * h * k1, True, J + 0.5 * h * K1)
            k3, K3 = self._stage(s + 0.5 * h * k2, True, J + 0.5 * h * K2)
            k4, K4 = self._stage(s + h * k3, True, J + h * K3)
            s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            J = J + (h / 6.0) * (K1 + 2 * K2 + 2 * K3 + K4)
        out = s[:, :2].copy()
        bad = (out[:, 0] < self.u_range[0]) | (out[:, 0] > self.u_range[1])
        out[bad] = np.nan
        out[:, 1] = wrap_unit(out[:, 1] / (2 * np.pi)) * 2 * np.pi
        return out, J[:, :2, :]

    def log(self, p, q, tol=1e-12, iters=14):
        """Batched shooting: solve exp(p, v) = q by damped Newton.

        Rows leave the active set as soon as their residual clears tol,
        so the per-iteration flow integrations shrink with convergence.
        """
        p = _rows(p, 2)
        q = _rows(q, 2)
        v = np.stack([q[:, 0] - p[:, 0],
                      wrap_angle(q[:, 1] - p[:, 1])], axis=1)
        res = np.full_like(v, np.nan)
        act = np.ones(len(p), dtype=bool)
        for it in range(iters + 1):
            idx = np.nonzero(act)[0]
            if not len(idx):
                break
            e, J = self._exp_with_jac(p[idx], v[idx])
            r = np.stack([e[:, 0] - q[idx, 0],
                          wrap_angle(e[:, 1] - q[idx, 1])], axis=1)
            r[~np.isfinite(e[:, 0])] = np.nan
            res[idx] = r
            fin = np.all(np.isfinite(r), axis=1) & \
                np.all(np.isfinite(J.reshape(len(idx), -1)), axis=1)
            done = ~fin | (np.max(np.abs(np.where(np.isfinite(r), r, np.inf)),
                                  axis=1) < tol)
            act[idx[done]] = False
            if it == iters:
                break
            upd = idx[fin & ~done]
            if len(upd):
                sel = fin & ~done
                delta = np.linalg.solve(J[sel], r[sel][..., None])[..., 0]
                v[upd] = v[upd] - np.clip(delta, -0.5, 0.5)
        bad = ~np.all(np.isfinite(res), axis=1) | \
            (np.max(np.abs(np.where(np.isfinite(res), res, np.inf)), axis=1)
             > 1e-8)
        v[bad] = np.nan
        return v

    def smooth_distance(self, p, q):
        # cutoff evaluation tolerates 1e-9 here and saves Newton sweeps
        p = _rows(p, 2)
        q = _rows(q, 2)
        v = self.log(p, q, tol=1e-9, iters=12)
        return np.sqrt(np.maximum(self.metric_dot(p, v, v), 0.0))

    def distance(self, p, q):
        """Graph-geodesic lookup table; diagnostic grade, never differentiated."""
        p = _rows(p, 2)
        q = _rows(q, 2)
        interp = self._distance_table()
        dphi = np.abs(wrap_angle(q[:, 1] - p[:, 1]))
        pts = np.stack([p[:, 0], q[:, 0], dphi], axis=1)
        return np.maximum(interp(pts), 0.0)

    def _distance_table(self):
        if self._dist_interp is not None:
            return self._dist_interp
        nu, nphi = 49, 96
        pad = 0.6
        lo = max(self.u_range[0], self.sample_u[0] - pad)
        hi = min(self.u_range[1], self.sample_u[1] + pad)
        us = np.linspace(lo, hi, nu)
        phis = np.arange(nphi) * (2 * np.pi / nphi)
        uu, pp = np.meshgrid(us, phis, indexing="ij")
        nodes = np.stack([uu.ravel(), pp.ravel()], axis=1)
        idx = np.arange(nu * nphi).reshape(nu, nphi)
        # knight moves besides the 8-neighborhood: direction quantization
        # drops from 22.5 to 11.25 degrees, which is what bounds the
        # overestimate of the graph metric
        moves = [(du, dp) for du in (-1, 0, 1) for dp in (-1, 0, 1)
                 if (du, dp) != (0, 0)]
        moves += [(du, dp) for du in (-2, -1, 1, 2) for dp in (-2, -1, 1, 2)
                  if abs(du) != abs(dp)]
        rows, cols, vals = [], [], []
        for du, dp in moves:
            i0 = idx[max(0, -du):nu - max(0, du), :]
            j0 = np.roll(idx, -dp, axis=1)[max(0, du):nu - max(0, -du), :]
            a = nodes[i0.ravel()]
            b = nodes[j0.ravel()].copy()
            mid_u = 0.5 * (a[:, 0] + b[:, 0])
            step_u = b[:, 0] - a[:, 0]
            step_p = wrap_angle(b[:, 1] - a[:, 1])
            L = np.sqrt(self.E(mid_u) * step_u**2
                        + self.r_poly(mid_u) ** 2 * step_p**2)
            rows.append(i0.ravel())
            cols.append(j0.ravel())
            vals.append(L)
        gmat = coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(nu * nphi, nu * nphi),
        )
        srcs = idx[:, 0]
        dmat = dijkstra(gmat.tocsr(), directed=False, indices=srcs)
        # fold into D[u_src, u_dst, |dphi|] using the phi -> -phi symmetry
        dmat = dmat.reshape(nu, nu, nphi)
        half = nphi // 2
        rev = np.concatenate([dmat[:, :, :1], dmat[:, :, :0:-1]], axis=2)
        folded = np.minimum(dmat, rev)[:, :, : half + 1]
        dphis = phis[: half + 1]
        self._dist_interp = RegularGridInterpolator(
            (us, us, dphis), folded, bounds_error=False, fill_value=None
        )
        return self._dist_interp

    def metric_dot(self, p, v, w):
        p = _rows(p, 2)
        v = _rows(v, 2)
        w = _rows(w, 2)
        return (self.E(p[:, 0]) * v[:, 0] * w[:, 0]
                + self.r_poly(p[:, 0]) ** 2 * v[:, 1] * w[:, 1])

    def frame_at(self, p):
        p = _rows(p, 2)
        out = np.zeros((len(p), 2, 2))
        out[:, 0, 0] = 1.0 / np.sqrt(self.E(p[:, 0]))
        out[:, 1, 1] = 1.0 / self.r_poly(p[:, 0])
        return out

    def embed(self, p):
        p = _rows(p, 2)
        r = self.r_poly(p[:, 0])
        return np.stack([r * np.cos(p[:, 1]), r * np.sin(p[:, 1]),
                         self.z_poly(p[:, 0])], axis=1)

    def isometric_embed(self, p):
        return self.embed(p)

    def _u_cdf(self):
        us = np.linspace(*self.sample_u, 513)
        dens = self.r_poly(us) * np.sqrt(self.E(us))
        cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5
                                               * np.diff(us))])
        return us, cdf / cdf[-1]

    def random_points(self, count, rng):
        us, cdf = self._u_cdf()
        u = np.interp(rng.uniform(0, 1, count), cdf, us)
        phi = rng.uniform(0, 2 * np.pi, count)
        return np.stack([u, phi], axis=1)

    def pool_points(self, count, seed):
        us, cdf = self._u_cdf()
        mu = max(8, int(np.sqrt(count / 2)))
        mphi = max(8, 4 * int(np.sqrt(count / 2) / 4 + 1))
        uq = np.interp((np.arange(mu) + 0.5) / mu, cdf, us)
        shift = _seed_frac(seed)
        phiq = 2 * np.pi * wrap_unit((np.arange(mphi) / mphi) + shift)
        uu, pp = np.meshgrid(uq, phiq, indexing="ij")
        lat = np.stack([uu.ravel(), pp.ravel()], axis=1)
        h = _halton(max(0, count - len(lat)), 2, seed)
        u2 = np.interp(h[:, 0], cdf, us)
        phi2 = 2 * np.pi * wrap_unit(h[:, 1] + shift)
        return np.concatenate([lat, np.stack([u2, phi2], axis=1)], axis=0)

    def volume_estimate(self):
        us = np.linspace(*self.sample_u, 513)
        dens = self.r_poly(us) * np.sqrt(self.E(us))
        return float(2 * np.pi * np.trapezoid(dens, us))


class _CircleOps(_OpsBase):
    """Flat circle of a given circumference; arc-length coordinates."""

    name = "circle"
    n = 1
    point_dim = 1

    def __init__(self, length=2 * np.pi):
        self.length = float(length)
        self.periodic_point_axes = (0,)

    def exp(self, p, v):
        return wrap_unit((_rows(p, 1) + _rows(v, 1)) / self.length) * self.length

    def log(self, p, q):
        return wrap_pm(_rows(q, 1) - _rows(p, 1), self.length)

    def distance(self, p, q):
        return np.abs(self.log(p, q))[:, 0]

    def metric_dot(self, p, v, w):
        return (_rows(v, 1) * _rows(w, 1))[:, 0]

    def frame_at(self, p):
        return np.ones((len(_rows(p, 1)), 1, 1))

    def embed(self, p):
        th = 2 * np.pi * _rows(p, 1)[:, 0] / self.length
        return np.stack([np.cos(th), np.sin(th)], axis=1)

    def isometric_embed(self, p):
        return self.embed(p) * (self.length / (2 * np.pi))

    def random_points(self, count, rng):
        return rng.uniform(0, self.length, size=(count, 1))

    def pool_points(self, count, seed):
        m = 1 << max(3, int(np.ceil(np.log2(max(8, count // 2)))))
        shift = _seed_frac(seed)
        lat = wrap_unit(np.arange(m) / m + shift)[:, None] * self.length
        hal = wrap_unit(_halton(max(0, count - m), 1, seed) + shift) * self.length
        return np.concatenate([lat, hal], axis=0)

    def volume_estimate(self):
        return self.length


class _IntervalOps(_OpsBase):
    """Flat line segment window; used by non-closed submanifolds."""

    name = "interval"
    n = 1
    point_dim = 1

    def __init__(self, lo=-2.5, hi=2.5):
        self.lo = float(lo)
        self.hi = float(hi)

    def exp(self, p, v):
        return _rows(p, 1) + _rows(v, 1)

    def log(self, p, q):
        return _rows(q, 1) - _rows(p, 1)

    def distance(self, p, q):
        return np.abs(self.log(p, q))[:, 0]

    def metric_dot(self, p, v, w):
        return (_rows(v, 1) * _rows(w, 1))[:, 0]

    def frame_at(self, p):
        return np.ones((len(_rows(p, 1)), 1, 1))

    def embed(self, p):
        return _rows(p, 1)

    def random_points(self, count, rng):
        return rng.uniform(self.lo, self.hi, size=(count, 1))

    def pool_points(self, count, seed):
        m = max(9, (count // 2) | 1)
        lat = np.linspace(self.lo, self.hi, m)[:, None]
        shift = (_seed_frac(seed) - 0.5) * (self.hi - self.lo) / (4 * m)
        lat = np.clip(lat + shift, self.lo, self.hi)
        hal = self.lo + (self.hi - self.lo) * _halton(max(0, count - m), 1, seed)
        return np.concatenate([lat, hal], axis=0)

    def volume_estimate(self):
        return self.hi - self.lo


# -- metric pullback helper --------------------------------------------------


def pullback_metric_fn(ops, forward_fn, step=1e-5):
    """Metric matrices of a chart by FD pullback through its forward map.

    Jacobians are taken in isometric embedding coordinates when the ops
    provide them (needed when the point representation wraps); otherwise
    in the point representation itself, paired with metric_dot.
    """

    def metric(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        B, n = x.shape
        base = forward_fn(x)
        emb = ops.isometric_embed(base)
        if emb is not None:
            def F(xx):
                return ops.isometric_embed(forward_fn(xx))
        else:
            F = forward_fn
        cols = []
        for a in range(n):
            e = np.zeros(n)
            e[a] = step
            cols.append((F(x + e) - F(x - e)) / (2.0 * step))
        g = np.empty((B, n, n))
        for a in range(n):
            for b in range(a, n):
                if emb is not None:
                    val = np.sum(cols[a] * cols[b], axis=1)
                else:
                    val = ops.metric_dot(base, cols[a], cols[b])
                g[:, a, b] = val
                g[:, b, a] = val
        return g

    return metric


# -- preset chart builders ---------------------------------------------------


def _identity_chart(cid, n, center_coord, radii, offset):
    offset = np.asarray(offset, dtype=float)

    def fwd(x):
        return x + offset

    def inv(p):
        return p - offset

    def met(x):
        return np.broadcast_to(np.eye(n), (len(x), n, n)).copy()

    def chr0(x):
        return np.zeros((len(x), n, n, n))

    return Chart(cid, n, BoxDomain(center_coord, radii), fwd, inv, met, chr0)


def _euclidean_charts(ops):
    n = ops.n
    big = ops.half + 1.5
    c0 = _identity_chart("e0", n, np.zeros(n), np.full(n, big), np.zeros(n))
    off = np.zeros(n)
    off[0] = 1.0
    if n > 1:
        off[1] = 0.5
    c1 = _identity_chart("e1", n, np.zeros(n), np.full(n, big), off)
    return [c0, c1]


def _torus_charts(ops):
    n = ops.n
    centers = np.stack(np.meshgrid(*([np.array([0.0, 0.5])] * n),
                                   indexing="ij"), axis=-1).reshape(-1, n)
    charts = []
    for i, c in enumerate(centers):
        cc = c.copy()

        def fwd(x, cc=cc):
            return wrap_unit(cc + x)

        def inv(p, cc=cc):
            return wrap_pm(p - cc)

        def met(x):
            return np.broadcast_to(np.eye(n), (len(x), n, n)).copy()

        def chr0(x):
            return np.zeros((len(x), n, n, n))

        charts.append(Chart(f"t{i}", n, BoxDomain(np.zeros(n), np.full(n, 0.35)),
                            fwd, inv, met, chr0))
    return charts


def _sphere_normal_metric(x):
    x = np.atleast_2d(x)
    rho = np.linalg.norm(x, axis=1)
    B = len(x)
    xh = np.zeros_like(x)
    nz = rho > 1e-14
    xh[nz] = x[nz] / rho[nz, None]
    P = np.einsum("bi,bj->bij", xh, xh)
    ratio = _ratio_sq(np.sin, rho)
    eye = np.broadcast_to(np.eye(2), (B, 2, 2))
    return P + ratio[:, None, None] * (eye - P)


def _hyper_normal_metric(x):
    x = np.atleast_2d(x)
    rho = np.linalg.norm(x, axis=1)
    B = len(x)
    xh = np.zeros_like(x)
    nz = rho > 1e-14
    xh[nz] = x[nz] / rho[nz, None]
    P = np.einsum("bi,bj->bij", xh, xh)
    ratio = _ratio_sq(np.sinh, rho)
    eye = np.broadcast_to(np.eye(2), (B, 2, 2))
    return P + ratio[:, None, None] * (eye - P)


def _sphere_charts(ops):
    charts = []
    poles = [(np.array([1.0, 0, 0]), "norm+x"), (np.array([-1.0, 0, 0]), "norm-x"),
             (np.array([0, 1.0, 0]), "norm+y"), (np.array([0, -1.0, 0]), "norm-y"),
             (np.array([0, 0, 1.0]), "norm+z"), (np.array([0, 0, -1.0]), "norm-z")]
    for pole, cid in poles:
        frame = ops.frame_at(pole[None, :])[0]  # (2, 3)

        def fwd(x, pole=pole, frame=frame):
            v = x @ frame
            return ops.exp(np.broadcast_to(pole, v.shape).copy(), v)

        def inv(p, pole=pole, frame=frame):
            v = ops.log(np.broadcast_to(pole, np.atleast_2d(p).shape).copy(), p)
            return v @ frame.T

        charts.append(Chart(cid, 2, BoxDomain(np.zeros(2), np.full(2, 2.0), ball=True),
                            fwd, inv, _sphere_normal_metric, None, kind="normal"))

    def polar_chart(cid, axes):
        a, b, c = axes

        def fwd(x):
            x = np.atleast_2d(x)
            th, ph = x[:, 0], x[:, 1]
            return (np.cos(th)[:, None] * a
                    + np.sin(th)[:, None] * (np.cos(ph)[:, None] * b
                                             + np.sin(ph)[:, None] * c))

        def inv(p):
            p = np.atleast_2d(p)
            th = np.arccos(np.clip(p @ a, -1.0, 1.0))
            ph = np.arctan2(p @ c, p @ b)
            return np.stack([th, ph], axis=1)

        def met(x):
            x = np.atleast_2d(x)
            B = len(x)
            g = np.zeros((B, 2, 2))
            g[:, 0, 0] = 1.0
            g[:, 1, 1] = np.sin(x[:, 0]) ** 2
            return g

        def chris(x):
            x = np.atleast_2d(x)
            B = len(x)
            th = x[:, 0]
            G = np.zeros((B, 2, 2, 2))
            G[:, 0, 1, 1] = -np.sin(th) * np.cos(th)
            cot = np.cos(th) / np.sin(th)
            G[:, 1, 0, 1] = cot
            G[:, 1, 1, 0] = cot
            return G

        dom = BoxDomain(np.array([np.pi / 2, 0.0]),
                        np.array([np.pi / 2 - 0.25, 2.9]))
        return Chart(cid, 2, dom, fwd, inv, met, chris, kind="polar")

    e1, e2, e3 = np.eye(3)
    charts.append(polar_chart("polar-a", (e3, e1, e2)))
    charts.append(polar_chart("polar-b", (e3, -e1, -e2)))
    return charts


def _hyperbolic_charts(ops):
    def fwd_h(x):
        return np.array(x, dtype=float, copy=True)

    def inv_h(p):
        return np.array(p, dtype=float, copy=True)

    def met_h(x):
        x = np.atleast_2d(x)
        B = len(x)
        g = np.zeros((B, 2, 2))
        g[:, 0, 0] = 1.0 / x[:, 1] ** 2
        g[:, 1, 1] = 1.0 / x[:, 1] ** 2
        return g

    def chris_h(x):
        x = np.atleast_2d(x)
        B = len(x)
        y = x[:, 1]
        G = np.zeros((B, 2, 2, 2))
        G[:, 0, 0, 1] = -1.0 / y
        G[:, 0, 1, 0] = -1.0 / y
        G[:, 1, 0, 0] = 1.0 / y
        G[:, 1, 1, 1] = -1.0 / y
        return G

    half = Chart("half", 2, BoxDomain(np.array([0.0, 7.02]), np.array([14.0, 6.98])),
                 fwd_h, inv_h, met_h, chris_h, kind="global")

    base = np.array([0.0, 1.0])

    def fwd_d(x):
        x = np.atleast_2d(x)
        return ops.exp(np.broadcast_to(base, x.shape).copy(), x)

    def inv_d(p):
        p = np.atleast_2d(p)
        return ops.log(np.broadcast_to(base, p.shape).copy(), p)

    disk = Chart("disk0", 2, BoxDomain(np.zeros(2), np.full(2, 2.5), ball=True),
                 fwd_d, inv_d, _hyper_normal_metric, None, kind="normal")
    return [half, disk]


def _revolution_charts(ops):
    u_lo, u_hi = ops.u_range
    charts = []
    for cid, phi0 in (("rev-0", 0.0), ("rev-pi", np.pi)):
        def fwd(x, phi0=phi0):
            x = np.atleast_2d(x)
            phi = wrap_unit((phi0 + x[:, 1]) / (2 * np.pi)) * 2 * np.pi
            return np.stack([x[:, 0], phi], axis=1)

        def inv(p, phi0=phi0):
            p = np.atleast_2d(p)
            return np.stack([p[:, 0], wrap_angle(p[:, 1] - phi0)], axis=1)

        def met(x):
            x = np.atleast_2d(x)
            B = len(x)
            g = np.zeros((B, 2, 2))
            g[:, 0, 0] = ops.E(x[:, 0])
            g[:, 1, 1] = ops.r_poly(x[:, 0]) ** 2
            return g

        def chris(x):
            x = np.atleast_2d(x)
            B = len(x)
            u = x[:, 0]
            E = ops.E(u)
            r = ops.r_poly(u)
            rp = ops.rp(u)
            G = np.zeros((B, 2, 2, 2))
            G[:, 0, 0, 0] = ops.Ep(u) / (2 * E)
            G[:, 0, 1, 1] = -r * rp / E
            G[:, 1, 0, 1] = rp / r
            G[:, 1, 1, 0] = rp / r
            return G

        dom = BoxDomain(np.array([(u_lo + u_hi) / 2, 0.0]),
                        np.array([(u_hi - u_lo) / 2, 0.95 * np.pi]))
        charts.append(Chart(cid, 2, dom, fwd, inv, met, chris, kind="global"))
    return charts


def _circle_charts(ops):
    L = ops.length
    charts = []
    for cid, c in (("c0", 0.0), ("c1", L / 2)):
        def fwd(x, c=c):
            return wrap_unit((c + x) / L) * L

        def inv(p, c=c):
            return wrap_pm(p - c, L)

        def met(x):
            return np.ones((len(x), 1, 1))

        def chr0(x):
            return np.zeros((len(x), 1, 1, 1))

        charts.append(Chart(cid, 1, BoxDomain(np.zeros(1), np.array([0.35 * L])),
                            fwd, inv, met, chr0))
    return charts


def _interval_charts(ops):
    mid = 0.5 * (ops.lo + ops.hi)
    halfw = 0.5 * (ops.hi - ops.lo) + 0.6
    c0 = _identity_chart("i0", 1, np.array([mid]), np.array([halfw]), np.zeros(1))
    c1 = _identity_chart("i1", 1, np.array([mid - 0.3]), np.array([halfw]),
                         np.array([0.3]))
    return [c0, c1]


def _make_transition(A, B):
    def apply_fn(x):
        return B.inverse(A.forward(x))

    def overlap_fn(x):
        inside = A.domain.contains(x)
        out = np.zeros(len(x), dtype=bool)
        if np.any(inside):
            out[inside] = B.contains_point(A.forward(x[inside]))
        return out

    return TransitionMap(A.chart_id, B.chart_id, apply_fn, overlap_fn)


# -- manifold and submanifold ------------------------------------------------


_R_M_DEFAULTS = {
    "euclidean": 4.0,
    "flat-torus": 0.5,
    "sphere2": np.pi,
    "hyperbolic2": 2.0,
    "surface-of-revolution": 0.8,
    "interval": 4.0,
}


@dataclass
class Manifold:
    """A model manifold: preset ops plus a finite reference atlas."""

    preset: str
    n: int
    ops: _OpsBase
    charts: list
    transitions: list
    r_M: float
    params: dict = field(default_factory=dict)

    @property
    def point_dim(self):
        return self.ops.point_dim

    def chart_by_id(self, cid):
        for c in self.charts:
            if c.chart_id == cid:
                return c
        raise ConfigError(f"no chart with id {cid!r}")

    def charts_containing(self, p, margin=1.0):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        out = []
        for c in self.charts:
            x = c.inverse(p)
            ok = np.all(np.isfinite(x), axis=1)
            rel = np.full(len(p), np.inf)
            if np.any(ok):
                rel[ok] = c.domain.rel(x[ok])
            if np.all(rel <= margin):
                out.append((c, float(np.max(rel))))
        out.sort(key=lambda t: t[1])
        return out

    def best_chart(self, p):
        found = self.charts_containing(np.atleast_2d(p), margin=1.0)
        if not found:
            raise DomainError("point not covered by the reference atlas",
                              code="left-atlas")
        return found[0][0]

    # delegation to the preset ops
    def exp(self, p, v):
        return self.ops.exp(p, v)

    def log(self, p, q):
        return self.ops.log(p, q)

    def distance(self, p, q):
        return self.ops.distance(p, q)

    def smooth_distance(self, p, q):
        return self.ops.smooth_distance(p, q)

    def metric_dot(self, p, v, w):
        return self.ops.metric_dot(p, v, w)

    def frame_at(self, p):
        return self.ops.frame_at(p)

    def embed(self, p):
        return self.ops.embed(p)

    def random_points(self, count, rng=None, seed=0):
        if rng is None:
            rng = np.random.default_rng(int(seed))
        return self.ops.random_points(count, rng)

    def pool_points(self, count=4096, seed=0):
        return self.ops.pool_points(count, seed)

    def volume_estimate(self):
        return self.ops.volume_estimate()


def make_manifold(preset, **params):
    """Build a preset manifold. See module docstring for the preset list."""
    r_M = params.pop("r_M", None)
    if preset == "euclidean":
        ops = _EuclideanOps(n=params.get("n", 2), half=params.get("half", 2.5))
        charts = _euclidean_charts(ops)
    elif preset == "flat-torus":
        ops = _TorusOps(n=params.get("n", 2))
        charts = _torus_charts(ops)
    elif preset == "sphere2":
        ops = _SphereOps()
        charts = _sphere_charts(ops)
    elif preset == "hyperbolic2":
        ops = _HyperbolicOps(window_radius=params.get("window_radius", 1.8))
        charts = _hyperbolic_charts(ops)
    elif preset == "surface-of-revolution":
        kw = {k: params[k] for k in ("r_coeffs", "z_coeffs", "u_range", "sample_u")
              if k in params}
        ops = _RevolutionOps(**kw)
        charts = _revolution_charts(ops)
    elif preset == "circle":
        ops = _CircleOps(length=params.get("length", 2 * np.pi))
        charts = _circle_charts(ops)
    elif preset == "interval":
        ops = _IntervalOps(lo=params.get("lo", -2.5), hi=params.get("hi", 2.5))
        charts = _interval_charts(ops)
    else:
        raise ConfigError(f"unknown preset {preset!r}")
    if r_M is None:
        r_M = ops.length / 2 if preset == "circle" else _R_M_DEFAULTS[preset]
    transitions = []
    for A in charts:
        for B in charts:
            if A is not B:
                transitions.append(_make_transition(A, B))
    return Manifold(preset=preset, n=ops.n, ops=ops, charts=charts,
                    transitions=transitions, r_M=float(r_M), params=dict(params))


def presets():
    return ["euclidean", "flat-torus", "sphere2", "hyperbolic2",
            "surface-of-revolution", "circle", "interval"]


@dataclass
class Submanifold:
    """An embedded curve with closed-form collar (Fermi) coordinates.

    Arc-length parameterized: point_at(s) lies on the curve, normal_at(s)
    is the unit normal used by the collar map, and fermi_forward(s0, t, x)
    follows the normal geodesic for time t from the curve point at
    arc position s0 + x.
    """

    manifold: Manifold
    name: str
    r_N: float
    r_collar: float
    length: float = None      # circumference for closed curves
    window: tuple = None      # arc-parameter window for open curves
    k: int = 1
    params: dict = field(default_factory=dict)
    _impl: dict = field(default_factory=dict, repr=False)

    def _f(self, key):
        return self._impl[key]

    def point_at(self, s):
        return self._f("point_at")(np.atleast_1d(np.asarray(s, dtype=float)))

    def tangent_at(self, s):
        return self._f("tangent_at")(np.atleast_1d(np.asarray(s, dtype=float)))

    def normal_at(self, s):
        return self._f("normal_at")(np.atleast_1d(np.asarray(s, dtype=float)))

    def tube_coords(self, p):
        """(t, s, ok): signed collar coordinate, arc projection, validity."""
        return self._f("tube_coords")(np.atleast_2d(np.asarray(p, dtype=float)))

    def fermi_forward(self, s0, t, x):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self._f("fermi_forward")(float(s0), t, x)

    def fermi_inverse(self, s0, p):
        t, s, ok = self.tube_coords(p)
        return t, self.wrap_offset(s - float(s0)), ok

    def wrap_offset(self, ds):
        ds = np.asarray(ds, dtype=float)
        if self.length is not None:
            return wrap_pm(ds, self.length)
        return ds

    def dist(self, s1, s2):
        return np.abs(self.wrap_offset(np.asarray(s2, dtype=float)
                                       - np.asarray(s1, dtype=float)))

    def arc_window(self):
        if self.length is not None:
            return (0.0, self.length)
        return self.window

    def as_manifold(self):
        """The curve as a 1-d model manifold in arc-length coordinates."""
        if self.length is not None:
            return make_manifold("circle", length=self.length, r_M=self.r_N)
        return make_manifold("interval", lo=self.window[0], hi=self.window[1],
                             r_M=self.r_N)

    def mean_curvature(self, s, fd_step=1e-4):
        """Normal components of the acceleration of the unit-speed curve."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        comps = np.empty((len(s), 1))
        m = self.manifold
        for i, si in enumerate(s):
            P = self.point_at(si)
            chart = m.best_chart(P)
            sig = np.array([si - fd_step, si, si + fd_step])
            c = chart.inverse(self.point_at(sig))
            c1 = (c[2] - c[0]) / (2 * fd_step)
            c2 = (c[2] - 2 * c[1] + c[0]) / fd_step**2
            G = chart.christoffel(c[1][None, :])[0]
            acc = c2 + np.einsum("kij,i,j->k", G, c1, c1)
            g = chart.metric(c[1][None, :])[0]
            speed2 = c1 @ g @ c1
            acc = acc / speed2
            # unit normal in chart coordinates via the forward Jacobian
            nu_p = self.normal_at(np.array([si]))[0]
            J = _fd_point_jacobian(m.ops, chart, c[1])
            nu_x = np.linalg.lstsq(J, nu_p, rcond=None)[0]
            comps[i, 0] = nu_x @ g @ acc
        norms = np.abs(comps[:, 0])
        return {"components": comps, "norm": norms}


def _fd_point_jacobian(ops, chart, x, step=1e-6):
    """FD Jacobian of chart.forward in the point representation."""
    x = np.asarray(x, dtype=float)
    n = x.size
    cols = []
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        pp = chart.forward((x + e)[None, :])[0]
        pm = chart.forward((x - e)[None, :])[0]
        d = pp - pm
        for ax in ops.periodic_point_axes:
            period = 1.0 if ops.name == "flat-torus" else 2 * np.pi
            d[ax] = wrap_pm(d[ax], period)
        cols.append(d / (2 * step))
    return np.stack(cols, axis=1)


def make_submanifold(m, name="default", **params):
    """Model curve presets: one closed-form pair per manifold preset."""
    preset = m.preset
    if name == "default":
        name = {"euclidean": "line", "flat-torus": "circle",
                "sphere2": "equator", "hyperbolic2": "axis",
                "surface-of-revolution": "circle"}.get(preset)
        if name is None:
            raise ConfigError(f"no default submanifold for preset {preset!r}")

    if preset == "euclidean" and name == "line":
        c = float(params.get("offset", 0.0))
        half = m.ops.half

        def point_at(s):
            return np.stack([s, np.full_like(s, c)], axis=1)

        def tangent_at(s):
            return np.tile([1.0, 0.0], (len(s), 1))

        def normal_at(s):
            return np.tile([0.0, 1.0], (len(s), 1))

        def tube_coords(p):
            return (p[:, 1] - c, p[:, 0].copy(),
                    np.ones(len(p), dtype=bool))

        def fermi_forward(s0, t, x):
            return np.stack([s0 + x, c + t], axis=1)

        return Submanifold(m, "line", r_N=4.0, r_collar=4.0,
                           window=(-half, half), params={"offset": c},
                           _impl=dict(point_at=point_at, tangent_at=tangent_at,
                                      normal_at=normal_at, tube_coords=tube_coords,
                                      fermi_forward=fermi_forward))

    if preset == "flat-torus" and name == "circle":
        if m.n != 2:
            raise ConfigError("torus circle pair needs n = 2")
        c = float(params.get("offset", 0.5))

        def point_at(s):
            return np.stack([wrap_unit(s), np.full_like(s, c)], axis=1)

        def tangent_at(s):
            return np.tile([1.0, 0.0], (len(s), 1))

        def normal_at(s):
            return np.tile([0.0, 1.0], (len(s), 1))

        def tube_coords(p):
            t = wrap_pm(p[:, 1] - c)
            return (t, wrap_unit(p[:, 0]), np.ones(len(p), dtype=bool))

        def fermi_forward(s0, t, x):
            return np.stack([wrap_unit(s0 + x), wrap_unit(c + t)], axis=1)

        return Submanifold(m, "circle", r_N=0.5, r_collar=0.25, length=1.0,
                           params={"offset": c},
                           _impl=dict(point_at=point_at, tangent_at=tangent_at,
                                      normal_at=normal_at, tube_coords=tube_coords,
                                      fermi_forward=fermi_forward))

    if preset == "sphere2" and name in ("equator", "latitude"):
        th0 = float(params.get("theta0", np.pi / 2)) if name == "latitude" \
            else np.pi / 2
        st, ct = np.sin(th0), np.cos(th0)
        L = 2 * np.pi * st

        def point_at(s):
            ph = s / st
            return np.stack([st * np.cos(ph), st * np.sin(ph),
                             np.full_like(s, ct)], axis=1)

        def tangent_at(s):
            ph = s / st
            return np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(s)], axis=1)

        def normal_at(s):
            ph = s / st
            return np.stack([-ct * np.cos(ph), -ct * np.sin(ph),
                             np.full_like(s, st)], axis=1)

        def tube_coords(p):
            th = np.arccos(np.clip(p[:, 2], -1.0, 1.0))
            ph = np.arctan2(p[:, 1], p[:, 0])
            t = th0 - th
            s = wrap_unit(ph / (2 * np.pi)) * L
            ok = np.minimum(th, np.pi - th) > 1e-9
            return (t, s, ok)

        def fermi_forward(s0, t, x):
            ph = (s0 + x) / st
            th = th0 - t
            return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph),
                             np.cos(th)], axis=1)

        return Submanifold(m, name, r_N=np.pi * st,
                           r_collar=float(min(th0, np.pi - th0)),
                           length=L, params={"theta0": th0},
                           _impl=dict(point_at=point_at, tangent_at=tangent_at,
                                      normal_at=normal_at, tube_coords=tube_coords,
                                      fermi_forward=fermi_forward))

    if preset == "hyperbolic2" and name == "axis":
        wlo, whi = params.get("window", (-2.3, 2.3))

        def point_at(s):
            return np.stack([np.zeros_like(s), np.exp(s)], axis=1)

        def tangent_at(s):
            return np.stack([np.zeros_like(s), np.exp(s)], axis=1)

        def normal_at(s):
            return np.stack([np.exp(s), np.zeros_like(s)], axis=1)

        def tube_coords(p):
            r = np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2)
            th = np.arctan2(p[:, 1], p[:, 0])
            ok = (r > 1e-12) & (th > 1e-9) & (th < np.pi - 1e-9)
            s = np.where(ok, np.log(np.maximum(r, 1e-300)), 0.0)
            t = np.where(ok, -np.log(np.tan(np.maximum(th, 1e-12) / 2)), 0.0)
            return (t, s, ok)

        def fermi_forward(s0, t, x):
            th = 2.0 * np.arctan(np.exp(-t))
            r = np.exp(s0 + x)
            return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)

        return Submanifold(m, "axis", r_N=4.0, r_collar=2.0,
                           window=(float(wlo), float(whi)),
                           _impl=dict(point_at=point_at, tangent_at=tangent_at,
                                      normal_at=normal_at, tube_coords=tube_coords,
                                      fermi_forward=fermi_forward))

    if preset == "surface-of-revolution" and name == "circle":
        ops = m.ops
        u0 = float(params.get("u0", 0.25))
        r0 = float(ops.r_poly(u0))
        L = 2 * np.pi * r0
        # meridian arc length from u0 by fixed Gauss-Legendre quadrature
        gl_x, gl_w = np.polynomial.legendre.leggauss(24)

        def arc(u):
            u = np.asarray(u, dtype=float)
            halfspan = 0.5 * (u - u0)
            mid = 0.5 * (u + u0)
            nodes = mid[..., None] + halfspan[..., None] * gl_x
            return np.sum(gl_w * np.sqrt(ops.E(nodes)), axis=-1) * halfspan

        def arc_inverse(t):
            t = np.asarray(t, dtype=float)
            u = u0 + t / np.sqrt(ops.E(u0))
            for _ in range(10):
                u = u - (arc(u) - t) / np.sqrt(ops.E(u))
            return u

        def point_at(s):
            return np.stack([np.full_like(s, u0),
                             wrap_unit(s / L) * 2 * np.pi], axis=1)

        def tangent_at(s):
            return np.tile([0.0, 1.0 / r0], (len(s), 1))

        def normal_at(s):
            return np.tile([1.0 / np.sqrt(ops.E(u0)), 0.0], (len(s), 1))

        def tube_coords(p):
            t = arc(p[:, 0])
            s = wrap_unit(p[:, 1] / (2 * np.pi)) * L
            ok = ((p[:, 0] >= ops.u_range[0]) & (p[:, 0] <= ops.u_range[1]))
            return (t, s, ok)

        def fermi_forward(s0, t, x):
            t = np.broadcast_to(t, np.broadcast_shapes(t.shape, x.shape)).copy()
            x = np.broadcast_to(x, t.shape)
            u = arc_inverse(t)
            phi = wrap_unit((s0 + x) / L) * 2 * np.pi
            return np.stack([u, phi], axis=1)

        sub = Submanifold(m, "circle", r_N=np.pi * r0, r_collar=0.5, length=L,
                          params={"u0": u0},
                          _impl=dict(point_at=point_at, tangent_at=tangent_at,
                                     normal_at=normal_at, tube_coords=tube_coords,
                                     fermi_forward=fermi_forward))
        sub._impl["arc"] = arc
        sub._impl["arc_inverse"] = arc_inverse
        return sub

    raise ConfigError(f"unknown submanifold {name!r} for preset {preset!r}")


def make_pair(preset, sub_name="default", m_params=None, sub_params=None):
    m = make_manifold(preset, **(m_params or {}))
    return m, make_submanifold(m, sub_name, **(sub_params or {}))


# -- module-level operations -------------------------------------------------


def metric_at(m, chart_id, x):
    return m.chart_by_id(chart_id).metric(x)


def christoffel(m, chart_id, x, fd_step=1e-5):
    return m.chart_by_id(chart_id).christoffel(x, fd_step=fd_step)


def check_transition_consistency(m, fd_step=1e-5, samples=200, seed=0,
                                 margin=0.85):
    """Verify the metric transformation law across registered transitions.

    For each transition mu between overlapping charts the residual
    g_from - J^T (g_to o mu) J is evaluated at sampled overlap points with
    an FD Jacobian J, together with the coordinate round-trip error.
    """
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    worst_rt = 0.0
    for tr in m.transitions:
        A = m.chart_by_id(tr.from_id)
        B = m.chart_by_id(tr.to_id)
        x = A.domain.sample(samples, rng, margin=margin)
        keep = tr.in_overlap(x)
        x = x[keep]
        if len(x) < 10:
            rows.append({"from": tr.from_id, "to": tr.to_id,
                         "samples": int(len(x)), "status": "insufficient-overlap"})
            continue
        y = tr.apply(x)
        gA = A.metric(x)
        gB = B.metric(y)
        n = m.n
        J = np.empty((len(x), n, n))
        for a in range(n):
            e = np.zeros(n)
            e[a] = fd_step
            J[:, :, a] = (tr.apply(x + e) - tr.apply(x - e)) / (2 * fd_step)
        pulled = np.einsum("bia,bij,bjc->bac", J, gB, J)
        res = np.max(np.abs(gA - pulled), axis=(1, 2))
        scale = np.maximum(1.0, np.max(np.abs(gA), axis=(1, 2)))
        rel = float(np.max(res / scale))
        back = A.inverse(B.forward(y))
        rt = float(np.max(np.abs(back - x)))
        rows.append({"from": tr.from_id, "to": tr.to_id, "samples": int(len(x)),
                     "max_metric_residual": rel, "max_roundtrip": rt,
                     "status": "ok"})
        worst = max(worst, rel)
        worst_rt = max(worst_rt, rt)
    return {"transitions": rows, "max_metric_residual": worst,
            "max_roundtrip": worst_rt}


def mean_curvature_tensor(sub, s, fd_step=1e-4):
    """Second fundamental form data of a model curve at arc positions s."""
    return sub.mean_curvature(s, fd_step=fd_step)
