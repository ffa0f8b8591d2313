"""Geodesic flow in chart coordinates with automatic re-anchoring.

The integrator works in whatever reference chart currently contains the
moving point, switching charts when the trajectory approaches a domain
boundary. A fixed-step RK4 scheme keeps the map smooth in its inputs;
kinetic energy along the flow is monitored and a drift beyond tolerance
aborts the run rather than returning a silently bad endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._errors import DomainError, IntegrationError
from .geometry import _fd_point_jacobian

__all__ = ["GeodesicResult", "integrate_geodesic", "exp_map",
           "parallel_transport", "normal_frame"]


@dataclass
class GeodesicResult:
    point: np.ndarray            # endpoint in the point representation
    velocity: np.ndarray         # endpoint velocity, point representation
    chart_id: str
    energy_drift: float          # max |E(t)/E(0) - 1|
    steps: int
    events: list = field(default_factory=list)
    path: list = field(default_factory=list)   # (t, point) samples
    transported: np.ndarray = None


def _to_chart_velocity(ops, chart, x, v_point):
    J = _fd_point_jacobian(ops, chart, x)
    out, *_ = np.linalg.lstsq(J, v_point, rcond=None)
    return out


def _from_chart_velocity(ops, chart, x, xi):
    J = _fd_point_jacobian(ops, chart, x)
    return J @ xi


def _pick_chart(m, p, exclude=None):
    cands = m.charts_containing(p, margin=1.0)
    if exclude is not None:
        cands = [c for c in cands if c[0].chart_id != exclude] or cands
    if not cands:
        raise IntegrationError(
            "geodesic left the reference atlas", code="left-atlas")
    return cands[0][0]


def integrate_geodesic(m, p, v, T, h=1e-3, record_every=0, energy_tol=1e-3,
                       anchor_margin=0.9, transport=None):
    """Integrate the geodesic from p with velocity v for parameter time T.

    Switches charts when the domain margin passes anchor_margin. With
    transport set to a tangent vector, the same RK4 pass also carries it
    by parallel transport. record_every = k stores every k-th point.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    if T < 0:
        T, v = -T, -v
    chart = _pick_chart(m, p[None, :])
    x = chart.inverse(p[None, :])[0]
    xi = _to_chart_velocity(m.ops, chart, x, v)
    w = None
    if transport is not None:
        w = _to_chart_velocity(m.ops, chart, x,
                               np.asarray(transport, dtype=float).reshape(-1))

    def energy(ch, xx, vv):
        g = ch.metric(xx[None, :])[0]
        return float(vv @ g @ vv)

    E0 = energy(chart, x, xi)
    drift = 0.0
    events = []
    path = []
    if record_every:
        path.append((0.0, p.copy()))

    nfull = int(np.floor(T / h + 1e-12))
    steps = [h] * nfull
    rem = T - nfull * h
    if rem > 1e-12:
        steps.append(rem)

    def rhs(ch, state):
        n = m.n
        xx = state[:n]
        blocks = state[n:].reshape(-1, n)
        G = ch.christoffel(xx[None, :])[0]
        dxi = -np.einsum("kij,i,j->k", G, blocks[0], blocks[0])
        out = [blocks[0], dxi]
        for blk in blocks[1:]:
            out.append(-np.einsum("kij,i,j->k", G, blocks[0], blk))
        return np.concatenate(out)

    t = 0.0
    kstep = 0
    for hs in steps:
        state = np.concatenate([x, xi] if w is None else [x, xi, w])
        k1 = rhs(chart, state)
        k2 = rhs(chart, state + 0.5 * hs * k1)
        k3 = rhs(chart, state + 0.5 * hs * k2)
        k4 = rhs(chart, state + hs * k3)
        state = state + (hs / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        n = m.n
        x, xi = state[:n], state[n:2 * n]
        if w is not None:
            w = state[2 * n:]
        t += hs
        kstep += 1

        E = energy(chart, x, xi)
        drift = max(drift, abs(E / E0 - 1.0))
        if drift > energy_tol:
            raise IntegrationError(
                f"kinetic energy drifted by {drift:.3e} at t={t:.4f}; "
                "reduce the step size", code="step-too-large")

        rel = chart.domain.rel(x[None, :])[0]
        if rel > anchor_margin:
            pt = chart.forward(x[None, :])[0]
            vp = _from_chart_velocity(m.ops, chart, x, xi)
            wp = None if w is None else _from_chart_velocity(m.ops, chart, x, w)
            newc = _pick_chart(m, pt[None, :])
            newrel = newc.domain.rel(newc.inverse(pt[None, :]))[0]
            if newc.chart_id != chart.chart_id and newrel < rel - 1e-9:
                events.append({"t": t, "event": "anchor",
                               "from": chart.chart_id, "to": newc.chart_id})
                chart = newc
                x = chart.inverse(pt[None, :])[0]
                xi = _to_chart_velocity(m.ops, chart, x, vp)
                if wp is not None:
                    w = _to_chart_velocity(m.ops, chart, x, wp)
                E0 = energy(chart, x, xi) / (E / E0)  # keep drift reference
            elif rel > 1.0:
                raise IntegrationError(
                    "geodesic left the reference atlas", code="left-atlas")

        if record_every and kstep % record_every == 0:
            path.append((t, chart.forward(x[None, :])[0]))

    p_end = chart.forward(x[None, :])[0]
    v_end = _from_chart_velocity(m.ops, chart, x, xi)
    w_end = None if w is None else _from_chart_velocity(m.ops, chart, x, w)
    if record_every and (not path or path[-1][0] < t):
        path.append((t, p_end.copy()))
    return GeodesicResult(point=p_end, velocity=v_end, chart_id=chart.chart_id,
                          energy_drift=drift, steps=kstep, events=events,
                          path=path, transported=w_end)


def exp_map(m, p, v, h=1e-3, energy_tol=1e-3):
    """Endpoint of the unit-time geodesic; requires |v|_g <= r_M."""
    p = np.asarray(p, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    speed = float(np.sqrt(m.metric_dot(p[None, :], v[None, :], v[None, :])[0]))
    if speed > m.r_M * (1 + 1e-12):
        raise DomainError(
            f"|v|_g = {speed:.6f} exceeds the injectivity radius {m.r_M:.6f}",
            code="exp-beyond-radius")
    if speed == 0.0:
        return p.copy()
    return integrate_geodesic(m, p, v, 1.0, h=h, energy_tol=energy_tol).point


def parallel_transport(m, p, v, w, T=1.0, h=1e-3, energy_tol=1e-3):
    """Transport w along the geodesic t -> exp(p, t v) up to time T."""
    res = integrate_geodesic(m, p, v, T, h=h, energy_tol=energy_tol,
                             transport=w)
    return res


def normal_frame(m, p):
    """Deterministic orthonormal tangent frame at each point."""
    return m.frame_at(p)
