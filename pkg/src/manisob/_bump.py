"""Smooth cutoff profiles.

Everything cut off in this package (chart partitions, tube windows,
dyadic frequency shells, the extension profile) is built from one
C-infinity smoothstep so that finite-difference derivative estimates of
any order stay bounded and stable under step refinement.
"""

import numpy as np

__all__ = ["BumpProfile", "smoothstep", "DEFAULT_PROFILE"]


def _sigma(u):
    # exp(-1/u) continued by 0, all derivatives vanish at 0+
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    with np.errstate(over="ignore"):
        out[pos] = np.exp(-1.0 / u[pos])
    return out


def smoothstep(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, strictly increasing between.

    s(u) = sigma(u) / (sigma(u) + sigma(1-u)) with sigma(u) = exp(-1/u).
    """
    u = np.asarray(u, dtype=float)
    a = _sigma(u)
    b = _sigma(1.0 - u)
    out = np.empty_like(u)
    lo = u <= 0.0
    hi = u >= 1.0
    mid = ~(lo | hi)
    out[lo] = 0.0
    out[hi] = 1.0
    out[mid] = a[mid] / (a[mid] + b[mid])
    return out


class BumpProfile:
    """Radial cutoff factory.

    ``window(t, plateau, support)`` equals exactly 1 for ``t <= plateau``,
    exactly 0 for ``t >= support`` and descends smoothly in between.
    ``chi(t) = window(t, 1, 3/2)`` is the canonical profile used by chart
    partitions; tube and extension cutoffs use other plateau/support pairs.
    """

    def window(self, t, plateau, support):
        if not support > plateau > 0:
            raise ValueError("need 0 < plateau < support")
        t = np.abs(np.asarray(t, dtype=float))
        return 1.0 - smoothstep((t - plateau) / (support - plateau))

    def chi(self, t):
        """The canonical profile: 1 on [0, 1], support in [0, 3/2]."""
        return self.window(t, 1.0, 1.5)


DEFAULT_PROFILE = BumpProfile()
