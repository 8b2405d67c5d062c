"""Symmetric Gauss quadrature rules on the reference triangle and unit interval.

Reference triangle is (0,0)-(1,0)-(0,1); weights sum to its area 1/2.
"""

from __future__ import annotations

import numpy as np

# Dunavant rules, 20-digit barycentric generators.
_D4_A1 = 0.44594849091596488632
_D4_W1 = 0.22338158967801146570
_D4_A2 = 0.09157621350977074346
_D4_W2 = 0.10995174365532186764

_D6_A1 = 0.24928674517091042129
_D6_W1 = 0.11678627572637936603
_D6_A2 = 0.06308901449150222834
_D6_W2 = 0.05084490637020681692
_D6_B = 0.05314504984481694735
_D6_C = 0.31035245103378440542
_D6_W3 = 0.08285107561837357649


def _perm3(a):
    # barycentric (1-2a, a, a) and its two rotations
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


def _perm6(b, c):
    a = 1.0 - b - c
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _from_bary(groups):
    pts, wts = [], []
    for bary, w in groups:
        for l1, l2, l3 in bary:
            pts.append((l2, l3))
            wts.append(w * 0.5)
    return np.array(pts), np.array(wts)


_RULES = {
    2: _from_bary([(_perm3(0.5), 1.0 / 3.0)]),
    4: _from_bary([(_perm3(_D4_A1), _D4_W1), (_perm3(_D4_A2), _D4_W2)]),
    6: _from_bary(
        [
            (_perm3(_D6_A1), _D6_W1),
            (_perm3(_D6_A2), _D6_W2),
            (_perm6(_D6_B, _D6_C), _D6_W3),
        ]
    ),
}


def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Points (nq,2) and weights (nq,) exact for polynomials of degree <= order."""
    for deg in sorted(_RULES):
        if deg >= order:
            pts, wts = _RULES[deg]
            return pts.copy(), wts.copy()
    raise ValueError(f"no triangle rule of order {order} (max {max(_RULES)})")


def interval_rule(npoints: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [0,1]."""
    x, w = np.polynomial.legendre.leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w
