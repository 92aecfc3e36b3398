"""Quadrature rules on the reference triangle and the unit segment.

Triangle rules are Grundmann-Moller simplex rules of arbitrary odd degree;
segment rules are Gauss-Legendre mapped to [0, 1].  Both return plain
``(points, weights)`` tuples with weights summing to the reference measure
(1/2 for the triangle, 1 for the segment).
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np

__all__ = ["triangle_rule", "segment_rule"]


@lru_cache(maxsize=None)
def _grundmann_moller(s: int):
    # Grundmann-Moller rule of degree 2s+1 on the unit triangle
    # {(x, y) : x, y >= 0, x + y <= 1}.  Weights include the reference
    # area, i.e. sum to 1/2.
    n = 2
    d = 2 * s + 1
    pts = []
    wts = []
    for i in range(s + 1):
        denom = d + n - 2 * i
        w = (
            (-1.0) ** i
            * 2.0 ** (-2 * s)
            * float(denom) ** d
            / (factorial(i) * factorial(d + n - i))
        )
        # all multi-indices k = (k0, k1, k2) >= 0 with |k| = s - i
        m = s - i
        for k1 in range(m + 1):
            for k2 in range(m - k1 + 1):
                pts.append(((2 * k1 + 1) / denom, (2 * k2 + 1) / denom))
                wts.append(w)
    return np.asarray(pts, dtype=float), np.asarray(wts, dtype=float)


def triangle_rule(degree: int):
    """Return points and weights exact for polynomials up to ``degree``.

    Parameters
    ----------
    degree : int
        Requested polynomial exactness (>= 0).

    Returns
    -------
    points : ndarray (nq, 2)
        Barycentric-interior points on the reference triangle.
    weights : ndarray (nq,)
        Positive-measure weights; ``weights.sum() == 1/2``.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    s = max(0, (degree - 1 + 1) // 2)  # smallest s with 2s+1 >= degree
    return _grundmann_moller(s)


@lru_cache(maxsize=None)
def _gauss01(npts: int):
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def segment_rule(degree: int):
    """Gauss-Legendre rule on [0, 1] exact for polynomials up to ``degree``.

    Returns
    -------
    points : ndarray (nq,)
    weights : ndarray (nq,), summing to 1.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    npts = degree // 2 + 1
    return _gauss01(npts)
