"""Symmetric Gauss rules on triangles (Dunavant), barycentric points and weights summing to 1."""

import numpy as np


def _perm3(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _perm6(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(bary, weights)`` exact for polynomials up to ``degree`` (4 or 6)."""
    if degree <= 4:
        pts = _perm3(0.445948490915965) + _perm3(0.091576213509771)
        w = [0.223381589678011] * 3 + [0.109951743655322] * 3
    elif degree <= 6:
        pts = (
            _perm3(0.063089014491502)
            + _perm3(0.249286745170910)
            + _perm6(0.053145049844817, 0.310352451033784)
        )
        w = [0.050844906370207] * 3 + [0.116786275726379] * 3 + [0.082851075618374] * 6
    else:
        raise ValueError(f"no rule of degree {degree}")
    return np.array(pts), np.array(w)
