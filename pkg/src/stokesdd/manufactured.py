"""Manufactured Stokes solution on the unit square and its forcing.

u = (sin^3(pi x) sin^2(pi y) cos(pi y), -sin^2(pi x) sin^3(pi y) cos(pi x)),
p = x^2 - y^2, and f = -Laplace(u) + grad(p), differentiated by hand:

    f_x = 2 x + 2 pi^2 [9 S^3 s^2 c - S^3 c - 3 S s^2 c]
    f_y = -2 y - 2 pi^2 [9 S^2 s^3 C - 3 S^2 s C - s^3 C]

with S = sin(pi x), C = cos(pi x), s = sin(pi y), c = cos(pi y).
"""

import numpy as np

PI = np.pi


def velocity(x, y):
    S, C = np.sin(PI * x), np.cos(PI * x)
    s, c = np.sin(PI * y), np.cos(PI * y)
    return np.stack([S**3 * s**2 * c, -(S**2) * s**3 * C])


def velocity_gradient(x, y):
    """Array of shape (2, 2, ...) with entry [k, d] = d u_k / d x_d."""
    S, C = np.sin(PI * x), np.cos(PI * x)
    s, c = np.sin(PI * y), np.cos(PI * y)
    du1dx = 3 * PI * S**2 * C * s**2 * c
    du1dy = PI * S**3 * (2 * s * c**2 - s**3)
    du2dx = -PI * (2 * S * C**2 - S**3) * s**3
    du2dy = -3 * PI * S**2 * C * s**2 * c
    return np.stack([np.stack([du1dx, du1dy]), np.stack([du2dx, du2dy])])


def pressure(x, y):
    return x**2 - y**2


def forcing(x, y):
    S, C = np.sin(PI * x), np.cos(PI * x)
    s, c = np.sin(PI * y), np.cos(PI * y)
    fx = 2 * x + 2 * PI**2 * (9 * S**3 * s**2 * c - S**3 * c - 3 * S * s**2 * c)
    fy = -2 * y - 2 * PI**2 * (9 * S**2 * s**3 * C - 3 * S**2 * s * C - s**3 * C)
    return np.stack([fx, fy])
