"""One-sided finite differences and Richardson extrapolation at r = 0."""

from __future__ import annotations

import numpy as np

STENCIL_POINTS = 5


def fornberg_weights(order: int, x0: float, nodes) -> np.ndarray:
    """Finite-difference weights for the given derivative order at ``x0``.

    Fornberg's recursion; exact for polynomials up to degree len(nodes)-1.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    if order >= n:
        raise ValueError("need more nodes than the derivative order")
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            for k in range(mn, 0, -1):
                c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
            c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def richardson_derivative_at_zero(f, order: int, r0: float = 0.1,
                                  levels: int = 6) -> tuple[float, float]:
    """One-sided derivative of ``f`` at 0 from samples on (0, r0].

    Uses 5-point one-sided stencils on [0, h] with h = r0 * 2^-j for
    j = 0..levels-1, then Richardson extrapolation (known leading order
    5 - ``order``, step ratio 2).  ``f`` maps an array of radii to values.
    Returns (value, error estimate).
    """
    if order < 1 or order >= STENCIL_POINTS:
        raise ValueError("derivative order must be in 1..4")
    frac = np.arange(STENCIL_POINTS) / (STENCIL_POINTS - 1)
    radii = np.concatenate([r0 * 2.0**-j * frac for j in range(levels)])
    values = np.asarray(f(radii), dtype=float).reshape(levels, STENCIL_POINTS)
    estimates = []
    for j in range(levels):
        nodes = radii[j * STENCIL_POINTS:(j + 1) * STENCIL_POINTS]
        w = fornberg_weights(order, 0.0, nodes)
        estimates.append(float(w @ values[j]))
    p = STENCIL_POINTS - order
    table = list(estimates)
    err = abs(table[-1] - table[-2]) if levels > 1 else abs(table[-1])
    for col in range(1, levels):
        new = []
        factor = 2.0 ** (p + col - 1)
        for i in range(1, len(table)):
            new.append(table[i] + (table[i] - table[i - 1]) / (factor - 1.0))
        prev_last = table[-1]
        table = new
        err = abs(table[-1] - prev_last)
    return table[-1], err


def limit_at_zero(f, r0: float = 0.01, levels: int = 5) -> tuple[float, float]:
    """Limit of ``f(r)`` as r -> 0+ by Neville extrapolation on r_j = r0 2^-j."""
    radii = r0 * 2.0 ** -np.arange(levels)
    vals = np.asarray(f(radii), dtype=float)
    t = list(vals)
    err = abs(t[-1] - t[-2]) if levels > 1 else abs(t[-1])
    x = list(radii)
    for col in range(1, levels):
        new = []
        for i in range(1, len(t)):
            xi, xj = x[i + col - 1], x[i - 1]
            new.append((xj * t[i] - xi * t[i - 1]) / (xj - xi))
        prev_last = t[-1]
        t = new
        err = abs(t[-1] - prev_last)
    return t[-1], err
