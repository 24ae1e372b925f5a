"""Random test problems and brute-force oracles for bound-constrained quadratics."""

from __future__ import annotations

import itertools

import numpy as np

from .core import FeasibleRegion, QuadraticObjective


def random_spd(rng, n: int, cond: float = 1e2) -> np.ndarray:
    """Random SPD matrix with eigenvalues log-spaced in ``[1, cond]``."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.logspace(0.0, np.log10(cond), n)
    return (q * eig) @ q.T


def random_box_qp(rng, n: int = 10, cond: float = 1e2):
    """Strongly convex quadratic with lower bounds only (upper = +inf).

    Returns ``(objective, region)``; the linear term is drawn so that roughly
    half of the bounds are active at the solution.
    """
    h = random_spd(rng, n, cond)
    h = 0.5 * (h + h.T)
    lower = rng.uniform(-1.0, 1.0, n)
    c = rng.standard_normal(n) * 3.0
    region = FeasibleRegion(lower, np.full(n, np.inf))
    return QuadraticObjective(h, c), region


def kkt_enumeration(hessian, linear, lower, tol: float = 1e-10):
    """Minimizer of ``0.5 x'Hx + c'x`` over ``x >= lower`` by trying all ``2**n`` active sets.

    For each pattern the active coordinates sit on their bound, the free ones
    solve the reduced linear system; the pattern is accepted when the free
    coordinates are feasible and the active multipliers are nonnegative.
    """
    h = np.asarray(hessian, dtype=float)
    c = np.asarray(linear, dtype=float)
    lower = np.asarray(lower, dtype=float)
    n = c.size
    best = None
    for pattern in itertools.product((False, True), repeat=n):
        active = np.array(pattern)
        free = ~active
        x = lower.copy()
        if free.any():
            rhs = -(c[free] + h[np.ix_(free, active)] @ lower[active])
            x[free] = np.linalg.solve(h[np.ix_(free, free)], rhs)
            if np.any(x[free] < lower[free] - tol):
                continue
        grad = h @ x + c
        if np.any(grad[active] < -tol * max(1.0, np.abs(grad).max())):
            continue
        value = 0.5 * x @ h @ x + c @ x
        if best is None or value < best[1]:
            best = (x, value)
    if best is None:
        raise RuntimeError("no KKT point found")
    return best


def central_difference_gradient(f, x, rel_step: float = 1e-5):
    """Central differences with step ``rel_step * (1 + |x_i|)`` per coordinate."""
    x = np.array(x, dtype=float)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        h = rel_step * (1.0 + abs(flat[i]))
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
