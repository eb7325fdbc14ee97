"""Damped Newton method for log-barrier problems with linear equality constraints."""
from __future__ import annotations

import numpy as np

from ..errors import NoInteriorPoint, NumericalBreakdown, Unbounded
from .lp import LPProblem, solve_lp

INTERIOR_TOL = 1e-10


def _newton(phi, grad, hess, x, E, slack_fn, tol=1e-8, max_iter=200, blowup=1e12):
    """Equality-constrained damped Newton for a self-concordant ``phi``.

    ``x`` must be strictly feasible. Stops when the squared Newton decrement
    is negligible, or when the gradient projected on the null space of ``E``
    falls below ``tol`` with a small decrement.
    """
    n = x.size
    p_eq = E.shape[0]
    if p_eq:
        _, sv, vt = np.linalg.svd(E, full_matrices=True)
        rank = int(np.sum(sv > 1e-12 * max(1.0, sv.max(initial=0.0))))
        Z = vt[rank:].T
    else:
        Z = np.eye(n)
    for _ in range(max_iter):
        g = grad(x)
        gz = Z.T @ g
        H = Z.T @ hess(x) @ Z
        try:
            step_z = -np.linalg.solve(H, gz)
        except np.linalg.LinAlgError:
            step_z = -np.linalg.lstsq(H, gz, rcond=None)[0]
        if not np.all(np.isfinite(step_z)) or np.linalg.cond(H) > 1e14:
            raise Unbounded("barrier problem has a recession direction (singular Hessian)")
        dx = Z @ step_z
        dec2 = float(-gz @ step_z)
        # a small gradient alone is not enough: along a recession direction the
        # gradient vanishes while the Newton decrement stays constant
        if dec2 < 1e-24 or (np.linalg.norm(gz) <= tol and dec2 < 1e-20):
            return x
        t, f0 = 1.0, phi(x)
        while t > 1e-20:
            xn = x + t * dx
            if np.all(slack_fn(xn) > 0) and phi(xn) <= f0 - 0.25 * t * dec2:
                break
            t *= 0.5
        else:
            return x
        x = xn
        if np.abs(x).max() > blowup:
            raise Unbounded("barrier iterates diverge; the feasible region is unbounded")
    if np.linalg.norm(Z.T @ grad(x)) <= 1e3 * tol:
        return x
    raise NumericalBreakdown("Newton barrier iteration did not converge")


def interior_point(A, b, E=None, e=None):
    """Maximize the minimum slack of ``A v <= b`` (``E v = e``); returns (v, s*)."""
    m, n = A.shape
    E = np.zeros((0, n)) if E is None else E
    e = np.zeros(0) if e is None else e
    rows = np.hstack([A, np.ones((m, 1))])
    lp = LPProblem(np.r_[np.zeros(n), -1.0],
                   np.vstack([rows, np.hstack([E, np.zeros((E.shape[0], 1))])]),
                   np.r_[b, e], ["<="] * m + ["="] * E.shape[0],
                   lb=np.full(n + 1, -np.inf), ub=np.r_[np.full(n, np.inf), 1.0])
    out = solve_lp(lp)
    if not out.optimal:
        raise NoInteriorPoint(f"no feasible point ({out.status})")
    return out.x[:n], float(out.x[n])


def newton_barrier_max(A, b, E=None, e=None, x0=None, tol=1e-8):
    """Maximize ``sum(log(b - A v))`` subject to ``E v = e``.

    Starts from ``x0`` or from the max-min-slack point; raises NoInteriorPoint
    when no strictly interior point exists.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, n = A.shape
    E = np.zeros((0, n)) if E is None else np.asarray(E, float)
    e = np.zeros(0) if e is None else np.asarray(e, float)
    if x0 is None:
        x0, s_star = interior_point(A, b, E, e)
        if s_star <= INTERIOR_TOL:
            raise NoInteriorPoint(f"maximum uniform slack {s_star:.3g} is not positive")
    x = np.asarray(x0, float).copy()
    if np.any(b - A @ x <= 0):
        raise NoInteriorPoint("starting point is not strictly interior")

    def slack(v):
        return b - A @ v

    def phi(v):
        s = slack(v)
        return np.inf if np.any(s <= 0) else -float(np.sum(np.log(s)))

    def grad(v):
        return A.T @ (1.0 / slack(v))

    def hess(v):
        s = slack(v)
        return (A / s[:, None] ** 2).T @ A

    return _newton(phi, grad, hess, x, E, slack, tol=tol)


def barrier_qp(p, E, e, G, h, x0=None, t0=1.0, mu=10.0, gap=1e-10):
    """Path-following log-barrier for a convex QP; used when active-set cycles."""
    n = p.c.size
    x, s_star = interior_point(G, h, E, e)
    if s_star <= INTERIOR_TOL:
        raise NumericalBreakdown("QP has no strictly interior point for the barrier fallback")
    m = G.shape[0]
    t = t0

    def slack(v):
        return h - G @ v

    while m / t > gap:
        def phi(v, t=t):
            s = slack(v)
            return np.inf if np.any(s <= 0) else t * p.objective(v) - float(np.sum(np.log(s)))

        def grad(v, t=t):
            return t * (p.Q @ v + p.c) + G.T @ (1.0 / slack(v))

        def hess(v, t=t):
            s = slack(v)
            return t * p.Q + (G / s[:, None] ** 2).T @ G

        x = _newton(phi, grad, hess, x, E, slack, tol=1e-9 * max(1.0, t))
        t *= mu
    return x
