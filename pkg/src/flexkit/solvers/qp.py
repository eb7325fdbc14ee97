"""Primal active-set method for convex (possibly singular) quadratic programs.

Minimizes ``0.5 v.Q.v + c.v`` subject to linear rows and bounds. The working
set is handled with a null-space method, so ``Q`` only needs to be positive
semidefinite: directions of zero curvature are followed to the next blocking
constraint (or reported as unbounded).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalBreakdown
from .lp import (INFEASIBLE, OPTIMAL, UNBOUNDED, LPProblem, SolveOutcome,
                 solve_lp)

log = logging.getLogger(__name__)

PSD_TOL = 1e-10


@dataclass
class QPProblem:
    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    senses: list = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        self.Q = np.asarray(self.Q, float)
        self.c = np.asarray(self.c, float).reshape(-1)
        n = self.c.size
        if self.Q.shape != (n, n):
            raise ValueError("Q must be square and match c")
        if not np.allclose(self.Q, self.Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        if n and np.linalg.eigvalsh(self.Q).min() < -PSD_TOL * max(1.0, np.abs(self.Q).max()):
            raise ValueError("Q must be positive semidefinite")
        lp = LPProblem(self.c, self.A, self.b, self.senses, self.lb, self.ub)
        self.A, self.b, self.senses, self.lb, self.ub = lp.A, lp.b, lp.senses, lp.lb, lp.ub

    def as_lp(self, c=None):
        return LPProblem(self.c if c is None else c, self.A, self.b, self.senses, self.lb, self.ub)

    def objective(self, v):
        return float(0.5 * v @ self.Q @ v + self.c @ v)


def _rows(p: QPProblem):
    """Split into equality rows ``E v = e`` and inequality rows ``G v <= h``."""
    n = p.c.size
    E, e, G, h = [], [], [], []
    origin = []  # per combined row: (kind, index, sign / row scale, is_equality)
    for i, s in enumerate(p.senses):
        if s == "=":
            E.append(p.A[i]); e.append(p.b[i]); origin.append(("row", i, 1.0, True))
    I = np.eye(n)
    for j in range(n):
        if p.lb[j] == p.ub[j]:
            E.append(I[j]); e.append(p.lb[j]); origin.append(("bound", j, 1.0, True))
    n_eq = len(E)
    for i, s in enumerate(p.senses):
        if s == "<=":
            G.append(p.A[i]); h.append(p.b[i]); origin.append(("row", i, 1.0, False))
        elif s == ">=":
            G.append(-p.A[i]); h.append(-p.b[i]); origin.append(("row", i, -1.0, False))
    for j in range(n):
        if p.lb[j] == p.ub[j]:
            continue
        if np.isfinite(p.ub[j]):
            G.append(I[j]); h.append(p.ub[j]); origin.append(("bound", j, 1.0, False))
        if np.isfinite(p.lb[j]):
            G.append(-I[j]); h.append(-p.lb[j]); origin.append(("bound", j, -1.0, False))
    C = np.array(E + G, float).reshape(-1, n)
    d = np.array(e + h, float)
    # unit rows keep null-space and multiplier noise independent of coefficient scale
    norms = np.linalg.norm(C, axis=1)
    norms[norms == 0] = 1.0
    C /= norms[:, None]
    d /= norms
    origin = [(k, i, sgn / nrm, eq) for (k, i, sgn, eq), nrm in zip(origin, norms)]
    return C, d, n_eq, origin


def _independent(Aw, a, tol=1e-9):
    if Aw.shape[0] == 0:
        return np.linalg.norm(a) > 0
    coef, *_ = np.linalg.lstsq(Aw.T, a, rcond=None)
    return np.linalg.norm(Aw.T @ coef - a) > tol * max(1.0, np.linalg.norm(a))


def _null_space(Aw, n):
    if Aw.shape[0] == 0:
        return np.eye(n)
    _, sv, vt = np.linalg.svd(Aw, full_matrices=True)
    tol = max(Aw.shape) * np.finfo(float).eps * (sv[0] if sv.size else 1.0) * 10
    rank = int(np.sum(sv > tol))
    return vt[rank:].T


def solve_qp(p: QPProblem, x0=None, max_iter=None) -> SolveOutcome:
    """Solve a convex QP; returns an outcome whose duals are shadow prices per row."""
    n = p.c.size
    if x0 is None:
        ph1 = solve_lp(p.as_lp(np.zeros(n)))
        if ph1.status == INFEASIBLE:
            return SolveOutcome(INFEASIBLE)
        if not ph1.optimal:
            raise NumericalBreakdown(f"QP phase 1 failed: {ph1.status}")
        x0 = ph1.x
    C, d, n_eq, origin = _rows(p)
    try:
        return _active_set(p, C, d, n_eq, origin, np.array(x0, float), max_iter, bland=False)
    except _Cycling:
        log.debug("active-set cycling detected; retrying with smallest-index rule")
    try:
        return _active_set(p, C, d, n_eq, origin, np.array(x0, float), max_iter, bland=True)
    except _Cycling:
        pass
    from .barrier import barrier_qp
    x = barrier_qp(p, C[:n_eq], d[:n_eq], C[n_eq:], d[n_eq:], x0)
    return _active_set(p, C, d, n_eq, origin, x, max_iter, bland=True)


class _Cycling(Exception):
    pass


def _active_set(p, C, d, n_eq, origin, x, max_iter, bland):
    n = p.c.size
    Q, c = p.Q, p.c
    m = C.shape[0]
    max_iter = max_iter or 20 * (n + m + 10)
    scale = 1.0 + np.abs(d).max(initial=0.0)
    W = []
    for i in range(n_eq):
        if _independent(C[W], C[i]):
            W.append(i)
    resid = C[n_eq:] @ x - d[n_eq:]
    for i in np.argsort(-resid):
        i = int(i) + n_eq
        if abs(C[i] @ x - d[i]) <= 1e-9 * scale and _independent(C[W], C[i]):
            W.append(i)
    status = OPTIMAL
    it = 0
    dropped = None
    while True:
        it += 1
        if it > max_iter:
            raise _Cycling()
        g = Q @ x + c
        Aw = C[W]
        Z = _null_space(Aw, n)
        p_dir = np.zeros(n)
        newton = True
        if Z.shape[1]:
            Hr = Z.T @ Q @ Z
            gr = Z.T @ g
            w, U = np.linalg.eigh(Hr)
            pos = w > 1e-10 * max(1.0, np.abs(w).max(initial=0.0))
            coef = U.T @ gr
            null_part = U[:, ~pos] @ coef[~pos]
            if np.linalg.norm(null_part) > 1e-8 * (1.0 + np.linalg.norm(g)):
                p_dir = Z @ (-null_part)
                newton = False
            else:
                p_dir = Z @ (-(U[:, pos] @ (coef[pos] / w[pos])))
        step_cap = 1.0 if newton else np.inf
        forced = False
        if dropped is not None and Z.shape[1]:
            # the step must leave the constraint just released; otherwise the
            # computed direction is rounding noise, so move straight off it
            a = C[dropped]
            if a @ p_dir >= -1e-12 * np.linalg.norm(p_dir) * np.linalg.norm(a) \
                    or np.linalg.norm(p_dir) <= 1e-12 * (1.0 + np.linalg.norm(x)):
                p_dir = -(Z @ (Z.T @ a))
                forced = True
                curv, slope = p_dir @ Q @ p_dir, g @ p_dir
                if slope < 0:
                    step_cap = -slope / curv if curv > 1e-12 * (p_dir @ p_dir) else np.inf
                else:
                    p_dir = np.zeros(n)
        dropped = None
        # a Newton step whose predicted decrease is below rounding level is no step
        gain = -(g @ p_dir + 0.5 * p_dir @ Q @ p_dir) if newton and not forced else np.inf
        if np.linalg.norm(p_dir) <= 1e-12 * (1.0 + np.linalg.norm(x)) \
                or gain <= 1e-13 * (1.0 + abs(p.objective(x))):
            if Aw.shape[0]:
                nu, *_ = np.linalg.lstsq(Aw.T, -g, rcond=None)
            else:
                nu = np.zeros(0)
            ineq_pos = [k for k, i in enumerate(W) if i >= n_eq]
            tol = 1e-9 * (1.0 + np.linalg.norm(g))
            neg = [k for k in ineq_pos if nu[k] < -tol]
            if not neg:
                break
            k = min(neg, key=lambda k: W[k]) if bland else min(neg, key=lambda k: nu[k])
            dropped = W.pop(k)
            continue
        # ratio test
        alpha = step_cap
        block = None
        inW = set(W)
        Cp = C[n_eq:] @ p_dir
        slack = d[n_eq:] - C[n_eq:] @ x
        pn = np.linalg.norm(p_dir)
        for k in np.nonzero(Cp > 1e-12 * pn)[0]:
            i = int(k) + n_eq
            if i in inW:
                continue
            a = max(slack[k], 0.0) / Cp[k]
            if a < alpha or (bland and a == alpha and block is not None and i < block):
                alpha, block = a, i
        if not np.isfinite(alpha):
            status = UNBOUNDED
            break
        x = x + alpha * p_dir
        if block is not None:
            W.append(block)
    if status == UNBOUNDED:
        return SolveOutcome(UNBOUNDED, x=x, ray=p_dir, iterations=it)
    # duals: g + C_W^T nu = 0; shadow price of a row rhs is -nu (times sign flip)
    nu_full = np.zeros(C.shape[0])
    if W:
        nu, *_ = np.linalg.lstsq(C[W].T, -(Q @ x + c), rcond=None)
        nu_full[W] = nu
    duals = np.zeros(len(p.senses))
    for k, (kind, idx, sgn, _) in enumerate(origin):
        if kind == "row":
            duals[idx] += -sgn * nu_full[k]
    g = Q @ x + c
    reduced = g - p.A.T @ duals
    out = SolveOutcome(OPTIMAL, x=x, duals=duals, objective=p.objective(x),
                       reduced_costs=reduced, iterations=it)
    out.info["kkt_residual"] = float(np.linalg.norm(g + C.T @ nu_full))
    return out
