"""Nominal points placed well inside the feasible region."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, NoInteriorPoint, NumericalBreakdown, Unbounded
from .feasibility import psi
from .model import normalize_rows
from .solvers.barrier import INTERIOR_TOL, interior_point, newton_barrier_max
from .solvers.lp import INFEASIBLE, UNBOUNDED, LPProblem, solve_lp
from .solvers.qp import QPProblem, solve_qp

FEAS_TOL = 1e-9
METHODS = ("analytic", "arithmetic", "feasible")


@dataclass
class CenterResult:
    theta_bar: np.ndarray
    method: str
    psi_at_center: float
    slacks: np.ndarray
    recourse: np.ndarray = None
    info: dict = field(default_factory=dict)

    def to_dict(self, system=None):
        d = {"method": self.method, "theta_bar": self.theta_bar.tolist(),
             "psi_at_center": self.psi_at_center, "slacks": self.slacks.tolist()}
        if system is not None:
            d["theta_names"] = list(system.theta_names)
            d["labels"] = system.labels
        d.update({k: v for k, v in self.info.items() if np.isscalar(v)})
        return d


def _blocks(system):
    A = np.hstack([system.G_theta, system.G_r])
    E = np.hstack([system.E_theta, system.E_r])
    return A, system.g, E, system.e


def _result(system, v, method, **info):
    nt = system.n_theta
    theta, r = v[:nt], v[nt:]
    slacks = system.g - system.G_theta @ theta - (system.G_r @ r if system.n_r else 0.0)
    return CenterResult(theta, method, psi(system, theta), slacks, r, dict(info))


def feasible_center(system, normalize=False):
    """Point maximizing the smallest constraint slack (the minimizer of ψ)."""
    if normalize:
        system = normalize_rows(system)
    A, g, E, e = _blocks(system)
    m, n = A.shape
    lp = LPProblem(np.r_[np.zeros(n), -1.0],
                   np.vstack([np.hstack([A, np.ones((m, 1))]),
                              np.hstack([E, np.zeros((E.shape[0], 1))])]),
                   np.r_[g, e], ["<="] * m + ["="] * E.shape[0],
                   lb=np.full(n + 1, -np.inf))
    out = solve_lp(lp)
    if out.status == UNBOUNDED:
        raise Unbounded("worst-case slack is unbounded (feasible region contains a ray "
                        "along which every constraint relaxes)", ray=out.ray)
    if out.status == INFEASIBLE:
        raise Infeasible("system is infeasible for every theta")
    if not out.optimal:
        raise NumericalBreakdown(f"feasible-center LP ended with {out.status}")
    s_star = float(out.x[-1])
    if s_star < -FEAS_TOL * (1.0 + np.abs(np.r_[g, e]).max(initial=0.0)):
        raise Infeasible(f"system is infeasible for every theta (best worst-case slack {s_star:.6g})")
    res = _result(system, out.x[:n], "feasible", s_star=s_star,
                  dual_objective=float(lp.b @ out.duals))
    res.info["duals"] = out.duals
    return res


def analytic_center(system, normalize=False, tol=1e-8):
    """Maximizer of the sum of log slacks."""
    if normalize:
        system = normalize_rows(system)
    A, g, E, e = _blocks(system)
    try:
        fc = feasible_center(system)
        x0 = np.r_[fc.theta_bar, fc.recourse]
        s_star = fc.info["s_star"]
    except Unbounded:
        x0, s_star = interior_point(A, g, E, e)
    except Infeasible:
        raise NoInteriorPoint("system has no feasible point") from None
    if s_star <= INTERIOR_TOL:
        raise NoInteriorPoint(f"no strictly interior point (max uniform slack {s_star:.3g})")
    v = newton_barrier_max(A, g, E, e, x0=x0, tol=tol)
    res = _result(system, v, "analytic")
    grad = A.T @ (1.0 / res.slacks)
    if E.shape[0]:
        lam, *_ = np.linalg.lstsq(E.T, grad, rcond=None)
        grad = grad - E.T @ lam
    res.info["stationarity"] = float(np.linalg.norm(grad))
    return res


def arithmetic_center(system, normalize=False):
    """Feasible point maximizing the sum of slacks; ties go to the point nearest the feasible center."""
    if normalize:
        system = normalize_rows(system)
    A, g, E, e = _blocks(system)
    m, n = A.shape
    cost = A.sum(axis=0)  # max sum(g - A v)  ==  min (1'A) v
    rows = np.vstack([A, E])
    rhs = np.r_[g, e]
    senses = ["<="] * m + ["="] * E.shape[0]
    lp = LPProblem(cost, rows, rhs, senses, lb=np.full(n, -np.inf))
    out = solve_lp(lp)
    if out.status == UNBOUNDED:
        raise Unbounded("sum of slacks is unbounded", ray=out.ray)
    if out.status == INFEASIBLE:
        raise Infeasible("system is infeasible for every theta")
    if not out.optimal:
        raise NumericalBreakdown(f"arithmetic-center LP ended with {out.status}")
    opt = out.objective
    try:
        fc = feasible_center(system)
        anchor = np.r_[fc.theta_bar, fc.recourse]
    except Unbounded:
        anchor = out.x
    qp = QPProblem(2 * np.eye(n), -2 * anchor,
                   np.vstack([rows, cost]), np.r_[rhs, opt + 1e-9 * (1 + abs(opt))],
                   senses + ["<="], lb=np.full(n, -np.inf))
    tie = solve_qp(qp, x0=out.x)
    v = tie.x if tie.optimal else out.x
    res = _result(system, v, "arithmetic", slack_sum=float(g.sum() - opt))
    return res


def compute_center(system, method, normalize=False):
    if method == "analytic":
        return analytic_center(system, normalize)
    if method == "arithmetic":
        return arithmetic_center(system, normalize)
    if method == "feasible":
        return feasible_center(system, normalize)
    raise ValueError(f"unknown center method {method!r}")
