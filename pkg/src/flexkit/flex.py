"""Flexibility index, solution certificates and limiting-constraint ranking.

The index is the smallest scaling ``delta`` at which the uncertainty set
``T(delta)`` touches a point where the system is just barely feasible. That
point is characterized through the optimality conditions of the feasibility
LP, with one binary per inequality choosing whether it may carry a
multiplier (active) or must keep a slack (inactive).
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import FlexError, Infeasible, InfeasibleNominal, Unbounded
from .feasibility import psi, psi_batch, stochastic_flexibility
from .model import ConstraintFilter, apply_filter, vacuous_labels
from .sets import (Ellipsoid, Hyperbox, boundary_sample, compile_set, describe, level,
                   nominal, set_to_dict)
from .solvers.bnb import BnBConfig, Relaxation, branch_and_bound
from .solvers.lp import OPTIMAL, UNBOUNDED, LPProblem, solve_lp
from .solvers.qp import QPProblem, solve_qp
from .special import confidence_level

log = logging.getLogger(__name__)

FEAS_TOL = 1e-8
ACTIVE_TOL = 1e-7
MERGE_TOL = 1e-6
CERT_TOL = 1e-7
BIG_M_SCALE = 1e4
BIG_M_DOUBLINGS = 5


def _close(a, b, rel):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-12)


def _chop(v, tol=1e-12):
    return 0.0 if abs(v) < tol else float(v)


@dataclass
class FlexSolution:
    F: float
    theta_star: np.ndarray
    z_star: np.ndarray
    x_star: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    slacks: np.ndarray
    y: np.ndarray
    labels: list
    active_labels: list
    weakly_active: list
    co_limiting: list
    set_used: object
    big_m: float
    stats: dict = field(default_factory=dict)
    system: object = None  # the (possibly filtered) system that was solved

    @property
    def limiting_labels(self):
        """Labels excluded by the next ranking step: active plus co-limiting."""
        return self.active_labels + [l for l in self.co_limiting if l not in self.active_labels]

    def to_dict(self):
        return {
            "F": self.F,
            "set": set_to_dict(self.set_used),
            "active": self.active_labels,
            "weakly_active": self.weakly_active,
            "co_limiting": self.co_limiting,
            "theta_star": self.theta_star.tolist(),
            "multipliers": {l: _chop(v) for l, v in zip(self.labels, self.lam)},
            "equality_multipliers": [_chop(v) for v in self.mu],
            "stats": dict(self.stats),
        }


class _Assembly:
    """Rows of the mixed-binary program for one system, compiled set and big-M."""

    def __init__(self, system, cs, U):
        self.system, self.cs, self.U = system, cs, U
        nt, nr = system.n_theta, system.n_r
        m, p = len(system.inequalities), len(system.equalities)
        self.m = m
        sl, off = {}, 0
        for key, w in (("theta", nt), ("r", nr), ("lam", m), ("mu", p), ("s", m),
                       ("y", m), ("delta", 1), ("aux", cs.n_aux)):
            sl[key] = slice(off, off + w)
            off += w
        self.sl, n = sl, off
        blocks, rhs, senses = [], [], []

        def add(k, sense, b, **cols):
            R = np.zeros((k, n))
            for key, val in cols.items():
                R[:, sl[key]] = val
            blocks.append(R)
            rhs.append(np.broadcast_to(np.asarray(b, float), (k,)))
            senses.extend([sense] * k)

        I = np.eye(m)
        add(m, "=", system.g, theta=system.G_theta, r=system.G_r, s=I)
        add(p, "=", system.e, theta=system.E_theta, r=system.E_r)
        add(1, "=", 1.0, lam=np.ones((1, m)))
        add(nr, "=", 0.0, lam=system.G_r.T, mu=system.E_r.T)
        add(m, "<=", U, s=I, y=U * I)
        add(m, "<=", 0.0, lam=I, y=-I)
        add(cs.n_rows, "<=", cs.b, theta=cs.A_theta, delta=cs.a_delta[:, None], aux=cs.A_aux)
        self.A = np.vstack(blocks)
        self.b = np.concatenate(rhs)
        self.senses = senses
        lb = np.full(n, -np.inf)
        ub = np.full(n, np.inf)
        for key in ("lam", "s", "y", "delta"):
            lb[sl[key]] = 0.0
        ub[sl["y"]] = 1.0
        lb[sl["aux"]], ub[sl["aux"]] = cs.aux_lb, cs.aux_ub
        self.lb, self.ub = lb, ub
        self.n = n
        if cs.quad is None:
            self.mode = "lp"
        elif cs.delta_linear:
            self.mode = "bisection"
        else:
            self.mode = "qp"
            ub[sl["delta"]] = 0.0  # delta only enters through the quadratic row
        if cs.quad is not None:
            M, mean, self.quad_kind = cs.quad
            th = sl["theta"]
            self.Q = np.zeros((n, n))
            self.Q[th, th] = 2 * M
            self.c_quad = np.zeros(n)
            self.c_quad[th] = -2 * M @ mean
            self.q_const = float(mean @ M @ mean)
        self.c_lin = np.zeros(n)
        self.c_lin[sl["delta"]] = 1.0

    def _relax(self, lb, ub, quadratic):
        def relax(lo, hi):
            l, u = lb.copy(), ub.copy()
            l[self.sl["y"]], u[self.sl["y"]] = lo, hi
            if quadratic:
                out = solve_qp(QPProblem(self.Q, self.c_quad, self.A, self.b, self.senses, l, u))
                obj = out.objective + self.q_const if out.optimal else np.inf
            else:
                out = solve_lp(LPProblem(self.c_lin, self.A, self.b, self.senses, l, u))
                obj = out.objective
            if not out.optimal:
                return Relaxation(out.status, payload=out.ray)
            return Relaxation(OPTIMAL, obj, out.x[self.sl["y"]], out.x)
        return relax

    def _mip(self, config, upper, delta=None):
        lb, ub = self.lb, self.ub
        if delta is not None:
            lb, ub = lb.copy(), ub.copy()
            lb[self.sl["delta"]] = ub[self.sl["delta"]] = delta
        res = branch_and_bound(self._relax(lb, ub, self.mode != "lp"), self.m, config, upper=upper)
        if res.status == UNBOUNDED:
            raise Unbounded("flexibility program is unbounded; the set is not compact "
                            "or the model has a defect", ray=res.payload)
        return res

    def solve(self, config, upper=None):
        """Returns (F, solution vector, B&B nodes)."""
        if self.mode == "lp":
            res = self._mip(config, upper)
            return res.objective, res.payload, res.nodes
        if self.mode == "qp":
            res = self._mip(config, upper)
            obj = max(res.objective, 0.0)
            F = obj if self.quad_kind == "level" else math.sqrt(obj)
            return F, res.payload, res.nodes
        return self._bisect(config, upper)

    def _bisect(self, config, upper):
        nodes = 0

        def attempt(d):
            nonlocal nodes
            try:
                res = self._mip(config, upper, delta=d)
            except Infeasible:
                return None
            nodes += res.nodes
            target = d if self.quad_kind == "level" else d * d
            return res.payload if res.objective <= target * (1 + 1e-12) + 1e-14 else None

        best = attempt(0.0)
        if best is not None:
            return 0.0, best, nodes
        lo, hi = 0.0, 1.0
        while (best := attempt(hi)) is None:
            lo, hi = hi, 2 * hi
            if hi > 2.0 ** 60:
                raise Unbounded("no boundary point inside any scaled set")
        while hi - lo > 1e-11 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            got = attempt(mid)
            if got is None:
                lo = mid
            else:
                hi, best = mid, got
        return hi, best, nodes


def _big_m(system, cs):
    scale = max(np.abs(system.g).max(initial=0.0), np.abs(system.e).max(initial=0.0),
                np.abs(cs.b).max(initial=0.0))
    return BIG_M_SCALE * (1.0 + scale)


def _active(asm, v, labels):
    y = v[asm.sl["y"]] > 0.5
    lam = v[asm.sl["lam"]]
    strong = [l for l, yy, ll in zip(labels, y, lam) if yy and ll > ACTIVE_TOL]
    weak = [l for l, yy, ll in zip(labels, y, lam) if yy and ll <= ACTIVE_TOL]
    return strong, weak


def flexibility_index(system, spec, config=None, tol_feas=FEAS_TOL, sweep=True):
    """Largest scaling of ``spec`` for which the system stays feasible.

    Raises InfeasibleNominal when the set's nominal point is infeasible and
    Unbounded when no scaling of the set ever reaches an infeasible point.
    """
    config = config or BnBConfig()
    t0 = time.perf_counter()
    cs = compile_set(spec)
    if cs.n_theta != system.n_theta:
        from .errors import DimensionMismatch
        raise DimensionMismatch(f"set has dimension {cs.n_theta}, system has {system.n_theta}")
    theta_bar = nominal(spec)
    psi0 = psi(system, theta_bar)
    if not psi0 <= tol_feas:
        raise InfeasibleNominal(f"nominal point is infeasible (psi = {psi0:.6g})")
    if not system.inequalities:
        raise Unbounded("no inequality constraints remain")
    labels = system.labels
    U = config.big_m or _big_m(system, cs)
    for attempt in range(BIG_M_DOUBLINGS + 1):
        asm = _Assembly(system, cs, U)
        try:
            F, v, nodes = asm.solve(config)
        except Infeasible:
            raise Unbounded("no scaling of the set reaches the boundary of the feasible "
                            "region (the remaining constraints never bind)") from None
        if v[asm.sl["s"]].max(initial=0.0) <= 0.5 * U:
            break
        if attempt < BIG_M_DOUBLINGS:
            log.info("slack close to big-M %.3g; doubling", U)
            U *= 2
    else:
        log.warning("big-M audit failed after %d doublings; result may be cut off", BIG_M_DOUBLINGS)
    strong, weak = _active(asm, v, labels)
    co, sweep_solves = [], 0
    if sweep:
        hi = np.ones(asm.m, int)
        found = list(strong)
        while True:
            hi[[labels.index(l) for l in found]] = 0
            if not hi.any():
                break
            sweep_solves += 1
            try:
                F2, v2, n2 = asm.solve(config, upper=hi)
            except (Infeasible, Unbounded):
                break
            nodes += n2
            if not _close(F2, F, MERGE_TOL):
                break
            found, _ = _active(asm, v2, labels)
            found = [l for l in found if l not in strong and l not in co]
            if not found:
                break
            co += found
    nz = system.n_z
    r = v[asm.sl["r"]]
    return FlexSolution(
        F=float(F), theta_star=v[asm.sl["theta"]], z_star=r[:nz], x_star=r[nz:],
        lam=v[asm.sl["lam"]], mu=v[asm.sl["mu"]], slacks=v[asm.sl["s"]],
        y=np.round(v[asm.sl["y"]]).astype(int), labels=labels,
        active_labels=strong, weakly_active=weak, co_limiting=co, set_used=spec, big_m=float(U),
        stats={"nodes": int(nodes), "seconds": time.perf_counter() - t0,
               "relaxation": asm.mode, "big_m": float(U), "sweep_solves": sweep_solves},
        system=system)


def check_certificate(sol, system=None, tol=CERT_TOL):
    """Residuals of the optimality certificate carried by a solution."""
    system = system or sol.system
    lam, mu, s, y = sol.lam, sol.mu, sol.slacks, sol.y
    r = np.concatenate([sol.z_star, sol.x_star])
    res = {}
    res["sum_lambda"] = abs(lam.sum() - 1.0)
    stat = system.G_r.T @ lam + system.E_r.T @ mu
    res["stationarity"] = float(np.abs(stat).max(initial=0.0))
    res["complementarity"] = float(max(np.max(lam - y, initial=0.0),
                                       np.max(s - sol.big_m * (1 - y), initial=0.0),
                                       np.max(-s, initial=0.0), np.max(-lam, initial=0.0)))
    res["primal"] = float(np.abs(system.inequality_values(sol.theta_star, r) + s).max(initial=0.0))
    lev = level(sol.set_used, sol.theta_star, tol=1e-7)
    F = sol.F
    inside = lev <= F * (1 + 1e-6) + 1e-9
    outside = F == 0 or lev > F * (1 - 1e-6)
    res["boundary_level"] = float(lev)
    res["psi"] = float(psi(system, sol.theta_star))
    scale = 1.0 + np.abs(sol.theta_star).max(initial=0.0)
    res["passed"] = bool(res["sum_lambda"] <= 1e-8 and res["stationarity"] <= tol
                         and res["complementarity"] <= tol * scale and inside and outside
                         and abs(res["psi"]) <= tol * scale and res["primal"] <= tol * scale)
    return res


def verify_solution(sol, samples=10_000, seed=0, system=None, tol=CERT_TOL):
    """Boundary-sample feasibility check at ``F`` and just outside it."""
    system = system or sol.system
    report = {"samples": samples, "seed": seed, "delta": sol.F}
    if not math.isfinite(sol.F):
        report.update(violations=None, passed=False)
        return report
    vals = psi_batch(system, boundary_sample(sol.set_used, sol.F, samples, seed))
    report["violations"] = int(np.count_nonzero(vals > tol))
    report["max_psi"] = float(vals.max())
    outer = sol.F * (1 + 1e-3)
    out_vals = psi_batch(system, boundary_sample(sol.set_used, outer, samples, seed))
    report["outer_delta"] = outer
    report["outer_violations"] = int(np.count_nonzero(out_vals > tol))
    report["passed"] = report["violations"] == 0
    return report


@dataclass
class RankLevel:
    level: int
    constraint_labels: list
    F_value: float
    increase_pct: float = None

    def to_dict(self):
        return {"level": self.level, "constraints": self.constraint_labels,
                "F": self.F_value, "increase_pct": self.increase_pct}


class Ranking(list):
    """List of RankLevel with the reason the loop stopped."""

    def __init__(self, levels=(), termination=None, solutions=()):
        super().__init__(levels)
        self.termination = termination
        self.solutions = list(solutions)


def rank_constraints(system, spec, max_levels=None, config=None, tol_feas=FEAS_TOL,
                     merge_tol=MERGE_TOL):
    """Peel off limiting constraints level by level."""
    vac = vacuous_labels(system)
    current = apply_filter(system, ConstraintFilter(vac)) if vac else system
    levels, sols = [], []
    termination = "exhausted"
    while current.inequalities:
        try:
            sol = flexibility_index(current, spec, config, tol_feas)
        except Unbounded:
            termination = "unbounded"
            break
        sols.append(sol)
        labels = sol.limiting_labels
        if levels and _close(sol.F, levels[-1].F_value, merge_tol):
            levels[-1].constraint_labels += [l for l in labels
                                             if l not in levels[-1].constraint_labels]
        elif max_levels is not None and len(levels) >= max_levels:
            termination = "max_levels"
            break
        else:
            levels.append(RankLevel(len(levels) + 1, list(labels), sol.F))
        current = apply_filter(current, ConstraintFilter(labels))
    F1 = levels[0].F_value if levels else None
    for lv in levels[1:]:
        if F1 and math.isfinite(F1):
            lv.increase_pct = 100.0 * (lv.F_value - F1) / F1
    return Ranking(levels, termination, sols)


def _column(spec):
    if isinstance(spec, Ellipsoid):
        return "F_ellip"
    if isinstance(spec, Hyperbox):
        return "F_box"
    return "F_" + describe(spec).split("(")[0].replace(" ", "_")


def compare_designs(designs, sets, dist=None, samples=100_000, seed=0, config=None,
                    tol_feas=FEAS_TOL):
    """One row per named design with the index for every set, α* and optionally SF."""
    rows = []
    for name, system in designs:
        row = {"design": name, "status": "ok", "errors": []}
        for spec in sets:
            col = _column(spec)
            try:
                sol = flexibility_index(system, spec, config, tol_feas, sweep=False)
                row[col] = sol.F
                row[col + "_active"] = sol.active_labels
                if isinstance(spec, Ellipsoid):
                    row["alpha_star_pct"] = 100.0 * confidence_level(sol.F, system.n_theta)
            except FlexError as exc:
                row[col] = None
                row["errors"].append(f"{col}: {exc}")
        if dist is not None:
            try:
                est = stochastic_flexibility(system, dist, samples, seed)
                row["SF_pct"] = 100.0 * est.estimate
                row["SF_half_width_pct"] = 100.0 * est.half_width
            except FlexError as exc:
                row["SF_pct"] = None
                row["errors"].append(f"SF: {exc}")
        if row["errors"]:
            row["status"] = "partial"
        rows.append(row)
    return rows
