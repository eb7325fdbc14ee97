"""Dense two-phase primal simplex with dual values.

Problems are stated as ``min c.v`` subject to ``A v (<=|>=|=) b`` and
``lb <= v <= ub``. Dual values are reported as shadow prices ``d obj / d b``
for each row, the convention used by most LP codes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalBreakdown

log = logging.getLogger(__name__)

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
ITERATION_LIMIT = "IterationLimit"

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
FEAS_TOL = 1e-8


@dataclass
class LPProblem:
    c: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    senses: list = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        if self.A is None:
            self.A = np.zeros((0, n))
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        m = self.A.shape[0]
        self.b = np.zeros(m) if self.b is None else np.asarray(self.b, float).reshape(-1)
        self.senses = ["<="] * m if self.senses is None else list(self.senses)
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, float).reshape(-1).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, float).reshape(-1).copy()
        if self.b.size != m or len(self.senses) != m or self.lb.size != n or self.ub.size != n:
            raise ValueError("inconsistent LP dimensions")
        bad = set(self.senses) - {"<=", ">=", "="}
        if bad:
            raise ValueError(f"unknown row senses {bad}")

    @property
    def n(self):
        return self.c.size

    @property
    def m(self):
        return self.A.shape[0]


@dataclass
class SolveOutcome:
    status: str
    x: np.ndarray = None
    duals: np.ndarray = None
    objective: float = np.nan
    reduced_costs: np.ndarray = None
    iterations: int = 0
    ray: np.ndarray = None
    info: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == OPTIMAL


class _StandardForm:
    """``min c.p`` s.t. ``A p = b``, ``p >= 0`` with a map back to ``v``."""

    def __init__(self, p: LPProblem):
        n = p.n
        cols = []       # (original var, sign)
        offset = np.zeros(n)
        extra_rows = []  # (std column, bound)
        for j in range(n):
            lo, hi = p.lb[j], p.ub[j]
            if lo > hi:
                self.trivially_infeasible = True
            if np.isfinite(lo):
                offset[j] = lo
                cols.append((j, 1.0))
                if np.isfinite(hi):
                    extra_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                offset[j] = hi
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        self.trivially_infeasible = bool(np.any(p.lb > p.ub))
        ns = len(cols)
        T = np.zeros((n, ns))
        for k, (j, sgn) in enumerate(cols):
            T[j, k] = sgn
        self.T, self.offset = T, offset
        A = p.A @ T
        b = p.b - p.A @ offset
        senses = list(p.senses)
        if extra_rows:
            B = np.zeros((len(extra_rows), ns))
            for r, (k, bound) in enumerate(extra_rows):
                B[r, k] = 1.0
            A = np.vstack([A, B])
            b = np.concatenate([b, [bd for _, bd in extra_rows]])
            senses += ["<="] * len(extra_rows)
        m = A.shape[0]
        n_slack = sum(s != "=" for s in senses)
        S = np.zeros((m, n_slack))
        k = 0
        for i, s in enumerate(senses):
            if s == "<=":
                S[i, k] = 1.0
                k += 1
            elif s == ">=":
                S[i, k] = -1.0
                k += 1
        A = np.hstack([A, S])
        sign = np.where(b < 0, -1.0, 1.0)
        self.A = A * sign[:, None]
        self.b = b * sign
        self.row_sign = sign
        self.c = np.concatenate([T.T @ p.c, np.zeros(n_slack)])
        self.const = float(p.c @ offset)
        self.n_struct = ns
        self.m_orig = p.m

    def to_original(self, pstd):
        return self.offset + self.T @ pstd[: self.n_struct]


class _Tableau:
    def __init__(self, A, b, basis, max_iter):
        self.m, self.n = A.shape
        self.D = np.hstack([A, b[:, None]]).astype(float)
        self.basis = list(basis)
        self.max_iter = max_iter
        self.iterations = 0

    def pivot(self, r, k):
        D = self.D
        D[r] /= D[r, k]
        col = D[:, k].copy()
        col[r] = 0.0
        nz = np.nonzero(np.abs(col) > 0)[0]
        if nz.size:
            D[nz] -= np.outer(col[nz], D[r])
        self.basis[r] = k

    def run(self, cost, allowed):
        """Minimize ``cost.p`` over the current basis; returns status and ray column."""
        m = self.m
        degenerate_run = 0
        bland = False
        limit = 3 * (m + self.n)
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT, None
            cb = cost[self.basis]
            red = cost - cb @ self.D[:, :-1]
            red[self.basis] = 0.0
            cand = np.nonzero((red < -COST_TOL) & allowed)[0]
            if cand.size == 0:
                return OPTIMAL, None
            k = cand[0] if bland else cand[np.argmin(red[cand])]
            colk = self.D[:, k]
            rows = np.nonzero(colk > PIVOT_TOL)[0]
            if rows.size == 0:
                return UNBOUNDED, k
            ratios = self.D[rows, -1] / colk[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            if bland:
                r = min(ties, key=lambda i: self.basis[i])
            else:
                # largest pivot among ties for stability
                r = ties[np.argmax(colk[ties])]
            if best <= 1e-12:
                degenerate_run += 1
                if degenerate_run > limit and not bland:
                    log.debug("switching to Bland's rule after %d degenerate pivots", degenerate_run)
                    bland = True
            else:
                degenerate_run = 0
            self.pivot(r, k)
            self.iterations += 1


def solve_lp(p: LPProblem, max_iter=None) -> SolveOutcome:
    """Solve an LP with the two-phase simplex method."""
    sf = _StandardForm(p)
    if sf.trivially_infeasible:
        return SolveOutcome(INFEASIBLE)
    A, b = sf.A, sf.b
    m, n = A.shape
    max_iter = max_iter or 50 * (m + n + 10)
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)) or not np.all(np.isfinite(sf.c)):
        raise ValueError("LP data must be finite")

    # initial basis: slack columns that form an identity column, else artificials
    basis = [None] * m
    for k in range(sf.n_struct, n):
        i = int(np.flatnonzero(A[:, k])[0])
        if A[i, k] == 1.0 and basis[i] is None:
            basis[i] = k
    art_rows = [i for i in range(m) if basis[i] is None]
    n_art = len(art_rows)
    Aa = np.hstack([A, np.zeros((m, n_art))])
    for t, i in enumerate(art_rows):
        Aa[i, n + t] = 1.0
        basis[i] = n + t
    tab = _Tableau(Aa, b, basis, max_iter)
    art_cols = np.arange(n, n + n_art)

    if n_art:
        cost1 = np.zeros(n + n_art)
        cost1[art_cols] = 1.0
        status, _ = tab.run(cost1, np.ones(n + n_art, bool))
        if status == ITERATION_LIMIT:
            raise NumericalBreakdown("phase 1 simplex did not terminate")
        infeas = sum(tab.D[i, -1] for i, k in enumerate(tab.basis) if k >= n)
        scale = 1.0 + np.abs(b).max(initial=0.0)
        if infeas > FEAS_TOL * scale:
            return SolveOutcome(INFEASIBLE, iterations=tab.iterations)
        # drive remaining artificials out of the basis; drop redundant rows
        drop = []
        for r in range(m):
            if tab.basis[r] >= n:
                row = tab.D[r, :n]
                cand = np.nonzero(np.abs(row) > 1e-7)[0]
                if cand.size:
                    tab.pivot(r, cand[np.argmax(np.abs(row[cand]))])
                else:
                    drop.append(r)
        keep = [r for r in range(m) if r not in drop]
        tab.D = np.hstack([tab.D[keep, :n], tab.D[keep, -1:]])
        tab.basis = [tab.basis[r] for r in keep]
        tab.m, tab.n = tab.D.shape[0], n
        active_rows = keep
    else:
        active_rows = list(range(m))

    status, ray_col = tab.run(sf.c, np.ones(n, bool))
    if status == ITERATION_LIMIT:
        return SolveOutcome(ITERATION_LIMIT, iterations=tab.iterations)
    if status == UNBOUNDED:
        d = np.zeros(n)
        d[ray_col] = 1.0
        for r, k in enumerate(tab.basis):
            d[k] = -tab.D[r, ray_col]
        ray = sf.T @ d[: sf.n_struct]
        return SolveOutcome(UNBOUNDED, iterations=tab.iterations, ray=ray)

    # recompute the basic solution and duals from the original data
    Bidx = tab.basis
    Ar = A[active_rows]
    B = Ar[:, Bidx]
    try:
        xb = np.linalg.solve(B, b[active_rows])
        y_act = np.linalg.solve(B.T, sf.c[Bidx])
    except np.linalg.LinAlgError:
        raise NumericalBreakdown("singular final basis") from None
    pstd = np.zeros(n)
    pstd[Bidx] = np.maximum(xb, 0.0)
    y = np.zeros(m)
    y[active_rows] = y_act
    x = sf.to_original(pstd)
    duals = (y * sf.row_sign)[: sf.m_orig]
    reduced = p.c - p.A.T @ duals
    obj = float(p.c @ x)
    return SolveOutcome(OPTIMAL, x=x, duals=duals, objective=obj, reduced_costs=reduced,
                        iterations=tab.iterations)


def dual_objective(p: LPProblem, out: SolveOutcome):
    """Dual objective ``b.y + sum(bound * reduced cost)`` for an optimal outcome."""
    val = float(p.b @ out.duals)
    d = out.reduced_costs
    for j in range(p.n):
        if d[j] > 0 and np.isfinite(p.lb[j]):
            val += d[j] * p.lb[j]
        elif d[j] < 0 and np.isfinite(p.ub[j]):
            val += d[j] * p.ub[j]
    return val
