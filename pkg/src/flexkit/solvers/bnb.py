"""Depth-first branch-and-bound over binary variables.

The caller supplies a relaxation callback taking per-binary lower/upper bounds
(each 0 or 1) and returning a :class:`Relaxation`. Node order is deterministic:
branch on the most fractional binary (lowest index on ties), explore the
``y = 1`` child first.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..errors import Infeasible, NodeLimit
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED

log = logging.getLogger(__name__)

INT_TOL = 1e-6


@dataclass
class BnBConfig:
    rel_gap: float = 1e-9
    abs_tol: float = 1e-9
    node_limit: int = 10**6
    branching: str = "most_fractional"
    big_m: float | None = None

    def __post_init__(self):
        if self.rel_gap <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.big_m is not None and self.big_m <= 0:
            raise ValueError("big-M must be positive")
        if self.branching != "most_fractional":
            raise ValueError(f"unknown branching rule {self.branching!r}")


@dataclass
class Relaxation:
    status: str
    objective: float = np.inf
    binaries: np.ndarray = None
    payload: Any = None


@dataclass
class BnBResult:
    status: str
    objective: float
    binaries: np.ndarray
    payload: Any
    nodes: int
    gap: float
    trace: list = field(default_factory=list)


def branch_and_bound(relax: Callable, n_binaries: int, config: BnBConfig = None,
                     lower=None, upper=None) -> BnBResult:
    config = config or BnBConfig()
    lo0 = np.zeros(n_binaries, int) if lower is None else np.asarray(lower, int)
    hi0 = np.ones(n_binaries, int) if upper is None else np.asarray(upper, int)
    best_obj, best = np.inf, None
    stack = [(lo0, hi0, -np.inf)]
    nodes = 0
    trace = []

    def prunable(bound):
        if not np.isfinite(best_obj):
            return False
        return bound >= best_obj - max(config.abs_tol, config.rel_gap * abs(best_obj))

    while stack:
        if nodes >= config.node_limit:
            gap = best_obj - min(b for _, _, b in stack)
            raise NodeLimit(f"node limit {config.node_limit} reached",
                            incumbent=best, gap=gap)
        lo, hi, _ = stack.pop()
        nodes += 1
        r = relax(lo, hi)
        if r.status == INFEASIBLE:
            continue
        if r.status == UNBOUNDED:
            return BnBResult(UNBOUNDED, -np.inf, None, r.payload, nodes, np.inf, trace)
        if r.status != OPTIMAL:
            raise Infeasible(f"relaxation returned {r.status}")
        if prunable(r.objective):
            continue
        yb = np.asarray(r.binaries, float)
        frac = np.abs(yb - np.round(yb))
        free = hi > lo
        frac = np.where(free, frac, 0.0)
        if frac.max(initial=0.0) <= INT_TOL:
            if r.objective < best_obj:
                best_obj = r.objective
                best = Relaxation(OPTIMAL, r.objective, np.round(yb).astype(int), r.payload)
                trace.append(best_obj)
            continue
        j = int(np.argmax(frac))  # first index among ties
        lo1, hi1 = lo.copy(), hi.copy()
        hi1[j] = 0
        lo2, hi2 = lo.copy(), hi.copy()
        lo2[j] = 1
        stack.append((lo1, hi1, r.objective))
        stack.append((lo2, hi2, r.objective))
    if best is None:
        raise Infeasible("mixed-binary problem is infeasible")
    log.debug("branch-and-bound finished: %d nodes, objective %.10g", nodes, best_obj)
    return BnBResult(OPTIMAL, best_obj, best.binaries, best.payload, nodes, 0.0, trace)
