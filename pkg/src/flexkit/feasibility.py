"""Feasibility function and Monte Carlo stochastic flexibility."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (DimensionMismatch, ImpracticalTruncation, InputError,
                     NumericalBreakdown, SingularElimination)
from .model import as_states, eliminate_states
from .solvers.lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LPProblem, solve_lp

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
PILOT_DRAWS = 10_000
MIN_ACCEPTANCE = 1e-3


def _check_theta(system, theta):
    theta = np.asarray(theta, float).reshape(-1)
    if theta.size != system.n_theta:
        raise DimensionMismatch(f"theta has {theta.size} entries, system expects {system.n_theta}")
    return theta


def psi_problem(system, theta):
    """LP ``min u`` s.t. ``f_j(r, theta) <= u``, ``h_i(r, theta) = 0`` over ``(r, u)``."""
    m, nr = system.G_r.shape
    p = system.E_r.shape[0]
    A = np.vstack([np.hstack([system.G_r, -np.ones((m, 1))]),
                   np.hstack([system.E_r, np.zeros((p, 1))])])
    b = np.concatenate([system.g - system.G_theta @ theta, system.e - system.E_theta @ theta])
    c = np.zeros(nr + 1)
    c[-1] = 1.0
    return LPProblem(c, A, b, ["<="] * m + ["="] * p, lb=np.full(nr + 1, -np.inf))


def psi(system, theta, return_solution=False):
    """Worst constraint value after the best recourse: ``<= 0`` feasible, ``> 0`` infeasible.

    Returns ``inf`` when the equalities are inconsistent at ``theta`` and
    ``-inf`` when the recourse can drive every constraint down without bound.
    """
    theta = _check_theta(system, theta)
    if system.n_r == 0:
        if system.equalities and np.any(np.abs(system.E_theta @ theta - system.e) > 1e-9):
            val = np.inf
        else:
            val = float(np.max(system.G_theta @ theta - system.g, initial=-np.inf))
        return (val, np.zeros(0)) if return_solution else val
    out = solve_lp(psi_problem(system, theta))
    if out.status == INFEASIBLE:
        val, r = np.inf, None
    elif out.status == UNBOUNDED:
        log.warning("feasibility LP unbounded at theta=%s: recourse ray %s lowers every "
                    "constraint; bound the recourse variables", theta, out.ray)
        val, r = -np.inf, None
    elif out.status == OPTIMAL:
        val, r = float(out.x[-1]), out.x[:-1]
    else:
        raise NumericalBreakdown(f"feasibility LP ended with {out.status}")
    return (val, r) if return_solution else val


def _determined(system):
    """Recourse-free equivalent when the equalities pin down every recourse variable."""
    if system.n_r == 0 or len(system.equalities) != system.n_r:
        return system
    original = system
    try:
        if system.n_z:
            system = as_states(system, system.recourse_names)
        return eliminate_states(system)
    except (SingularElimination, DimensionMismatch):
        return original


def psi_batch(system, thetas):
    """ψ at every row of ``thetas``; vectorized when the system has no recourse."""
    T = np.atleast_2d(np.asarray(thetas, float))
    if T.shape[1] != system.n_theta:
        raise DimensionMismatch("theta dimension does not match the system")
    system = _determined(system)
    if system.n_r == 0:
        vals = (T @ system.G_theta.T - system.g).max(axis=1)
        if system.equalities:
            bad = np.any(np.abs(T @ system.E_theta.T - system.e) > 1e-9, axis=1)
            vals = np.where(bad, np.inf, vals)
        return vals
    return np.array([psi(system, t) for t in T])


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    mean: np.ndarray
    covariance: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, float).reshape(-1))
        object.__setattr__(self, "covariance", np.array(self.covariance, float, ndmin=2))
        n = self.mean.size
        if self.covariance.shape != (n, n):
            raise DimensionMismatch("covariance shape does not match mean")
        try:
            np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError:
            raise InputError("covariance must be positive definite") from None

    def draw(self, rng, count):
        L = np.linalg.cholesky(self.covariance)
        return self.mean + rng.standard_normal((count, self.mean.size)) @ L.T


@dataclass
class SFEstimate:
    estimate: float
    samples: int
    half_width: float
    seed: int
    elapsed_seconds: float = 0.0
    feasible: int = 0

    def to_dict(self):
        return {"estimate": self.estimate, "half_width": self.half_width,
                "samples": self.samples, "seed": self.seed,
                "elapsed_seconds": self.elapsed_seconds}


def half_width(p, n):
    return 1.96 * math.sqrt(p * (1 - p) / n)


def sample_parameters(dist, samples, seed):
    """Draw ``samples`` parameter vectors; truncated specs use rejection on ``theta >= 0``."""
    rng = np.random.default_rng(seed)
    if not dist.truncated:
        return dist.draw(rng, samples)
    pilot = dist.draw(np.random.default_rng([seed, 1]), PILOT_DRAWS)
    acc = np.mean(np.all(pilot >= 0, axis=1))
    if acc < MIN_ACCEPTANCE:
        raise ImpracticalTruncation(
            f"pilot acceptance {acc:.2e} below {MIN_ACCEPTANCE:g}; rejection sampling impractical")
    out = []
    have = 0
    batch = max(1000, int(samples / max(acc, 1e-3) * 1.1))
    while have < samples:
        d = dist.draw(rng, batch)
        d = d[np.all(d >= 0, axis=1)]
        out.append(d)
        have += d.shape[0]
    return np.vstack(out)[:samples]


def stochastic_flexibility(system, dist, samples=100_000, seed=0, tol=FEAS_TOL, shards=1):
    """Fraction of Gaussian draws at which the system is feasible.

    With ``shards > 1`` the draws are split into blocks sampled with seeds
    ``seed + k``; the feasible count is summed exactly, so the estimate does
    not depend on the order in which blocks are evaluated.
    """
    if samples < 100:
        raise InputError("at least 100 samples are required")
    if shards < 1:
        raise InputError("shards must be positive")
    if dist.mean.size != system.n_theta:
        raise DimensionMismatch("distribution dimension does not match the system")
    t0 = time.perf_counter()
    sizes = np.full(shards, samples // shards)
    sizes[:samples % shards] += 1
    feasible = 0
    for k, size in enumerate(sizes):
        if size:
            thetas = sample_parameters(dist, int(size), seed + k)
            feasible += int(np.count_nonzero(psi_batch(system, thetas) <= tol))
    p = feasible / samples
    return SFEstimate(p, samples, half_width(p, samples), seed,
                      time.perf_counter() - t0, feasible)


def dist_from_dict(data):
    try:
        return GaussianSpec(data["mean"], data["covariance"], bool(data.get("truncated", False)))
    except KeyError as exc:
        raise InputError(f"distribution JSON missing {exc}") from None


def load_dist(path):
    with open(Path(path), encoding="utf-8") as fh:
        try:
            return dist_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
