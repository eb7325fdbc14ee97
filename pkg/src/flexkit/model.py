"""Linear constrained systems with uncertain parameters.

A system couples uncertain parameters ``theta``, recourse variables ``z`` and
state variables ``x`` through affine constraints written in the normal form
``a_theta.theta + a_z.z + a_x.x <= rhs`` (or ``= rhs`` for equalities).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import (DimensionMismatch, EqualityExclusion, InputError,
                     SingularElimination, UnknownLabel)

PIVOT_THRESHOLD = 1e-10


@dataclass(frozen=True, eq=False)
class AffineConstraint:
    label: str
    a_theta: np.ndarray
    a_z: np.ndarray
    a_x: np.ndarray
    rhs: float

    def __post_init__(self):
        for name in ("a_theta", "a_z", "a_x"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "rhs", float(self.rhs))

    @property
    def is_zero(self):
        return not (np.any(self.a_theta) or np.any(self.a_z) or np.any(self.a_x))

    @property
    def is_vacuous(self):
        return self.is_zero and self.rhs >= 0

    @property
    def is_infeasible_by_construction(self):
        return self.is_zero and self.rhs < 0

    def value(self, theta, z=(), x=()):
        """Residual ``a.v - rhs``; nonpositive means satisfied."""
        return (self.a_theta @ np.asarray(theta, float) + self.a_z @ np.asarray(z, float)
                + self.a_x @ np.asarray(x, float) - self.rhs)


@dataclass(frozen=True)
class ConstraintFilter:
    excluded_labels: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "excluded_labels", frozenset(self.excluded_labels))


@dataclass(frozen=True, eq=False)
class LinearSystem:
    theta_names: tuple
    recourse_names: tuple = ()
    state_names: tuple = ()
    inequalities: tuple = ()
    equalities: tuple = ()

    def __post_init__(self):
        for name in ("theta_names", "recourse_names", "state_names",
                     "inequalities", "equalities"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def n_theta(self):
        return len(self.theta_names)

    @property
    def n_z(self):
        return len(self.recourse_names)

    @property
    def n_x(self):
        return len(self.state_names)

    @property
    def n_r(self):
        """Number of decision variables (recourse plus states)."""
        return self.n_z + self.n_x

    @property
    def labels(self):
        return [c.label for c in self.inequalities]

    @property
    def equality_labels(self):
        return [c.label for c in self.equalities]

    def _stack(self, rows, attr, width):
        if not rows:
            return np.zeros((0, width))
        return np.array([getattr(c, attr) for c in rows], dtype=float).reshape(len(rows), width)

    @cached_property
    def G_theta(self):
        return self._stack(self.inequalities, "a_theta", self.n_theta)

    @cached_property
    def G_r(self):
        """Inequality coefficients on (z, x)."""
        return np.hstack([self._stack(self.inequalities, "a_z", self.n_z),
                          self._stack(self.inequalities, "a_x", self.n_x)])

    @cached_property
    def g(self):
        return np.array([c.rhs for c in self.inequalities], dtype=float)

    @cached_property
    def E_theta(self):
        return self._stack(self.equalities, "a_theta", self.n_theta)

    @cached_property
    def E_r(self):
        return np.hstack([self._stack(self.equalities, "a_z", self.n_z),
                          self._stack(self.equalities, "a_x", self.n_x)])

    @cached_property
    def e(self):
        return np.array([c.rhs for c in self.equalities], dtype=float)

    def inequality_values(self, theta, r=None):
        """Vector of ``f_j = a_j.v - rhs_j`` at (theta, r)."""
        out = self.G_theta @ np.asarray(theta, float) - self.g
        if self.n_r:
            out = out + self.G_r @ np.asarray(r, float)
        return out


def validate(system):
    """Return a list of human-readable diagnostics; empty when the system is well formed."""
    diags = []
    if system.n_theta < 1:
        diags.append("theta: at least one uncertain parameter is required")
    if not system.inequalities:
        diags.append("inequalities: at least one inequality is required")
    names = list(system.theta_names) + list(system.recourse_names) + list(system.state_names)
    seen_names = set()
    for n in names:
        if n in seen_names:
            diags.append(f"variable '{n}': duplicate name")
        seen_names.add(n)
    seen = set()
    for kind, rows in (("inequality", system.inequalities), ("equality", system.equalities)):
        for c in rows:
            if not c.label:
                diags.append(f"{kind}: empty label")
            elif c.label in seen:
                diags.append(f"{kind} '{c.label}': duplicate label")
            seen.add(c.label)
            for attr, n in (("a_theta", system.n_theta), ("a_z", system.n_z),
                            ("a_x", system.n_x)):
                vec = getattr(c, attr)
                if vec.shape != (n,):
                    diags.append(f"{kind} '{c.label}': {attr} has length {vec.size}, expected {n}")
                elif not np.all(np.isfinite(vec)):
                    diags.append(f"{kind} '{c.label}': {attr} has non-finite entries")
            if not np.isfinite(c.rhs):
                diags.append(f"{kind} '{c.label}': rhs is not finite")
            if kind == "inequality" and c.is_infeasible_by_construction:
                diags.append(f"inequality '{c.label}': infeasible by construction (0 <= {c.rhs})")
    return diags


def vacuous_labels(system):
    return [c.label for c in system.inequalities if c.is_vacuous]


def apply_filter(system, flt):
    labels = set(flt.excluded_labels)
    ineq = set(system.labels)
    eq = set(system.equality_labels)
    for lab in sorted(labels):
        if lab in eq:
            raise EqualityExclusion(f"'{lab}' is an equality and cannot be excluded")
        if lab not in ineq:
            raise UnknownLabel(f"unknown constraint label '{lab}'")
    return replace(system, inequalities=tuple(c for c in system.inequalities
                                              if c.label not in labels))


def as_states(system, names):
    """Reclassify the named recourse variables as state variables."""
    names = list(names)
    missing = [n for n in names if n not in system.recourse_names]
    if missing:
        raise UnknownLabel(f"not recourse variables: {missing}")
    keep = [i for i, n in enumerate(system.recourse_names) if n not in names]
    move = [system.recourse_names.index(n) for n in names]

    def convert(c):
        return AffineConstraint(c.label, c.a_theta, c.a_z[keep],
                                np.concatenate([c.a_x, c.a_z[move]]), c.rhs)

    return LinearSystem(system.theta_names,
                        tuple(system.recourse_names[i] for i in keep),
                        tuple(system.state_names) + tuple(names),
                        tuple(convert(c) for c in system.inequalities),
                        tuple(convert(c) for c in system.equalities))


def eliminate_states(system):
    """Solve the equalities for the states and substitute them into the inequalities.

    The equalities must determine ``x`` uniquely given (theta, z); every
    equality is consumed by the substitution.
    """
    if system.n_x == 0:
        return system
    Ex = np.array([c.a_x for c in system.equalities], dtype=float).reshape(-1, system.n_x)
    rank = np.linalg.matrix_rank(Ex) if Ex.size else 0
    if rank < system.n_x:
        raise SingularElimination("state block of the equalities is rank deficient")
    if Ex.shape[0] != system.n_x:
        raise DimensionMismatch(
            f"{Ex.shape[0]} equalities cannot be solved for {system.n_x} states")
    lu, piv = scipy.linalg.lu_factor(Ex)
    if np.min(np.abs(np.diag(lu))) < PIVOT_THRESHOLD:
        raise SingularElimination("LU pivot below threshold in the state block")
    Et = np.array([c.a_theta for c in system.equalities]).reshape(-1, system.n_theta)
    Ez = np.array([c.a_z for c in system.equalities]).reshape(len(system.equalities), system.n_z)
    e = np.array([c.rhs for c in system.equalities])
    # x = Ex^-1 (e - Et theta - Ez z)
    x_const = scipy.linalg.lu_solve((lu, piv), e)
    x_theta = scipy.linalg.lu_solve((lu, piv), Et)
    x_z = scipy.linalg.lu_solve((lu, piv), Ez) if system.n_z else np.zeros((system.n_x, 0))
    rows = []
    for c in system.inequalities:
        rows.append(AffineConstraint(
            c.label,
            c.a_theta - c.a_x @ x_theta,
            c.a_z - c.a_x @ x_z,
            np.zeros(0),
            c.rhs - c.a_x @ x_const))
    return LinearSystem(system.theta_names, system.recourse_names, (), tuple(rows), ())


def normalize_rows(system):
    """Scale every inequality to a unit-norm coefficient row."""
    rows = []
    for c in system.inequalities:
        nrm = np.linalg.norm(np.concatenate([c.a_theta, c.a_z, c.a_x]))
        if nrm == 0:
            rows.append(c)
            continue
        rows.append(AffineConstraint(c.label, c.a_theta / nrm, c.a_z / nrm,
                                     c.a_x / nrm, c.rhs / nrm))
    return replace(system, inequalities=tuple(rows))


# --- JSON ------------------------------------------------------------------

def _constraint_from_dict(d, system_dims):
    n_t, n_z, n_x = system_dims
    try:
        label = d["label"]
        rhs = d.get("rhs", 0.0)
    except (KeyError, AttributeError) as exc:
        raise InputError(f"constraint entry missing field: {exc}") from None
    return AffineConstraint(
        str(label),
        np.asarray(d.get("theta", np.zeros(n_t)), float),
        np.asarray(d.get("recourse", np.zeros(n_z)), float),
        np.asarray(d.get("state", np.zeros(n_x)), float),
        float(rhs))


def system_from_dict(data):
    try:
        theta = list(data["theta"])
    except (KeyError, TypeError):
        raise InputError("system JSON requires a 'theta' array") from None
    rec = list(data.get("recourse", []))
    state = list(data.get("state", []))
    dims = (len(theta), len(rec), len(state))
    ineq = [_constraint_from_dict(d, dims) for d in data.get("inequalities", [])]
    eq = [_constraint_from_dict(d, dims) for d in data.get("equalities", [])]
    return LinearSystem(tuple(theta), tuple(rec), tuple(state), tuple(ineq), tuple(eq))


def system_to_dict(system):
    def row(c):
        return {"label": c.label, "theta": c.a_theta.tolist(), "recourse": c.a_z.tolist(),
                "state": c.a_x.tolist(), "rhs": c.rhs}

    return {"theta": list(system.theta_names), "recourse": list(system.recourse_names),
            "state": list(system.state_names),
            "inequalities": [row(c) for c in system.inequalities],
            "equalities": [row(c) for c in system.equalities]}


def load_system(path):
    with open(Path(path), encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
    return system_from_dict(data)
