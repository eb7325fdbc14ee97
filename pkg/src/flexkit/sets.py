"""Scalable uncertainty sets ``T(delta)`` and their intersections.

Every set is centred at a nominal point and grows with ``delta``. The
ellipsoid uses ``delta`` as a squared Mahalanobis level; the l2 ball uses it
as a radius.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InputError, NonCompactComposite
from .special import confidence_level  # noqa: F401  (re-exported)


def _vec(v):
    arr = np.asarray(v, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    mean: np.ndarray
    covariance: np.ndarray
    kind = "ellipsoid"

    def __post_init__(self):
        object.__setattr__(self, "mean", _vec(self.mean))
        V = np.array(self.covariance, dtype=float, ndmin=2)
        V.setflags(write=False)
        object.__setattr__(self, "covariance", V)

    @property
    def precision(self):
        return np.linalg.inv(self.covariance)

    @property
    def cholesky(self):
        return np.linalg.cholesky(self.covariance)


@dataclass(frozen=True, eq=False)
class Hyperbox:
    mean: np.ndarray
    dev_minus: np.ndarray
    dev_plus: np.ndarray
    kind = "hyperbox"

    def __post_init__(self):
        for name in ("mean", "dev_minus", "dev_plus"):
            object.__setattr__(self, name, _vec(getattr(self, name)))


@dataclass(frozen=True, eq=False)
class PNorm:
    mean: np.ndarray
    p: float
    kind = "pnorm"

    def __post_init__(self):
        object.__setattr__(self, "mean", _vec(self.mean))
        p = self.p
        if isinstance(p, str):
            p = np.inf if p.lower() in ("inf", "infinity") else float(p)
        object.__setattr__(self, "p", float(p))


@dataclass(frozen=True, eq=False)
class CVaRNorm:
    mean: np.ndarray
    alpha: float
    kind = "cvar"

    def __post_init__(self):
        object.__setattr__(self, "mean", _vec(self.mean))
        object.__setattr__(self, "alpha", float(self.alpha))


@dataclass(frozen=True, eq=False)
class Halfspaces:
    """Truncation ``A theta <= b`` that does not scale with delta."""
    A: np.ndarray
    b: np.ndarray
    kind = "halfspaces"

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", _vec(self.b))


@dataclass(frozen=True, eq=False)
class Intersection:
    members: tuple
    kind = "intersection"

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))


NORM_TYPES = (Ellipsoid, Hyperbox, PNorm, CVaRNorm)


def nonnegative(n):
    return Halfspaces(-np.eye(n), np.zeros(n))


def members(spec):
    return spec.members if isinstance(spec, Intersection) else (spec,)


def nominal(spec):
    """The common nominal point of a set."""
    for m in members(spec):
        if isinstance(m, NORM_TYPES):
            return np.array(m.mean)
    raise NonCompactComposite("set has no norm-type member and therefore no nominal point")


def dimension(spec):
    for m in members(spec):
        return m.A.shape[1] if isinstance(m, Halfspaces) else m.mean.size
    raise InputError("empty intersection")


def check_set(spec):
    """Raise on an invalid set; returns the dimension."""
    mems = members(spec)
    if not mems:
        raise InputError("empty intersection")
    if any(isinstance(m, Intersection) for m in mems):
        raise InputError("nested intersections are not supported; flatten them")
    norms = [m for m in mems if isinstance(m, NORM_TYPES)]
    if not norms:
        raise NonCompactComposite("halfspaces alone do not form a compact set")
    n = norms[0].mean.size
    for m in mems:
        if isinstance(m, Halfspaces):
            if m.A.shape[1] != n or m.A.shape[0] != m.b.size:
                raise DimensionMismatch("halfspace dimensions do not match")
            continue
        if m.mean.size != n:
            raise DimensionMismatch("set members differ in dimension")
        if not np.allclose(m.mean, norms[0].mean, rtol=0, atol=0):
            raise InputError("intersection members must share one nominal point")
        if isinstance(m, Ellipsoid):
            V = m.covariance
            if V.shape != (n, n):
                raise DimensionMismatch("covariance shape does not match the mean")
            if not np.allclose(V, V.T):
                raise InputError("covariance must be symmetric")
            try:
                np.linalg.cholesky(V)
            except np.linalg.LinAlgError:
                raise InputError("covariance must be positive definite") from None
        elif isinstance(m, Hyperbox):
            if m.dev_minus.size != n or m.dev_plus.size != n:
                raise DimensionMismatch("deviation vectors do not match the mean")
            if np.any(m.dev_minus < 0) or np.any(m.dev_plus < 0):
                raise InputError("hyperbox deviations must be nonnegative")
            if np.any((m.dev_minus == 0) & (m.dev_plus == 0)):
                raise InputError("hyperbox deviations vanish in some coordinate")
        elif isinstance(m, PNorm):
            if m.p not in (1.0, 2.0, np.inf):
                raise InputError("p must be 1, 2 or inf")
        elif isinstance(m, CVaRNorm):
            if not 0.0 <= m.alpha < 1.0:
                raise InputError("CVaR alpha must lie in [0, 1)")
    if sum(_quadratic(m) is not None for m in mems) > 1:
        raise InputError("at most one quadratic member (ellipsoid or l2 ball) is supported")
    return n


# --- set-defining values ------------------------------------------------------

def cvar_norm(x, alpha):
    """``min_t t(1-alpha)n + sum(max(|x_i| - t, 0))`` for each row of ``x``."""
    x = np.abs(np.atleast_2d(np.asarray(x, float)))
    n = x.shape[1]
    ts = np.concatenate([np.zeros((x.shape[0], 1)), x], axis=1)
    vals = ts * (1 - alpha) * n + np.maximum(x[:, None, :] - ts[:, :, None], 0).sum(axis=2)
    return vals.min(axis=1)


def _member_level(m, W):
    """Smallest delta at which each row of ``W`` (deviation from the mean) is a member."""
    if isinstance(m, Ellipsoid):
        return np.einsum("ij,jk,ik->i", W, m.precision, W)
    if isinstance(m, Hyperbox):
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.where(W > 0, W / m.dev_plus, 0.0)
            dn = np.where(W < 0, -W / m.dev_minus, 0.0)
        up = np.where(np.isnan(up), np.inf, up)
        dn = np.where(np.isnan(dn), np.inf, dn)
        return np.maximum(up, dn).max(axis=1)
    if isinstance(m, PNorm):
        return np.linalg.norm(W, ord=m.p, axis=1)
    if isinstance(m, CVaRNorm):
        return cvar_norm(W, m.alpha)
    raise TypeError(type(m))


def level(spec, theta, tol=0.0):
    """Smallest delta with ``theta in T(delta)`` (``inf`` if a truncation is violated by more than ``tol``)."""
    T = np.atleast_2d(np.asarray(theta, float))
    n = dimension(spec)
    if T.shape[1] != n:
        raise DimensionMismatch(f"theta has dimension {T.shape[1]}, set has {n}")
    mean = nominal(spec)
    out = np.zeros(T.shape[0])
    for m in members(spec):
        if isinstance(m, Halfspaces):
            ok = np.all(T @ m.A.T <= m.b + tol, axis=1)
            out = np.where(ok, out, np.inf)
        else:
            out = np.maximum(out, _member_level(m, T - mean))
    return out if np.ndim(theta) > 1 else float(out[0])


def membership(spec, theta, delta):
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return level(spec, theta) <= delta


# --- compilation ------------------------------------------------------------------

@dataclass
class CompiledSet:
    """Rows ``A_theta theta + a_delta delta + A_aux aux <= b`` plus an optional quadratic row.

    ``quad`` is ``(M, mean, kind)`` meaning ``(theta-mean).M.(theta-mean) <= delta``
    for ``kind == "level"`` or ``<= delta**2`` for ``kind == "radius"``.
    """
    n_theta: int
    A_theta: np.ndarray
    a_delta: np.ndarray
    A_aux: np.ndarray
    b: np.ndarray
    aux_lb: np.ndarray
    aux_ub: np.ndarray
    quad: tuple = None
    labels: list = field(default_factory=list)

    @property
    def n_rows(self):
        return self.b.size

    @property
    def n_aux(self):
        return self.aux_lb.size

    @property
    def delta_linear(self):
        return bool(np.any(self.a_delta != 0))


def _quadratic(m):
    if isinstance(m, Ellipsoid):
        return (m.precision, m.mean, "level")
    if isinstance(m, PNorm) and m.p == 2.0:
        return (np.eye(m.mean.size), m.mean, "radius")
    return None


def _compile_member(m, n):
    """Return (A_theta, a_delta, A_aux, b, aux_lb, aux_ub, labels)."""
    I = np.eye(n)
    empty = np.zeros((0, n)), np.zeros(0), np.zeros((0, 0)), np.zeros(0), np.zeros(0), np.zeros(0), []
    if isinstance(m, Ellipsoid) or (isinstance(m, PNorm) and m.p == 2.0):
        return empty
    if isinstance(m, Halfspaces):
        k = m.b.size
        return (m.A.copy(), np.zeros(k), np.zeros((k, 0)), m.b.copy(), np.zeros(0), np.zeros(0),
                [f"halfspace[{i}]" for i in range(k)])
    if isinstance(m, (Hyperbox, PNorm)) and not (isinstance(m, PNorm) and m.p == 1.0):
        dp = m.dev_plus if isinstance(m, Hyperbox) else np.ones(n)
        dm = m.dev_minus if isinstance(m, Hyperbox) else np.ones(n)
        A = np.vstack([I, -I])
        a_d = np.concatenate([-dp, -dm])
        b = np.concatenate([m.mean, -m.mean])
        labels = [f"upper[{i}]" for i in range(n)] + [f"lower[{i}]" for i in range(n)]
        return A, a_d, np.zeros((2 * n, 0)), b, np.zeros(0), np.zeros(0), labels
    if isinstance(m, PNorm):  # l1: e_i >= |w_i|, sum e <= delta
        A = np.vstack([I, -I, np.zeros((1, n))])
        A_aux = np.vstack([-I, -I, np.ones((1, n))])
        a_d = np.concatenate([np.zeros(2 * n), [-1.0]])
        b = np.concatenate([m.mean, -m.mean, [0.0]])
        return A, a_d, A_aux, b, np.zeros(n), np.full(n, np.inf), \
            [f"abs+[{i}]" for i in range(n)] + [f"abs-[{i}]" for i in range(n)] + ["l1"]
    if isinstance(m, CVaRNorm):
        # aux = (e_1..e_n, m_1..m_n, t)
        k = 2 * n + 1
        rows_A, rows_aux, rows_d, rows_b = [], [], [], []
        for i in range(n):
            for sgn in (1.0, -1.0):  # sgn*w_i - e_i <= 0
                a = np.zeros(n); a[i] = sgn
                x = np.zeros(k); x[i] = -1.0
                rows_A.append(a); rows_aux.append(x); rows_d.append(0.0); rows_b.append(sgn * m.mean[i])
        for i in range(n):  # e_i - t - m_i <= 0
            x = np.zeros(k); x[i] = 1.0; x[n + i] = -1.0; x[2 * n] = -1.0
            rows_A.append(np.zeros(n)); rows_aux.append(x); rows_d.append(0.0); rows_b.append(0.0)
        x = np.zeros(k); x[n:2 * n] = 1.0; x[2 * n] = (1 - m.alpha) * n
        rows_A.append(np.zeros(n)); rows_aux.append(x); rows_d.append(-1.0); rows_b.append(0.0)
        lb = np.concatenate([np.zeros(2 * n), [-np.inf]])
        ub = np.full(k, np.inf)
        return (np.array(rows_A), np.array(rows_d), np.array(rows_aux), np.array(rows_b), lb, ub,
                [f"cvar[{i}]" for i in range(len(rows_b))])
    raise TypeError(type(m))


def compile_set(spec):
    """Linear rows (and at most one quadratic row) describing ``theta in T(delta)``."""
    n = check_set(spec)
    parts = [_compile_member(m, n) for m in members(spec)]
    total_aux = sum(p[2].shape[1] for p in parts)
    A_rows, d_rows, aux_rows, b_rows, labels = [], [], [], [], []
    lbs, ubs = [], []
    col = 0
    for A, a_d, A_aux, b, lb, ub, lab in parts:
        k = A_aux.shape[1]
        block = np.zeros((b.size, total_aux))
        block[:, col:col + k] = A_aux
        col += k
        A_rows.append(A); d_rows.append(a_d); aux_rows.append(block); b_rows.append(b)
        lbs.append(lb); ubs.append(ub); labels += lab
    quad = next((q for q in map(_quadratic, members(spec)) if q is not None), None)
    return CompiledSet(n, np.vstack(A_rows), np.concatenate(d_rows),
                       np.vstack(aux_rows), np.concatenate(b_rows),
                       np.concatenate(lbs), np.concatenate(ubs), quad, labels)


# --- boundary sampling -------------------------------------------------------------

def _member_extent(m, mean, D, delta):
    """Largest step ``r`` along each direction row of ``D`` staying inside member ``m``."""
    if isinstance(m, Halfspaces):
        AD = D @ m.A.T
        slack = m.b - m.A @ mean
        if np.any(slack < -1e-9 * (1.0 + np.abs(m.b))):
            raise InputError("nominal point violates a truncating halfspace")
        slack = np.maximum(slack, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(AD > 0, slack / AD, np.inf)
        return r.min(axis=1)
    if isinstance(m, Ellipsoid):
        return np.sqrt(delta / _member_level(m, D))
    return delta / _member_level(m, D)


def ray_extent(spec, directions, delta):
    D = np.atleast_2d(np.asarray(directions, float))
    mean = nominal(spec)
    r = np.full(D.shape[0], np.inf)
    for m in members(spec):
        r = np.minimum(r, _member_extent(m, mean, D, delta))
    return r


def boundary_sample(spec, delta, count, seed=0):
    """Points on the boundary of ``T(delta)`` along random rays from the nominal point."""
    n = check_set(spec)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    rng = np.random.default_rng(seed)
    mean = nominal(spec)
    D = rng.standard_normal((count, n))
    ell = next((m for m in members(spec) if isinstance(m, Ellipsoid)), None)
    if ell is not None:
        D = D @ ell.cholesky.T
    if delta == 0:
        return np.tile(mean, (count, 1))
    r = ray_extent(spec, D, delta)
    if np.any(~np.isfinite(r)):
        raise NonCompactComposite("set is unbounded along a sampled direction")
    pts = mean + r[:, None] * D
    for m in members(spec):
        if isinstance(m, Hyperbox) or (isinstance(m, PNorm) and m.p == np.inf):
            _snap_box_faces(m, mean, pts, r, D, delta)
    return pts


def _snap_box_faces(m, mean, pts, r, D, delta):
    dp = m.dev_plus if isinstance(m, Hyperbox) else np.ones(mean.size)
    dm = m.dev_minus if isinstance(m, Hyperbox) else np.ones(mean.size)
    W = r[:, None] * D
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(W > 0, W / (delta * dp), np.where(W < 0, -W / (delta * dm), 0.0))
    ratio = np.nan_to_num(ratio, nan=0.0, posinf=0.0)
    i = np.argmax(ratio, axis=1)
    rows = np.arange(pts.shape[0])
    hit = ratio[rows, i] >= 1 - 1e-9
    up = W[rows, i] > 0
    face = np.where(up, mean[i] + delta * dp[i], mean[i] - delta * dm[i])
    pts[rows[hit], i[hit]] = face[hit]


# --- JSON --------------------------------------------------------------------------

def set_from_dict(data, mean=None):
    """Build a set from its JSON form.

    ``mean`` overrides (or supplies) the nominal point, e.g. when the file
    names a computed center.
    """
    if not isinstance(data, dict) or "type" not in data:
        raise InputError("set JSON requires a 'type' field")
    t = data["type"]
    mu = data.get("mean")
    if mean is not None:
        mu = mean
    if isinstance(mu, str):
        raise InputError(f"set mean '{mu}' must be resolved to a vector first")

    def need(key):
        if key not in data:
            raise InputError(f"set of type '{t}' requires '{key}'")
        return data[key]

    def need_mean():
        if mu is None:
            raise InputError(f"set of type '{t}' requires 'mean'")
        return mu

    if t == "ellipsoid":
        return Ellipsoid(need_mean(), need("covariance"))
    if t == "hyperbox":
        dev = data.get("deviation")
        return Hyperbox(need_mean(), data.get("dev_minus", dev), data.get("dev_plus", dev))
    if t == "pnorm":
        return PNorm(need_mean(), need("p"))
    if t == "cvar":
        return CVaRNorm(need_mean(), need("alpha"))
    if t == "halfspaces":
        return Halfspaces(need("A"), need("b"))
    if t == "nonnegative":
        n = data.get("dimension")
        if n is None:
            n = len(need_mean())
        return nonnegative(int(n))
    if t == "intersection":
        mems = []
        for sub in need("members"):
            sub = dict(sub)
            if "mean" not in sub and mu is not None:
                sub["mean"] = mu
            if sub.get("type") == "nonnegative" and "dimension" not in sub and mu is None:
                raise InputError("'nonnegative' member needs a mean or dimension")
            mems.append(set_from_dict(sub, mean=mean))
        return Intersection(mems)
    raise InputError(f"unknown set type '{t}'")


def set_to_dict(spec):
    if isinstance(spec, Ellipsoid):
        return {"type": "ellipsoid", "mean": spec.mean.tolist(), "covariance": spec.covariance.tolist()}
    if isinstance(spec, Hyperbox):
        return {"type": "hyperbox", "mean": spec.mean.tolist(), "dev_minus": spec.dev_minus.tolist(),
                "dev_plus": spec.dev_plus.tolist()}
    if isinstance(spec, PNorm):
        return {"type": "pnorm", "mean": spec.mean.tolist(), "p": "inf" if np.isinf(spec.p) else spec.p}
    if isinstance(spec, CVaRNorm):
        return {"type": "cvar", "mean": spec.mean.tolist(), "alpha": spec.alpha}
    if isinstance(spec, Halfspaces):
        return {"type": "halfspaces", "A": spec.A.tolist(), "b": spec.b.tolist()}
    return {"type": "intersection", "members": [set_to_dict(m) for m in spec.members]}


def describe(spec):
    if isinstance(spec, Intersection):
        return "+".join(describe(m) for m in spec.members)
    if isinstance(spec, PNorm):
        return f"l{'inf' if np.isinf(spec.p) else int(spec.p)}"
    return spec.kind


def load_set_data(path):
    with open(Path(path), encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
