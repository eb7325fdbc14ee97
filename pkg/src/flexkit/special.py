"""Regularized incomplete gamma function."""
import math

EPS = 1e-16
MAX_ITER = 10000
TINY = 1e-300


def _series(a, x):
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _continued_fraction(a, x):
    # modified Lentz evaluation of Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a, x):
    """Regularized lower incomplete gamma ``P(a, x) = gamma(a, x) / Gamma(a)``."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0 or math.isnan(x):
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _series(a, x))
    return max(0.0, 1.0 - _continued_fraction(a, x))


def confidence_level(F, n_theta):
    """Probability mass of a Gaussian inside the ellipsoid of squared Mahalanobis radius ``F``."""
    if n_theta < 1:
        raise ValueError("n_theta must be at least 1")
    if not math.isfinite(F):
        if F > 0:
            return 1.0
        raise ValueError("F must be finite")
    return gammainc_lower(n_theta / 2.0, max(F, 0.0) / 2.0)
