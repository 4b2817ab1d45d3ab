"""The mirrored Weibull distribution.

A mirrored Weibull variable is ``X = c - Y`` with ``Y ~ Weibull(scale, shape)``
and a fixed mirror constant ``c`` taken from the data, so its support is
``x <= c``. Everything here works on either axis:

* return axis ``x`` -- ``mw_pdf``, ``mw_cdf``, ``mw_quantile``, ``mw_sample``
* mirrored axis ``y = c - x`` -- ``weibull_pdf``, ``weibull_logpdf``, ``mom_estimate``
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BracketWarning, DegenerateError, DomainError, SizeError
from .returns import as_values

__all__ = [
    "WeibullParams",
    "MirroredWeibullParams",
    "SHAPE_BRACKET",
    "mirror_constant",
    "mirror_transform",
    "weibull_pdf",
    "weibull_logpdf",
    "mw_pdf",
    "mw_logpdf",
    "mw_cdf",
    "mw_quantile",
    "mw_sample",
    "mom_estimate",
]

SHAPE_BRACKET = (0.05, 100.0)
# c - max(x) below this counts as "max sits on the integer"
_MIRROR_GUARD = 1e-9


@dataclass(frozen=True)
class WeibullParams:
    scale: float
    shape: float

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError(f"scale must be positive and finite, got {self.scale}")
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise DomainError(f"shape must be positive and finite, got {self.shape}")

    def mirrored(self, c):
        return MirroredWeibullParams(self.scale, self.shape, c)


@dataclass(frozen=True)
class MirroredWeibullParams:
    scale: float
    shape: float
    c: float

    def __post_init__(self):
        WeibullParams(self.scale, self.shape)
        if not math.isfinite(self.c):
            raise DomainError(f"mirror constant must be finite, got {self.c}")

    @property
    def base(self):
        return WeibullParams(self.scale, self.shape)


def _out(result, x):
    return float(result) if np.ndim(x) == 0 else result


def mirror_constant(returns):
    """``ceil(|max x|)``, bumped by one when the max sits exactly on that integer.

    The bump keeps every mirrored value ``c - x`` strictly positive, which
    the ``log y`` terms of the likelihood require.
    """
    x = as_values(returns)
    if x.size == 0:
        raise SizeError("mirror constant needs a nonempty series")
    top = float(x.max())
    c = float(math.ceil(abs(top)))
    if c - top < _MIRROR_GUARD:
        c += 1.0
    return c


def mirror_transform(x, c):
    """Map returns to the mirrored axis, ``y = c - x``; requires ``x <= c``."""
    xa = np.asarray(x, dtype=np.float64)
    if np.any(xa > c):
        raise DomainError(f"value above mirror constant c={c}")
    return _out(c - xa, x)


def weibull_logpdf(y, p):
    """Log density of the two-parameter Weibull; ``-inf`` outside ``y >= 0``."""
    ya = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = ya / p.scale
        # shape == 1 must not produce 0 * log(0) at the support edge
        power = 0.0 if p.shape == 1.0 else (p.shape - 1.0) * np.log(r)
        out = math.log(p.shape / p.scale) + power - r**p.shape
        out = np.where(ya >= 0, out, -np.inf)
    return _out(out, y)


def weibull_pdf(y, p):
    ya = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = ya / p.scale
        out = (p.shape / p.scale) * r ** (p.shape - 1.0) * np.exp(-(r**p.shape))
        out = np.where(ya >= 0, out, 0.0)
    return _out(out, y)


def mw_pdf(x, p):
    """Mirrored Weibull density; zero above the mirror constant."""
    xa = np.asarray(x, dtype=np.float64)
    return _out(weibull_pdf(p.c - xa, p.base), x)


def mw_logpdf(x, p):
    xa = np.asarray(x, dtype=np.float64)
    return _out(weibull_logpdf(p.c - xa, p.base), x)


def mw_cdf(x, p):
    """``exp(-((c - x)/scale)^shape)`` below ``c``, 1 at and above it."""
    xa = np.asarray(x, dtype=np.float64)
    with np.errstate(invalid="ignore", over="ignore"):
        y = np.maximum(p.c - xa, 0.0)
        out = np.exp(-((y / p.scale) ** p.shape))
    return _out(out, x)


def mw_quantile(p_level, p):
    """Inverse of :func:`mw_cdf`: ``c - scale * (-ln q)^(1/shape)``."""
    q = np.asarray(p_level, dtype=np.float64)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    out = p.c - p.scale * (-np.log(q)) ** (1.0 / p.shape)
    return _out(out, p_level)


def mw_sample(p, n, seed=None):
    """Inverse-transform draws; ``seed`` may be an int or a numpy Generator."""
    if n < 1:
        raise SizeError("sample size must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    # 1 - U lies in (0, 1], so -log never sees 0
    u = 1.0 - rng.random(int(n))
    return p.c - p.scale * (-np.log(u)) ** (1.0 / p.shape)


def _weighted_moments(y, weights):
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    sw = float(w.sum())
    if sw <= 1.0:
        raise SizeError(f"weighted sample size must exceed 1, got {sw}")
    mean = float((w * y).sum() / sw)
    var = float((w * (y - mean) ** 2).sum() / (sw - 1.0))
    return mean, var


def _solve_cv2(target, lo, hi, tol=1e-10):
    """Bisection on log(shape) for ``log(1 + CV^2(shape)) == target``.

    The left side is strictly decreasing in shape. Returns ``(shape, edge)``.
    """
    def f(t):
        s = math.exp(t)
        return math.lgamma(1.0 + 2.0 / s) - 2.0 * math.lgamma(1.0 + 1.0 / s) - target

    a, b = math.log(lo), math.log(hi)
    if f(a) <= 0.0:
        return lo, f(a) < 0.0
    if f(b) >= 0.0:
        return hi, f(b) > 0.0
    while b - a > tol:
        m = 0.5 * (a + b)
        if f(m) > 0.0:
            a = m
        else:
            b = m
    return math.exp(0.5 * (a + b)), False


def mom_estimate(y, weights=None, bracket=SHAPE_BRACKET):
    """Method-of-moments Weibull fit of a (weighted) positive sample.

    The shape solves ``s^2 / ybar^2 = [G(1+2/k) - G(1+1/k)^2] / G(1+1/k)^2``
    and the scale is ``ybar / G(1 + 1/k)``. The variance uses the weighted
    ``sum(w) - 1`` denominator.

    Emits :class:`BracketWarning` when the sample CV is outside what the
    shape bracket can reach; the bracket endpoint is returned in that case.
    """
    mean, var = _weighted_moments(y, weights)
    if not var > 0.0:
        raise DegenerateError("method of moments needs a sample with positive variance")
    if not mean > 0.0:
        raise DomainError("method of moments needs a positive mean on the mirrored axis")
    cv2 = var / mean**2
    shape, edge = _solve_cv2(math.log1p(cv2), *bracket)
    if edge:
        warnings.warn(
            f"sample CV^2={cv2:.6g} outside the reachable range; shape set to {shape}",
            BracketWarning,
            stacklevel=2,
        )
    return WeibullParams(scale=mean / math.gamma(1.0 + 1.0 / shape), shape=shape)
