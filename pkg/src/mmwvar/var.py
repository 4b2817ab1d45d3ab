"""Value-at-Risk estimates from fitted mixtures and from raw returns.

VaR values are return-space lower quantiles (typically negative); the
positive loss figure is available as ``VaREstimate.loss``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SizeError
from .mixture import MMWMixture
from .mweibull import mw_quantile
from .returns import as_values

__all__ = [
    "METHODS",
    "VaRRequest",
    "VaREstimate",
    "historical_var",
    "model_var_cdf",
    "model_var_sim",
    "var_curve",
    "default_alpha_grid",
]

METHODS = ("cdf-bisection", "simulation", "historical")
X_TOL = 1e-10
MIN_SIM = 10_000


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


@dataclass(frozen=True)
class VaRRequest:
    alpha: float
    method: str = "cdf-bisection"
    n_sim: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise DomainError(f"VaR alpha must lie in (0, 0.5), got {self.alpha}")
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}")
        if self.method == "simulation" and self.n_sim < MIN_SIM:
            raise DomainError(f"n_sim must be >= {MIN_SIM}")


@dataclass(frozen=True)
class VaREstimate:
    value: float
    alpha: float
    method: str
    family: str
    standard_error: float | None = None

    @property
    def loss(self):
        return -self.value

    def to_dict(self):
        return {
            "family": self.family,
            "alpha": self.alpha,
            "method": self.method,
            "var": self.value,
            "loss": self.loss,
            "standard_error": self.standard_error,
        }


def historical_var(returns, alpha):
    """Empirical alpha-quantile with linear interpolation between order statistics."""
    _check_alpha(alpha)
    x = as_values(returns)
    if x.size < math.ceil(1.0 / alpha):
        raise SizeError(f"historical VaR at alpha={alpha} needs >= {math.ceil(1 / alpha)} observations")
    return VaREstimate(float(np.quantile(x, alpha, method="linear")), alpha, "historical", "historical")


def _bisect_quantile(cdf, alpha, lo, hi, tol=X_TOL, max_iter=400):
    width = max(hi - lo, 1.0)
    while cdf(lo) > alpha:
        lo -= width
        width *= 2.0
    width = max(hi - lo, 1.0)
    while cdf(hi) < alpha:
        hi += width
        width *= 2.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if cdf(mid) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def model_var_cdf(model, alpha):
    """Alpha-quantile of a fitted mixture by bisection on its closed-form CDF.

    The per-component quantiles bracket the mixture quantile; the bracket is
    widened geometrically if rounding leaves it short. A one-component MMW
    uses the closed-form quantile directly.
    """
    _check_alpha(alpha)
    if isinstance(model, MMWMixture) and model.g == 1:
        value = float(mw_quantile(alpha, model.component(0)))
    else:
        q = model.component_quantiles(alpha)
        value = _bisect_quantile(lambda v: float(model.cdf(v)), alpha, float(q.min()), float(q.max()))
    return VaREstimate(value, alpha, "cdf-bisection", model.family)


def _sim_se(model, q, alpha, n_sim):
    dens = float(model.pdf(q))
    if not dens > 0:
        return math.inf
    return math.sqrt(alpha * (1.0 - alpha) / n_sim) / dens


def model_var_sim(model, alpha, n_sim=1_000_000, seed=0):
    """Empirical alpha-quantile of ``n_sim`` model draws with a density-based standard error.

    The standard error is ``sqrt(alpha (1 - alpha) / n_sim) / f(q)`` with the
    model density ``f`` evaluated at the estimate.
    """
    _check_alpha(alpha)
    if n_sim < MIN_SIM:
        raise SizeError(f"n_sim must be >= {MIN_SIM}")
    draws = model.sample(int(n_sim), seed)
    q = float(np.quantile(draws, alpha, method="linear"))
    return VaREstimate(q, alpha, "simulation", model.family, _sim_se(model, q, alpha, n_sim))


def var_curve(model, alphas, method="cdf-bisection", n_sim=1_000_000, seed=0):
    """VaR over an alpha grid; simulation reuses one set of draws for every alpha."""
    alphas = [float(a) for a in alphas]
    for a in alphas:
        _check_alpha(a)
    if method == "cdf-bisection":
        return [model_var_cdf(model, a) for a in alphas]
    if method == "simulation":
        draws = model.sample(int(n_sim), seed)
        qs = np.quantile(draws, alphas, method="linear")
        return [
            VaREstimate(float(q), a, "simulation", model.family, _sim_se(model, float(q), a, n_sim))
            for q, a in zip(qs, alphas)
        ]
    raise DomainError(f"model VaR method must be cdf-bisection or simulation, got {method!r}")


def default_alpha_grid(start=0.001, stop=0.10, step=0.001):
    n = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(n)]
