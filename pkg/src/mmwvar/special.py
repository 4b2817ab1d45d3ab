"""Special-function helpers used by the estimators and the tests."""
import math

from scipy.special import digamma as _digamma

from .errors import DomainError

__all__ = ["log_gamma", "gamma", "digamma", "chi2_sf_1df", "weibull_cv2"]


def log_gamma(x):
    return math.lgamma(x)


def gamma(x):
    return math.gamma(x)


def digamma(x):
    return float(_digamma(x))


def weibull_cv2(shape):
    """Squared coefficient of variation of a Weibull with the given shape.

    ``[G(1+2/k) - G(1+1/k)^2] / G(1+1/k)^2``, evaluated through log-gamma so
    that small shapes do not overflow.
    """
    return math.expm1(math.lgamma(1.0 + 2.0 / shape) - 2.0 * math.lgamma(1.0 + 1.0 / shape))


def chi2_sf_1df(x):
    """Upper tail probability of a chi-square variable with one degree of freedom."""
    if x < 0 or math.isnan(x):
        raise DomainError(f"chi-square statistic must be >= 0, got {x}")
    return math.erfc(math.sqrt(x / 2.0))
