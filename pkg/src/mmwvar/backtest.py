"""VaR backtesting: Kupiec and Christoffersen tests, rolling one-step-ahead
forecasts, and comparative scoring against the historical method.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import FITTERS
from .errors import AlignmentError, DomainError, MMWError, SizeError
from .mixture import EMConfig, select_g
from .returns import ReturnSeries, as_values
from .seeding import derive_seed
from .special import chi2_sf_1df
from .var import historical_var, model_var_cdf

__all__ = [
    "ExceedanceSeries",
    "TestResult",
    "Forecast",
    "ForecastSeries",
    "BacktestReport",
    "exceedances",
    "kupiec_test",
    "christoffersen_test",
    "chi2_sf_1df",
    "rolling_forecast",
    "score_forecasts",
]

SIGNIFICANCE = 0.05


def _xlogy(a, b):
    """``a * log(b)`` with ``0 * log(0) = 0``."""
    return 0.0 if a == 0 else a * math.log(b)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    df: int = 1
    applicable: bool = True

    __test__ = False  # keep pytest from collecting this class

    @property
    def verdict(self):
        if not self.applicable:
            return "n/a"
        return "pass" if self.p_value >= SIGNIFICANCE else "fail"

    def to_dict(self):
        if not self.applicable:
            return {"lr": None, "p": None, "verdict": self.verdict}
        return {"lr": self.statistic, "p": self.p_value, "verdict": self.verdict}


@dataclass(frozen=True)
class ExceedanceSeries:
    dates: np.ndarray
    indicators: np.ndarray

    def __post_init__(self):
        ind = np.asarray(self.indicators, dtype=np.int8)
        if ind.ndim != 1 or ind.size < 1:
            raise SizeError("exceedance series needs at least one indicator")
        if np.any((ind != 0) & (ind != 1)):
            raise DomainError("indicators must be 0 or 1")
        object.__setattr__(self, "indicators", ind)
        object.__setattr__(self, "dates", np.asarray(self.dates, dtype="datetime64[D]"))

    @property
    def n_exceed(self):
        return int(self.indicators.sum())

    def __len__(self):
        return self.indicators.size


def _dated(series):
    if hasattr(series, "dates") and hasattr(series, "values"):
        return np.asarray(series.dates, dtype="datetime64[D]"), np.asarray(series.values, dtype=np.float64)
    return None, np.asarray(series, dtype=np.float64).ravel()


def exceedances(returns, var_forecasts):
    """1 where the realized return is strictly below the forecast VaR.

    Both arguments may be dated series (``.dates``/``.values``) or plain
    arrays; dated inputs must match date-for-date.
    """
    d_r, r = _dated(returns)
    d_v, v = _dated(var_forecasts)
    if r.size != v.size:
        raise AlignmentError(f"{r.size} returns vs {v.size} forecasts")
    if d_r is not None and d_v is not None and not np.array_equal(d_r, d_v):
        raise AlignmentError("return and forecast dates differ")
    dates = d_r if d_r is not None else d_v
    if dates is None:
        dates = np.datetime64("1970-01-01", "D") + np.arange(r.size)
    return ExceedanceSeries(dates, (r < v).astype(np.int8))


def kupiec_test(n_exceed, n_obs, alpha):
    """Proportion-of-failures likelihood ratio against the nominal rate ``alpha``."""
    T, N = int(n_obs), int(n_exceed)
    if T < 1 or not 0 <= N <= T:
        raise DomainError(f"need 0 <= n_exceed <= n_obs and n_obs >= 1, got {N}, {T}")
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    rate = N / T
    ll_null = _xlogy(T - N, 1.0 - alpha) + _xlogy(N, alpha)
    ll_alt = _xlogy(T - N, 1.0 - rate) + _xlogy(N, rate)
    lr = max(0.0, -2.0 * (ll_null - ll_alt))
    return TestResult(lr, chi2_sf_1df(lr))


def transition_counts(indicators):
    ind = np.asarray(getattr(indicators, "indicators", indicators), dtype=np.int8)
    prev, cur = ind[:-1], ind[1:]
    n00 = int(np.sum((prev == 0) & (cur == 0)))
    n01 = int(np.sum((prev == 0) & (cur == 1)))
    n10 = int(np.sum((prev == 1) & (cur == 0)))
    n11 = int(np.sum((prev == 1) & (cur == 1)))
    return n00, n01, n10, n11


def christoffersen_test(indicators):
    """Independence likelihood ratio: first-order Markov vs. i.i.d. exceedances.

    Not applicable (``applicable=False``) when no transition out of the
    exceedance state is observed.
    """
    ind = np.asarray(getattr(indicators, "indicators", indicators), dtype=np.int8)
    if ind.size < 2:
        raise SizeError("independence test needs at least 2 indicators")
    n00, n01, n10, n11 = transition_counts(ind)
    if n10 + n11 == 0:
        return TestResult(math.nan, math.nan, applicable=False)
    total = n00 + n01 + n10 + n11
    pi = (n01 + n11) / total
    pi01 = n01 / (n00 + n01) if n00 + n01 else 0.0
    pi11 = n11 / (n10 + n11)
    ll_null = _xlogy(n00 + n10, 1.0 - pi) + _xlogy(n01 + n11, pi)
    ll_alt = _xlogy(n00, 1.0 - pi01) + _xlogy(n01, pi01) + _xlogy(n10, 1.0 - pi11) + _xlogy(n11, pi11)
    lr = max(0.0, -2.0 * (ll_null - ll_alt))
    return TestResult(lr, chi2_sf_1df(lr))


# -- rolling forecasts ------------------------------------------------------


@dataclass
class Forecast:
    index: int
    date: np.datetime64
    realized: float
    var: dict | None
    hist_var: dict
    converged: bool = False
    g: int | None = None
    c: float | None = None
    reason: str | None = None

    @property
    def beyond_support(self):
        return self.c is not None and self.realized > self.c


@dataclass
class ForecastSeries:
    family: str
    alphas: tuple
    window: int
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def values(self, alpha):
        return np.array([np.nan if r.var is None else r.var[alpha] for r in self.records])

    @property
    def dates(self):
        return np.array([r.date for r in self.records], dtype="datetime64[D]")

    @property
    def missing(self):
        return [r for r in self.records if r.var is None]


def _forecast_one(x, dates, t, window, family, cfg, alphas, g_range, fixed_g):
    train = x[t - window : t]
    hist = {}
    for a in alphas:
        try:
            hist[a] = historical_var(train, a).value
        except SizeError:
            hist[a] = None
    rec = Forecast(index=t, date=dates[t], realized=float(x[t]), var=None, hist_var=hist)
    cfg_t = replace(cfg, seed=derive_seed(cfg.seed, "forecast", family, t))
    fitter = FITTERS[family]
    try:
        if fixed_g is not None:
            fit = fitter(train, replace(cfg_t, g=int(fixed_g)))
        else:
            fit = select_g(train, g_range, cfg_t, fitter)
        rec.var = {a: model_var_cdf(fit.model, a).value for a in alphas}
    except MMWError as exc:
        rec.reason = f"{type(exc).__name__}: {exc}"
        return rec
    rec.converged = bool(fit.converged)
    rec.g = fit.g
    rec.c = getattr(fit.model, "c", None)
    return rec


def _forecast_chunk(args):
    x, dates, ts, rest = args
    return [_forecast_one(x, dates, t, *rest) for t in ts]


def rolling_forecast(
    returns,
    window=250,
    family="mmw",
    cfg=None,
    alpha=0.01,
    g_range=(1, 2, 3, 4),
    fixed_g=None,
    n_jobs=1,
):
    """One-step-ahead VaR forecasts from a sliding training window.

    For each day ``t >= window`` the family is fitted to the preceding
    ``window`` returns (BIC choice of g over ``g_range`` unless ``fixed_g``)
    and its VaR at each level in ``alpha`` is the forecast for day ``t``.
    Failed fits are kept as records with ``var=None`` and a reason.
    """
    if family not in FITTERS:
        raise DomainError(f"unknown family {family!r}")
    cfg = cfg or EMConfig()
    if isinstance(returns, ReturnSeries):
        x, dates = as_values(returns), returns.dates
    else:
        x = as_values(returns)
        dates = np.datetime64("2000-01-03", "D") + np.arange(x.size)
    if x.size <= window:
        raise SizeError(f"need more than window={window} observations, got {x.size}")
    alphas = tuple(float(a) for a in np.atleast_1d(alpha))
    ts = list(range(window, x.size))
    rest = (window, family, cfg, alphas, tuple(g_range), fixed_g)
    if n_jobs and n_jobs > 1:
        chunks = [ts[i : i + 25] for i in range(0, len(ts), 25)]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = pool.map(_forecast_chunk, [(x, dates, c, rest) for c in chunks])
            records = [r for part in parts for r in part]
    else:
        records = [_forecast_one(x, dates, t, *rest) for t in ts]
    records.sort(key=lambda r: r.index)
    return ForecastSeries(family, alphas, window, records)


# -- scoring ----------------------------------------------------------------


@dataclass
class BacktestReport:
    family: str
    alpha: float
    window: int
    forecasts: list
    exceedances: list
    kupiec: TestResult
    christoffersen: TestResult
    mse: float | None
    failure_rate: float | None
    n_segments: int
    n_missing: int
    n_beyond_support: int

    @property
    def n_obs(self):
        return len(self.exceedances)

    @property
    def n_exceed(self):
        return int(sum(self.exceedances))

    def to_dict(self):
        return {
            "family": self.family,
            "alpha": self.alpha,
            "window": self.window,
            "forecasts": self.forecasts,
            "exceedances": list(self.exceedances),
            "n_obs": self.n_obs,
            "n_exceed": self.n_exceed,
            "n_missing": self.n_missing,
            "n_beyond_support": self.n_beyond_support,
            "kupiec": self.kupiec.to_dict(),
            "christoffersen": self.christoffersen.to_dict(),
            "mse": self.mse,
            "failure_rate": self.failure_rate,
            "n_segments": self.n_segments,
        }


def _segments(n, length):
    """Non-overlapping full segments; the whole series if none fits."""
    if n >= length:
        return [(i, i + length) for i in range(0, n - length + 1, length)]
    return [(0, n)] if n else []


def score_forecasts(forecasts, returns, alpha, segment=250):
    """Exceedances, both LR tests, MSE against historical VaR, Kupiec failure rate.

    The MSE compares each model forecast with the historical-method VaR of
    the same training window. The failure rate is the share of
    non-overlapping ``segment``-long blocks of forecasts whose Kupiec test
    rejects at 5%.
    """
    alpha = float(alpha)
    if alpha not in forecasts.alphas:
        raise DomainError(f"alpha {alpha} was not forecast; available {forecasts.alphas}")
    if isinstance(returns, ReturnSeries):
        r_dates = returns.dates
        for rec in forecasts.records:
            if rec.index >= r_dates.size or r_dates[rec.index] != rec.date:
                raise AlignmentError(f"forecast for {rec.date} does not align with the return series")
    x = as_values(returns)
    valid = [r for r in forecasts.records if r.var is not None]
    realized = np.array([x[r.index] for r in valid])
    var = np.array([r.var[alpha] for r in valid])
    dates = np.array([r.date for r in valid], dtype="datetime64[D]")
    if valid:
        ind = exceedances(ReturnSeries(dates, realized), ReturnSeries(dates, var)).indicators
    else:
        ind = np.zeros(0, dtype=np.int8)
    T, N = ind.size, int(ind.sum())
    kup = kupiec_test(N, T, alpha) if T else TestResult(math.nan, math.nan, applicable=False)
    chr_ = christoffersen_test(ind) if T >= 2 else TestResult(math.nan, math.nan, applicable=False)
    gaps = [(r.var[alpha] - r.hist_var[alpha]) ** 2 for r in valid if r.hist_var.get(alpha) is not None]
    mse = float(np.mean(gaps)) if gaps else None
    segs = _segments(T, segment)
    fails = [kupiec_test(int(ind[a:b].sum()), b - a, alpha).p_value < SIGNIFICANCE for a, b in segs]
    failure_rate = float(np.mean(fails)) if fails else None
    exceeded = dict(zip((r.index for r in valid), ind.tolist()))
    rows = [
        {
            "date": str(r.date),
            "realized": r.realized,
            "var": None if r.var is None else r.var[alpha],
            "hist_var": r.hist_var.get(alpha),
            "converged": r.converged,
            "g": r.g,
            "c": r.c,
            "exceeded": exceeded.get(r.index),
            "beyond_support": r.beyond_support,
            "reason": r.reason,
        }
        for r in forecasts.records
    ]
    return BacktestReport(
        family=forecasts.family,
        alpha=alpha,
        window=forecasts.window,
        forecasts=rows,
        exceedances=ind.tolist(),
        kupiec=kup,
        christoffersen=chr_,
        mse=mse,
        failure_rate=failure_rate,
        n_segments=len(segs),
        n_missing=len(forecasts.missing),
        n_beyond_support=sum(1 for r in forecasts.records if r.beyond_support),
    )
