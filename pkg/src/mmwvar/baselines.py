"""Gaussian and Student-t mixture baselines.

Both fitters reuse the EM driver, multi-start logic and ``FitResult`` of
:mod:`mmwvar.mixture`, so the three families are scored identically.
The t mixture uses the usual scale-mixture-of-normals EM: per-point gamma
weights ``u = (nu + 1) / (nu + delta)`` and a one-dimensional root solve for
each component's degrees of freedom.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import digamma, gammaln, ndtr

from .errors import ComponentCollapseError, DomainError, LikelihoodError, SizeError
from .mixture import (
    MMWMixture,
    EMConfig,
    FitResult,
    _check_weights,
    bic,
    cluster_labels,
    em_loop,
    fit_em,
    multi_start,
    weight_floor_check,
)
from .returns import as_values

__all__ = [
    "GaussianMixture",
    "TMixture",
    "fit_gmm",
    "fit_tmm",
    "solve_dof",
    "model_from_dict",
    "FITTERS",
]

DOF_BRACKET = (0.5, 200.0)
DOF_START = 10.0
VARIANCE_FLOOR = 1e-8
_LOG_2PI = math.log(2.0 * math.pi)


def _row_logsumexp(a):
    m = a.max(axis=1)
    bad = ~np.isfinite(m)
    m = np.where(bad, 0.0, m)
    with np.errstate(divide="ignore"):
        out = m + np.log(np.exp(a - m[:, None]).sum(axis=1))
    out[bad] = -np.inf
    return out


def _posterior(logp):
    row = _row_logsumexp(logp)
    bad = np.flatnonzero(~np.isfinite(row))
    if bad.size:
        raise LikelihoodError(f"observation {int(bad[0])} has zero density", index=int(bad[0]))
    return np.exp(logp - row[:, None]), float(row.sum())


def _as_param_array(v, name, positive=False):
    a = np.asarray(v, dtype=np.float64).ravel()
    if not np.all(np.isfinite(a)) or (positive and np.any(a <= 0)):
        raise DomainError(f"{name} must be finite{' and positive' if positive else ''}")
    return tuple(float(t) for t in a)


@dataclass(frozen=True)
class GaussianMixture:
    weights: tuple
    means: tuple
    variances: tuple

    family = "gmm"

    def __post_init__(self):
        object.__setattr__(self, "weights", _check_weights(self.weights))
        object.__setattr__(self, "means", _as_param_array(self.means, "means"))
        object.__setattr__(self, "variances", _as_param_array(self.variances, "variances", True))
        if not len(self.weights) == len(self.means) == len(self.variances):
            raise DomainError("parameter vectors differ in length")

    @property
    def g(self):
        return len(self.weights)

    @property
    def n_params(self):
        return 3 * self.g - 1

    def component_logpdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))[:, None]
        m, v = np.asarray(self.means), np.asarray(self.variances)
        return np.log(self.weights) - 0.5 * (_LOG_2PI + np.log(v)) - 0.5 * (x - m) ** 2 / v

    def logpdf(self, x):
        out = _row_logsumexp(self.component_logpdf(x))
        return float(out[0]) if np.ndim(x) == 0 else out

    def pdf(self, x):
        out = np.exp(self.logpdf(x))
        return float(out) if np.ndim(x) == 0 else out

    def cdf(self, x):
        xa = np.asarray(x, dtype=np.float64)
        out = sum(
            w * ndtr((xa - m) / math.sqrt(v)) for w, m, v in zip(self.weights, self.means, self.variances)
        )
        return float(out) if np.ndim(x) == 0 else out

    def component_quantiles(self, q):
        return np.array([stats.norm.ppf(q, m, math.sqrt(v)) for m, v in zip(self.means, self.variances)])

    def sample(self, n, seed=None):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        labels = rng.choice(self.g, size=int(n), p=np.asarray(self.weights))
        return np.asarray(self.means)[labels] + np.sqrt(self.variances)[labels] * rng.standard_normal(int(n))

    def to_dict(self):
        return {
            "family": self.family,
            "g": self.g,
            "weights": list(self.weights),
            "components": [{"mean": m, "variance": v} for m, v in zip(self.means, self.variances)],
        }

    @classmethod
    def from_dict(cls, d):
        w = np.asarray(d["weights"], dtype=np.float64)
        comps = d["components"]
        return cls(tuple(w / w.sum()), [c["mean"] for c in comps], [c["variance"] for c in comps])


@dataclass(frozen=True)
class TMixture:
    weights: tuple
    locations: tuple
    scales: tuple
    dofs: tuple

    family = "tmm"

    def __post_init__(self):
        object.__setattr__(self, "weights", _check_weights(self.weights))
        object.__setattr__(self, "locations", _as_param_array(self.locations, "locations"))
        object.__setattr__(self, "scales", _as_param_array(self.scales, "scales", True))
        object.__setattr__(self, "dofs", _as_param_array(self.dofs, "dofs", True))
        if not len(self.weights) == len(self.locations) == len(self.scales) == len(self.dofs):
            raise DomainError("parameter vectors differ in length")

    @property
    def g(self):
        return len(self.weights)

    @property
    def n_params(self):
        return 4 * self.g - 1

    def _delta(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))[:, None]
        return ((x - np.asarray(self.locations)) / np.asarray(self.scales)) ** 2

    def component_logpdf(self, x, delta=None):
        nu = np.asarray(self.dofs)
        d = self._delta(x) if delta is None else delta
        const = gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * np.log(nu * math.pi) - np.log(self.scales)
        return np.log(self.weights) + const - 0.5 * (nu + 1) * np.log1p(d / nu)

    def logpdf(self, x):
        out = _row_logsumexp(self.component_logpdf(x))
        return float(out[0]) if np.ndim(x) == 0 else out

    def pdf(self, x):
        out = np.exp(self.logpdf(x))
        return float(out) if np.ndim(x) == 0 else out

    def cdf(self, x):
        xa = np.asarray(x, dtype=np.float64)
        out = sum(
            w * stats.t.cdf(xa, nu, loc=m, scale=s)
            for w, m, s, nu in zip(self.weights, self.locations, self.scales, self.dofs)
        )
        return float(out) if np.ndim(x) == 0 else out

    def component_quantiles(self, q):
        return np.array(
            [stats.t.ppf(q, nu, loc=m, scale=s) for m, s, nu in zip(self.locations, self.scales, self.dofs)]
        )

    def sample(self, n, seed=None):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        labels = rng.choice(self.g, size=int(n), p=np.asarray(self.weights))
        t = rng.standard_t(np.asarray(self.dofs)[labels])
        return np.asarray(self.locations)[labels] + np.asarray(self.scales)[labels] * t

    def to_dict(self):
        return {
            "family": self.family,
            "g": self.g,
            "weights": list(self.weights),
            "components": [
                {"location": m, "scale": s, "dof": nu}
                for m, s, nu in zip(self.locations, self.scales, self.dofs)
            ],
        }

    @classmethod
    def from_dict(cls, d):
        w = np.asarray(d["weights"], dtype=np.float64)
        comps = d["components"]
        return cls(
            tuple(w / w.sum()),
            [c["location"] for c in comps],
            [c["scale"] for c in comps],
            [c["dof"] for c in comps],
        )


def _cluster_moments(x, labels, g):
    weights = np.bincount(labels, minlength=g) / x.size
    means = np.array([x[labels == i].mean() for i in range(g)])
    variances = np.array([x[labels == i].var() for i in range(g)])
    return weights, means, variances


def _prepare(returns, cfg):
    x = as_values(returns)
    if x.size < 2 * cfg.g:
        raise SizeError(f"need at least 2g={2 * cfg.g} observations, got {x.size}")
    return x, VARIANCE_FLOOR * float(x.var())


def _collapse_check(nk):
    if np.any(nk < 1e-10):
        i = int(np.argmin(nk))
        raise ComponentCollapseError(f"component {i} has responsibility mass {nk[i]:.3g}")


def _result(model, trace, n_iter, converged, n, diagnostics=None):
    return FitResult(
        model=model,
        loglik_trace=trace,
        n_iter=n_iter,
        converged=converged,
        bic=bic(trace[-1], model.n_params, n),
        n_params=model.n_params,
        n_obs=n,
        diagnostics=diagnostics or {},
    )


def fit_gmm(returns, cfg=None):
    """Univariate Gaussian mixture by EM; variances floored at 1e-8 x sample variance."""
    cfg = cfg or EMConfig()
    x, floor = _prepare(returns, cfg)
    n = x.size

    def estep(theta):
        return _posterior(GaussianMixture(*theta).component_logpdf(x))

    def mstep(z, theta):
        nk = z.sum(axis=0)
        _collapse_check(nk)
        means = (z * x[:, None]).sum(axis=0) / nk
        variances = np.maximum((z * (x[:, None] - means) ** 2).sum(axis=0) / nk, floor)
        w = nk / n
        return w / w.sum(), means, variances

    def run_start(rng):
        labels = cluster_labels(x, cfg.g, cfg.init, rng)
        w, m, v = _cluster_moments(x, labels, cfg.g)
        theta, trace, n_iter, conv = em_loop(
            estep, mstep, (w, m, np.maximum(v, floor)), cfg, n,
            check_collapse=lambda th, n_: weight_floor_check(th[0], n_),
        )
        return _result(GaussianMixture(*theta), trace, n_iter, conv, n)

    return multi_start(run_start, cfg, n, "gmm")


def solve_dof(k_const, lo=DOF_BRACKET[0], hi=DOF_BRACKET[1], tol=1e-10):
    """Degrees of freedom solving ``log(nu/2) - digamma(nu/2) + 1 + k_const = 0``.

    ``k_const`` is the responsibility-weighted mean of ``E[log u] - E[u]``
    from the E-step. The left side decreases in ``nu``; bisection runs on
    ``log(nu)``. Returns ``(nu, at_edge)``.
    """
    def f(t):
        h = 0.5 * math.exp(t)
        return math.log(h) - float(digamma(h)) + 1.0 + k_const

    a, b = math.log(lo), math.log(hi)
    if f(a) <= 0.0:
        return lo, True
    if f(b) >= 0.0:
        return hi, True
    while b - a > tol:
        m = 0.5 * (a + b)
        if f(m) > 0.0:
            a = m
        else:
            b = m
    return math.exp(0.5 * (a + b)), False


def fit_tmm(returns, cfg=None):
    """Univariate Student-t mixture by EM with per-component degrees of freedom."""
    cfg = cfg or EMConfig()
    x, floor = _prepare(returns, cfg)
    n = x.size
    xc = x[:, None]

    def estep(theta):
        model = TMixture(*theta)
        delta = model._delta(x)
        z, ll = _posterior(model.component_logpdf(x, delta))
        nu = np.asarray(theta[3])
        u = (nu + 1.0) / (nu + delta)
        return (z, u, nu), ll

    def mstep(stats_, theta):
        z, u, nu_old = stats_
        nk = z.sum(axis=0)
        _collapse_check(nk)
        zu = z * u
        loc = (zu * xc).sum(axis=0) / zu.sum(axis=0)
        var = np.maximum((zu * (xc - loc) ** 2).sum(axis=0) / nk, floor)
        dofs, edges = [], []
        for i in range(z.shape[1]):
            k_const = float((z[:, i] * (np.log(u[:, i]) - u[:, i])).sum() / nk[i])
            k_const += float(digamma((nu_old[i] + 1) / 2)) - math.log((nu_old[i] + 1) / 2)
            nu_i, edge = solve_dof(k_const)
            dofs.append(nu_i)
            edges.append(edge)
        dof_edge.append(edges)
        w = nk / n
        return w / w.sum(), loc, np.sqrt(var), np.array(dofs)

    dof_edge = []

    def run_start(rng):
        dof_edge.clear()
        labels = cluster_labels(x, cfg.g, cfg.init, rng)
        w, m, v = _cluster_moments(x, labels, cfg.g)
        theta0 = (w, m, np.sqrt(np.maximum(v, floor)), np.full(cfg.g, DOF_START))
        theta, trace, n_iter, conv = em_loop(
            estep, mstep, theta0, cfg, n,
            check_collapse=lambda th, n_: weight_floor_check(th[0], n_),
        )
        flags = [bool(e) for e in dof_edge[-1]] if dof_edge else [False] * cfg.g
        return _result(TMixture(*theta), trace, n_iter, conv, n, {"dof_at_edge": flags})

    return multi_start(run_start, cfg, n, "tmm")


FAMILIES = {"mmw": MMWMixture, "gmm": GaussianMixture, "tmm": TMixture}


def model_from_dict(d):
    """Rebuild any fitted model from its JSON document (``family`` tag)."""
    try:
        cls = FAMILIES[d["family"]]
    except KeyError as exc:
        raise DomainError(f"unknown model family {d.get('family')!r}") from exc
    return cls.from_dict(d)

FITTERS = {"mmw": fit_em, "gmm": fit_gmm, "tmm": fit_tmm}
