"""Mixtures of mirrored Weibull distributions and their EM fitter.

All fitting happens on the mirrored axis ``y = c - x`` where each component
is an ordinary two-parameter Weibull. Parameters are stored by role
(``scale``, ``shape``). In the update formulas the shape is the exponent:

* shape ``k`` solves ``1/k = sum z y^k log y / sum z y^k - sum z log y / sum z``
* scale ``= (sum z y^k / sum z) ** (1/k)``

The stopping rule monitors the observed-data log-likelihood, which EM is
guaranteed not to decrease.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import (
    AscentError,
    ComponentCollapseError,
    DegenerateError,
    DomainError,
    FitFailureError,
    LikelihoodError,
    MMWError,
    SizeError,
)
from .mweibull import (
    SHAPE_BRACKET,
    WeibullParams,
    mirror_constant,
    mom_estimate,
    mw_cdf,
    mw_pdf,
)
from .returns import as_values

__all__ = [
    "EMConfig",
    "MMWMixture",
    "FitResult",
    "mixture_pdf",
    "mixture_cdf",
    "log_likelihood",
    "cluster_labels",
    "initialize",
    "e_step",
    "m_step",
    "run_em",
    "fit_em",
    "select_g",
    "bic",
]

INIT_METHODS = ("kmeans", "quantile-split", "random")
ASCENT_SLACK = 1e-8
_MAX_RESEEDS = 10
_MIN_COLUMN_MASS = 1e-10


@dataclass(frozen=True)
class EMConfig:
    g: int = 2
    max_iter: int = 500
    tol: float = 1e-6
    init: str = "kmeans"
    n_starts: int = 5
    seed: int = 0

    def __post_init__(self):
        if int(self.g) != self.g or self.g < 1:
            raise ValueError(f"g must be a positive integer, got {self.g}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.init not in INIT_METHODS:
            raise ValueError(f"init must be one of {INIT_METHODS}")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")

    def as_dict(self):
        return {
            "g": self.g,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "init": self.init,
            "n_starts": self.n_starts,
            "seed": self.seed,
        }


def _check_weights(weights):
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size < 1:
        raise DomainError("weights must be a nonempty vector")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise DomainError(f"weights must be nonnegative and sum to 1, got {w.tolist()}")
    return tuple(float(v) for v in w)


@dataclass(frozen=True)
class MMWMixture:
    """Weighted sum of mirrored Weibull densities sharing one mirror constant."""

    weights: tuple
    components: tuple
    c: float

    family = "mmw"

    def __post_init__(self):
        object.__setattr__(self, "weights", _check_weights(self.weights))
        comps = tuple(
            p if isinstance(p, WeibullParams) else WeibullParams(float(p[0]), float(p[1]))
            for p in self.components
        )
        if len(comps) != len(self.weights):
            raise DomainError("weights and components differ in length")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "c", float(self.c))
        if not math.isfinite(self.c):
            raise DomainError("mirror constant must be finite")

    @property
    def g(self):
        return len(self.weights)

    @property
    def n_params(self):
        return 3 * self.g - 1

    @property
    def scales(self):
        return np.array([p.scale for p in self.components])

    @property
    def shapes(self):
        return np.array([p.shape for p in self.components])

    def component(self, i):
        return self.components[i].mirrored(self.c)

    def pdf(self, x):
        return mixture_pdf(x, self)

    def cdf(self, x):
        return mixture_cdf(x, self)

    def logpdf(self, x):
        xa = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = self.c - xa
        out = np.full(xa.shape, -np.inf)
        ok = y > 0
        if np.any(ok):
            _, row = kernels.estep(np.log(y[ok]), np.log(np.asarray(self.weights)), self.scales, self.shapes)
            out[ok] = row
        return float(out[0]) if np.ndim(x) == 0 else out

    def component_quantiles(self, q):
        """Per-component return-space quantiles; they bracket the mixture quantile."""
        return np.array([self.c - p.scale * (-math.log(q)) ** (1.0 / p.shape) for p in self.components])

    def sample(self, n, seed=None):
        """Draw a component label per point, then invert that component's CDF."""
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        labels = rng.choice(self.g, size=int(n), p=np.asarray(self.weights))
        u = 1.0 - rng.random(int(n))
        return self.c - self.scales[labels] * (-np.log(u)) ** (1.0 / self.shapes[labels])

    def permuted(self, order):
        return MMWMixture(
            tuple(self.weights[i] for i in order), tuple(self.components[i] for i in order), self.c
        )

    def to_dict(self):
        return {
            "family": self.family,
            "g": self.g,
            "weights": list(self.weights),
            "components": [{"scale": p.scale, "shape": p.shape} for p in self.components],
            "c": self.c,
        }

    @classmethod
    def from_dict(cls, d):
        comps = tuple(WeibullParams(float(p["scale"]), float(p["shape"])) for p in d["components"])
        w = np.asarray(d["weights"], dtype=np.float64)
        return cls(tuple(w / w.sum()), comps, float(d["c"]))


def mixture_pdf(x, m):
    xa = np.asarray(x, dtype=np.float64)
    out = sum(w * mw_pdf(xa, m.component(i)) for i, w in enumerate(m.weights))
    return float(out) if np.ndim(x) == 0 else out


def mixture_cdf(x, m):
    xa = np.asarray(x, dtype=np.float64)
    out = sum(w * mw_cdf(xa, m.component(i)) for i, w in enumerate(m.weights))
    out = np.minimum(out, 1.0)
    return float(out) if np.ndim(x) == 0 else out


def log_likelihood(returns, m):
    """Observed-data log-likelihood; raises when any point has zero density."""
    x = as_values(returns)
    lp = np.atleast_1d(m.logpdf(x))
    bad = np.flatnonzero(~np.isfinite(lp) | (lp == -np.inf))
    if bad.size:
        j = int(bad[0])
        raise LikelihoodError(f"observation {j} (x={x[j]!r}) has zero density under the model", index=j)
    return float(lp.sum())


def bic(loglik, n_params, n):
    return n_params * math.log(n) - 2.0 * loglik


@dataclass
class FitResult:
    model: object
    loglik_trace: list
    n_iter: int
    converged: bool
    bic: float
    n_params: int
    n_obs: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def loglik(self):
        return self.loglik_trace[-1]

    @property
    def family(self):
        return self.model.family

    @property
    def g(self):
        return self.model.g

    def to_dict(self):
        """Model-exchange document (JSON-ready)."""
        d = self.model.to_dict()
        d.update(
            loglik=self.loglik,
            bic=self.bic,
            n_iter=self.n_iter,
            converged=self.converged,
            n_params=self.n_params,
            n_obs=self.n_obs,
        )
        return d


# -- initialization ---------------------------------------------------------


def _kmeans_1d(v, g, rng, max_iter=100):
    uniq = np.unique(v)
    if uniq.size < g:
        return None
    centers = np.sort(rng.choice(uniq, size=g, replace=False))
    labels = None
    for _ in range(max_iter):
        cuts = 0.5 * (centers[1:] + centers[:-1])
        new = np.searchsorted(cuts, v)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        counts = np.bincount(labels, minlength=g)
        if np.any(counts == 0):
            return labels
        centers = np.bincount(labels, weights=v, minlength=g) / counts
    return labels


def _labels_ok(v, labels, g):
    if labels is None:
        return False
    for i in range(g):
        members = v[labels == i]
        if members.size < 2 or np.ptp(members) == 0.0:
            return False
    return True


def cluster_labels(v, g, method="kmeans", rng=None):
    """Hard assignment of a 1-D sample into ``g`` clusters.

    Every cluster must hold at least two distinct values (the moment
    estimates need a variance). Random methods are reseeded up to 10 times.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.size
    if n < 2 * g:
        raise SizeError(f"need at least 2g={2 * g} observations, got {n}")
    if g == 1:
        labels = np.zeros(n, dtype=np.intp)
        if not _labels_ok(v, labels, 1):
            raise DegenerateError("sample has zero variance")
        return labels
    if method == "quantile-split":
        labels = np.empty(n, dtype=np.intp)
        for i, block in enumerate(np.array_split(np.argsort(v, kind="stable"), g)):
            labels[block] = i
        if not _labels_ok(v, labels, g):
            raise DegenerateError("quantile split produced a cluster without spread")
        return labels
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    for _ in range(_MAX_RESEEDS):
        if method == "kmeans":
            labels = _kmeans_1d(v, g, rng)
        elif method == "random":
            labels = rng.integers(0, g, size=n)
        else:
            raise ValueError(f"unknown init method {method!r}")
        if _labels_ok(v, labels, g):
            return labels
    raise DegenerateError(f"{method} init left an empty or degenerate cluster after {_MAX_RESEEDS} attempts")


def initialize(y, cfg, rng=None):
    """Initial ``(weights, params, z)`` from a hard clustering of ``y``.

    ``params`` come from :func:`mom_estimate` on each cluster; ``z`` is the
    0/1 membership matrix.
    """
    y = np.asarray(y, dtype=np.float64)
    labels = cluster_labels(y, cfg.g, cfg.init, rng if rng is not None else cfg.seed)
    z = np.zeros((y.size, cfg.g))
    z[np.arange(y.size), labels] = 1.0
    weights = z.sum(axis=0) / y.size
    params = [mom_estimate(y, z[:, i]) for i in range(cfg.g)]
    return weights, params, z


# -- EM steps ---------------------------------------------------------------


def _estep_logy(logy, weights, scales, shapes):
    with np.errstate(divide="ignore"):
        logw = np.log(np.asarray(weights, dtype=np.float64))
    z, row = kernels.estep(logy, logw, np.asarray(scales, float), np.asarray(shapes, float))
    bad = np.flatnonzero(~np.isfinite(row))
    if bad.size:
        j = int(bad[0])
        raise LikelihoodError(f"observation {j} has zero density under every component", index=j)
    return z, float(row.sum())


def e_step(y, m):
    """Responsibilities ``z[j, i]`` of each component for each mirrored point."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise LikelihoodError("mirrored values must be strictly positive")
    z, _ = _estep_logy(np.log(y), m.weights, m.scales, m.shapes)
    return z


def _m_step_logy(logy, z, shape_start=None):
    n, g = z.shape
    mass = z.sum(axis=0)
    if np.any(mass < _MIN_COLUMN_MASS):
        i = int(np.argmin(mass))
        raise ComponentCollapseError(f"component {i} has responsibility mass {mass[i]:.3g}")
    weights = mass / n
    weights = weights / weights.sum()
    params, clamped = [], []
    for i in range(g):
        w = z[:, i]
        support = logy[w > 0]
        if support.size < 2 or np.ptp(support) == 0.0:
            raise ComponentCollapseError(f"component {i} has no spread in log y")
        k0 = 1.0 if shape_start is None else float(shape_start[i])
        k, scale, edge, _ = kernels.weibull_mstep(logy, w, k0, *SHAPE_BRACKET)
        params.append(WeibullParams(scale, k))
        clamped.append(edge)
    return weights, params, clamped


def m_step(y, z, shape_start=None):
    """Closed-form weights, root-solved shapes and closed-form scales.

    Returns ``(weights, params, clamped)`` where ``clamped[i]`` flags a shape
    pinned to the edge of the search bracket.
    """
    y = np.asarray(y, dtype=np.float64)
    return _m_step_logy(np.log(y), np.asarray(z, dtype=np.float64), shape_start)


# -- generic EM driver ------------------------------------------------------


def em_loop(estep, mstep, theta0, cfg, n, check_collapse=None):
    """Alternate E and M steps from ``theta0`` until the stopping rule fires.

    ``estep(theta) -> (stats, loglik)`` and ``mstep(stats, theta) -> theta``.
    Returns ``(theta, trace, n_iter, converged)``; raises :class:`AscentError`
    if the observed log-likelihood drops by more than ``ASCENT_SLACK``.
    """
    theta = theta0
    stats, ll = estep(theta)
    trace = [ll]
    converged = False
    k = 0
    while k < cfg.max_iter:
        k += 1
        theta = mstep(stats, theta)
        if check_collapse is not None:
            check_collapse(theta, n)
        stats, ll = estep(theta)
        if ll < trace[-1] - ASCENT_SLACK:
            raise AscentError(f"log-likelihood fell from {trace[-1]!r} to {ll!r} at iteration {k}")
        trace.append(ll)
        if abs(ll - trace[-2]) < cfg.tol:
            converged = True
            break
    return theta, trace, k, converged


def weight_floor_check(weights, n):
    w = np.asarray(weights)
    if np.any(w < 1.0 / (2 * n)):
        i = int(np.argmin(w))
        raise ComponentCollapseError(f"component {i} weight {w[i]:.3g} fell below 1/(2n)")


def start_seeds(cfg):
    """Independent generators for each start, all derived from ``cfg.seed``."""
    deterministic = cfg.g == 1 or cfg.init == "quantile-split"
    n = 1 if deterministic else cfg.n_starts
    return [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(n)]


def multi_start(run_start, cfg, n, label):
    """Run every start, keep the best final log-likelihood (earliest on ties)."""
    best = None
    diags = []
    for idx, rng in enumerate(start_seeds(cfg)):
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                res = run_start(rng)
            res.diagnostics["start"] = idx
            res.diagnostics["init_warnings"] = [str(w.message) for w in caught]
            diags.append({"start": idx, "loglik": res.loglik, "n_iter": res.n_iter, "converged": res.converged})
            if best is None or res.loglik > best.loglik:
                best = res
        except MMWError as exc:
            diags.append({"start": idx, "error": f"{type(exc).__name__}: {exc}"})
    if best is None:
        raise FitFailureError(f"all {len(diags)} {label} starts failed (g={cfg.g})", diags)
    best.diagnostics["starts"] = diags
    return best


def run_em(y, weights, params, c, cfg):
    """EM for a mirrored Weibull mixture from explicit starting parameters."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    logy = np.log(y)
    clamped_any = [False] * len(params)

    def estep(theta):
        w, ps = theta
        return _estep_logy(logy, w, [p.scale for p in ps], [p.shape for p in ps])

    def mstep(z, theta):
        w, ps, clamped = _m_step_logy(logy, z, [p.shape for p in theta[1]])
        for i, e in enumerate(clamped):
            clamped_any[i] = clamped_any[i] or e
        return w, ps

    theta0 = (np.asarray(weights, dtype=np.float64), list(params))
    (w, ps), trace, n_iter, converged = em_loop(
        estep, mstep, theta0, cfg, n, check_collapse=lambda th, n_: weight_floor_check(th[0], n_)
    )
    model = MMWMixture(tuple(w), tuple(ps), c)
    return FitResult(
        model=model,
        loglik_trace=trace,
        n_iter=n_iter,
        converged=converged,
        bic=bic(trace[-1], model.n_params, n),
        n_params=model.n_params,
        n_obs=n,
        diagnostics={"shape_clamped": clamped_any},
    )


def fit_em(returns, cfg=None):
    """Fit a ``cfg.g``-component MMW mixture by EM with multiple starts."""
    cfg = cfg or EMConfig()
    x = as_values(returns)
    if x.size < 2 * cfg.g:
        raise SizeError(f"need at least 2g={2 * cfg.g} observations, got {x.size}")
    c = mirror_constant(x)
    y = c - x

    def run_start(rng):
        weights, params, _ = initialize(y, cfg, rng)
        return run_em(y, weights, params, c, cfg)

    return multi_start(run_start, cfg, x.size, "mmw")


def select_g(returns, g_range: Sequence[int] = (1, 2, 3, 4), cfg=None, fitter: Callable = None):
    """Fit each ``g`` and keep the lowest BIC; ties go to the smaller ``g``."""
    cfg = cfg or EMConfig()
    fitter = fitter or fit_em
    g_values = sorted(set(int(g) for g in g_range))
    if not g_values:
        raise ValueError("g_range must be nonempty")
    best, table, failures = None, {}, []
    for g in g_values:
        try:
            res = fitter(returns, replace(cfg, g=g))
        except (FitFailureError, SizeError) as exc:
            table[g] = None
            failures.append({"g": g, "error": str(exc), "diagnostics": getattr(exc, "diagnostics", [])})
            continue
        table[g] = res.bic
        if best is None or res.bic < best.bic:
            best = res
    if best is None:
        raise FitFailureError(f"every g in {g_values} failed", failures)
    best.diagnostics["bic_by_g"] = table
    return best
