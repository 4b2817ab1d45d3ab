"""Command-line entry point: ``mmwvar {stats,fit,var,backtest}``.

Every run writes machine-readable outputs to ``--out`` (default
``$MMWVAR_OUT_DIR`` or ``./mmwvar_out``). Each JSON document embeds the
resolved configuration, root seed, package version and the SHA-256 of the
input file, and is written with sorted keys so reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import rolling_forecast, score_forecasts
from .baselines import FITTERS, model_from_dict
from .errors import MMWError
from .mixture import EMConfig, select_g
from .returns import load_prices, load_returns, log_returns, summary_stats
from .seeding import derive_seed
from .var import default_alpha_grid, historical_var, model_var_cdf, model_var_sim, var_curve

log = logging.getLogger("mmwvar")

FAMILY_ORDER = ("gmm", "tmm", "mmw")
OUT_ENV = "MMWVAR_OUT_DIR"
EXIT_OK, EXIT_PARTIAL, EXIT_ERROR = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    input: str
    date_col: str = "Date"
    price_col: str | None = "Adj Close"
    returns_col: str | None = None
    date_format: str | None = None
    family: str = "all"
    g: int | None = None
    g_max: int = 4
    alphas: list = field(default_factory=lambda: [0.01, 0.05])
    alpha_grid: list | None = None
    window: int = 250
    method: str = "all"
    n_sim: int = 1_000_000
    seed: int = 0
    n_starts: int = 5
    max_iter: int = 500
    tol: float = 1e-6
    init: str = "kmeans"
    n_jobs: int = 1
    segment: int = 250
    bins: int = 50
    grid_points: int = 400
    models: list = field(default_factory=list)
    out: str = "mmwvar_out"

    @property
    def families(self):
        return list(FAMILY_ORDER) if self.family == "all" else [self.family]

    @property
    def g_range(self):
        return [self.g] if self.g is not None else list(range(1, self.g_max + 1))

    def em_config(self, seed, g=None):
        return EMConfig(
            g=g or (self.g or 1),
            max_iter=self.max_iter,
            tol=self.tol,
            init=self.init,
            n_starts=self.n_starts,
            seed=seed,
        )

    def validate(self):
        if self.family not in ("all",) + FAMILY_ORDER:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.g is not None and self.g < 1:
            raise ConfigError("--g must be >= 1 or 'auto'")
        if self.g_max < 1:
            raise ConfigError("--g-max must be >= 1")
        for a in list(self.alphas) + list(self.alpha_grid or []):
            if not 0.0 < a < 0.5:
                raise ConfigError(f"alpha {a} outside (0, 0.5)")
        if self.window < 4:
            raise ConfigError("--window must be >= 4")
        if self.method not in ("all", "cdf-bisection", "simulation", "historical"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.n_sim < 10_000:
            raise ConfigError("--n-sim must be >= 10000")
        if self.n_starts < 1 or self.max_iter < 1 or not self.tol > 0:
            raise ConfigError("--n-starts and --max-iter must be >= 1, --tol > 0")
        if self.init not in ("kmeans", "quantile-split", "random"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.price_col is None and self.returns_col is None:
            raise ConfigError("one of --price-col / --returns-col is required")
        return self

    def resolved(self):
        """Configuration as embedded in outputs (the output directory is excluded)."""
        d = asdict(self)
        d.pop("out")
        return d


# -- helpers ----------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.datetime64):
        return str(obj)
    return obj


def write_json(path, obj):
    text = json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _fmt(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return ""
    return repr(float(v))


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_series(cfg):
    if cfg.returns_col:
        return load_returns(cfg.input, cfg.date_col, cfg.returns_col, cfg.date_format)
    return log_returns(load_prices(cfg.input, cfg.date_col, cfg.price_col, cfg.date_format))


def envelope(cfg):
    return {
        "config": cfg.resolved(),
        "seed": cfg.seed,
        "version": __version__,
        "input_sha256": file_sha256(cfg.input),
    }


def fit_family(series, family, cfg):
    seed = derive_seed(cfg.seed, "fit", family)
    fitter = FITTERS[family]
    if cfg.g is not None:
        return fitter(series, cfg.em_config(seed, cfg.g))
    return select_g(series, cfg.g_range, cfg.em_config(seed, 1), fitter)


def _fit_all(series, cfg):
    fits, failures = {}, {}
    for fam in cfg.families:
        try:
            fits[fam] = fit_family(series, fam, cfg)
        except MMWError as exc:
            failures[fam] = f"{type(exc).__name__}: {exc}"
            log.warning("fit failed for %s: %s", fam, exc)
    return fits, failures


# -- subcommands ------------------------------------------------------------


def cmd_stats(cfg):
    series = load_series(cfg)
    st = summary_stats(series)
    doc = envelope(cfg)
    doc.update(
        frequency=series.frequency,
        first_date=str(series.dates[0]),
        last_date=str(series.dates[-1]),
        stats=st.as_dict(),
    )
    write_json(Path(cfg.out) / "stats.json", doc)
    print(f"{'statistic':<12}{'value':>12}")
    for key in ("min", "max", "mean", "std_dev", "skewness", "kurtosis"):
        print(f"{key:<12}{getattr(st, key):>12.2f}")
    print(f"{'n':<12}{st.n:>12d}")
    return EXIT_OK


def cmd_fit(cfg):
    series = load_series(cfg)
    x = series.values
    fits, failures = _fit_all(series, cfg)
    out = Path(cfg.out)
    summary = envelope(cfg)
    summary["models"] = {}
    for fam, res in fits.items():
        doc = envelope(cfg)
        doc.update(res.to_dict())
        doc["bic_by_g"] = res.diagnostics.get("bic_by_g")
        write_json(out / f"model_{fam}.json", doc)
        summary["models"][fam] = {"g": res.g, "bic": res.bic, "loglik": res.loglik, "converged": res.converged}
    summary["failures"] = failures
    summary["best_bic_family"] = min(fits, key=lambda f: fits[f].bic) if fits else None
    write_json(out / "fit.json", summary)

    span = float(np.ptp(x)) or 1.0
    grid = np.linspace(x.min() - 0.1 * span, x.max() + 0.1 * span, cfg.grid_points)
    cols = [f for f in FAMILY_ORDER if f in fits]
    dens = [np.asarray(fits[f].model.pdf(grid)) for f in cols]
    write_csv(out / "density.csv", ["x"] + [f"pdf_{f}" for f in cols], zip(grid, *dens))
    counts, edges = np.histogram(x, bins=cfg.bins)
    width = np.diff(edges)
    write_csv(
        out / "histogram.csv",
        ["bin_left", "bin_right", "count", "density"],
        ((a, b, str(int(c)), c / (x.size * w)) for a, b, c, w in zip(edges[:-1], edges[1:], counts, width)),
    )
    for fam, res in fits.items():
        print(f"{fam}: g={res.g} loglik={res.loglik:.4f} bic={res.bic:.4f} converged={res.converged}")
    for fam, msg in failures.items():
        print(f"{fam}: FAILED {msg}")
    return EXIT_OK if fits else EXIT_PARTIAL


def _load_models(cfg):
    fits = {}
    for path in cfg.models:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        model = model_from_dict(d)
        fits[model.family] = model
    return fits


def cmd_var(cfg):
    series = load_series(cfg)
    x = series.values
    failures = {}
    if cfg.models:
        models = _load_models(cfg)
    else:
        fits, failures = _fit_all(series, cfg)
        models = {f: r.model for f, r in fits.items()}
    methods = ["cdf-bisection", "simulation", "historical"] if cfg.method == "all" else [cfg.method]
    grid = cfg.alpha_grid or default_alpha_grid()
    estimates = {}

    def put(fam, a, est):
        estimates.setdefault(fam, {}).setdefault(repr(a), {})[est.method] = est.to_dict()

    columns, header = [], ["alpha"]
    if "historical" in methods:
        hist = []
        for a in grid:
            try:
                hist.append(historical_var(x, a).value)
            except MMWError:
                hist.append(None)
        columns.append(hist)
        header.append("var_hist")
        for a in cfg.alphas:
            try:
                put("historical", a, historical_var(x, a))
            except MMWError as exc:
                failures[f"historical@{a}"] = str(exc)
    for fam in [f for f in FAMILY_ORDER if f in models]:
        model = models[fam]
        sim_seed = derive_seed(cfg.seed, "var", fam)
        if "cdf-bisection" in methods:
            columns.append([e.value for e in var_curve(model, grid, "cdf-bisection")])
            header.append(f"var_{fam}_cdf")
            for a in cfg.alphas:
                put(fam, a, model_var_cdf(model, a))
        if "simulation" in methods:
            curve = var_curve(model, grid, "simulation", cfg.n_sim, sim_seed)
            columns += [[e.value for e in curve], [e.standard_error for e in curve]]
            header += [f"var_{fam}_sim", f"var_{fam}_sim_se"]
            for a in cfg.alphas:
                put(fam, a, model_var_sim(model, a, cfg.n_sim, sim_seed))
        if "cdf-bisection" in methods and "simulation" in methods:
            for a in cfg.alphas:
                cell = estimates[fam][repr(a)]
                cdf, sim = cell["cdf-bisection"], cell["simulation"]
                cell["agree_3se"] = abs(cdf["var"] - sim["var"]) <= 3.0 * sim["standard_error"]
    out = Path(cfg.out)
    write_csv(out / "var_curve.csv", header, zip(grid, *columns))
    doc = envelope(cfg)
    doc.update(
        var_estimates=estimates,
        models={f: m.to_dict() for f, m in models.items()},
        failures=failures,
    )
    write_json(out / "var.json", doc)
    for fam, by_alpha in estimates.items():
        for a, cell in by_alpha.items():
            vals = " ".join(f"{m}={v['var']:.4f}" for m, v in cell.items() if isinstance(v, dict))
            print(f"{fam:<11} alpha={a:<6} {vals}")
    return EXIT_OK if not failures and models else EXIT_PARTIAL


def cmd_backtest(cfg):
    series = load_series(cfg)
    reports, fc_by_family, failures = [], {}, {}
    for fam in cfg.families:
        fam_cfg = cfg.em_config(derive_seed(cfg.seed, "backtest", fam), cfg.g or 1)
        try:
            fc = rolling_forecast(
                series,
                cfg.window,
                fam,
                fam_cfg,
                alpha=cfg.alphas,
                g_range=cfg.g_range,
                fixed_g=cfg.g,
                n_jobs=cfg.n_jobs,
            )
        except MMWError as exc:
            failures[fam] = f"{type(exc).__name__}: {exc}"
            continue
        fc_by_family[fam] = fc
        if fc.missing:
            failures[fam] = f"{len(fc.missing)} window fits failed"
        for a in cfg.alphas:
            reports.append(score_forecasts(fc, series, a, cfg.segment))
    out = Path(cfg.out)
    doc = envelope(cfg)
    doc.update(reports=[r.to_dict() for r in reports], failures=failures)
    write_json(out / "backtest.json", doc)
    x = series.values
    for a in cfg.alphas:
        header = ["date", "realized"] + [f"var_{f}" for f in FAMILY_ORDER] + ["var_hist"]
        ref = next(iter(fc_by_family.values()), None)
        rows = []
        if ref is not None:
            for i, rec in enumerate(ref.records):
                row = [str(rec.date), x[rec.index]]
                for f in FAMILY_ORDER:
                    r = fc_by_family[f].records[i] if f in fc_by_family else None
                    row.append(None if r is None or r.var is None else r.var[a])
                row.append(rec.hist_var.get(a))
                rows.append(row)
        write_csv(out / f"forecasts_alpha{a:g}.csv", header, rows)
    for r in reports:
        k, c = r.kupiec, r.christoffersen
        print(
            f"{r.family:<4} alpha={r.alpha:<5g} N={r.n_exceed}/{r.n_obs} "
            f"LR_POF={k.statistic:.2f} p={k.p_value:.2f} ({k.verdict}) "
            f"LR_IND={c.statistic:.2f} p={c.p_value:.2f} ({c.verdict}) "
            f"mse={_fmt(r.mse) or 'n/a'} failure_rate={_fmt(r.failure_rate) or 'n/a'}"
        )
    return EXIT_OK if not failures else EXIT_PARTIAL


COMMANDS = {"stats": cmd_stats, "fit": cmd_fit, "var": cmd_var, "backtest": cmd_backtest}


# -- argument parsing -------------------------------------------------------


def _g_value(text):
    if text == "auto":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a positive integer or 'auto'") from None


def _grid(text):
    try:
        start, stop, step = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected START,STOP,STEP") from None
    return default_alpha_grid(start, stop, step)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True, help="CSV file with a header row")
    common.add_argument("--date-col", default="Date")
    src = common.add_mutually_exclusive_group()
    src.add_argument("--price-col", default=None, help="adjusted close column (default 'Adj Close')")
    src.add_argument("--returns-col", default=None, help="pre-computed percent return column")
    common.add_argument("--date-format", default=None, help="strptime format; ISO-8601 when omitted")
    common.add_argument("--family", default="all", choices=["all", "mmw", "gmm", "tmm"])
    gsel = common.add_mutually_exclusive_group()
    gsel.add_argument("--g", type=_g_value, default=None, help="component count or 'auto' (BIC)")
    gsel.add_argument("--fixed-g", dest="g", type=int, help="alias of --g N")
    common.add_argument("--g-max", type=int, default=4, help="largest g tried by BIC selection")
    common.add_argument("--alpha", type=float, action="append", dest="alphas", help="repeatable")
    common.add_argument("--alpha-grid", type=_grid, default=None, help="START,STOP,STEP for the VaR curve")
    common.add_argument("--window", type=int, default=250)
    common.add_argument("--method", default="all")
    common.add_argument("--n-sim", type=int, default=1_000_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--n-starts", type=int, default=5)
    common.add_argument("--max-iter", type=int, default=500)
    common.add_argument("--tol", type=float, default=1e-6)
    common.add_argument("--init", default="kmeans")
    common.add_argument("--n-jobs", type=int, default=1)
    common.add_argument("--segment", type=int, default=250, help="forecasts per failure-rate segment")
    common.add_argument("--bins", type=int, default=50)
    common.add_argument("--grid-points", type=int, default=400)
    common.add_argument("--model", action="append", dest="models", default=[], help="model JSON (var)")
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./mmwvar_out)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mmwvar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("stats", parents=[common], help="summary statistics of the return series")
    sub.add_parser("fit", parents=[common], help="fit mixtures; write models and density curves")
    sub.add_parser("var", parents=[common], help="VaR over an alpha grid for each family")
    sub.add_parser("backtest", parents=[common], help="rolling one-step-ahead VaR backtest")
    return parser


def config_from_args(ns):
    price_col = ns.price_col
    if ns.returns_col is None and price_col is None:
        price_col = "Adj Close"
    return RunConfig(
        subcommand=ns.subcommand,
        input=ns.input,
        date_col=ns.date_col,
        price_col=price_col,
        returns_col=ns.returns_col,
        date_format=ns.date_format,
        family=ns.family,
        g=ns.g,
        g_max=ns.g_max,
        alphas=ns.alphas or [0.01, 0.05],
        alpha_grid=ns.alpha_grid,
        window=ns.window,
        method=ns.method,
        n_sim=ns.n_sim,
        seed=ns.seed,
        n_starts=ns.n_starts,
        max_iter=ns.max_iter,
        tol=ns.tol,
        init=ns.init,
        n_jobs=ns.n_jobs,
        segment=ns.segment,
        bins=ns.bins,
        grid_points=ns.grid_points,
        models=ns.models,
        out=ns.out or os.environ.get(OUT_ENV, "mmwvar_out"),
    ).validate()


def main(argv=None):
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(ns)
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        return COMMANDS[cfg.subcommand](cfg)
    except (ConfigError, MMWError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
