import numpy as np
import pytest

from mmwvar.mixture import MMWMixture
from mmwvar.mweibull import WeibullParams


def write_prices(path, dates, prices, date_col="Date", price_col="Adj Close"):
    lines = [f"{date_col},{price_col}"]
    lines += [f"{d},{float(p)!r}" for d, p in zip(dates, prices)]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def two_mmw():
    """The recovery benchmark model: weights 0.4/0.6, scales 4/12, shapes 1.5/6."""
    return MMWMixture((0.4, 0.6), (WeibullParams(4.0, 1.5), WeibullParams(12.0, 6.0)), 20.0)


@pytest.fixture
def price_csv(tmp_path, two_mmw):
    x = two_mmw.sample(320, seed=11) - 10.0
    prices = 100.0 * np.exp(np.cumsum(np.r_[0.0, x / 100.0]))
    dates = np.datetime64("2015-01-01") + np.arange(prices.size)
    return write_prices(tmp_path / "prices.csv", [str(d) for d in dates], prices)


ACCEPTANCE = []


def record(number, ok, detail):
    """Log one acceptance line; the terminal summary repeats them all."""
    status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
    line = f"criterion {number:>2}: {status}  {detail}"
    print(line)
    ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
