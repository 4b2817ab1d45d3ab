"""Independent reference computations shared by the unit and acceptance tests."""
import itertools
import math

import numpy as np


def weibull_objective(y, w, scale, shape):
    """Weighted complete-data Weibull log-likelihood, written out term by term."""
    r = y / scale
    return float(np.sum(w * (math.log(shape) - math.log(scale) + (shape - 1) * np.log(r) - r**shape)))


def zoom_grid_max(y, w, k_range=(0.05, 100.0), s_range=None, points=61, rounds=14):
    """Maximize ``weibull_objective`` by repeated refinement of a log-spaced 2-D grid.

    Returns ``(objective, scale, shape)``.
    """
    if s_range is None:
        s_range = (float(y.min()) * 0.5, float(y.max()) * 2.0)
    ly, sw = np.log(y), float(np.sum(w))
    lk, ls = np.log(k_range), np.log(s_range)
    best = (-np.inf, None, None)
    for _ in range(rounds):
        ks = np.exp(np.linspace(*lk, points))[:, None]
        ss = np.exp(np.linspace(*ls, points))[None, :]
        # sum_j w_j [ln k - ln s + (k-1)(ln y_j - ln s) - (y_j/s)^k], grid-vectorised
        lr = ly[None, None, :] - np.log(ss)[..., None]
        terms = (ks[..., None] - 1) * lr - np.exp(ks[..., None] * lr)
        obj = sw * (np.log(ks) - np.log(ss)) + np.sum(w * terms, axis=-1)
        i, j = np.unravel_index(np.argmax(obj), obj.shape)
        if obj[i, j] > best[0]:
            best = (float(obj[i, j]), float(ss[0, j]), float(ks[i, 0]))
        dk = (lk[1] - lk[0]) / (points - 1) * 2
        ds = (ls[1] - ls[0]) / (points - 1) * 2
        ca, cb = math.log(best[2]), math.log(best[1])
        lk = (max(ca - dk, math.log(k_range[0])), min(ca + dk, math.log(k_range[1])))
        ls = (cb - ds, cb + ds)
    # report the objective through the scalar path so both sides use one formula
    return weibull_objective(y, w, best[1], best[2]), best[1], best[2]


def _xlogx_term(count, p):
    return 0.0 if count == 0 else count * math.log(p)


def bernoulli_loglik(seq, p):
    """Sum of per-observation log probabilities under a constant exceedance rate."""
    total = 0.0
    for v in seq:
        q = p if v else 1 - p
        if q == 0:
            return -math.inf
        total += math.log(q)
    return total


def markov_loglik(seq, p01, p11):
    total = 0.0
    for prev, cur in zip(seq, seq[1:]):
        p = p11 if prev else p01
        q = p if cur else 1 - p
        if q == 0:
            return -math.inf
        total += math.log(q)
    return total


def kupiec_oracle(seq, alpha):
    n = len(seq)
    hat = sum(seq) / n
    return -2 * (bernoulli_loglik(seq, alpha) - bernoulli_loglik(seq, hat))


def christoffersen_oracle(seq):
    pairs = list(zip(seq, seq[1:]))
    n0 = sum(1 for a, _ in pairs if a == 0)
    n1 = len(pairs) - n0
    if n1 == 0:
        return None
    p01 = sum(1 for a, b in pairs if a == 0 and b == 1) / n0 if n0 else 0.0
    p11 = sum(1 for a, b in pairs if a == 1 and b == 1) / n1
    pooled = sum(b for _, b in pairs) / len(pairs)
    return -2 * (markov_loglik(seq, pooled, pooled) - markov_loglik(seq, p01, p11))


def all_sequences(t):
    return itertools.product((0, 1), repeat=t)
