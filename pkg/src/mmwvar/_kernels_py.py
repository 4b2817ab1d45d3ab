"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def _shape_score(logy, w, mean_logy, ref, k):
    d = logy - ref
    a = w * np.exp(k * d)
    A = a.sum()
    B = (a * d).sum() / A
    C = (a * d * d).sum() / A
    g = B + ref - mean_logy - 1.0 / k
    return g, k * max(C - B * B, 0.0) + 1.0 / k


def _scale(logy, w, ref, k):
    return float(np.exp((k * ref + np.log((w * np.exp(k * (logy - ref))).sum()) - np.log(w.sum())) / k))


def weibull_mstep(logy, w, k0, lo, hi, tol=1e-10, max_iter=200):
    """Weighted Weibull MLE: shape by root search on log(shape), then scale.

    The score ``sum(w y^k log y)/sum(w y^k) - mean_w(log y) - 1/k`` is
    strictly increasing in k, so a Newton step is taken whenever it stays
    inside the current bracket and bisection is used otherwise.

    The scale is ``(sum w y^k / sum w) ** (1/k)`` at the returned shape.
    Returns ``(shape, scale, clamped, n_eval)``; ``clamped`` is True when the
    root lies outside ``[lo, hi]`` and an endpoint was returned.
    """
    mask = w != 0.0
    logy = np.ascontiguousarray(logy[mask])
    w = np.ascontiguousarray(w[mask])
    mean_logy = float((w * logy).sum() / w.sum())
    ref = float(logy.max())
    n_eval = 2
    g, _ = _shape_score(logy, w, mean_logy, ref, lo)
    if g >= 0.0:
        return lo, _scale(logy, w, ref, lo), True, 1
    g, _ = _shape_score(logy, w, mean_logy, ref, hi)
    if g <= 0.0:
        return hi, _scale(logy, w, ref, hi), True, 2
    tlo, thi = np.log(lo), np.log(hi)
    t = np.log(k0) if lo < k0 < hi else 0.5 * (tlo + thi)
    old_step = step = thi - tlo
    for _ in range(max_iter):
        g, dg = _shape_score(logy, w, mean_logy, ref, np.exp(t))
        n_eval += 1
        if g < 0.0:
            tlo = t
        elif g > 0.0:
            thi = t
        else:
            break
        t_new = t - g / dg
        if t_new <= tlo or t_new >= thi or abs(2.0 * g) > abs(old_step * dg):
            old_step = step
            step = 0.5 * (thi - tlo)
            t_new = tlo + step
        else:
            old_step = step
            step = t_new - t
        t = t_new
        if abs(step) < tol or thi - tlo < tol:
            break
    k = float(np.exp(t))
    return k, _scale(logy, w, ref, k), False, n_eval


def estep(logy, log_weights, scales, shapes):
    """Responsibilities and per-row log mixture density on the mirrored axis.

    Rows whose every component log density is -inf get zero responsibilities
    and a -inf row density; the caller decides how to report them.
    """
    log_scale = np.log(scales)
    d = logy[:, None] - log_scale[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        comp = (log_weights + np.log(shapes) - log_scale)[None, :] + (shapes - 1.0) * d - np.exp(shapes * d)
    m = comp.max(axis=1)
    bad = ~np.isfinite(m)
    m_safe = np.where(bad, 0.0, m)
    with np.errstate(invalid="ignore"):
        e = np.exp(comp - m_safe[:, None])
    s = e.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = e / s[:, None]
        row = m_safe + np.log(s)
    z[bad] = 0.0
    row[bad] = -np.inf
    return z, row
