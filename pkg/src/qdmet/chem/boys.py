"""Boys function F_m(x) = int_0^1 t^(2m) exp(-x t^2) dt."""
from __future__ import annotations

import numpy as np
from scipy.special import erf

_SERIES_CUTOFF = 25.0
_SERIES_TERMS = 160


def boys_table(m_max, x):
    """Return F_0..F_m_max evaluated at ``x`` (scalar or array).

    Output shape is ``(m_max + 1,) + np.shape(x)``.  The top order comes from
    the power series (x < 25) followed by downward recurrence.  For x >= 25
    F_0 is taken from its erf closed form and raised by upward recurrence,
    which is stable there and keeps the recurrence exact.
    """
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    out = np.empty((m_max + 1,) + flat.shape)
    ex = np.exp(-flat)
    small = flat < _SERIES_CUTOFF
    if small.any():
        xs = flat[small]
        # e^-x * sum_k (2x)^k / ((2m+1)(2m+3)...(2m+2k+1))
        term = np.full_like(xs, 1.0 / (2 * m_max + 1))
        total = term.copy()
        for k in range(1, _SERIES_TERMS):
            term = term * (2.0 * xs) / (2 * m_max + 2 * k + 1)
            total += term
        fs = np.empty((m_max + 1, xs.size))
        fs[m_max] = ex[small] * total
        for m in range(m_max - 1, -1, -1):
            fs[m] = (2.0 * xs * fs[m + 1] + ex[small]) / (2 * m + 1)
        out[:, small] = fs
    if (~small).any():
        xl = flat[~small]
        el = ex[~small]
        fl = np.empty((m_max + 1, xl.size))
        fl[0] = 0.5 * np.sqrt(np.pi / xl) * erf(np.sqrt(xl))
        for m in range(m_max):
            fl[m + 1] = ((2 * m + 1) * fl[m] - el) / (2.0 * xl)
        out[:, ~small] = fl
    return out.reshape((m_max + 1,) + x.shape)


def boys(m: int, x: float) -> float:
    if m < 0 or x < 0:
        raise ValueError("boys requires m >= 0 and x >= 0")
    return float(boys_table(m, x)[m])
