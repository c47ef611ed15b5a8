"""Least-squares power-law fits for convergence diagnostics."""

from __future__ import annotations

import numpy as np


def fit_order(steps, errors):
    """Fit errors ~ C * steps**p in log-log coordinates.

    Returns (order, log_prefactor, max_residual): the slope p, the intercept
    log(C), and the largest absolute deviation of log(errors) from the fit.
    Zero or negative entries are rejected (they carry no order information).
    """
    h = np.asarray(steps, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.size != e.size or h.size < 3:
        raise ValueError("need at least three matching samples")
    if np.any(h <= 0.0) or np.any(e <= 0.0):
        raise ValueError("steps and errors must be strictly positive")
    lx = np.log(h)
    ly = np.log(e)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.max(np.abs(ly - (slope * lx + intercept))))
    return float(slope), float(intercept), resid
