"""Least-squares rate fits for power and logarithmic decay laws."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LAWS = ("power", "log")


@dataclass(frozen=True)
class RateFit:
    coefficient: float
    exponent: float
    r2: float
    law: str

    def as_tuple(self):
        return self.coefficient, self.exponent, self.r2


def fit_rate(xs, ys, law: str = "power") -> RateFit:
    """Fit ``y = C * s(x)**p`` by least squares in log coordinates.

    ``law="power"`` uses s(x) = x; ``law="log"`` uses s(x) = 1/|log x|, the
    natural scale for two-dimensional capacity-type decay.
    """
    if law not in LAWS:
        raise ValueError(f"unknown law {law!r}; expected one of {LAWS}")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-D arrays of equal length")
    if len(xs) < 3:
        raise ValueError("at least three points are needed for a rate fit")
    if np.any(ys <= 0) or np.any(xs <= 0):
        raise ValueError("rate fits need positive values")
    if law == "log":
        if np.any(xs == 1.0):
            raise ValueError("log law undefined at x = 1")
        s = 1.0 / np.abs(np.log(xs))
    else:
        s = xs
    X = np.log(s)
    Y = np.log(ys)
    A = np.stack([np.ones_like(X), X], -1)
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - A @ coef
    ss_tot = np.sum((Y - Y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(np.exp(coef[0])), float(coef[1]), float(r2), law)
