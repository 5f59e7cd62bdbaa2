"""Small numerical routines shared across the package."""

from __future__ import annotations

import numpy as np

_INV_E = np.exp(-1.0)


def lambert_w_m1(z):
    """Lower branch W_{-1} of the Lambert W function on [-1/e, 0).

    Solves w * exp(w) = z for the branch with w <= -1. Uses a series
    guess near the branch point z = -1/e and the asymptotic guess
    log(-z) - log(-log(-z)) near zero, then Newton iterations on
    f(w) = w e^w - z until the step is below 1e-12 in relative terms.

    Accepts scalars or arrays; returns -inf for z == 0 (the limit) and
    nan outside [-1/e, 0].
    """
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)

    w = np.full(z.shape, np.nan)
    w[z == 0.0] = -np.inf

    ok = (z >= -_INV_E) & (z < 0.0)
    zv = z[ok]

    # Branch-point expansion for z close to -1/e, asymptotic guess otherwise.
    p2 = np.maximum(2.0 * (1.0 + np.e * zv), 0.0)
    p = np.sqrt(p2)
    near = p < 0.5
    guess = np.empty_like(zv)
    pn = p[near]
    guess[near] = -1.0 - pn - pn**2 / 3.0 - 11.0 * pn**3 / 72.0
    lz = np.log(-zv[~near])
    guess[~near] = lz - np.log(-lz)

    wk = guess
    for _ in range(100):
        ew = np.exp(wk)
        f = wk * ew - zv
        denom = ew * (wk + 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(denom != 0.0, f / denom, 0.0)
        # Keep iterates on the branch (w <= -1).
        step = np.where(wk - step > -1.0, wk + 1.0, step)
        wk = wk - step
        if np.all(np.abs(step) <= 1e-12 * np.abs(wk)):
            break
    w[ok] = wk

    return float(w[0]) if scalar else w


def as_rng(seed) -> np.random.Generator:
    """Coerce an int seed, Generator, or None into a numpy Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
