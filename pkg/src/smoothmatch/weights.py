"""Boundary-vanishing weight functions for the matching criterion.

The criterion weight must be nonnegative, continuously differentiable, and
vanish near the ends of the observation window: kernel estimates are biased
within one bandwidth of the boundary, and the weight removes that region from
the match.  The shipped construction is a smooth plateau: identically one on
the middle of the window, tapering to zero before the endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import ParameterError

__all__ = ["WeightFunction", "make_plateau_weight"]


@dataclass(frozen=True)
class WeightFunction:
    """A nonnegative C^1 weight supported strictly inside (t_lo, t_hi).

    ``eval``/``deriv`` are vectorized callables in original time units.  The
    plateau construction maps t affinely onto u = margin_scale*(t-mid)/half
    and applies the taper profile there, so the support is
    mid +/- half/margin_scale.
    """

    c: float
    beta: float
    t_lo: float
    t_hi: float
    margin_scale: float
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]

    @property
    def support(self):
        """Open interval outside of which the weight vanishes."""
        mid = 0.5 * (self.t_lo + self.t_hi)
        half = 0.5 * (self.t_hi - self.t_lo)
        return (mid - half / self.margin_scale, mid + half / self.margin_scale)


def _taper_profile(u, c, beta):
    """Plateau profile: 1 on |u|<=c, smooth decay on c<|u|<1, 0 on |u|>=1."""
    u = np.abs(np.asarray(u, dtype=float))
    out = np.zeros_like(u)
    out[u <= c] = 1.0
    mid = (u > c) & (u < 1.0)
    if np.any(mid):
        um = u[mid]
        with np.errstate(over="ignore", under="ignore", divide="ignore"):
            inner = np.exp(-beta / (um - c) ** 2)
            out[mid] = np.exp(-beta * inner / (um - 1.0) ** 2)
    return out


def _taper_profile_deriv(u, c, beta):
    """Exact derivative of the plateau profile; zero outside the taper bands."""
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    out = np.zeros_like(au)
    mid = (au > c) & (au < 1.0)
    if np.any(mid):
        um = au[mid]
        with np.errstate(over="ignore", under="ignore", divide="ignore"):
            a = um - c
            d = um - 1.0
            inner = np.exp(-beta / a**2)
            g = inner / d**2
            gprime = inner * (2.0 * beta / (a**3 * d**2) - 2.0 / d**3)
            val = np.exp(-beta * g) * (-beta) * gprime
        # Underflow inside the taper produces exact zeros, which is the correct limit.
        out[mid] = np.where(np.isfinite(val), val, 0.0)
    return out * np.sign(u)


def make_plateau_weight(t_lo, t_hi, c=0.7, beta=0.5, margin_scale=1.05) -> WeightFunction:
    """Build the plateau weight on an observation window.

    Parameters
    ----------
    t_lo, t_hi : float
        Observation window, t_hi > t_lo.
    c : float in (0, 1)
        Fraction of the (rescaled) window on which the weight is exactly one.
    beta : float > 0
        Taper sharpness.
    margin_scale : float > 1
        Shrinks the support to mid +/- half/margin_scale, keeping the weight
        at exactly zero on a margin inside the window ends.

    Returns
    -------
    WeightFunction
    """
    t_lo = float(t_lo)
    t_hi = float(t_hi)
    if not t_hi > t_lo:
        raise ParameterError(f"t_hi must exceed t_lo, got ({t_lo}, {t_hi})")
    if not 0.0 < c < 1.0:
        raise ParameterError(f"c must lie in (0, 1), got {c}")
    if beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if margin_scale <= 1.0:
        raise ParameterError(f"margin_scale must exceed 1, got {margin_scale}")

    mid = 0.5 * (t_lo + t_hi)
    half = 0.5 * (t_hi - t_lo)
    scale = margin_scale / half

    def w(t):
        u = (np.asarray(t, dtype=float) - mid) * scale
        out = _taper_profile(u, c, beta)
        return out if out.ndim else float(out)

    def wprime(t):
        u = (np.asarray(t, dtype=float) - mid) * scale
        out = _taper_profile_deriv(u, c, beta) * scale
        return out if out.ndim else float(out)

    return WeightFunction(
        c=c,
        beta=beta,
        t_lo=t_lo,
        t_hi=t_hi,
        margin_scale=margin_scale,
        eval=w,
        deriv=wprime,
    )
