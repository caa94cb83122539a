"""Compactly supported smoothing kernels and a small quadrature utility.

Both shipped kernels live on [-1, 1], are symmetric, twice continuously
differentiable (the (1-t^2)^2 taper gives a double root at the endpoints), and
integrate to one.  A kernel "of order alpha" has vanishing moments
1..alpha-1, which reduces smoothing bias to O(b^alpha).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ParameterError

__all__ = [
    "Kernel",
    "kernel_gegenbauer4",
    "kernel_biweight2",
    "get_kernel",
    "adaptive_simpson",
    "kernel_diagnostics",
]


@dataclass(frozen=True)
class Kernel:
    """A smoothing kernel with an evaluable derivative.

    Attributes
    ----------
    name : str
        Registry name.
    order : int
        Moment order alpha: moments 1..alpha-1 vanish.
    eval : callable
        K(u); vectorized over ndarray input, zero outside [-1, 1].
    deriv : callable
        K'(u); exact derivative of ``eval``, zero outside [-1, 1].
    support : tuple of float
        Fixed to (-1.0, 1.0).
    """

    name: str
    order: int
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    support: tuple = field(default=(-1.0, 1.0))


def _masked_poly(coeffs):
    """Polynomial in u restricted to |u| <= 1, vanishing outside.

    ``coeffs`` are in numpy.polyval order (highest degree first).
    """

    def f(u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= 1.0
        out = np.where(inside, np.polyval(coeffs, u), 0.0)
        return out if out.ndim else float(out)

    return f


# Fourth-order kernel built from Gegenbauer polynomials orthonormal under the
# (1-t^2)^2 weight: (105/64 - 315/64 t^2)(1-t^2)^2 = (105/64)(1 - 5t^2 + 7t^4 - 3t^6).
_G4 = 105.0 / 64.0
_GEGENBAUER4_COEFFS = np.array([-3.0, 0.0, 7.0, 0.0, -5.0, 0.0, 1.0]) * _G4
_GEGENBAUER4_DERIV = np.array([-18.0, 0.0, 28.0, 0.0, -10.0, 0.0]) * _G4

# Second-order kernel with the same taper: the classical biweight (15/16)(1-t^2)^2.
_B2 = 15.0 / 16.0
_BIWEIGHT2_COEFFS = np.array([1.0, 0.0, -2.0, 0.0, 1.0]) * _B2
_BIWEIGHT2_DERIV = np.array([4.0, 0.0, -4.0, 0.0]) * _B2


def kernel_gegenbauer4() -> Kernel:
    """Fourth-order Gegenbauer kernel (105/64 - 315/64 t^2)(1-t^2)^2 on [-1, 1]."""
    return Kernel(
        name="gegenbauer4",
        order=4,
        eval=_masked_poly(_GEGENBAUER4_COEFFS),
        deriv=_masked_poly(_GEGENBAUER4_DERIV),
    )


def kernel_biweight2() -> Kernel:
    """Second-order biweight kernel (15/16)(1-t^2)^2 on [-1, 1]."""
    return Kernel(
        name="biweight2",
        order=2,
        eval=_masked_poly(_BIWEIGHT2_COEFFS),
        deriv=_masked_poly(_BIWEIGHT2_DERIV),
    )


_REGISTRY = {
    "gegenbauer4": kernel_gegenbauer4,
    "biweight2": kernel_biweight2,
    4: kernel_gegenbauer4,
    2: kernel_biweight2,
}


def get_kernel(kernel) -> Kernel:
    """Resolve a kernel from an instance, a registry name, or an order (2|4)."""
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return _REGISTRY[kernel]()
    except (KeyError, TypeError):
        raise ParameterError(
            f"unknown kernel {kernel!r}; expected a Kernel, one of "
            f"{sorted(k for k in _REGISTRY if isinstance(k, str))}, or an order in (2, 4)"
        ) from None


def adaptive_simpson(f, a, b, tol=1e-12, max_depth=40):
    """Adaptive Simpson quadrature of ``f`` over [a, b] to absolute tolerance ``tol``.

    Plain recursive bisection with the standard 1/15 Richardson error estimate.
    Sufficient for the low-degree polynomial integrands used in the kernel
    moment checks.
    """
    a = float(a)
    b = float(b)

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        fl = f(lmid)
        fr = f(rmid)
        left = simpson(lo, mid, flo, fl, fmid)
        right = simpson(mid, hi, fmid, fr, fhi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(lo, mid, flo, fl, fmid, left, eps / 2.0, depth - 1) + recurse(
            mid, hi, fmid, fr, fhi, right, eps / 2.0, depth - 1
        )

    mid = 0.5 * (a + b)
    fa, fm, fb = f(a), f(mid), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, max_depth)


def kernel_diagnostics(kernel, tol=1e-12):
    """Quadrature diagnostics for a kernel: mass, moments, endpoint values.

    Returns a dict with ``mass`` (integral of K), ``moments`` (list of
    integrals of u^l K(u) for l = 1..order), and the endpoint values of K and
    K' which must vanish for a twice continuously differentiable closure.
    """
    kernel = get_kernel(kernel)
    lo, hi = kernel.support
    mass = adaptive_simpson(lambda u: kernel.eval(u), lo, hi, tol=tol)
    moments = [
        adaptive_simpson(lambda u, ell=ell: (u**ell) * kernel.eval(u), lo, hi, tol=tol)
        for ell in range(1, kernel.order + 1)
    ]
    return {
        "name": kernel.name,
        "order": kernel.order,
        "mass": mass,
        "moments": moments,
        "endpoint_value": max(abs(kernel.eval(lo)), abs(kernel.eval(hi))),
        "endpoint_deriv": max(abs(kernel.deriv(lo)), abs(kernel.deriv(hi))),
    }
