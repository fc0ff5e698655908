"""Beta-divergence and the multiplicative-update building blocks.

Every factorization in the package (training, extraction, detection and
parameter estimation) is assembled from :func:`beta_terms` and
:func:`mu_step`; objectives are evaluated with :func:`total_divergence`.
"""

import math

import numpy as np

from . import kernels

EPS = 1e-12
"""Floor applied to MU denominators and to magnitudes raised to negative powers."""

__all__ = [
    "EPS",
    "beta_divergence",
    "total_divergence",
    "elementwise_power",
    "beta_terms",
    "mu_step",
]


def beta_divergence(a, b, beta):
    """Scalar beta-divergence ``d_beta(a | b)``.

    Uses the closed forms for ``beta == 0`` (Itakura-Saito) and
    ``beta == 1`` (Kullback-Leibler) and the generic expression otherwise,
    evaluated in a form that stays accurate for beta close to 0 or 1.

    Raises
    ------
    ValueError
        If ``b <= 0``, ``a < 0``, or the divergence is unbounded
        (``a == 0`` with ``beta <= 0``).
    """
    a = float(a)
    b = float(b)
    beta = float(beta)
    if not math.isfinite(beta):
        raise ValueError("beta must be finite")
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    if a < 0:
        raise ValueError(f"a must be nonnegative, got {a}")
    if a == b:
        return 0.0
    if beta == 0:
        if a == 0:
            raise ValueError("d_0(0|b) is infinite (Itakura-Saito needs a > 0)")
        r = a / b
        return r - math.log(r) - 1.0
    if beta == 1:
        if a == 0:
            return b
        return a * math.log(a / b) + b - a
    if a == 0:
        if beta < 0:
            raise ValueError(f"d_beta(0|b) is infinite for beta={beta}")
        return b**beta / beta
    # generic expression rearranged around expm1 so that it tends smoothly
    # to the closed forms instead of cancelling as beta -> 0 or 1
    u = math.log(a / b)
    if beta < 0.5:
        return (b**beta * math.expm1(beta * u) / beta - a * b ** (beta - 1.0) + b**beta) / (beta - 1.0)
    g = beta - 1.0
    return (a * b**g * (math.expm1(g * u) / g - 1.0) + b**beta) / beta


def total_divergence(A, B, beta):
    """Sum of ``d_beta(A_ij | B_ij)`` over all entries.

    ``B`` is floored at :data:`EPS`. Shapes must match exactly.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    if np.any(A < 0):
        raise ValueError("A must be nonnegative")
    val = kernels.beta_div_sum(A, B, float(beta))
    if not np.isfinite(val):
        raise ValueError(f"divergence is infinite for beta={beta} (zero entries in A)")
    return val


def elementwise_power(Z, p):
    """Raise entries to the real power ``p`` keeping their phase.

    Complex entries map to ``|z|**p * exp(1j*angle(z))``; real nonnegative
    input gives the ordinary power. Magnitudes are floored at :data:`EPS`
    when ``p < 0``.
    """
    Z = np.asarray(Z)
    if not np.iscomplexobj(Z):
        Zr = Z.astype(np.float64)
        if np.all(Zr >= 0):
            if p < 0:
                Zr = np.maximum(Zr, EPS)
            return Zr**p
        Z = Zr.astype(np.complex128)
    Z = Z.astype(np.complex128)
    mag = np.abs(Z)
    # the phase of an exact zero is taken as angle 0
    phase = np.ones_like(Z)
    nz = mag > 0
    phase[nz] = Z[nz] / mag[nz]
    if p < 0:
        mag = np.maximum(mag, EPS)
    return mag**p * phase


def beta_terms(obs, model, beta):
    """Negative and positive gradient parts ``(obs * model**(b-2), model**(b-1))``.

    ``model`` is floored at :data:`EPS`; these are the two arrays that the
    matrix products of every MU rule contract against.
    """
    return kernels.beta_terms(obs, model, float(beta))


def mu_step(numerator, denominator, factor):
    """One multiplicative update: ``factor * numerator / denominator``.

    The denominator is floored at :data:`EPS`, so nonnegative inputs give
    a nonnegative output and zero entries of ``factor`` stay zero.
    """
    numerator = np.asarray(numerator)
    denominator = np.asarray(denominator, dtype=np.float64)
    factor = np.asarray(factor)
    if not (numerator.shape == denominator.shape == factor.shape):
        raise ValueError(
            f"shape mismatch: {numerator.shape}, {denominator.shape}, {factor.shape}"
        )
    return factor * (numerator / np.maximum(denominator, EPS))
