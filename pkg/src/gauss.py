"""
Inverse normal CDF used to map unit-cube samples to standard Gaussian samples.
"""
from typing import Union

import numpy as np
from scipy.special import erfc

from errors import SpecError

ArrayLike = Union[float, np.ndarray]

EPSILON = 2.0 ** -53

# Acklam's rational approximation (relative error ~1.15e-9 before refinement)
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425

_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)


def norm_cdf(x: ArrayLike) -> ArrayLike:
    """Standard normal CDF via the complementary error function"""
    return 0.5 * erfc(-np.asarray(x, dtype=np.float64) / _SQRT2)


def _lower_half_guess(q: np.ndarray) -> np.ndarray:
    """Rational approximation for q in (0, 0.5]"""
    x = np.empty_like(q)

    tail = q < _P_LOW
    if tail.any():
        t = np.sqrt(-2.0 * np.log(q[tail]))
        num = ((((_C[0] * t + _C[1]) * t + _C[2]) * t + _C[3]) * t + _C[4]) * t + _C[5]
        den = (((_D[0] * t + _D[1]) * t + _D[2]) * t + _D[3]) * t + 1.0
        x[tail] = num / den

    central = ~tail
    if central.any():
        s = q[central] - 0.5
        r = s * s
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * s
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[central] = num / den
    return x


def _halley_step(x: np.ndarray, q: np.ndarray) -> np.ndarray:
    e = norm_cdf(x) - q
    t = e * _SQRT2PI * np.exp(0.5 * x * x)
    return x - t / (1.0 + 0.5 * x * t)


def inv_norm_cdf(u: ArrayLike) -> ArrayLike:
    """
    Quantile function of the standard normal distribution.

    Works on min(u, 1-u) so that the result is antisymmetric about 0.5, then
    refines the rational approximation with one Halley step.

    Args:
        u: Probability or array of probabilities, strictly inside (0, 1)

    Returns:
        Gaussian quantile(s), same shape as u
    """
    values = np.asarray(u, dtype=np.float64)
    if np.any(np.isnan(values)) or np.any(values <= 0.0) or np.any(values >= 1.0):
        raise SpecError("inv_norm_cdf requires 0 < u < 1")
    flat = values.reshape(-1)
    q = np.minimum(flat, 1.0 - flat)
    x = _halley_step(_lower_half_guess(q), q)
    x = np.where(flat > 0.5, -x, x)
    if values.ndim == 0:
        return float(x[0])
    return x.reshape(values.shape)


def sanitize_and_transform(raw: np.ndarray) -> np.ndarray:
    """Clamp unit-cube coordinates into [2^-53, 1 - 2^-53] and map them to N(0, 1)"""
    clipped = np.clip(np.asarray(raw, dtype=np.float64), EPSILON, 1.0 - EPSILON)
    return inv_norm_cdf(clipped)
