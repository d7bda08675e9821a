"""Truncated Taylor series arithmetic.

A series is an array ``c`` of shape ``(K+1, ...)`` holding the coefficients
``c[k] = f^(k)(t0) / k!``; trailing axes broadcast, so many expansion points
are handled at once.
"""

from __future__ import annotations

import math

import numpy as np


def order(c):
    return c.shape[0] - 1


def mul(a, b):
    K = min(order(a), order(b))
    out = np.zeros((K + 1,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]), dtype=np.result_type(a, b))
    for k in range(K + 1):
        for j in range(k + 1):
            out[k] = out[k] + a[j] * b[k - j]
    return out


def reciprocal(a):
    a0 = a[0]
    K = order(a)
    out = np.zeros_like(a, dtype=np.result_type(a, float))
    out[0] = 1.0 / a0
    for k in range(1, K + 1):
        s = 0
        for j in range(1, k + 1):
            s = s + a[j] * out[k - j]
        out[k] = -s / a0
    return out


def div(a, b):
    return mul(a, reciprocal(b))


def power(a, p):
    """``a**p`` for real ``p``; requires ``a[0] != 0`` (principal branch)."""
    a0 = a[0]
    K = order(a)
    out = np.zeros_like(a, dtype=np.result_type(a, float))
    out[0] = a0 ** p
    for k in range(1, K + 1):
        s = 0
        for j in range(1, k + 1):
            s = s + ((p + 1) * j - k) * a[j] * out[k - j]
        out[k] = s / (k * a0)
    return out


def exp(a):
    K = order(a)
    out = np.zeros_like(a, dtype=np.result_type(a, float))
    out[0] = np.exp(a[0])
    for k in range(1, K + 1):
        s = 0
        for j in range(1, k + 1):
            s = s + j * a[j] * out[k - j]
        out[k] = s / k
    return out


def polynomial_shift(coeffs, z0, K):
    """Taylor coefficients of ``p(z0 + h)`` up to ``h^K``.

    ``coeffs`` are in increasing degree: ``p(z) = sum coeffs[d] z^d``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    out = np.zeros(K + 1, dtype=complex)
    for d, c in enumerate(coeffs):
        if c == 0:
            continue
        for k in range(min(d, K) + 1):
            out[k] += c * math.comb(d, k) * z0 ** (d - k)
    return out


def linear_exp(rate, K):
    """Series of ``exp(rate * h)`` in ``h``."""
    rate = np.asarray(rate)
    return np.array([rate ** k / math.factorial(k) for k in range(K + 1)])


def derivatives(c):
    """Convert Taylor coefficients to derivative values ``f^(k)(t0)``."""
    f = np.array([math.factorial(k) for k in range(order(c) + 1)], dtype=float)
    return c * f.reshape((-1,) + (1,) * (c.ndim - 1))
