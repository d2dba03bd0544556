"""Pure-NumPy implementations of the elementary lattice kernels.

This module mirrors the API of the compiled core (``dmsoliton._core``) and is
selected at import time when the extension is unavailable or when
``DMSOLITON_FORCE_PY=1`` is set.  Scalar reductions (norms, inner products)
use ``math.fsum``, which returns the correctly rounded sum; the fused
array reductions use NumPy's pairwise summation, accurate to a few ulp at
the sizes this package works with.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def sum_compensated(x: np.ndarray) -> float:
    """Correctly rounded sum of a real array."""
    return math.fsum(np.asarray(x, dtype=float))


def l2_norm_sq(z: np.ndarray) -> float:
    """Compensated sum of |z_i|^2."""
    z = np.ascontiguousarray(z)
    if np.iscomplexobj(z):
        return math.fsum(z.real * z.real) + math.fsum(z.imag * z.imag)
    return math.fsum(z * z)


def inner(f: np.ndarray, g: np.ndarray) -> complex:
    """Conjugate-linear-in-first-slot inner product, compensated."""
    if f.shape != g.shape:
        raise ValueError("inner: shape mismatch")
    p = np.conj(f) * g
    return complex(math.fsum(p.real), math.fsum(p.imag))


def abs_pow_sum(z: np.ndarray, p: float) -> float:
    """Compensated sum of |z_i|^p."""
    return math.fsum(np.abs(z) ** p)


def abs_max(z: np.ndarray) -> float:
    a = np.abs(z)
    return float(a.max()) if a.size else 0.0


def laplacian(z: np.ndarray) -> np.ndarray:
    """(Delta f)(x) = f(x+1) - 2 f(x) + f(x-1) with zero extension.

    Input of length n maps to output of length n + 2 (support grows by one
    site on each side).
    """
    z = np.asarray(z, dtype=np.complex128)
    out = np.zeros(z.size + 2, dtype=np.complex128)
    out[:-2] += z
    out[1:-1] -= 2.0 * z
    out[2:] += z
    return out


def forward_diff(z: np.ndarray) -> np.ndarray:
    """(D+ f)(x) = f(x+1) - f(x); output padded to length n + 2."""
    z = np.asarray(z, dtype=np.complex128)
    out = np.zeros(z.size + 2, dtype=np.complex128)
    out[:-2] += z
    out[1:-1] -= z
    return out


def backward_diff(z: np.ndarray) -> np.ndarray:
    """(D- f)(x) = f(x) - f(x-1); output padded to length n + 2."""
    z = np.asarray(z, dtype=np.complex128)
    out = np.zeros(z.size + 2, dtype=np.complex128)
    out[1:-1] += z
    out[2:] -= z
    return out


def nonlin_value_sum(u: np.ndarray, w: np.ndarray, coeffs: np.ndarray,
                     expos: np.ndarray) -> float:
    """sum_j w_j sum_x V(|u[j, x]|) for V(a) = sum_t coeffs[t] a^expos[t]."""
    a = np.abs(u)
    per_atom = np.zeros(u.shape[0])
    for c, s in zip(coeffs, expos):
        per_atom += c * np.sum(a ** s, axis=-1)
    return float(np.dot(np.asarray(w, dtype=float), per_atom))


def nonlin_apply_p(u: np.ndarray, coeffs: np.ndarray, expos: np.ndarray) -> np.ndarray:
    """P(z) = V'(|z|) sgn(z) applied elementwise; exponents must exceed 2.

    For V(a) = sum_t c_t a^{s_t} this is sum_t c_t s_t |z|^{s_t - 2} z, which
    is continuous at z = 0 because every s_t > 2.
    """
    a = np.abs(u)
    mult = np.zeros_like(a)
    for c, s in zip(coeffs, expos):
        mult += (c * s) * a ** (s - 2.0)
    return mult * u
