"""The free lattice propagator T_r = exp(i r Delta) and its kernel.

Three interchangeable application methods:

* ``taylor_scaled`` -- the norm-convergent exponential series applied to the
  banded Laplacian, with scaling (substeps keep 4|r'| <= 1) so intermediate
  terms never amplify roundoff.  Unconditionally convergent since
  ||Delta|| <= 4; this is the ground truth the other two are checked against.
* ``closed_kernel`` -- the kernel in closed form from the Fourier symbol
  2 cos(theta) - 2:  <x|T_r|y> = exp(-2ir) i^{|n|} J_{|n|}(2r) with n = x - y.
  Validated entry-by-entry against the series before first use.
* ``spectral_ring`` -- diagonalization on a periodic ring large enough that
  the wrap-around amplitude (kernel bound at the alias distance) is below
  tolerance.  Fastest path; exactly unitary on the ring.

The kernel obeys |<x|T_r|y>| <= min(1, e^{4|r|} (4|r|)^{|x-y|} / |x-y|!),
which sizes every truncation margin in the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lgamma, log
from typing import Optional

import numpy as np
import scipy.fft as sfft
from scipy.special import jv

from dmsoliton.field import LatticeField

_SERIES_CAP = 400


class EvolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvolutionMethod:
    """How to apply T_r.  margin=None sizes the buffer from the kernel bound."""

    variant: str = "taylor_scaled"
    series_tolerance: float = 1e-14
    margin: Optional[int] = None

    def __post_init__(self):
        if self.variant not in ("taylor_scaled", "closed_kernel", "spectral_ring"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.series_tolerance > 0:
            raise ValueError("series_tolerance must be positive")
        if self.margin is not None and self.margin < 0:
            raise ValueError("margin must be >= 0")


def kernel_bound(r: float, n: int) -> float:
    """min(1, e^{4|r|} (4|r|)^n / n!), evaluated in log space."""
    n = abs(int(n))
    r = abs(r)
    if r == 0.0:
        return 1.0 if n == 0 else 0.0
    ln = 4.0 * r + n * log(4.0 * r) - lgamma(n + 1)
    return min(1.0, np.exp(ln)) if ln < 700 else 1.0


def required_margin(r: float, tol: float) -> int:
    """Smallest m with e^{4|r|}(4|r|)^m/m! < tol.

    Amplitude leaked beyond support+m by T_r is then below tol.  At r = 0 the
    bound vanishes for every m >= 1, so the function returns 1.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    r = abs(r)
    m = 0
    while True:
        if r == 0.0:
            b = 1.0 if m == 0 else 0.0
        else:
            b = np.exp(min(4.0 * r + m * log(4.0 * r) - lgamma(m + 1), 700.0))
        if b < tol:
            return m
        m += 1
        if m > 100000:
            raise EvolutionError("required_margin: no margin satisfies tol")


def transport_margin(r: float, tol: float = 1e-13) -> int:
    """Smallest m with |J_m(2|r|)| < tol, i.e. the actual reach of T_r.

    Much tighter than required_margin for large r (roughly 2|r| plus an Airy
    correction instead of ~4|r| e); used to size long-horizon work boxes.
    """
    r = abs(r)
    if r == 0.0:
        return 1
    m = max(1, int(np.ceil(2.0 * r)))
    while abs(jv(m, 2.0 * r)) >= tol:
        m += 1
        if m > 100000:
            raise EvolutionError("transport_margin: no margin satisfies tol")
    return m + 4


# -- Taylor series ------------------------------------------------------------

def _taylor_apply_raw(values: np.ndarray, r: float, tol: float) -> np.ndarray:
    """One unscaled series pass sum_k (ir)^k/k! Delta^k v on a fixed array.

    Assumes 4|r| is small enough that the largest term does not amplify
    roundoff (callers split r into substeps).  The Laplacian is applied with
    zero boundary; the induced error is controlled by the caller's padding.
    """
    acc = values.astype(np.complex128, copy=True)
    term = values.astype(np.complex128, copy=True)
    scale = max(np.max(np.abs(values)), 1e-300)
    coef_bound = 1.0
    k = 0
    while True:
        k += 1
        if k > _SERIES_CAP:
            raise EvolutionError(
                "Taylor series did not converge within the iteration cap "
                "(series_tolerance too tight for this r)")
        lap = np.empty_like(term)
        lap[:] = -2.0 * term
        lap[:-1] += term[1:]
        lap[1:] += term[:-1]
        term = (1j * r / k) * lap
        acc += term
        coef_bound *= 4.0 * abs(r) / k
        if coef_bound < tol and np.max(np.abs(term)) < tol * scale:
            return acc


def _taylor_apply(values: np.ndarray, r: float, tol: float) -> np.ndarray:
    """exp(i r Delta) v on a fixed array, scaled into substeps with 4|r'| <= 1."""
    if r == 0.0:
        return values.astype(np.complex128, copy=True)
    n_sub = max(1, int(np.ceil(4.0 * abs(r))))
    sub_r = r / n_sub
    out = values
    for _ in range(n_sub):
        out = _taylor_apply_raw(out, sub_r, tol)
    return out


# -- closed-form kernel --------------------------------------------------------

def kernel_entry_closed(r: float, n: int) -> complex:
    """<x|T_r|y> = e^{-2ir} i^{|n|} J_{|n|}(2r), n = x - y."""
    n = abs(int(n))
    return complex(np.exp(-2j * r) * (1j ** n) * jv(n, 2.0 * r))


_closed_kernel_validated: set = set()


def _validate_closed_kernel(r: float, n_max: int, tol: float = 1e-10) -> None:
    """Check the Bessel kernel against the series oracle before first use."""
    key = (round(float(r), 12), int(n_max))
    if key in _closed_kernel_validated:
        return
    col = _taylor_column(r, n_max, 1e-14)
    for n in range(n_max + 1):
        if abs(col[n] - kernel_entry_closed(r, n)) > tol:
            raise EvolutionError(
                f"closed-form kernel disagrees with series at r={r}, n={n}")
    _closed_kernel_validated.add(key)


def _taylor_column(r: float, n_max: int, tol: float) -> np.ndarray:
    """Series evaluation of <n|T_r|0> for n = 0..n_max."""
    pad = required_margin(r, min(tol, 1e-14)) + 4
    m = n_max + pad
    v = np.zeros(2 * m + 1, dtype=np.complex128)
    v[m] = 1.0
    col = _taylor_apply(v, r, tol)
    return col[m:m + n_max + 1]


def kernel_entry(r: float, n: int, series_tolerance: float = 1e-14) -> complex:
    """<x|T_r|y> for n = x - y, summed from the exponential series.

    Validated range |r| <= 16; larger r raises.
    """
    if abs(r) > 16:
        raise EvolutionError("kernel_entry validated only for |r| <= 16")
    n = abs(int(n))
    return complex(_taylor_column(r, n, series_tolerance)[n])


# -- ring (FFT) application ----------------------------------------------------

def _ring_size(n_sites: int, wrap_pad: int) -> int:
    return sfft.next_fast_len(n_sites + wrap_pad)


def _ring_symbol(r: float, ring: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(ring) / ring
    return np.exp(1j * r * (2.0 * np.cos(theta) - 2.0))


def _to_ring(values: np.ndarray, box_radius: int, ring: int) -> np.ndarray:
    buf = np.zeros(ring, dtype=np.complex128)
    idx = (np.arange(-box_radius, box_radius + 1)) % ring
    buf[idx] = values
    return buf


def _from_ring(buf: np.ndarray, box_radius: int) -> np.ndarray:
    ring = buf.shape[-1]
    idx = (np.arange(-box_radius, box_radius + 1)) % ring
    return buf[..., idx]


# -- public application ---------------------------------------------------------

def apply_evolution(r: float, f: LatticeField, method: EvolutionMethod = EvolutionMethod(),
                    tail_floor: float = 1e-12) -> LatticeField:
    """T_r f with the output box grown by the method's margin.

    Raises EvolutionError when an explicitly supplied margin would leak
    amplitude above tail_floor.
    """
    if method.margin is None:
        margin = required_margin(r, min(method.series_tolerance, 1e-13))
    else:
        margin = method.margin
        if kernel_bound(r, margin + 1) > tail_floor:
            raise EvolutionError(
                f"margin {margin} leaks amplitude "
                f"{kernel_bound(r, margin + 1):.3e} > tail_floor {tail_floor:.3e}")
    m_out = f.box_radius + margin
    if r == 0.0:
        return f.with_box(m_out)

    if method.variant == "taylor_scaled":
        # extra padding keeps the zero-boundary series accurate inside m_out
        extra = required_margin(r, min(method.series_tolerance, 1e-14)) + 4
        vals = f.with_box(m_out + extra).values
        out = _taylor_apply(vals, r, method.series_tolerance)
        return LatticeField(m_out + extra, out).with_box(m_out)

    if method.variant == "closed_kernel":
        n_max = 2 * f.box_radius + margin
        _validate_closed_kernel(r, min(n_max, 60))
        ns = np.arange(-n_max - 1, n_max + 2)
        kern = np.exp(-2j * r) * (1j ** np.abs(ns)) * jv(np.abs(ns), 2.0 * r)
        conv = np.convolve(f.values, kern)
        # conv index c corresponds to site c - (f.box_radius + n_max + 1)
        c0 = f.box_radius + n_max + 1
        return LatticeField(m_out, conv[c0 - m_out:c0 + m_out + 1])

    # spectral_ring
    wrap_pad = required_margin(r, min(method.series_tolerance, 1e-14))
    ring = _ring_size(2 * m_out + 1, wrap_pad)
    alias_distance = ring - 2 * m_out
    if kernel_bound(r, alias_distance) > max(method.series_tolerance, 1e-15):
        raise EvolutionError("spectral_ring: wrap-around bound above tolerance")
    buf = _to_ring(f.values, f.box_radius, ring)
    out = sfft.ifft(sfft.fft(buf) * _ring_symbol(r, ring))
    return LatticeField(m_out, _from_ring(out, m_out))


# -- cached multi-shift plan -----------------------------------------------------

class PropagatorSet:
    """Cached application of {T_{r_j}} and the weighted adjoint sum on a fixed box.

    Built once per (measure, box) pair; N and its gradient call it thousands
    of times during optimization.  All variants share the interface:

      forward(values)            -> U with U[j] = T_{r_j} f   (length n_out)
      adjoint_weighted(W, w)     -> sum_j w_j T_{-r_j} W[j]   (length n_out)
    """

    def __init__(self, rs, in_radius: int, method: EvolutionMethod = EvolutionMethod("spectral_ring")):
        self.rs = np.asarray(rs, dtype=float)
        self.in_radius = int(in_radius)
        self.method = method
        tol = min(method.series_tolerance, 1e-14)
        b_max = float(np.max(np.abs(self.rs))) if self.rs.size else 0.0
        self.margin = required_margin(b_max, tol) if method.margin is None else method.margin
        self.out_radius = self.in_radius + self.margin
        self.n_out = 2 * self.out_radius + 1
        if method.variant == "spectral_ring":
            wrap_pad = required_margin(b_max, tol)
            self.ring = _ring_size(self.n_out, wrap_pad)
            self.symbols = np.stack([_ring_symbol(r, self.ring) for r in self.rs])
            self._idx_in = (np.arange(-self.in_radius, self.in_radius + 1)) % self.ring
            self._idx_out = (np.arange(-self.out_radius, self.out_radius + 1)) % self.ring
        elif method.variant == "closed_kernel":
            n_max = 2 * self.in_radius + self.margin
            self._kerns = []
            for r in self.rs:
                _validate_closed_kernel(float(r), min(n_max, 60))
                ns = np.arange(-n_max - 1, n_max + 2)
                self._kerns.append(np.exp(-2j * r) * (1j ** np.abs(ns)) * jv(np.abs(ns), 2.0 * r))
        # taylor_scaled needs no precomputation

    # forward: values on the *input* box
    def forward(self, values: np.ndarray) -> np.ndarray:
        if self.method.variant == "spectral_ring":
            buf = np.zeros(self.ring, dtype=np.complex128)
            buf[self._idx_in] = values
            u = sfft.ifft(sfft.fft(buf)[None, :] * self.symbols, axis=1)
            return u[:, self._idx_out]
        out = np.empty((self.rs.size, self.n_out), dtype=np.complex128)
        for j, r in enumerate(self.rs):
            out[j] = self._single(values, float(r))
        return out

    # adjoint_weighted: W on the *output* box, returns on the output box
    def adjoint_weighted(self, w_fields: np.ndarray, weights: np.ndarray) -> np.ndarray:
        if self.method.variant == "spectral_ring":
            buf = np.zeros((self.rs.size, self.ring), dtype=np.complex128)
            buf[:, self._idx_out] = w_fields
            spec = sfft.fft(buf, axis=1) * np.conj(self.symbols)
            acc = sfft.ifft(np.tensordot(np.asarray(weights, dtype=float), spec, axes=(0, 0)))
            return acc[self._idx_out]
        acc = np.zeros(self.n_out, dtype=np.complex128)
        for j, r in enumerate(self.rs):
            acc += weights[j] * self._single_out(w_fields[j], -float(r))
        return acc

    def _single(self, values: np.ndarray, r: float) -> np.ndarray:
        f = LatticeField(self.in_radius, values)
        g = apply_evolution(r, f, EvolutionMethod(self.method.variant,
                                                  self.method.series_tolerance,
                                                  None))
        return g.with_box(self.out_radius).values

    def _single_out(self, values: np.ndarray, r: float) -> np.ndarray:
        f = LatticeField(self.out_radius, values)
        g = apply_evolution(r, f, EvolutionMethod(self.method.variant,
                                                  self.method.series_tolerance,
                                                  None))
        return g.with_box(self.out_radius).values
