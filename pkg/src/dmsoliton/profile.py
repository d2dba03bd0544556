"""Diffraction measures built from physical profiles, and the nonlinearity registry.

The measure mu is always represented atomically: continuous pushforward
densities enter through Gauss-Legendre quadrature per profile segment, which
converges spectrally because the integrands the package cares about are
entire in r.  The nonlinearity V is a signed power sum by default, with an
extension point for user-supplied (V, V') pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from dmsoliton.backend import kernels


# -- diffraction measure -------------------------------------------------------

@dataclass(frozen=True)
class DiffractionMeasure:
    """Finite atomic measure: nodes r_j with nonnegative weights w_j, support in [-B, B]."""

    nodes: Tuple[float, ...]
    weights: Tuple[float, ...]
    support_bound: float

    def __post_init__(self):
        if len(self.nodes) == 0:
            raise ValueError("measure needs at least one atom")
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights must have equal length")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if any(abs(r) > self.support_bound + 1e-12 for r in self.nodes):
            raise ValueError("node outside declared support bound")

    @property
    def total_mass(self) -> float:
        return kernels.sum_compensated(np.asarray(self.weights))

    def is_probability(self, tol: float = 1e-12) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    def moment(self, k: int) -> float:
        r = np.asarray(self.nodes)
        w = np.asarray(self.weights)
        return kernels.sum_compensated(w * r ** k)

    @staticmethod
    def dirac(r: float = 0.0) -> "DiffractionMeasure":
        return DiffractionMeasure((float(r),), (1.0,), abs(float(r)))

    @staticmethod
    def from_atoms(atoms: Sequence[Tuple[float, float]]) -> "DiffractionMeasure":
        nodes = tuple(float(r) for r, _ in atoms)
        weights = tuple(float(w) for _, w in atoms)
        b = max(abs(r) for r in nodes)
        return DiffractionMeasure(nodes, weights, b)


# -- piecewise-constant diffraction profile -------------------------------------

@dataclass(frozen=True)
class PiecewiseProfile:
    """d0 on one period: piecewise constant, segments = ((length, value), ...)."""

    period: float
    segments: Tuple[Tuple[float, float], ...]
    mean_zero: bool = True

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")
        if not self.segments:
            raise ValueError("profile needs at least one segment")
        if any(l <= 0 for l, _ in self.segments):
            raise ValueError("segment lengths must be positive")
        total = sum(l for l, _ in self.segments)
        if abs(total - self.period) > 1e-12 * max(1.0, self.period):
            raise ValueError(f"segment lengths sum to {total}, expected {self.period}")
        if self.mean_zero:
            mean = sum(l * v for l, v in self.segments)
            if abs(mean) > 1e-12 * max(1.0, self.period):
                raise ValueError(f"profile declared mean-zero but integral is {mean}")

    def breakpoints(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([l for l, _ in self.segments])])

    def value(self, s: float) -> float:
        """d0(s) with periodic extension."""
        s = s % self.period
        t = 0.0
        for l, v in self.segments:
            if s < t + l:
                return v
            t += l
        return self.segments[-1][1]

    def integral(self, s: float) -> float:
        """D(s) = int_0^s d0, exact for piecewise-constant d0, any real s."""
        whole, rem = divmod(s, self.period)
        acc = whole * sum(l * v for l, v in self.segments)
        t = 0.0
        for l, v in self.segments:
            if rem <= t + l:
                acc += v * (rem - t)
                break
            acc += v * l
            t += l
        return acc

    def max_abs_integral(self) -> float:
        """B = sup_{s in [0, L]} |D(s)|; D is piecewise linear so breakpoints suffice."""
        return max(abs(self.integral(b)) for b in self.breakpoints())

    @staticmethod
    def model_case() -> "PiecewiseProfile":
        """The standard zigzag: +1 on [0,1), -1 on [1,2)."""
        return PiecewiseProfile(2.0, ((1.0, 1.0), (1.0, -1.0)))


def measure_from_profile(profile: PiecewiseProfile, n_quad: int = 32) -> DiffractionMeasure:
    """Pushforward of the uniform distribution on [0, L] under D(s) = int_0^s d0.

    Per segment, n_quad Gauss-Legendre nodes are mapped through the (linear)
    restriction of D; weights carry the segment's share length/L.  Atoms with
    exactly coinciding nodes are merged, so d0 = 0 collapses to a Dirac mass.
    """
    if n_quad < 1:
        raise ValueError("n_quad must be >= 1")
    gl_x, gl_w = np.polynomial.legendre.leggauss(n_quad)
    atoms: dict = {}
    t = 0.0
    for seg_len, seg_val in profile.segments:
        d_left = profile.integral(t)
        s_nodes = t + (gl_x + 1.0) * (seg_len / 2.0)
        r_nodes = d_left + seg_val * (s_nodes - t)
        w_nodes = (seg_len / profile.period) * (gl_w / 2.0)
        for r, w in zip(r_nodes, w_nodes):
            r = float(r)
            atoms[r] = atoms.get(r, 0.0) + float(w)
        t += seg_len
    b = profile.max_abs_integral()
    nodes = tuple(sorted(atoms))
    weights = tuple(atoms[r] for r in nodes)
    return DiffractionMeasure(nodes, weights, b)


# -- nonlinearity registry -------------------------------------------------------

@dataclass(frozen=True)
class NonlinearitySpec:
    """V(a) = sum_j c_j a^{s_j} with the growth/convexity parameters attached.

    gamma1 <= gamma2 bound |V'(a)| <= C (a^{gamma1-1} + a^{gamma2-1}),
    gamma0 > 2 is the super-quadraticity constant V'(a) a >= gamma0 V(a), and
    kappa (optional, 2 <= kappa < 6) is the small-amplitude growth exponent.

    ``from_callables`` supplies arbitrary (V, V') pairs; assumption checking
    is then sample-based only and the fused kernels are bypassed.
    """

    terms: Tuple[Tuple[float, float], ...]
    gamma0: float
    gamma1: float
    gamma2: float
    kappa: Optional[float] = None
    v_callable: Optional[Callable] = field(default=None, compare=False)
    vp_callable: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if not (2 < self.gamma1 <= self.gamma2 < np.inf):
            raise ValueError("need 2 < gamma1 <= gamma2 < inf")
        if not self.gamma0 > 2:
            raise ValueError("need gamma0 > 2")
        if self.kappa is not None and not (2 <= self.kappa < 6):
            raise ValueError("need 2 <= kappa < 6")
        if not self.terms and self.v_callable is None:
            raise ValueError("empty nonlinearity")
        for _, s in self.terms:
            if s <= 2:
                raise ValueError("term exponents must exceed 2")

    # fused-kernel views
    @property
    def coeffs(self) -> np.ndarray:
        return np.asarray([c for c, _ in self.terms], dtype=float)

    @property
    def expos(self) -> np.ndarray:
        return np.asarray([s for _, s in self.terms], dtype=float)

    @property
    def is_power_sum(self) -> bool:
        return self.v_callable is None

    # -- evaluation ----------------------------------------------------------

    def v(self, a):
        """V(a) for a >= 0 (scalar or array)."""
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise ValueError("V is defined for a >= 0")
        if not self.is_power_sum:
            return self.v_callable(a)
        out = np.zeros_like(a)
        for c, s in self.terms:
            out = out + c * a ** s
        return out if out.ndim else float(out)

    def vp(self, a):
        """V'(a) for a >= 0."""
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise ValueError("V' is defined for a >= 0")
        if not self.is_power_sum:
            return self.vp_callable(a)
        out = np.zeros_like(a)
        for c, s in self.terms:
            out = out + c * s * a ** (s - 1)
        return out if out.ndim else float(out)

    def p(self, z):
        """P(z) = V'(|z|) sgn(z) with sgn(0) = 0 (scalar or array)."""
        z = np.asarray(z, dtype=np.complex128)
        a = np.abs(z)
        if self.is_power_sum:
            mult = np.zeros_like(a)
            for c, s in self.terms:
                mult = mult + c * s * a ** (s - 2)  # s > 2 keeps this finite at 0
            out = mult * z
        else:
            safe = np.where(a > 0, a, 1.0)
            out = np.where(a > 0, self.vp_callable(a) / safe, 0.0) * z
        return out if out.ndim else complex(out)

    # -- stock cases -----------------------------------------------------------

    @staticmethod
    def kerr() -> "NonlinearitySpec":
        """V(a) = a^4/4, i.e. P(z) = |z|^2 z."""
        return NonlinearitySpec(((0.25, 4.0),), gamma0=4.0, gamma1=4.0, gamma2=4.0, kappa=4.0)

    @staticmethod
    def pure_power(c: float, s: float) -> "NonlinearitySpec":
        if c <= 0:
            raise ValueError("pure_power expects c > 0")
        kappa = s if 2 <= s < 6 else None
        return NonlinearitySpec(((c, s),), gamma0=s, gamma1=s, gamma2=s, kappa=kappa)

    @staticmethod
    def from_terms(terms: Sequence[Tuple[float, float]],
                   gamma0: Optional[float] = None,
                   kappa: Optional[float] = None) -> "NonlinearitySpec":
        """Build from (c, s) pairs; growth exponents are read off the terms.

        gamma0 defaults to min(s) which is valid when all c >= 0; for
        sign-changing potentials it must be supplied (and should be verified
        with check_assumptions).
        """
        ss = [s for _, s in terms]
        cs = [c for c, _ in terms]
        g0 = gamma0 if gamma0 is not None else min(ss)
        if kappa is None and all(c >= 0 for c in cs) and any(c > 0 for c in cs):
            s_min = min(s for c, s in terms if c > 0)
            kappa = s_min if 2 <= s_min < 6 else None
        return NonlinearitySpec(tuple((float(c), float(s)) for c, s in terms),
                                gamma0=float(g0), gamma1=float(min(ss)),
                                gamma2=float(max(ss)), kappa=kappa)

    @staticmethod
    def from_callables(v: Callable, vp: Callable, gamma0: float, gamma1: float,
                       gamma2: float, kappa: Optional[float] = None) -> "NonlinearitySpec":
        return NonlinearitySpec((), gamma0=gamma0, gamma1=gamma1, gamma2=gamma2,
                                kappa=kappa, v_callable=v, vp_callable=vp)


# -- assumption report -------------------------------------------------------------

@dataclass
class AssumptionReport:
    a1_constant: float        # smallest C with |V'(a)| <= C(a^{g1-1} + a^{g2-1}) on the grid
    a2_min: float             # min of V'(a) a - gamma0 V(a); A2 holds iff >= 0
    a2_holds: bool
    a3_holds: bool            # V(a) > 0 somewhere on the grid
    a4_constant: Optional[float]  # inf of V(a)/a^kappa on (0, eps], if kappa given
    scaling_min: float        # min over samples of V(t a) - t^{gamma0} V(a), t >= 1
    scaling_holds: bool


def check_assumptions(spec: NonlinearitySpec, grid, eps: float = 0.5,
                      t_samples=(1.0, 1.5, 2.0, 4.0)) -> AssumptionReport:
    """Sample-based verification of the growth assumptions on a grid of amplitudes."""
    a = np.asarray(grid, dtype=float)
    a = a[a > 0]
    if a.size == 0:
        raise ValueError("grid must contain positive amplitudes")
    vp = np.asarray(spec.vp(a))
    v = np.asarray(spec.v(a))
    env = a ** (spec.gamma1 - 1) + a ** (spec.gamma2 - 1)
    a1_c = float(np.max(np.abs(vp) / env))
    a2 = vp * a - spec.gamma0 * v
    a2_min = float(np.min(a2))
    a3 = bool(np.any(v > 0))
    a4_c = None
    if spec.kappa is not None:
        small = a[a <= eps]
        if small.size:
            a4_c = float(np.min(np.asarray(spec.v(small)) / small ** spec.kappa))
    worst = np.inf
    for t in t_samples:
        if t < 1:
            continue
        diff = np.asarray(spec.v(t * a)) - t ** spec.gamma0 * v
        worst = min(worst, float(np.min(diff)))
    # A2 and the scaling law hold up to roundoff in the power sums
    tol = 1e-9 * float(np.max(np.abs(v) + np.abs(vp * a)) + 1.0)
    return AssumptionReport(
        a1_constant=a1_c,
        a2_min=a2_min,
        a2_holds=a2_min >= -tol,
        a3_holds=a3,
        a4_constant=a4_c,
        scaling_min=worst,
        scaling_holds=worst >= -tol,
    )
