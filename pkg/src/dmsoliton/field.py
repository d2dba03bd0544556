"""Complex-valued sequences on a truncated lattice box and their elementary operators.

A field lives on the sites -M..M and is implicitly zero outside the box.
Operators that widen the support (Laplacian, differences, shifts) grow the
box instead of clipping, so no mass is ever silently lost; callers truncate
explicitly with tail monitoring when they need to.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from dmsoliton.backend import kernels

_BIN_MAGIC = b"DMSF"


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BoxPolicy:
    """Box sizing policy: radius and the amplitude below which truncation is accepted."""

    box_radius: int = 64
    tail_floor: float = 1e-13

    def __post_init__(self):
        if self.box_radius < 1:
            raise ValueError("box_radius must be >= 1")
        if not self.tail_floor > 0:
            raise ValueError("tail_floor must be positive")


class LatticeField:
    """Complex amplitudes on the sites -box_radius .. box_radius.

    Instances are immutable; all operators return new fields.
    """

    __slots__ = ("box_radius", "values")

    def __init__(self, box_radius: int, values: np.ndarray):
        values = np.asarray(values, dtype=np.complex128)
        if box_radius < 0:
            raise ValueError("box_radius must be >= 0")
        if values.shape != (2 * box_radius + 1,):
            raise ValueError(
                f"values must have length {2 * box_radius + 1}, got {values.shape}")
        if not np.all(np.isfinite(values.view(np.float64))):
            raise ValueError("field contains non-finite amplitudes")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "box_radius", box_radius)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("LatticeField is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zeros(box_radius: int) -> "LatticeField":
        return LatticeField(box_radius, np.zeros(2 * box_radius + 1, dtype=np.complex128))

    @staticmethod
    def delta(box_radius: int, amplitude: complex = 1.0, site: int = 0) -> "LatticeField":
        if abs(site) > box_radius:
            raise ValueError("site outside box")
        v = np.zeros(2 * box_radius + 1, dtype=np.complex128)
        v[site + box_radius] = amplitude
        return LatticeField(box_radius, v)

    # -- indexing -----------------------------------------------------------

    def sites(self) -> np.ndarray:
        return np.arange(-self.box_radius, self.box_radius + 1)

    def at(self, x: int) -> complex:
        """Amplitude at site x; zero outside the box."""
        if abs(x) > self.box_radius:
            return 0.0 + 0.0j
        return complex(self.values[x + self.box_radius])

    def with_box(self, box_radius: int) -> "LatticeField":
        """Embed into a larger box (zero padding) or clip to a smaller one."""
        if box_radius == self.box_radius:
            return self
        if box_radius > self.box_radius:
            pad = box_radius - self.box_radius
            return LatticeField(box_radius, np.pad(self.values, pad))
        cut = self.box_radius - box_radius
        return LatticeField(box_radius, self.values[cut:-cut])

    def truncated(self, box_radius: int, tail_floor: float) -> "LatticeField":
        """Clip to a smaller box, warning if clipped amplitude exceeds tail_floor."""
        if box_radius >= self.box_radius:
            return self.with_box(box_radius)
        cut = self.box_radius - box_radius
        dropped = np.concatenate([self.values[:cut], self.values[-cut:]])
        worst = kernels.abs_max(dropped)
        if worst > tail_floor:
            warnings.warn(
                f"truncation drops amplitude {worst:.3e} > tail_floor {tail_floor:.3e}",
                TruncationWarning, stacklevel=2)
        return LatticeField(box_radius, self.values[cut:-cut])

    def boundary_amplitude(self) -> float:
        return max(abs(self.values[0]), abs(self.values[-1]))

    # -- arithmetic (boxes are aligned automatically) ------------------------

    def _aligned(self, other: "LatticeField"):
        m = max(self.box_radius, other.box_radius)
        return self.with_box(m).values, other.with_box(m).values, m

    def __add__(self, other: "LatticeField") -> "LatticeField":
        a, b, m = self._aligned(other)
        return LatticeField(m, a + b)

    def __sub__(self, other: "LatticeField") -> "LatticeField":
        a, b, m = self._aligned(other)
        return LatticeField(m, a - b)

    def __mul__(self, c: complex) -> "LatticeField":
        return LatticeField(self.box_radius, self.values * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"LatticeField(M={self.box_radius}, l2={norm(self):.6g})"


# -- elementary operators ----------------------------------------------------

def laplacian(f: LatticeField) -> LatticeField:
    """(Delta f)(x) = f(x+1) - 2 f(x) + f(x-1); box grows by one site."""
    return LatticeField(f.box_radius + 1, kernels.laplacian(f.values))


def forward_diff(f: LatticeField) -> LatticeField:
    """(D+ f)(x) = f(x+1) - f(x); box grows by one site."""
    return LatticeField(f.box_radius + 1, kernels.forward_diff(f.values))


def backward_diff(f: LatticeField) -> LatticeField:
    """(D- f)(x) = f(x) - f(x-1); box grows by one site."""
    return LatticeField(f.box_radius + 1, kernels.backward_diff(f.values))


def shift(f: LatticeField, k: int) -> LatticeField:
    """Translate by k sites, growing the box so nothing falls off the edge."""
    if k == 0:
        return f
    m = f.box_radius + abs(k)
    v = np.zeros(2 * m + 1, dtype=np.complex128)
    lo = k + abs(k)  # index of site (-f.box_radius + k) in the new array
    v[lo:lo + f.values.size] = f.values
    return LatticeField(m, v)


def norm(f: LatticeField, p: float = 2) -> float:
    """l^p norm, 1 <= p <= inf.  Compensated summation throughout."""
    if p == 2:
        return float(np.sqrt(kernels.l2_norm_sq(f.values)))
    if p == np.inf:
        return kernels.abs_max(f.values)
    if p < 1:
        raise ValueError("p must satisfy 1 <= p <= inf")
    return float(kernels.abs_pow_sum(f.values, p) ** (1.0 / p))


def norm_pow(f: LatticeField, p: float) -> float:
    """sum_x |f(x)|^p (the p-th power of the l^p norm)."""
    if p == 2:
        return float(kernels.l2_norm_sq(f.values))
    return float(kernels.abs_pow_sum(f.values, p))


def inner(f: LatticeField, g: LatticeField) -> complex:
    """<f, g> = sum conj(f) g, conjugate-linear in the first slot."""
    a, b, _ = f._aligned(g)
    return kernels.inner(a, b)


def power(f: LatticeField) -> float:
    """The power ||f||_2^2."""
    return float(kernels.l2_norm_sq(f.values))


def kinetic(f: LatticeField) -> float:
    """||D+ f||_2^2 = <f, -Delta f>."""
    return float(kernels.l2_norm_sq(kernels.forward_diff(f.values)))


def recentered(f: LatticeField) -> LatticeField:
    """Translate so the peak amplitude sits at site 0 (ties go to the leftmost)."""
    k = int(np.argmax(np.abs(f.values))) - f.box_radius
    return shift(f, -k) if k else f


# -- exponential profile -----------------------------------------------------

def exp_profile(amplitude: float, nu: float, box_radius: int,
                tail_floor: float = 1e-13) -> LatticeField:
    """f(x) = A exp(-nu |x|).

    Warns when the box cuts the profile above tail_floor, i.e. when
    A exp(-nu M) is not negligible.
    """
    if amplitude <= 0 or nu <= 0:
        raise ValueError("amplitude and nu must be positive")
    if amplitude * np.exp(-nu * box_radius) >= tail_floor:
        warnings.warn(
            f"exp_profile: A e^(-nu M) = {amplitude * np.exp(-nu * box_radius):.3e} "
            f"exceeds tail_floor {tail_floor:.3e}; increase box_radius",
            TruncationWarning, stacklevel=2)
    x = np.arange(-box_radius, box_radius + 1)
    return LatticeField(box_radius, amplitude * np.exp(-nu * np.abs(x)) + 0j)


def exp_profile_norm_pow(amplitude: float, nu: float, kappa: float) -> float:
    """Closed form sum_x (A e^(-nu|x|))^kappa = A^kappa cosh(kappa nu/2)/sinh(kappa nu/2)."""
    return amplitude ** kappa * np.cosh(kappa * nu / 2) / np.sinh(kappa * nu / 2)


def exp_profile_kinetic(amplitude: float, nu: float) -> float:
    """Closed form ||D+ f_nu||_2^2 = 4 A^2 sinh^2(nu/2)/sinh(nu)."""
    return 4.0 * amplitude ** 2 * np.sinh(nu / 2) ** 2 / np.sinh(nu)


# -- serialization -----------------------------------------------------------

def save_text(f: LatticeField, path) -> None:
    """Three columns: site index, Re, Im.  repr round-trip keeps it bit-exact."""
    with open(path, "w") as fh:
        fh.write(f"# box_radius {f.box_radius}\n")
        for x, v in zip(f.sites(), f.values):
            fh.write(f"{x} {float(v.real)!r} {float(v.imag)!r}\n")


def load_text(path) -> LatticeField:
    sites, re, im = [], [], []
    box_radius = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "box_radius":
                    box_radius = int(parts[1])
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
            sites.append(int(parts[0]))
            re.append(float(parts[1]))
            im.append(float(parts[2]))
    if box_radius is None:
        box_radius = max(abs(s) for s in sites)
    v = np.zeros(2 * box_radius + 1, dtype=np.complex128)
    v[np.asarray(sites) + box_radius] = np.asarray(re) + 1j * np.asarray(im)
    return LatticeField(box_radius, v)


def save_binary(f: LatticeField, path) -> None:
    """Header (magic, box_radius, length) followed by little-endian complex128."""
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<qq", f.box_radius, f.values.size))
        fh.write(f.values.astype("<c16").tobytes())


def load_binary(path) -> LatticeField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BIN_MAGIC:
            raise ValueError(f"{path}: not a dmsoliton field file")
        box_radius, length = struct.unpack("<qq", fh.read(16))
        raw = fh.read(16 * length)
    values = np.frombuffer(raw, dtype="<c16").astype(np.complex128)
    return LatticeField(int(box_radius), values)
