"""The nonlocal potential N, the Hamiltonian H, and their first derivatives.

    N(f) = sum_j w_j sum_x V(|T_{r_j} f(x)|)
    H(f) = (d_av/2) ||D+ f||_2^2 - N(f)

Derivatives treat l^2 as a real vector space with pairing Re<.,.>; the
gradient field is

    g = -d_av Delta f - sum_j w_j T_{-r_j}[ P(T_{r_j} f) ],

so the Euler-Lagrange equation reads g = omega f.  Evolution results for all
atoms are computed once per evaluation and shared between N and the gradient;
the truncation margin is sized so the dropped tail is below 1e-12 relative.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from dmsoliton.backend import kernels
from dmsoliton.evolution import EvolutionMethod, PropagatorSet
from dmsoliton.field import LatticeField
from dmsoliton.profile import DiffractionMeasure, NonlinearitySpec


@dataclass(frozen=True)
class Problem:
    """Average diffraction, measure, nonlinearity, and the power constraint."""

    d_av: float
    measure: DiffractionMeasure
    nonlinearity: NonlinearitySpec
    lam: float
    method: EvolutionMethod = EvolutionMethod("spectral_ring")

    def __post_init__(self):
        if self.d_av < 0:
            raise ValueError("d_av must be >= 0")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


class EnergyEvaluator:
    """Cached N/H/gradient evaluation on a fixed working box.

    ``grad`` restricted to the box is exactly the gradient of H restricted to
    the box subspace, which is what sphere-constrained optimization needs;
    ``full`` variants keep the grown support for residual evaluation.
    """

    def __init__(self, problem: Problem, box_radius: int):
        self.problem = problem
        self.box_radius = int(box_radius)
        self.plan = PropagatorSet(problem.measure.nodes, self.box_radius, problem.method)
        self.weights = np.asarray(problem.measure.weights, dtype=float)
        self._margin = self.plan.margin
        nl = problem.nonlinearity
        self._power_sum = nl.is_power_sum

    # -- nonlocal potential ----------------------------------------------------

    def nonlocal_value(self, values: np.ndarray) -> float:
        u = self.plan.forward(values)
        return self._n_of_evolved(u)

    def _n_of_evolved(self, u: np.ndarray) -> float:
        nl = self.problem.nonlinearity
        if self._power_sum:
            return float(kernels.nonlin_value_sum(u, self.weights, nl.coeffs, nl.expos))
        vals = np.asarray(nl.v(np.abs(u)))
        return float(np.dot(self.weights, vals.sum(axis=1)))

    # -- energy and gradient -----------------------------------------------------

    def value(self, values: np.ndarray) -> float:
        kin = kernels.l2_norm_sq(kernels.forward_diff(values))
        return 0.5 * self.problem.d_av * kin - self.nonlocal_value(values)

    def nonlocal_gradient_full(self, values: np.ndarray) -> np.ndarray:
        """sum_j w_j T_{-r_j} P(T_{r_j} f) on the grown box."""
        u = self.plan.forward(values)
        nl = self.problem.nonlinearity
        if self._power_sum:
            w_fields = kernels.nonlin_apply_p(u, nl.coeffs, nl.expos)
        else:
            w_fields = np.asarray(nl.p(u))
        return self.plan.adjoint_weighted(w_fields, self.weights)

    def value_and_grad(self, values: np.ndarray):
        """(H, grad) with the gradient restricted to the working box."""
        u = self.plan.forward(values)
        n_val = self._n_of_evolved(u)
        nl = self.problem.nonlinearity
        if self._power_sum:
            w_fields = kernels.nonlin_apply_p(u, nl.coeffs, nl.expos)
        else:
            w_fields = np.asarray(nl.p(u))
        g_nl = self.plan.adjoint_weighted(w_fields, self.weights)
        m = self._margin
        g_nl_box = g_nl[m:-m] if m else g_nl
        lap = kernels.laplacian(values)[1:-1]
        kin = kernels.l2_norm_sq(kernels.forward_diff(values))
        h = 0.5 * self.problem.d_av * kin - n_val
        grad = -self.problem.d_av * lap - g_nl_box
        return h, grad

    def grad_full(self, values: np.ndarray) -> LatticeField:
        """The unrestricted gradient field -d_av Delta f - DN(f) on the grown box."""
        g_nl = self.nonlocal_gradient_full(values)
        out_radius = self.plan.out_radius
        f = LatticeField(self.box_radius, values)
        from dmsoliton.field import laplacian
        lap = laplacian(f).with_box(out_radius)
        return LatticeField(out_radius, -self.problem.d_av * lap.values - g_nl)


@lru_cache(maxsize=16)
def _evaluator(problem: Problem, box_radius: int) -> EnergyEvaluator:
    return EnergyEvaluator(problem, box_radius)


def get_evaluator(problem: Problem, box_radius: int) -> EnergyEvaluator:
    return _evaluator(problem, box_radius)


# -- public operations ------------------------------------------------------------

def nonlocal_potential(problem: Problem, f: LatticeField) -> float:
    """N(f) = sum_j w_j sum_x V(|T_{r_j} f(x)|)."""
    return get_evaluator(problem, f.box_radius).nonlocal_value(f.values)


def hamiltonian(problem: Problem, f: LatticeField) -> float:
    """H(f) = (d_av/2) ||D+ f||_2^2 - N(f)."""
    return get_evaluator(problem, f.box_radius).value(f.values)


def gradient(problem: Problem, f: LatticeField) -> LatticeField:
    """The field g with DH(f)[h] = Re<g, h> for every h."""
    return get_evaluator(problem, f.box_radius).grad_full(f.values)


def lagrange_multiplier(problem: Problem, f: LatticeField) -> float:
    """omega(f) = DH(f)[f] / ||f||_2^2."""
    nrm_sq = kernels.l2_norm_sq(f.values)
    if nrm_sq == 0:
        raise ValueError("Lagrange multiplier undefined for the zero field")
    g = gradient(problem, f)
    from dmsoliton.field import inner
    return float(np.real(inner(g, f))) / nrm_sq


def el_residual(problem: Problem, f: LatticeField, omega: float | None = None) -> float:
    """Relative stationarity residual || g - omega f ||_2 / ||f||_2."""
    nrm_sq = kernels.l2_norm_sq(f.values)
    if nrm_sq == 0:
        raise ValueError("Euler-Lagrange residual undefined for the zero field")
    if omega is None:
        omega = lagrange_multiplier(problem, f)
    g = gradient(problem, f)
    resid = g - omega * f.with_box(g.box_radius)
    return float(np.sqrt(kernels.l2_norm_sq(resid.values) / nrm_sq))
