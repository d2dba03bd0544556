import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmsoliton.profile import (AssumptionReport, DiffractionMeasure, NonlinearitySpec,
                               PiecewiseProfile, check_assumptions, measure_from_profile)


class TestMeasureFromProfile:
    def test_zero_profile_is_dirac(self):
        mu = measure_from_profile(PiecewiseProfile(2.0, ((2.0, 0.0),)), 8)
        assert mu.nodes == (0.0,)
        assert mu.weights[0] == pytest.approx(1.0, abs=1e-15)
        assert mu.support_bound == 0.0

    @pytest.mark.parametrize("n_quad", [8, 16, 32])
    def test_model_case_moments(self, n_quad):
        # pushforward of the zigzag is the uniform density on [0,1]:
        # k-th moment 1/(k+1) for k <= 6
        mu = measure_from_profile(PiecewiseProfile.model_case(), n_quad)
        assert mu.support_bound == 1.0
        for k in range(7):
            assert mu.moment(k) == pytest.approx(1 / (k + 1), abs=1e-13)

    def test_probability_for_any_profile(self):
        prof = PiecewiseProfile(3.0, ((0.5, 2.0), (1.5, -1.0), (1.0, 0.5)))
        mu = measure_from_profile(prof, 12)
        assert mu.total_mass == pytest.approx(1.0, abs=1e-12)

    def test_quadrature_refinement_rate(self):
        # moments of a wiggly profile converge spectrally in n_quad
        prof = PiecewiseProfile(2.0, ((1.0, 1.0), (1.0, -1.0)))
        exact = 1.0 / 7.0
        errs = [abs(measure_from_profile(prof, n).moment(6) - exact) for n in (2, 4, 8)]
        assert errs[2] <= errs[0]
        assert errs[2] < 1e-12

    def test_profile_validation(self):
        with pytest.raises(ValueError):
            PiecewiseProfile(2.0, ((1.0, 1.0),))  # lengths don't sum to L
        with pytest.raises(ValueError):
            PiecewiseProfile(2.0, ((1.0, 1.0), (1.0, -0.5)))  # not mean zero
        PiecewiseProfile(2.0, ((1.0, 1.0), (1.0, -0.5)), mean_zero=False)

    def test_integral_is_exact_piecewise_linear(self):
        prof = PiecewiseProfile.model_case()
        assert prof.integral(0.5) == pytest.approx(0.5)
        assert prof.integral(1.0) == pytest.approx(1.0)
        assert prof.integral(1.5) == pytest.approx(0.5)
        assert prof.integral(2.0) == pytest.approx(0.0, abs=1e-15)
        assert prof.integral(3.0) == pytest.approx(1.0)  # periodic extension
        assert prof.max_abs_integral() == pytest.approx(1.0)


class TestMeasure:
    def test_requires_atom(self):
        with pytest.raises(ValueError):
            DiffractionMeasure((), (), 0.0)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            DiffractionMeasure((0.0,), (-1.0,), 0.0)

    def test_support_bound_enforced(self):
        with pytest.raises(ValueError):
            DiffractionMeasure((2.0,), (1.0,), 1.0)


class TestNonlinearity:
    def test_kerr_p_is_cubic(self, rng):
        nl = NonlinearitySpec.kerr()
        for _ in range(10):
            z = complex(rng.standard_normal(), rng.standard_normal())
            assert nl.p(z) == pytest.approx(abs(z) ** 2 * z, rel=1e-14)

    def test_v_zero_and_p_zero(self, kerr):
        assert kerr.v(0.0) == 0.0
        assert kerr.p(0.0) == 0.0

    def test_negative_argument_rejected(self, kerr):
        with pytest.raises(ValueError):
            kerr.v(-1.0)
        with pytest.raises(ValueError):
            kerr.vp(-0.5)

    @settings(max_examples=50, deadline=None)
    @given(st.complex_numbers(max_magnitude=4, allow_nan=False, allow_infinity=False))
    def test_p_is_odd(self, z):
        nl = NonlinearitySpec.from_terms([(0.25, 4.0), (0.1, 6.0)])
        assert nl.p(-z) == pytest.approx(-nl.p(z), abs=1e-12)

    def test_parameter_invariants(self):
        with pytest.raises(ValueError):
            NonlinearitySpec(((1.0, 4.0),), gamma0=2.0, gamma1=4.0, gamma2=4.0)
        with pytest.raises(ValueError):
            NonlinearitySpec(((1.0, 4.0),), gamma0=4.0, gamma1=2.0, gamma2=4.0)
        with pytest.raises(ValueError):
            NonlinearitySpec(((1.0, 4.0),), gamma0=4.0, gamma1=4.0, gamma2=4.0, kappa=6.0)
        with pytest.raises(ValueError):
            NonlinearitySpec(((1.0, 2.0),), gamma0=4.0, gamma1=4.0, gamma2=4.0)

    def test_callable_extension_point(self):
        nl = NonlinearitySpec.from_callables(
            lambda a: 0.25 * a ** 4, lambda a: a ** 3,
            gamma0=4.0, gamma1=4.0, gamma2=4.0)
        assert nl.v(2.0) == pytest.approx(4.0)
        assert nl.p(1.0 + 0j) == pytest.approx(1.0)
        rep = check_assumptions(nl, np.linspace(0.01, 2.0, 50))
        assert rep.a2_holds and rep.a3_holds


class TestAssumptions:
    def test_pure_power_a2_equality(self):
        # V = a^4/4, gamma0 = 4: V'(a) a - 4 V(a) = 0 exactly
        rep = check_assumptions(NonlinearitySpec.kerr(), np.linspace(0.05, 3.0, 60))
        assert isinstance(rep, AssumptionReport)
        assert rep.a2_min == pytest.approx(0.0, abs=1e-12)
        assert rep.a2_holds and rep.a3_holds and rep.scaling_holds

    def test_sign_changing_admissible(self):
        # V = -a^4 + a^6 with gamma0 = 4: V' a - 4V = 2 a^6 >= 0
        nl = NonlinearitySpec.from_terms([(-1.0, 4.0), (1.0, 6.0)], gamma0=4.0)
        grid = np.linspace(0.01, 2.0, 100)
        rep = check_assumptions(nl, grid)
        assert rep.a2_holds and rep.a3_holds
        assert rep.a2_min == pytest.approx(float(np.min(2 * grid ** 6)), rel=1e-10)

    def test_all_negative_fails_a3(self):
        nl = NonlinearitySpec.from_terms([(-1.0, 4.0), (-1.0, 6.0)], gamma0=6.0)
        rep = check_assumptions(nl, np.linspace(0.01, 3.0, 100))
        assert rep.a2_holds
        assert not rep.a3_holds

    def test_scaling_lemma_strict_above_gamma0(self):
        # V(ta) >= t^{gamma0} V(a), equality at t = 1, strict for t > 1 when
        # the exponent exceeds gamma0
        nl = NonlinearitySpec.pure_power(1.0, 5.0)
        a = np.linspace(0.1, 2.0, 20)
        for t in (1.0, 1.5, 2.0):
            diff = nl.v(t * a) - t ** 3.5 * np.asarray(nl.v(a))
            if t == 1.0:
                assert np.max(np.abs(diff)) < 1e-12
            else:
                assert np.min(diff) > 0
