import math

import numpy as np
import pytest

from dmsoliton import field as F
from dmsoliton.decay import (WindowError, fit_exp_rate, fit_superexp_rate,
                             heuristic_rate, make_tail_stats, self_consistency_check,
                             tail_distribution)
from tests.conftest import random_complex_field


class TestTailDistribution:
    def test_beta0_is_l2_and_monotone(self, rng):
        f = random_complex_field(rng, 30)
        beta = tail_distribution(f)
        assert beta[0] == pytest.approx(F.norm(f), rel=1e-14)
        assert np.all(np.diff(beta) <= 1e-15)

    def test_single_site(self):
        f = F.LatticeField.delta(6, amplitude=3.0)
        beta = tail_distribution(f)
        assert beta[0] == 3.0
        assert np.all(beta[1:] == 0.0)

    def test_matches_direct_summation_oracle(self, rng):
        f = random_complex_field(rng, 25)
        beta = tail_distribution(f)
        for n in range(26):
            oracle = math.sqrt(math.fsum(
                abs(f.at(x)) ** 2 for x in range(-25, 26) if abs(x) >= n))
            assert beta[n] == pytest.approx(oracle, abs=1e-13)

    def test_exp_profile_geometric_tail(self):
        # beta(n)^2 = 2 A^2 e^{-2 nu n} / (1 - e^{-2 nu}) for n >= 1
        nu, amp = 0.6, 1.3
        f = F.exp_profile(amp, nu, 60)
        beta = tail_distribution(f)
        for n in (1, 5, 12, 20):
            analytic = math.sqrt(2 * amp ** 2 * math.exp(-2 * nu * n) / (1 - math.exp(-2 * nu)))
            assert beta[n] == pytest.approx(analytic, rel=1e-10)


class TestExpFit:
    def test_exact_on_profile(self):
        st = make_tail_stats(F.exp_profile(1.0, 0.7, 60))
        fit = fit_exp_rate(st)
        assert fit.rate == pytest.approx(0.7, rel=1e-10)
        assert fit.residual < 1e-10

    @pytest.mark.parametrize("nu", [0.3, 0.7, 1.4])
    def test_one_percent_window(self, nu):
        st = make_tail_stats(F.exp_profile(1.0, nu, 110))
        assert fit_exp_rate(st).rate == pytest.approx(nu, rel=0.01)

    def test_window_failure(self):
        st = make_tail_stats(F.LatticeField.delta(10))
        with pytest.raises(WindowError):
            fit_exp_rate(st)


class TestSuperexpFit:
    def test_synthetic_field(self):
        x = np.abs(np.arange(-18, 19))
        vals = (x + 1.0) ** (-0.9 * (x + 1.0))
        st = make_tail_stats(F.LatticeField(18, vals + 0j))
        fit = fit_superexp_rate(st)
        assert fit.rate == pytest.approx(0.9, rel=0.03)

    def test_exact_on_pure_weight_sequence(self):
        n = np.arange(0, 30)
        beta = (n + 1.0) ** (-0.8 * (n + 1.0))
        st = make_tail_stats(beta, floor=1e-300)
        st.n_lo, st.n_hi = 0, 25
        fit = fit_superexp_rate(st)
        assert fit.rate == pytest.approx(0.8, abs=1e-10)
        assert fit.residual < 1e-10

    def test_exponential_input_flags_small_rate(self):
        # merely exponential decay: tiny slope against the (n+1)ln(n+1)
        # regressor and a visibly worse fit than on genuine inputs
        st = make_tail_stats(F.exp_profile(1.0, 0.8, 60))
        exp_fit = fit_exp_rate(st)
        sup_fit = fit_superexp_rate(st)
        assert sup_fit.rate < 0.5 * exp_fit.rate
        assert sup_fit.residual > 10 * exp_fit.residual


class TestHeuristicRate:
    def test_direct_values(self):
        assert heuristic_rate(-2.0, 1.0) == pytest.approx(np.arccosh(2.0))
        assert heuristic_rate(-1e-8, 1.0) < 2e-4

    def test_defining_identity(self):
        for omega, dav in ((-0.5, 0.25), (-2.0, 1.0), (-3.0, 0.125)):
            nu = heuristic_rate(omega, dav)
            assert 2 * dav * (np.cosh(nu) - 1) == pytest.approx(abs(omega), rel=1e-12)

    def test_sign_errors(self):
        with pytest.raises(ValueError):
            heuristic_rate(0.5, 1.0)
        with pytest.raises(ValueError):
            heuristic_rate(-1.0, 0.0)


class TestSelfConsistency:
    def test_single_site(self):
        f = F.LatticeField.delta(8, amplitude=2.0)
        st = make_tail_stats(f)
        st.n_hi = 4
        rep = self_consistency_check(st, theta=3.0, alpha=0.25)
        # beta vanishes beyond n = 0, so only (0, m) cells contribute
        assert rep.c_star <= 2.0 / (2.0 ** 3)
        assert rep.stable

    def test_superexponential_is_stable(self):
        n = np.arange(0, 40)
        beta = (n + 1.0) ** (-0.9 * (n + 1.0))
        st = make_tail_stats(beta, floor=1e-300)
        st.n_hi = 30
        rep = self_consistency_check(st, theta=3.0, alpha=0.25)
        assert rep.stable

    def test_geometric_detected_unstable(self):
        # merely exponential tails violate the superexponential self-bound:
        # the fitted constant explodes when the range is extended
        n = np.arange(0, 401)
        beta = 0.5 ** n
        st = make_tail_stats(beta, floor=1e-300)
        st.n_hi = 400
        rep = self_consistency_check(st, theta=3.0, alpha=0.25)
        assert not rep.stable
        assert rep.c_star > 10 * rep.c_star_half_range

    def test_parameter_validation(self):
        st = make_tail_stats(F.exp_profile(1.0, 0.5, 70))
        with pytest.raises(ValueError):
            self_consistency_check(st, theta=0.5, alpha=0.25)
        with pytest.raises(ValueError):
            self_consistency_check(st, theta=3.0, alpha=0.7)
