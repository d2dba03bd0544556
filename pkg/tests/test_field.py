import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmsoliton import field as F
from tests.conftest import random_complex_field


def geometric_pow_sum(amplitude, nu, kappa, n_terms=400):
    """Independent summation oracle for sum_x (A e^{-nu |x|})^kappa."""
    terms = [(amplitude * math.exp(-nu * abs(x))) ** kappa
             for x in range(-n_terms, n_terms + 1)]
    return math.fsum(terms)


def test_laplacian_delta_stencil():
    ld = F.laplacian(F.LatticeField.delta(4))
    assert ld.at(-1) == 1 and ld.at(0) == -2 and ld.at(1) == 1
    assert ld.at(2) == 0 and ld.box_radius == 5


def test_delta_quadratic_form():
    # expand the stencil by hand: <d0, -Delta d0> = 2
    d0 = F.LatticeField.delta(3)
    assert -np.real(F.inner(d0, F.laplacian(d0))) == pytest.approx(2.0, abs=1e-15)
    assert F.norm_pow(F.forward_diff(d0), 2) == pytest.approx(2.0, abs=1e-15)


def test_kinetic_identity_random(rng):
    # <f, -Delta f> = ||D+ f||_2^2
    for _ in range(10):
        f = random_complex_field(rng, 24)
        lhs = -np.real(F.inner(f, F.laplacian(f)))
        rhs = F.norm_pow(F.forward_diff(f), 2)
        assert lhs == pytest.approx(rhs, rel=1e-12)
        assert rhs >= 0


def test_laplacian_self_adjoint(rng):
    for _ in range(10):
        f = random_complex_field(rng, 20)
        g = random_complex_field(rng, 20)
        a = F.inner(g, F.laplacian(f))
        b = F.inner(F.laplacian(g), f)
        assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


def test_backward_is_shifted_forward(rng):
    f = random_complex_field(rng, 12)
    dp = F.forward_diff(f)
    dm = F.backward_diff(f)
    for x in range(-11, 11):
        assert dm.at(x + 1) == pytest.approx(dp.at(x), abs=1e-15)


def test_forward_diff_constant_block():
    vals = np.zeros(21, dtype=complex)
    vals[5:16] = 2.0
    f = F.LatticeField(10, vals)
    dp = F.forward_diff(f)
    for x in range(-4, 4):  # block interior
        assert dp.at(x) == 0


def test_norm_bounds_laplacian(rng):
    # ||Delta f||_p <= 4 ||f||_p for p in {1, 2, inf}
    for _ in range(10):
        f = random_complex_field(rng, 16)
        lf = F.laplacian(f)
        for p in (1, 2, np.inf):
            assert F.norm(lf, p) <= 4 * F.norm(f, p) + 1e-14


def test_sup_norm_interpolation(rng):
    # ||f||_inf^2 <= ||f||_2 ||D+ f||_2
    for _ in range(20):
        f = random_complex_field(rng, 16)
        assert F.norm(f, np.inf) ** 2 <= F.norm(f) * F.norm(F.forward_diff(f)) * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=21),
       st.sampled_from([(1.0, 2.0), (2.0, 4.0), (1.5, 3.0), (2.0, np.inf)]))
def test_lp_monotonicity(vals, ps):
    # ||f||_p <= ||f||_q for q <= p on the lattice
    q, p = ps
    m = len(vals) // 2
    f = F.LatticeField(m, np.asarray(vals + [0] * (2 * m + 1 - len(vals))))
    assert F.norm(f, p) <= F.norm(f, q) * (1 + 1e-12)


def test_delta_norm_all_p():
    d0 = F.LatticeField.delta(3)
    for p in (1, 2, 3.5, np.inf):
        assert F.norm(d0, p) == pytest.approx(1.0, abs=1e-15)


def test_invalid_p():
    with pytest.raises(ValueError):
        F.norm(F.LatticeField.delta(2), 0.5)


class TestExpProfile:
    def test_spot_values_ln2(self):
        # A=1, nu=ln 2: direct geometric sums give 5/3, 2/3, 17/15
        f = F.exp_profile(1.0, math.log(2), 80)
        assert F.norm_pow(f, 2) == pytest.approx(5 / 3, rel=1e-12)
        assert F.norm_pow(F.forward_diff(f), 2) == pytest.approx(2 / 3, rel=1e-12)
        assert F.norm_pow(f, 4) == pytest.approx(17 / 15, rel=1e-12)

    @pytest.mark.parametrize("amplitude", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("nu", [0.3, math.log(2), 1.5])
    @pytest.mark.parametrize("kappa", [2.0, 4.0, 6.0])
    def test_closed_form_vs_summation_oracle(self, amplitude, nu, kappa):
        closed = F.exp_profile_norm_pow(amplitude, nu, kappa)
        assert closed == pytest.approx(geometric_pow_sum(amplitude, nu, kappa), rel=1e-12)
        f = F.exp_profile(amplitude, nu, 140)
        assert F.norm_pow(f, kappa) == pytest.approx(closed, rel=1e-10)

    @pytest.mark.parametrize("amplitude", [0.5, 2.0])
    @pytest.mark.parametrize("nu", [0.3, 1.5])
    def test_kinetic_closed_form(self, amplitude, nu):
        f = F.exp_profile(amplitude, nu, 140)
        assert F.norm_pow(F.forward_diff(f), 2) == pytest.approx(
            F.exp_profile_kinetic(amplitude, nu), rel=1e-10)

    def test_truncation_warning(self):
        with pytest.warns(F.TruncationWarning):
            F.exp_profile(1.0, 0.05, 20)


class TestSerialization:
    def test_text_roundtrip(self, rng, tmp_path):
        f = random_complex_field(rng, 17)
        F.save_text(f, tmp_path / "f.txt")
        g = F.load_text(tmp_path / "f.txt")
        assert g.box_radius == f.box_radius
        assert np.array_equal(g.values, f.values)  # bit-exact

    def test_binary_roundtrip(self, rng, tmp_path):
        f = random_complex_field(rng, 23)
        F.save_binary(f, tmp_path / "f.bin")
        g = F.load_binary(tmp_path / "f.bin")
        assert g.box_radius == f.box_radius
        assert np.array_equal(g.values, f.values)

    def test_binary_rejects_garbage(self, tmp_path):
        (tmp_path / "x.bin").write_bytes(b"nope")
        with pytest.raises(ValueError):
            F.load_binary(tmp_path / "x.bin")


def test_field_rejects_nan():
    vals = np.zeros(5, dtype=complex)
    vals[2] = np.nan
    with pytest.raises(ValueError):
        F.LatticeField(2, vals)


def test_field_immutable():
    f = F.LatticeField.delta(2)
    with pytest.raises((AttributeError, ValueError)):
        f.values[0] = 1.0


def test_shift_and_recenter(rng):
    f = random_complex_field(rng, 10)
    g = F.shift(f, 3)
    assert g.at(3) == f.at(0)
    assert F.norm(g) == pytest.approx(F.norm(f), rel=1e-15)
    vals = np.zeros(11, dtype=complex)
    vals[8] = 2.0  # peak at site 3
    h = F.recentered(F.LatticeField(5, vals))
    assert abs(h.at(0)) == 2.0


def test_truncation_monitored(rng):
    f = F.exp_profile(1.0, 1.0, 30)
    with pytest.warns(F.TruncationWarning):
        f.truncated(3, 1e-13)
    g = f.truncated(25, 1e-9)  # clipped amplitude ~ e^-26, silent
    assert g.box_radius == 25
