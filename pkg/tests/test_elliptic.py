"""Theta, sigma and zeta functions and the closed-form Fourier transforms."""

import cmath

import numpy as np
import pytest

from xyzchain.elliptic import (
    A_function,
    B_function,
    DomainError,
    EllipticParams,
    PoleError,
    SeriesError,
    fourier_A,
    fourier_B,
    sigma,
    sigma_prime,
    sign_region,
    theta,
    zeta_fn,
)
from xyzchain.identities import (
    double_angle_residual,
    riemann_residual,
    sigma_factorization_residual,
    theta_factorization_residual,
)

TAUS = [0.6j, 1.6j]


def direct_theta(a, b, u, tau, m=200):
    """Unaccelerated reference sum over m in [-200, 200]."""
    ms = np.arange(-m, m + 1) + a
    # factor out the largest exponent to avoid overflow at large |Im u|
    ex = 1j * np.pi * ms**2 * tau + 2j * np.pi * ms * (u + b)
    top = ex.real.max()
    return complex(np.exp(top) * np.sum(np.exp(ex - top)))


class TestParams:
    def test_valid_regimes(self):
        assert EllipticParams(0.6j, 0.7).real_eta
        assert not EllipticParams(1.6j, 0.4j).real_eta
        assert EllipticParams(1.6j, 0.4j).t == pytest.approx(1.6)

    @pytest.mark.parametrize("tau,eta", [
        (0.6, 0.3),           # tau not imaginary
        (0.6 + 0.1j, 0.3),
        (0.6j, 0.0),          # excluded points
        (0.6j, 1.0),
        (0.6j, 0.6j),         # eta = tau
        (0.6j, 0.8j),         # beyond tau
        (0.6j, 0.1 + 0.1j),   # neither real nor imaginary
    ])
    def test_invalid(self, tau, eta):
        with pytest.raises(DomainError):
            EllipticParams(tau, eta)

    def test_tolerance_limits(self):
        with pytest.raises(DomainError):
            EllipticParams(0.6j, 0.3, series_tol=1e-6)
        with pytest.raises(DomainError):
            EllipticParams(0.6j, 0.3, max_terms=8)


class TestTheta:
    def test_sigma_vanishes_at_origin(self):
        assert abs(sigma(0.0, 0.6j)) < 1e-15

    @pytest.mark.parametrize("a,b", [(0, 0), (0, 0.5), (0.5, 0), (0.5, 0.5)])
    @pytest.mark.parametrize("u", [0.25, 0.3 + 0.1j, -0.2 + 0.25j])
    def test_against_direct_sum(self, a, b, u):
        for tau in TAUS:
            ref = direct_theta(a, b, u, tau)
            assert abs(theta(a, b, u, tau) - ref) <= 1e-13 * abs(ref)

    def test_sigma_quarter_oracle(self):
        ref = direct_theta(0.5, 0.5, 0.25, 0.6j)
        assert sigma(0.25, 0.6j) == pytest.approx(ref, rel=1e-14)

    def test_vectorised_matches_scalar(self):
        us = np.array([0.1, 0.2 + 0.1j, -0.3 - 0.2j])
        vec = theta(0.5, 0.5, us, 0.6j)
        for u, v in zip(us, vec):
            assert v == pytest.approx(theta(0.5, 0.5, complex(u), 0.6j), rel=1e-14)

    def test_nonconvergence_reports_last_term(self):
        with pytest.raises(SeriesError) as info:
            theta(0.5, 0.5, 0.1, 0.01j, max_terms=16)
        assert info.value.last_term is not None

    @pytest.mark.parametrize("tau", TAUS)
    def test_quasi_periodicity(self, tau):
        u = 0.3 + 0.1j
        assert sigma(u + 1, tau) == pytest.approx(-sigma(u, tau), rel=1e-12)
        u = 0.1
        rhs = -cmath.exp(-2j * np.pi * (u + tau / 2)) * sigma(u, tau)
        assert sigma(u + tau, tau) == pytest.approx(rhs, rel=1e-12)


class TestSigmaZeta:
    def test_zeta_odd(self):
        u = 0.2 + 0.05j
        assert zeta_fn(-u, 0.6j) == pytest.approx(-zeta_fn(u, 0.6j), rel=1e-13)

    @pytest.mark.parametrize("u", [0.13, 0.2 + 0.05j, -0.31 + 0.22j])
    def test_sigma_prime_central_difference(self, u):
        h = 1e-6
        fd = (sigma(u + h, 0.6j) - sigma(u - h, 0.6j)) / (2 * h)
        assert abs(sigma_prime(u, 0.6j) - fd) < 1e-8

    @pytest.mark.parametrize("u", [0.0, 1.0, 0.6j, 2 - 1.2j])
    def test_zeta_pole(self, u):
        with pytest.raises(PoleError):
            zeta_fn(u, 0.6j)


class TestSignRegion:
    @pytest.mark.parametrize("g,s", [(0.3, 0), (0.3 + 0.35j, 1), (0.3 - 0.35j, -1),
                                     (0.3 + 0.7j / 2 - 0.35j, 0)])
    def test_values(self, g, s):
        assert sign_region(g) == s


def _trapezoid_A(gamma, k, tau, n=4096):
    t = tau.imag
    x = -t / 2 + t * np.arange(n) / n
    vals = np.array([complex(A_function(gamma, xi, tau)) for xi in x])
    return complex(np.sum(vals * np.exp(-2j * np.pi * k * x / t)) * t / n)


def _trapezoid_B(gamma, k, tau, n=4096):
    x = -0.5 + np.arange(n) / n
    vals = np.array([complex(B_function(gamma, xi, tau)) for xi in x])
    return complex(np.sum(vals * np.exp(-2j * np.pi * k * x)) / n)


class TestFourier:
    def test_A_k0_real_gamma(self):
        assert fourier_A(0.1, 0, 0.6j) == pytest.approx(np.pi * 0.2j)

    def test_B_k0_real_gamma(self):
        assert fourier_B(0.2, 0, 1.6j) == 0

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5, -1, -3])
    def test_A_against_quadrature(self, k):
        gamma, tau = 0.35j * 0.7, 0.6j
        assert abs(fourier_A(gamma, k, tau) - _trapezoid_A(gamma, k, tau)) < 1e-8

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5, -2])
    def test_B_against_quadrature(self, k):
        gamma, tau = 0.5j, 1.6j
        assert abs(fourier_B(gamma, k, tau) - _trapezoid_B(gamma, k, tau)) < 1e-8

    @pytest.mark.parametrize("k", [1, 2, 7])
    def test_A_conjugation_on_imaginary_axis(self, k):
        # conj A_g(x) = -A_{-g}(x) for imaginary g, so the coefficients pick up a sign
        g = 0.245j
        assert fourier_A(-g, k, 0.6j) == pytest.approx(-np.conj(fourier_A(g, -k, 0.6j)), rel=1e-12)
        assert abs(fourier_A(-g, k, 0.6j) - _trapezoid_A(-g, k, 0.6j)) < 1e-8

    @pytest.mark.parametrize("k", [1, 3])
    def test_B_conjugation_at_real_gamma(self, k):
        g, tau = 0.2, 1.6j
        assert fourier_B(g, -k, tau) == pytest.approx(np.conj(fourier_B(g, k, tau)), rel=1e-12)

    @pytest.mark.parametrize("k", [400, -400, 5000])
    def test_large_k_no_overflow(self, k):
        for g in (0.3j, -0.3j, 0.1):
            assert np.isfinite(fourier_A(g, k, 0.6j))
            assert np.isfinite(fourier_B(g, k, 1.6j))

    def test_saturation_is_continuous(self):
        # the cancelling branch switches form at |arg| = 20
        tau = 1j * np.pi / 20
        a = fourier_A(0.01j, 1, tau * (1 - 1e-9))
        b = fourier_A(0.01j, 1, tau * (1 + 1e-9))
        assert a == pytest.approx(b, rel=1e-6)

    def test_out_of_strip(self):
        with pytest.raises(DomainError):
            fourier_A(1.5j, 1, 0.6j)
        with pytest.raises(DomainError):
            fourier_B(0.7, 1, 1.6j)


@pytest.mark.parametrize("tau", TAUS)
class TestIdentities:
    def test_riemann(self, tau):
        assert riemann_residual(tau, np.random.default_rng(1), 200) < 1e-11

    def test_double_angle(self, tau):
        assert double_angle_residual(tau, np.random.default_rng(2), 100) < 1e-11

    def test_sigma_factorization(self, tau):
        assert sigma_factorization_residual(tau, np.random.default_rng(3), 100) < 1e-11

    def test_theta_factorizations(self, tau):
        assert theta_factorization_residual(tau, np.random.default_rng(4), 100) < 1e-11
