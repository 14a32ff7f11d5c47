"""Property-based checks of structural invariants across random inputs."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from xyzchain.bae import _reduce_roots
from xyzchain.cli import parse_complex, parse_sweep
from xyzchain.elliptic import EllipticParams, sigma, theta
from xyzchain.model import SpinChainModel, Twist, apply_transfer, hamiltonian, transfer_matrix, \
    twist_apply, twist_operator
from xyzchain.thermo import discrete_zero_energy, excitation_gap, extrapolate, surface_energy

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

taus = st.sampled_from([0.6j, 1.0j, 1.6j])
unit = st.floats(-0.5, 0.5, allow_nan=False)
twists = st.sampled_from(list(Twist))


def point(tau, re, im):
    return re + 1j * im * tau.imag


@SETTINGS
@given(tau=taus, re=unit, im=unit)
def test_sigma_quasi_periodicity(tau, re, im):
    u = point(tau, re, im)
    s = sigma(u, tau)
    assert abs(sigma(u + 1, tau) + s) <= 1e-12 * max(1, abs(s))
    shifted = -cmath.exp(-2j * math.pi * (u + tau / 2)) * s
    assert abs(sigma(u + tau, tau) - shifted) <= 1e-12 * max(1, abs(shifted))


@SETTINGS
@given(tau=taus, vals=st.lists(unit, min_size=8, max_size=8))
def test_riemann_identity(tau, vals):
    u, v, x, y = (point(tau, vals[2 * i], vals[2 * i + 1]) for i in range(4))

    def s(z):
        return sigma(z, tau)

    t1 = s(u + x) * s(u - x) * s(v + y) * s(v - y)
    t2 = s(u + y) * s(u - y) * s(v + x) * s(v - x)
    rhs = s(u + v) * s(u - v) * s(x + y) * s(x - y)
    # the floor covers draws where every term vanishes
    floor = abs(s(0.25 + 0.25 * tau)) ** 4
    assert abs(t1 - t2 - rhs) <= 1e-11 * max(abs(t1), abs(t2), abs(rhs), floor)


@SETTINGS
@given(tau=taus, re=unit, im=unit)
def test_sigma_is_odd(tau, re, im):
    u = point(tau, re, im)
    assert abs(sigma(-u, tau) + sigma(u, tau)) <= 1e-13 * max(1, abs(sigma(u, tau)))


@SETTINGS
@given(tau=taus, re=unit, im=unit)
def test_theta_characteristic_shift(tau, re, im):
    # theta[a,b](u + 1) = exp(2 pi i a) theta[a,b](u)
    u = point(tau, re, im)
    lhs, rhs = theta(0.5, 0.5, u + 1, tau), -theta(0.5, 0.5, u, tau)
    assert abs(lhs - rhs) <= 1e-12 * max(1, abs(rhs))


@settings(max_examples=10, deadline=None)
@given(n=st.integers(2, 4), twist=twists, re=unit, im=unit, seed=st.integers(0, 2**16))
def test_matrix_free_transfer(n, twist, re, im, seed):
    model = SpinChainModel(n, EllipticParams(0.6j, 0.7), twist)
    u = point(model.params.tau, re, im) * 0.5
    vec = np.random.default_rng(seed).normal(size=2**n) + 0j
    ref = transfer_matrix(u, model) @ vec
    assert np.allclose(apply_transfer(u, model, vec), ref, atol=1e-12 * np.linalg.norm(ref))
    assert np.allclose(twist_apply(twist, n, vec), twist_operator(twist, n) @ vec, atol=1e-14)


@settings(max_examples=10, deadline=None)
@given(n=st.integers(2, 5), twist=twists, eta=st.sampled_from([0.3, 0.7, 0.4j, 1.2j]))
def test_hamiltonian_hermitian_and_commutes_with_twist(n, twist, eta):
    model = SpinChainModel(n, EllipticParams(1.6j, eta), twist)
    h = hamiltonian(model, sparse=False)
    ub = twist_operator(twist, n)
    assert np.allclose(h, h.conj().T, atol=1e-13)
    assert np.linalg.norm(h @ ub - ub @ h) < 1e-10 * np.linalg.norm(h)


@SETTINGS
@given(slope=st.floats(-3, 3), intercept=st.floats(-3, 3), curv=st.floats(-3, 3),
       parity=st.sampled_from(["even", "odd"]))
def test_extrapolate_recovers_exact_model(slope, intercept, curv, parity):
    sizes = range(4, 15)
    fit = extrapolate({n: slope * n + intercept + curv / n for n in sizes}, parity)
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    assert fit.intercept == pytest.approx(intercept, abs=1e-8)


@SETTINGS
@given(re=st.floats(-2.0, 2.0), im=st.floats(-2.0, 2.0), nu=st.integers(-3, 3), mu=st.integers(-3, 3),
       phi=st.floats(-10, 10))
def test_root_reduction_lands_in_cell_and_is_idempotent(re, im, nu, mu, phi):
    params = EllipticParams(0.6j, 0.7)
    u = np.array([re + nu + 1j * (im + mu * params.t)])
    r1, p1 = _reduce_roots(u, phi, params)
    r2, p2 = _reduce_roots(r1, p1, params)
    assert abs(r1[0].real) <= 0.5 + 1e-12 and abs(r1[0].imag) <= params.t / 2 + 1e-12
    assert -math.pi <= p1.real <= math.pi
    assert np.allclose(r1, r2) and abs(cmath.exp(1j * (p1 - p2)) - 1) < 1e-12
    # the combined shift keeps exp(i phi) times the tau-shift factor fixed
    n = round((u[0] - r1[0]).imag / params.t)
    factor = cmath.exp(1j * (p1 - phi + 2 * math.pi * n * params.eta))
    assert abs(factor - 1) < 1e-9


@SETTINGS
@given(re=st.floats(-1e3, 1e3), im=st.floats(-1e3, 1e3))
def test_parse_complex_round_trip(re, im):
    text = f"{re!r}{im:+.17g}i"
    assert parse_complex(text) == complex(re, im)


@SETTINGS
@given(start=st.integers(0, 50), count=st.integers(1, 40), step=st.sampled_from([0.01, 0.05, 0.1, 0.25]))
def test_sweep_is_inclusive(start, count, step):
    a = start * step
    b = a + count * step
    vals = parse_sweep(f"{a!r}:{b!r}:{step!r}")
    assert len(vals) == count + 1
    assert vals[0] == pytest.approx(a) and vals[-1] == pytest.approx(b)


@settings(max_examples=15, deadline=None)
@given(x=st.floats(-0.25, 0.25), y=st.floats(0.0, 0.45))
def test_conjugate_pair_energy_is_real(x, y):
    params = EllipticParams(0.6j, 0.7)
    w = x + 1j * y
    total = discrete_zero_energy(w, params) + discrete_zero_energy(w.conjugate(), params)
    assert abs(total.imag) < 1e-10 * max(1, abs(total))


@settings(max_examples=15, deadline=None)
@given(t=st.floats(0.6, 2.0), frac=st.floats(0.05, 0.95), odd=st.booleans())
def test_surface_energy_structure(t, frac, odd):
    parity = "odd" if odd else "even"
    real = EllipticParams(1j * t, frac)
    assert surface_energy(real, "x", parity) == 0.0
    assert surface_energy(real, "y", parity) == surface_energy(real, "z", parity)
    imag = EllipticParams(1j * t, 1j * t * frac)
    assert surface_energy(imag, "z", parity) == 0.0
    assert surface_energy(imag, "x", parity) == surface_energy(imag, "y", parity)
    flip = "even" if odd else "odd"
    assert surface_energy(real, "y", flip) == -surface_energy(real, "y", parity)


@settings(max_examples=15, deadline=None)
@given(t=st.floats(0.6, 2.0), frac=st.floats(0.05, 0.95))
def test_gap_cells_agree(t, frac):
    real = EllipticParams(1j * t, frac)
    assert excitation_gap(real, "0", "even") == excitation_gap(real, "x", "even")
    imag = EllipticParams(1j * t, 1j * t * frac)
    assert excitation_gap(imag, "0", "even") == excitation_gap(imag, "z", "even")
