"""Theta functions with half-integer characteristics and derived quantities.

Conventions follow the sigma-function normalisation used throughout the package::

    theta[a, b](u, tau) = sum_m exp(i pi (m+a)^2 tau + 2 i pi (m+a)(u+b))
    sigma(u) = theta[1/2, 1/2](u, tau)

so that ``sigma(u + 1) = -sigma(u)`` and
``sigma(u + tau) = -exp(-2 i pi (u + tau/2)) sigma(u)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EllipticParams",
    "SeriesError",
    "DomainError",
    "PoleError",
    "theta",
    "theta_prime",
    "sigma",
    "sigma_prime",
    "zeta_fn",
    "sign_region",
    "fourier_A",
    "fourier_B",
    "A_function",
    "B_function",
]

DEFAULT_TOL = 1e-16
DEFAULT_MAX_TERMS = 64


class SeriesError(ArithmeticError):
    """A theta series failed to converge inside the term cap."""

    def __init__(self, msg, last_term=None):
        super().__init__(msg)
        self.last_term = last_term


class DomainError(ValueError):
    pass


class PoleError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class EllipticParams:
    """Modulus ``tau`` (pure imaginary) and crossing parameter ``eta``.

    ``eta`` is either real in (0, 1) or pure imaginary with
    ``0 < Im(eta) < Im(tau)``.
    """

    tau: complex
    eta: complex
    series_tol: float = 1e-16
    max_terms: int = DEFAULT_MAX_TERMS

    def __post_init__(self):
        tau = complex(self.tau)
        eta = complex(self.eta)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "eta", eta)
        if not (tau.imag > 0 and tau.real == 0):
            raise DomainError(f"tau must be pure imaginary with Im(tau) > 0, got {tau}")
        if eta.imag == 0:
            if not 0 < eta.real < 1:
                raise DomainError(f"real eta must lie in (0, 1), got {eta.real}")
        elif eta.real == 0:
            if not 0 < eta.imag < tau.imag:
                raise DomainError(f"imaginary eta must satisfy 0 < Im(eta) < Im(tau), got {eta}")
        else:
            raise DomainError(f"eta must be real or pure imaginary, got {eta}")
        if not 0 < self.series_tol <= 1e-8:
            raise DomainError("series_tol must lie in (0, 1e-8]")
        if self.max_terms < 16:
            raise DomainError("max_terms must be at least 16")

    @property
    def real_eta(self) -> bool:
        return self.eta.imag == 0

    @property
    def t(self) -> float:
        """Imaginary part of tau."""
        return self.tau.imag

    def theta(self, a, b, u, modulus=None):
        return theta(a, b, u, self.tau if modulus is None else modulus,
                     tol=self.series_tol, max_terms=self.max_terms)

    def sigma(self, u):
        return sigma(u, self.tau, tol=self.series_tol, max_terms=self.max_terms)

    def sigma_prime(self, u):
        return sigma_prime(u, self.tau, tol=self.series_tol, max_terms=self.max_terms)

    def zeta(self, u):
        return zeta_fn(u, self.tau, tol=self.series_tol, max_terms=self.max_terms)


def _scalar_series(a, b, u, modulus, tol, max_terms, deriv):
    q_im = modulus.imag
    centre = round(-u.imag / q_im - a)
    ipt = 1j * math.pi * modulus
    two = 2j * math.pi
    ub = u + b

    def term(m):
        n = m + a
        val = cmath.exp(ipt * n * n + two * n * ub)
        return val * (two * n) if deriv else val

    total = term(centre)
    small = 0
    mag = 0.0
    for k in range(1, max_terms + 1):
        contrib = term(centre + k) + term(centre - k)
        total += contrib
        mag = abs(contrib)
        if mag <= tol * max(abs(total), 1e-300):
            small += 1
            if small >= 3:
                return total
        else:
            small = 0
    raise SeriesError(
        f"theta series did not converge in {max_terms} terms (last term magnitude {mag:.3e})",
        last_term=mag,
    )


def _series(a, b, u, modulus, tol, max_terms, deriv):
    modulus = complex(modulus)
    if np.ndim(u) == 0 and modulus.imag > 0 and 0 < tol <= 1e-8:
        return np.asarray(_scalar_series(a, b, complex(u), modulus, tol, max_terms, deriv))
    u = np.asarray(u, dtype=complex)
    modulus = complex(modulus)
    q_im = modulus.imag
    if q_im <= 0:
        raise DomainError("theta modulus must have positive imaginary part")
    if not 0 < tol <= 1e-8:
        raise DomainError("series tolerance must lie in (0, 1e-8]")
    # The term magnitude exp(-pi Im(tau) (m+a)^2 - 2 pi (m+a) Im(u)) peaks near
    # m + a = -Im(u)/Im(tau); centre the summation window there.
    centre = np.rint(-u.imag / q_im - a).astype(np.int64)
    total = np.zeros(u.shape, dtype=complex)
    small = np.zeros(u.shape, dtype=np.int64)
    last = np.zeros(u.shape)
    done = np.zeros(u.shape, dtype=bool)

    def term(m):
        n = m + a
        val = np.exp(1j * np.pi * n * n * modulus + 2j * np.pi * n * (u + b))
        if deriv:
            val = val * (2j * np.pi * n)
        return val

    total += term(centre)
    for k in range(1, max_terms + 1):
        contrib = term(centre + k) + term(centre - k)
        total = np.where(done, total, total + contrib)
        mag = np.abs(contrib)
        scale = np.maximum(np.abs(total), 1e-300)
        below = mag <= tol * scale
        small = np.where(below, small + 1, 0)
        last = np.where(done, last, mag)
        done |= small >= 3
        if done.all():
            return total
    raise SeriesError(
        f"theta series did not converge in {max_terms} terms "
        f"(last term magnitude {float(np.max(last)):.3e})",
        last_term=float(np.max(last)),
    )


def theta(a, b, u, modulus, tol=DEFAULT_TOL, max_terms=DEFAULT_MAX_TERMS):
    """Theta function with characteristics ``[a, b]`` at argument ``u``.

    Accepts scalar or array ``u``; returns a Python complex for scalar input.
    """
    out = _series(a, b, u, modulus, tol, max_terms, deriv=False)
    return complex(out) if out.ndim == 0 else out


def theta_prime(a, b, u, modulus, tol=DEFAULT_TOL, max_terms=DEFAULT_MAX_TERMS):
    """Derivative in ``u`` by termwise differentiation."""
    out = _series(a, b, u, modulus, tol, max_terms, deriv=True)
    return complex(out) if out.ndim == 0 else out


def sigma(u, tau, tol=DEFAULT_TOL, max_terms=DEFAULT_MAX_TERMS):
    return theta(0.5, 0.5, u, tau, tol, max_terms)


def sigma_prime(u, tau, tol=DEFAULT_TOL, max_terms=DEFAULT_MAX_TERMS):
    return theta_prime(0.5, 0.5, u, tau, tol, max_terms)


def _on_lattice(u, tau):
    u = np.asarray(u, dtype=complex)
    m1 = np.rint(u.imag / tau.imag)
    r = u - m1 * tau
    return np.abs(r - np.rint(r.real)) < 1e-14


def zeta_fn(u, tau, tol=DEFAULT_TOL, max_terms=DEFAULT_MAX_TERMS):
    """Logarithmic derivative of sigma; raises PoleError on the period lattice."""
    tau = complex(tau)
    if np.any(_on_lattice(u, tau)):
        raise PoleError(f"zeta has a pole on the lattice Z + Z tau (u={u})")
    return sigma_prime(u, tau, tol, max_terms) / sigma(u, tau, tol, max_terms)


def sign_region(gamma) -> int:
    """Sign of Im(gamma): +1, 0 or -1.

    Imaginary parts below 1e-13 in magnitude are treated as exactly zero so that
    arguments assembled from rounded arithmetic (e.g. ``0.3 + 0.7j/2 - 0.35j``)
    land on the intended branch.
    """
    im = complex(gamma).imag
    if abs(im) < 1e-13:
        return 0
    return 1 if im > 0 else -1


def _coth(x: float) -> float:
    if abs(x) > 20:
        return math.copysign(1.0, x)
    return 1.0 / math.tanh(x)


def _coth_plus(x: float, c: int) -> tuple[float, float]:
    """``coth(x) + c`` as ``(mantissa, log_scale)`` for ``c`` in {-1, 0, 1}.

    When ``c`` cancels the saturated value the result is exponentially small;
    returning the scale separately lets callers fold it into a growing factor.
    """
    if c != 0 and math.copysign(1, x) == -c:
        ax = abs(x)
        return -c * 2.0 / -math.expm1(-2 * ax), -2 * ax
    return _coth(x) + c, 0.0


def fourier_A(gamma, k: int, tau) -> complex:
    """Fourier coefficient of ``A_gamma(x) = zeta(i(x - gamma)) - 2 pi x / tau``.

    The transform is over the period ``tau/i`` in ``x``; see ``A_function``.
    """
    gamma = complex(gamma)
    tau = complex(tau)
    half = tau.imag / 2
    if not (-1 - 1e-12 <= gamma.imag <= 1 + 1e-12 and -half - 1e-12 <= gamma.real <= half + 1e-12):
        raise DomainError(f"gamma={gamma} outside the strip of fourier_A")
    s = sign_region(gamma)
    if k == 0:
        return np.pi * (2j * gamma + s)
    arg = k * np.pi / tau.imag  # i k pi / tau is real for pure-imaginary tau
    mant, scale = _coth_plus(arg, -s)
    return -np.pi * mant * np.exp(-2j * arg * gamma + scale)


def fourier_B(gamma, k: int, tau) -> complex:
    gamma = complex(gamma)
    tau = complex(tau)
    if not (-tau.imag - 1e-12 <= gamma.imag <= tau.imag + 1e-12 and -0.5 - 1e-12 <= gamma.real <= 0.5 + 1e-12):
        raise DomainError(f"gamma={gamma} outside the strip of fourier_B")
    s = sign_region(gamma)
    if k == 0:
        return s * 1j * np.pi
    arg = k * np.pi * tau.imag  # coth(i k pi tau) = coth(-k pi Im tau)
    mant, scale = _coth_plus(-arg, s)
    return 1j * np.pi * mant * np.exp(-2j * k * np.pi * gamma + scale)


def A_function(gamma, x, tau):
    tau = complex(tau)
    x = np.asarray(x, dtype=float)
    return zeta_fn(1j * (x - gamma), tau) - 2 * np.pi * x / tau


def B_function(gamma, x, tau):
    x = np.asarray(x, dtype=float)
    return zeta_fn(x - gamma, complex(tau))
