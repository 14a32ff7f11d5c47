"""Homogeneous T-Q relation at the degenerate crossing parameters.

At ``eta = ((2L + dx + dy) tau + 2K + dy + dz) / (N - 2 N1)`` the transfer
matrix eigenvalue factorises as

    Lambda(u) = exp(i pi m u + i phi) (s(u+eta)/s(eta))^N Q(u-eta)/Q(u)
              + exp(-i pi (dx+dy+dz)) exp(-i pi m (u+eta) - i phi) (s(u)/s(eta))^N Q(u+eta)/Q(u)

with ``m = 2L + dx + dy`` and ``Q(u) = prod_l s(u - u_l)/s(eta)``. The
Bethe roots ``u_l`` and the phase ``phi`` are fixed by pole cancellation
and by ``Lambda(0)^N = c``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import DomainError, EllipticParams
from .model import Twist

__all__ = [
    "DegeneratePoint",
    "BetheState",
    "BaeError",
    "BaeConvergenceError",
    "CoalescenceError",
    "InvalidStateError",
    "degenerate_eta",
    "string_seed",
    "tq_lambda",
    "bae_residuals",
    "solve_bae",
    "solve_many",
    "selection_count",
]

MAX_SITES = 8
COALESCE_TOL = 1e-8


class BaeError(RuntimeError):
    pass


class BaeConvergenceError(BaeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = list(trace or [])


class CoalescenceError(BaeError):
    pass


class InvalidStateError(BaeError):
    pass


@dataclass(frozen=True)
class DegeneratePoint:
    L: int
    K: int
    N: int
    N1: int
    twist: Twist
    eta_value: complex
    tau: complex
    regime: str

    @property
    def m(self) -> int:
        """Integer multiplying tau in the numerator of eta."""
        return 2 * self.L + self.twist.dx + self.twist.dy

    def params(self) -> EllipticParams:
        return EllipticParams(self.tau, self.eta_value)

    def to_dict(self) -> dict:
        return {"L": self.L, "K": self.K, "N": self.N, "N1": self.N1, "twist": self.twist.label,
                "eta": [self.eta_value.real, self.eta_value.imag], "tau_im": self.tau.imag,
                "regime": self.regime}


def _regime_label(eta: complex, tau: complex) -> str:
    if eta.imag == 0:
        if eta.real == 0.5:
            return "real-boundary"
        return "real-large" if eta.real > 0.5 else "real-small"
    t = tau.imag
    if math.isclose(eta.imag, t / 2, rel_tol=0, abs_tol=1e-15):
        return "imag-boundary"
    return "imag-large" if eta.imag > t / 2 else "imag-small"


def degenerate_eta(L: int, K: int, N: int, N1: int, twist, tau) -> DegeneratePoint:
    """Build the degenerate point for the given integers and validate its regime."""
    twist = Twist.parse(twist)
    tau = complex(tau)
    den = N - 2 * N1
    if den == 0:
        raise ValueError("N - 2 N1 must be nonzero")
    a = (2 * L + twist.dx + twist.dy) / den
    b = (2 * K + twist.dy + twist.dz) / den
    if (a, b) in ((0, 0), (0, 1), (1, 0)):
        raise DomainError(f"eta = {a}*tau + {b} is an excluded point")
    if a != 0 and b != 0:
        raise DomainError(f"eta = {a}*tau + {b} is neither real nor pure imaginary")
    if a == 0 and not 0 < b < 1:
        raise DomainError(f"real eta = {b} is outside (0, 1)")
    if b == 0 and not 0 < a < 1:
        raise DomainError(f"imaginary eta = {a}*tau is outside (0, tau)")
    eta = complex(b, 0.0) if a == 0 else complex(0.0, a * tau.imag)
    return DegeneratePoint(L, K, N, N1, twist, eta, tau, _regime_label(eta, tau))


def selection_count(point: DegeneratePoint) -> int:
    """How many values the selection index k runs over."""
    tw = point.twist
    return point.N * (1 + tw.dx + tw.dy + tw.dz)


def _selection_phase(point: DegeneratePoint, k: int) -> complex:
    periodic = point.twist is Twist.PERIODIC
    return cmath.exp(1j * k * math.pi * (1 + periodic) / point.N)


@dataclass
class BetheState:
    roots: np.ndarray
    phi: complex
    selection_index: int
    point: DegeneratePoint
    residual: float = float("nan")
    trace: list = field(default_factory=list)

    @property
    def lambdas(self) -> np.ndarray:
        """Roots in the string variable (lambda = u + eta/2, divided by i for real eta)."""
        lam = self.roots + self.point.eta_value / 2
        return lam / 1j if self.point.eta_value.imag == 0 else lam

    def to_json(self, digits=12) -> str:
        r = lambda x: float(f"{x:.{digits}g}")  # noqa: E731
        data = {
            "point": self.point.to_dict(),
            "roots": [[r(z.real), r(z.imag)] for z in self.roots],
            "phi": [r(self.phi.real), r(self.phi.imag)],
            "selection_index": self.selection_index,
            "residual": self.residual,
        }
        return json.dumps(data, indent=2)


def string_seed(descriptors, point: DegeneratePoint) -> np.ndarray:
    """Bethe-root seeds ``u`` from string descriptors ``(n, nu, x)``."""
    eta = point.eta_value
    real = eta.imag == 0
    out = []
    for n, nu, x in descriptors:
        for k in range(1, n + 1):
            if real:
                lam = x + ((n + 1) / 2 - k) * eta.real * 1j + (1 - nu) / 4 * 1j
                out.append(1j * lam - eta / 2)
            else:
                lam = x + ((n + 1) / 2 - k) * eta + (1 - nu) / 4 * point.tau
                out.append(lam - eta / 2)
    return np.array(out, dtype=complex)


def _logsig(params, z):
    return cmath.log(params.sigma(z))


def _wrap(z: complex) -> complex:
    return complex(z.real, (z.imag + math.pi) % (2 * math.pi) - math.pi)


def _system(x, point: DegeneratePoint, params: EllipticParams, k: int):
    """Log-form BAE residuals and Jacobian for ``x = (u_1..u_n, phi)``."""
    u, phi = x[:-1], x[-1]
    n = len(u)
    eta, N, m = params.eta, point.N, point.m
    tw = point.twist
    f = np.empty(n + 1, dtype=complex)
    jac = np.zeros((n + 1, n + 1), dtype=complex)
    zp = [params.zeta(uj + eta) for uj in u]
    z0 = [params.zeta(uj) for uj in u]
    g = 1j * phi - 1j * k * math.pi * (1 + (tw is Twist.PERIODIC)) / N
    for j in range(n):
        fj = (1j * math.pi * m * (2 * u[j] + eta) + 2j * phi + 1j * math.pi * (tw.dx + tw.dy + tw.dz)
              + N * (_logsig(params, u[j] + eta) - _logsig(params, u[j])))
        djj = 2j * math.pi * m + N * (zp[j] - z0[j])
        for l in range(n):
            if l == j:
                continue
            d = u[j] - u[l]
            fj += _logsig(params, d - eta) - _logsig(params, d + eta)
            zm, zq = params.zeta(d - eta), params.zeta(d + eta)
            djj += zm - zq
            jac[j, l] = zq - zm
        f[j] = _wrap(fj)
        jac[j, j] = djj
        jac[j, n] = 2j
        g += _logsig(params, u[j] + eta) - _logsig(params, u[j])
        jac[n, j] = zp[j] - z0[j]
    f[n] = _wrap(g)
    jac[n, n] = 1j
    return f, jac


def bae_residuals(state: BetheState, params: EllipticParams | None = None) -> np.ndarray:
    params = params or state.point.params()
    x = np.append(state.roots, state.phi)
    f, _ = _system(x, state.point, params, state.selection_index)
    return np.abs(f)


def _check_coalescence(u, tau):
    for i in range(len(u)):
        for j in range(i):
            d = u[i] - u[j]
            # distance modulo the period lattice
            b = round(d.imag / tau.imag)
            d -= b * tau
            d -= round(d.real)
            if abs(d) < COALESCE_TOL:
                raise CoalescenceError(f"roots {i} and {j} coincide (|du| = {abs(d):.2e})")


def _reduce_roots(u, phi, params):
    """Move roots into the cell around the origin.

    ``u -> u - 1`` leaves both Q ratios unchanged; ``u -> u - tau`` multiplies
    them by ``exp(-+2 pi i eta)``, which ``phi -> phi - 2 pi eta`` absorbs.
    """
    u = np.array(u, dtype=complex)
    t = params.t
    for j in range(len(u)):
        n = round(u[j].imag / t)
        u[j] -= n * params.tau
        phi -= 2 * math.pi * n * params.eta
        u[j] -= round(u[j].real)
    # phi only enters through exp(+-i phi)
    phi = complex(phi)
    return u, complex((phi.real + math.pi) % (2 * math.pi) - math.pi, phi.imag)


def solve_bae(point: DegeneratePoint, params: EllipticParams | None = None, seed=None, k: int = 1,
              phi0: complex | None = None, tol=1e-12, max_iter=200, max_halvings=20,
              accept=1e-10) -> BetheState:
    """Damped Newton on the logarithmic BAE plus the selection rule.

    ``seed`` is either a list of string descriptors ``(n, nu, x)`` or an
    array of initial roots. The selection index ``k`` is an input. Newton
    stops at ``tol``; if damping stalls first, the state is still accepted
    when the residual is below ``accept``.
    """
    params = params or point.params()
    if point.N > MAX_SITES:
        raise ValueError(f"only N <= {MAX_SITES} is supported")
    if seed is None:
        raise ValueError("a seed is required")
    if len(seed) and isinstance(seed[0], (tuple, list)):
        u0 = string_seed(seed, point)
    else:
        u0 = np.asarray(seed, dtype=complex)
    if len(u0) != point.N1:
        raise ValueError(f"seed gives {len(u0)} roots, expected N1 = {point.N1}")
    _check_coalescence(u0, params.tau)

    if phi0 is None:
        # phi from the selection rule at the seed
        acc = sum(_logsig(params, uj + params.eta) - _logsig(params, uj) for uj in u0)
        phi0 = (k * math.pi * (1 + (point.twist is Twist.PERIODIC)) / point.N) + 1j * acc
    x = np.append(u0, complex(phi0))
    f, jac = _system(x, point, params, k)
    norm = float(np.linalg.norm(f))
    trace = [norm]
    for _ in range(max_iter):
        if norm < tol:
            break
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise BaeError("singular BAE Jacobian") from exc
        if not np.all(np.isfinite(step)) or np.linalg.cond(jac) > 1e14:
            raise BaeError("singular BAE Jacobian")
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = x + lam * step
            try:
                ft, jt = _system(trial, point, params, k)
                nt = float(np.linalg.norm(ft))
            except (ValueError, ZeroDivisionError, ArithmeticError):
                nt = math.inf
            if np.isfinite(nt) and nt < norm:
                break
            lam /= 2
        else:
            if norm < accept:
                # rounding floor: no further decrease is possible
                break
            raise BaeConvergenceError(f"damping failed at residual {norm:.3e}", trace)
        x, f, jac, norm = trial, ft, jt, nt
        trace.append(norm)
    else:
        raise BaeConvergenceError(f"no convergence in {max_iter} iterations (residual {norm:.3e})", trace)
    _check_coalescence(x[:-1], params.tau)
    roots, phi = _reduce_roots(x[:-1], complex(x[-1]), params)
    norm = float(np.linalg.norm(_system(np.append(roots, phi), point, params, k)[0]))
    return BetheState(roots, phi, k, point, residual=norm, trace=trace)


def tq_lambda(u, state: BetheState, params: EllipticParams | None = None) -> complex:
    """Lambda(u) from the homogeneous T-Q relation."""
    params = params or state.point.params()
    point = state.point
    eta, N, m, phi = params.eta, point.N, point.m, state.phi
    tw = point.twist
    s_eta = params.sigma(eta)
    q_minus = q_plus = 1.0 + 0j
    for ul in state.roots:
        s0 = params.sigma(u - ul)
        q_minus *= params.sigma(u - eta - ul) / s0
        q_plus *= params.sigma(u + eta - ul) / s0
    t1 = cmath.exp(1j * math.pi * m * u + 1j * phi) * (params.sigma(u + eta) / s_eta) ** N * q_minus
    t2 = (cmath.exp(-1j * math.pi * (tw.dx + tw.dy + tw.dz)) * cmath.exp(-1j * math.pi * m * (u + eta) - 1j * phi)
          * (params.sigma(u) / s_eta) ** N * q_plus)
    return t1 + t2


def check_poles(state: BetheState, params: EllipticParams | None = None, offset=1e-6, factor=1e3,
                ring=1e-2):
    """Confirm the apparent poles at the Bethe roots cancel.

    Near each root, |Lambda| at distance ``offset`` is compared with its
    typical size on a circle of radius ``ring``. An uncancelled simple pole
    would make the ratio about ``ring / offset``. Returns the worst ratio.
    """
    params = params or state.point.params()
    dirs = [cmath.exp(2j * math.pi * j / 4) for j in range(4)]
    worst = 0.0
    for ul in state.roots:
        scale = float(np.median([abs(tq_lambda(ul + ring * d, state, params)) for d in dirs]))
        near = max(abs(tq_lambda(ul + offset * d, state, params)) for d in dirs)
        ratio = near / max(scale, 1e-300)
        if not np.isfinite(ratio) or ratio > factor:
            raise InvalidStateError(f"pole at Bethe root {ul:.6g} does not cancel "
                                    f"(|Lambda| {near:.3e} vs {scale:.3e} nearby)")
        worst = max(worst, ratio)
    return worst


def solve_many(point: DegeneratePoint, seeds, ks=None, params=None, executor=None):
    """Try every (seed, k) pair; return ``(states, failures)``.

    ``executor`` may be a ``concurrent.futures`` executor; results keep the
    input order either way.
    """
    params = params or point.params()
    ks = list(ks) if ks is not None else list(range(1, selection_count(point) + 1))
    jobs = [(s, k) for s in seeds for k in ks]
    mapper = executor.map if executor is not None else map
    results = list(mapper(_try_solve, [(point, params, s, k) for s, k in jobs]))
    states = [r for r in results if isinstance(r, BetheState)]
    failures = [(job, r) for job, r in zip(jobs, results) if not isinstance(r, BetheState)]
    return states, failures


def _try_solve(args):
    point, params, seed, k = args
    try:
        return solve_bae(point, params, seed, k)
    except (BaeError, ValueError, ArithmeticError) as exc:
        return exc
