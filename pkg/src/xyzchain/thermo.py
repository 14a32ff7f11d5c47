"""Thermodynamic-limit energies from the zero patterns of Lambda(u).

Every quantity here is a Fourier series in the lattice index ``k``. With
``tau = i t`` and the rescaled variable ``a = pi / t`` (real ``eta``) or
``a = pi`` (imaginary ``eta``) all summands decay like ``exp(-c k)``, so the
series are summed term by term until three consecutive terms drop below
``rtol * |partial sum|``. Sums that have not settled at the cap (discrete
zeros at the band edge) are accelerated with Aitken's delta-squared process before
giving up.
"""

from __future__ import annotations

import csv
import enum
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticParams
from .model import Twist

__all__ = [
    "Regime",
    "KmaxPolicy",
    "SeriesValue",
    "ConvergenceError",
    "SingularModeError",
    "ThermoResult",
    "ExtrapolationFit",
    "band_prefactor",
    "energy_density",
    "discrete_zero_energy",
    "surface_energy",
    "excitation_gap",
    "zero_density",
    "reconstruct_density",
    "extrapolate",
    "thermo_result",
    "boundary_minimizer",
    "sweep",
    "write_sweep_csv",
]

SWEEP_HEADER = ["regime", "twist", "parity", "eta_re", "eta_im", "tau_im",
                "e_density", "E_surface", "gap", "kmax", "tail"]


class ConvergenceError(RuntimeError):
    def __init__(self, msg, tail=None):
        super().__init__(msg)
        self.tail = tail


class SingularModeError(ZeroDivisionError):
    pass


class Regime(enum.Enum):
    REAL_LARGE = "RealLarge"
    REAL_SMALL = "RealSmall"
    IMAG_LARGE = "ImagLarge"
    IMAG_SMALL = "ImagSmall"

    @classmethod
    def of(cls, params: EllipticParams) -> "Regime":
        """Regime of ``params``; the boundary points belong to the small branch."""
        if params.real_eta:
            return cls.REAL_LARGE if params.eta.real > 0.5 else cls.REAL_SMALL
        return cls.IMAG_LARGE if params.eta.imag > params.t / 2 else cls.IMAG_SMALL

    @property
    def real(self) -> bool:
        return self in (Regime.REAL_LARGE, Regime.REAL_SMALL)

    @property
    def large(self) -> bool:
        return self in (Regime.REAL_LARGE, Regime.IMAG_LARGE)


def _default_cap() -> int:
    return int(os.environ.get("EV_KMAX_CAP", "100000"))


@dataclass(frozen=True)
class KmaxPolicy:
    rtol: float = 1e-14
    cap: int = field(default_factory=_default_cap)
    consecutive: int = 3
    accept_tail: float = 1e-10
    min_terms: int = 0

    def doubled(self, kmax: int) -> "KmaxPolicy":
        """Same policy forced to run at least ``2 * kmax`` terms."""
        return KmaxPolicy(self.rtol, max(self.cap, 2 * kmax), self.consecutive, self.accept_tail, 2 * kmax)


@dataclass(frozen=True)
class SeriesValue:
    value: complex
    kmax: int
    tail: float
    accelerated: bool = False


def _sum_series(term, policy: KmaxPolicy | None = None, start=1, what="series") -> SeriesValue:
    """Sum ``term(k)`` for ``k = start, start+1, ...`` with certification.

    ``term`` maps an integer array to an array of terms so the loop can work
    in blocks.
    """
    policy = policy or KmaxPolicy()
    total = 0j
    small = 0
    block = 64
    k0 = start
    partial = []
    while k0 <= policy.cap:
        ks = np.arange(k0, min(k0 + block, policy.cap + 1))
        vals = np.asarray(term(ks), dtype=complex)
        for k, v in zip(ks, vals):
            total += v
            partial.append(total)
            if abs(v) <= policy.rtol * max(abs(total), 1e-300):
                small += 1
                if small >= policy.consecutive and k >= policy.min_terms:
                    return SeriesValue(total, int(k), float(abs(v)))
            else:
                small = 0
        k0 = int(ks[-1]) + 1
        block = min(block * 2, 4096)
    # not certified by plain summation: the surviving tail is geometric
    # (band edge), which Aitken's delta-squared removes exactly
    warnings.warn(f"{what}: plain summation not certified at k={policy.cap}; applying Aitken acceleration",
                  RuntimeWarning, stacklevel=3)
    est, prev = _aitken(partial[-3:]), _aitken(partial[-4:-1])
    tail = abs(est - prev)
    if not np.isfinite(tail) or tail > policy.accept_tail * max(abs(est), 1e-300):
        raise ConvergenceError(f"{what} did not converge by k={policy.cap} (tail estimate {tail:.3e})",
                               tail=tail)
    return SeriesValue(est, policy.cap, float(tail), accelerated=True)


def _aitken(s):
    s0, s1, s2 = s
    den = s2 - 2 * s1 + s0
    if den == 0:
        return s2
    return s2 - (s2 - s1) ** 2 / den


# --------------------------------------------------------------------------
# stable summands
# --------------------------------------------------------------------------


def _cosh_over_sinh(x, y):
    """cosh(x) / sinh(y) for real x and y > 0 without overflow."""
    ax = np.abs(x)
    return np.exp(ax - y) * (1 + np.exp(-2 * ax)) / (1 - np.exp(-2 * y))


def _cosh_ratio(z, y):
    """cosh(z) / cosh(y) for complex z and real y >= 0 without overflow."""
    return (np.exp(z - y) + np.exp(-z - y)) / (1 + np.exp(-2 * y))


def _scales(params: EllipticParams):
    """(a, e, prefactor) with a the series rate and e the effective eta."""
    pref = params.sigma(params.eta) / params.sigma_prime(0.0)
    if params.real_eta:
        return math.pi / params.t, params.eta.real, pref
    return math.pi, params.eta.imag, pref


def _real_part(z, what, tol=1e-10):
    z = complex(z)
    if abs(z.imag) > tol * max(1.0, abs(z.real)):
        raise ArithmeticError(f"{what} has imaginary residue {z.imag:.3e}")
    return z.real


# --------------------------------------------------------------------------
# energy density
# --------------------------------------------------------------------------


def _energy_density_series(params: EllipticParams, policy=None) -> SeriesValue:
    a, e, pref = _scales(params)
    if params.real_eta:
        # symmetric sum; the k = 0 summand tends to eta
        def term(k):
            return np.tanh(k * a * e) * _cosh_over_sinh(k * a * (2 * e - 1), k * a)

        s = _sum_series(term, policy, what="energy density")
        bracket = a * (e + 2 * s.value)
        value = -pref * bracket - 0.5 * params.sigma_prime(params.eta) / params.sigma_prime(0.0)
    else:
        t = params.t

        # tanh(ik pi eta) cosh(ik pi (2 eta - tau)) / sinh(ik pi tau) with eta = ie, tau = it
        def term(k):
            return np.tanh(k * math.pi * e) * _cosh_over_sinh(k * math.pi * (2 * e - t), k * math.pi * t)

        s = _sum_series(term, policy, what="energy density")
        value = pref * (2j * math.pi * s.value
                        - 0.5 * params.sigma_prime(params.eta) / params.sigma(params.eta))
    return SeriesValue(_real_part(value, "energy density"), s.kmax, s.tail, s.accelerated)


def energy_density(params: EllipticParams, policy: KmaxPolicy | None = None) -> float:
    """Ground-state energy per site in the thermodynamic limit (e_r or e_i)."""
    return _energy_density_series(params, policy).value


# --------------------------------------------------------------------------
# discrete zeros
# --------------------------------------------------------------------------


def _sgn(x, tol=1e-13):
    return 0 if abs(x) < tol else (1 if x > 0 else -1)


def band_prefactor(w, params: EllipticParams) -> float:
    """``(sI(w + eta/2) - sI(w - eta/2)) / 2`` in display coordinates.

    1 strictly inside the band ``|Im w| < eta/2``, 1/2 on its edge and 0
    outside.
    """
    _, e, _ = _scales(params)
    y = complex(w).imag
    return 0.5 * (_sgn(y + e / 2) - _sgn(y - e / 2))


def _discrete_series(w, params: EllipticParams, policy=None) -> SeriesValue:
    a, e, pref = _scales(params)
    w = complex(w)
    s = band_prefactor(w, params)
    if s == 0:
        return SeriesValue(0.0, 0, 0.0)

    # cosh(2 i k a w) / cosh(k a e); symmetric in k, so fold onto k >= 1
    def term(k):
        return _cosh_ratio(2j * k * a * w, k * a * e)

    ser = _sum_series(term, policy, what="discrete-zero energy")
    total = 1 + 2 * ser.value
    if params.real_eta:
        value = s * pref * a * total
    else:
        value = -s * 1j * math.pi * pref * total
    value = complex(value)
    if abs(value.imag) <= 1e-12 * max(1.0, abs(value.real)):
        value = value.real
    return SeriesValue(value, ser.kmax, ser.tail, ser.accelerated)


def discrete_zero_energy(w, params: EllipticParams, policy: KmaxPolicy | None = None,
                         return_flag=False):
    """Energy carried by one discrete zero ``w`` (display coordinates).

    The value is real on the symmetry lines (real axis, half line) and
    complex elsewhere; conjugate pairs add up to a real number. Zeros
    outside the band contribute nothing; with ``return_flag`` the
    result is ``(value, status)`` where status is ``inside``, ``edge`` or
    ``outside``.
    """
    val = _discrete_series(w, params, policy).value
    if not return_flag:
        return val
    pre = band_prefactor(w, params)
    status = {1.0: "inside", 0.5: "edge", 0.0: "outside"}[abs(pre)]
    return val, status


def _boundary_point(params: EllipticParams) -> complex:
    """Where the discrete zeros settle: tau/2i (real eta) or 1/2 (imaginary eta)."""
    return complex(params.t / 2) if params.real_eta else 0.5 + 0j


def _pair_offset(params: EllipticParams) -> complex:
    """Imaginary offset of the boundary pair, (eta - 1/2) i or eta - tau/2."""
    if params.real_eta:
        return 1j * (params.eta.real - 0.5)
    return params.eta - params.tau / 2


def surface_energy(params: EllipticParams, twist, parity, policy: KmaxPolicy | None = None) -> float:
    """Ground-state energy shift caused by the twisted bond, at order N^0."""
    twist = Twist.parse(twist)
    odd = _is_odd(parity)
    if twist is Twist.PERIODIC:
        raise ValueError("surface energy is defined relative to the periodic chain")
    ew = discrete_zero_energy(_boundary_point(params), params, policy)
    if params.real_eta:
        if twist is Twist.X:
            return 0.0
        return -ew if odd else ew
    if twist is Twist.Z:
        return 0.0
    return -ew if odd else ew


def _is_odd(parity) -> bool:
    if isinstance(parity, str):
        if parity not in ("even", "odd"):
            raise ValueError(f"parity must be 'even' or 'odd', not {parity!r}")
        return parity == "odd"
    return bool(int(parity) % 2)


def gap_is_finite(params: EllipticParams, twist, parity) -> bool:
    twist = Twist.parse(twist)
    odd = _is_odd(parity)
    aligned = (Twist.PERIODIC, Twist.X) if params.real_eta else (Twist.PERIODIC, Twist.Z)
    return (twist in aligned) != odd


def _gap_branch(params: EllipticParams, large: bool, policy=None) -> float:
    w0 = _boundary_point(params)
    if not large:
        return 2 * discrete_zero_energy(w0, params, policy)
    off = _pair_offset(params)
    return discrete_zero_energy(w0 + off, params, policy) + discrete_zero_energy(w0 - off, params, policy)


def excitation_gap(params: EllipticParams, twist, parity, policy: KmaxPolicy | None = None,
                   branch: str | None = None) -> float:
    """Thermodynamic-limit gap above the ground state.

    ``branch`` (``"small"`` or ``"large"``) forces one of the two closed
    forms, which is how continuity at the regime boundary is checked.
    """
    if not gap_is_finite(params, twist, parity):
        return 0.0
    large = Regime.of(params).large if branch is None else branch == "large"
    return _gap_branch(params, large, policy)


# --------------------------------------------------------------------------
# zero density
# --------------------------------------------------------------------------


def _log_hat(gamma, k, params: EllipticParams):
    """Log of the regularised transform of A_gamma or B_gamma at mode k.

    ``A~_gamma(k) = -pi / sinh(k a) * exp(-2 i k a gamma) (cosh(k a) - s sinh(k a))``
    and likewise for B with ``a = pi t`` and a ``-i pi`` prefactor. The
    gamma-independent prefactor cancels in every ratio the density needs,
    and what is left is entire in ``k``.
    """
    s = _sgn(complex(gamma).imag)
    if params.real_eta:
        arg = k * math.pi / params.t
        phase = -2j * arg * complex(gamma)
    else:
        arg = k * math.pi * params.t
        phase = -2j * k * math.pi * complex(gamma)
    x = abs(arg)
    if s == 0:
        mag = x + math.log1p(math.exp(-2 * x)) - math.log(2)
    else:
        mag = -s * arg
    return phase + mag


def _ratio(num_gammas, den_gammas, k, params):
    logs_n = [_log_hat(g, k, params) for g in num_gammas]
    logs_d = [_log_hat(g, k, params) for g in den_gammas]
    ref = max(z.real for z in logs_n + logs_d)
    den = sum(np.exp(z - ref) for z in logs_d)
    if abs(den) < 1e-14 * max(len(logs_d), 1):
        raise SingularModeError(f"vanishing denominator at k={k}")
    num = sum(np.exp(z - ref) for z in logs_n) if logs_n else 0.0
    return complex(num / den)


def _density_gammas(params: EllipticParams):
    eta, tau = params.eta, params.tau
    regime = Regime.of(params)
    if regime is Regime.REAL_LARGE:
        e = eta.real
        return [e * 1j, -e * 1j], [-(1 - e) / 2 * 1j, (1 - e) / 2 * 1j], 0.5j * e
    if regime is Regime.REAL_SMALL:
        e = eta.real
        return [e * 1j, -e * 1j], [1.5j * e, -1.5j * e, 0.5j * e, -0.5j * e], 0.5j * e
    if regime is Regime.IMAG_LARGE:
        return [eta, -eta], [-(tau - eta) / 2, (tau - eta) / 2], eta / 2
    return [eta, -eta], [1.5 * eta, -1.5 * eta, 0.5 * eta, -0.5 * eta], eta / 2


def zero_density(params: EllipticParams, twist, discrete_zeros, k: int):
    """Fourier mode k of the bulk density, as ``(bulk, correction)``.

    ``N rho~(k) = N * bulk - correction``. At ``k = 0`` both ratios are the
    ``k -> 0`` limits of the nonzero-mode expressions, so ``N rho~(0)``
    counts the bulk zeros (or pairs) exactly.
    """
    Twist.parse(twist)
    num, den, half = _density_gammas(params)
    bulk = _ratio(num, den, k, params)
    corr = 0j
    for w in discrete_zeros:
        corr += _ratio([complex(w) + half, complex(w) - half], den, k, params)
    return bulk, corr


def reconstruct_density(params: EllipticParams, twist, discrete_zeros, n_sites, x, kmax=200):
    """rho(x) on the bulk line from modes ``|k| <= kmax``."""
    x = np.asarray(x, dtype=float)
    period = params.t if params.real_eta else 1.0
    out = np.zeros_like(x, dtype=complex)
    for k in range(-kmax, kmax + 1):
        b, c = zero_density(params, twist, discrete_zeros, k)
        out += (b - c / n_sites) * np.exp(2j * math.pi * k * x / period)
    return out / period


# --------------------------------------------------------------------------
# finite-size extrapolation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtrapolationFit:
    slope: float
    intercept: float
    curvature: float
    residual: float


def extrapolate(energies: dict, parity=None) -> ExtrapolationFit:
    """Least-squares fit ``E_N = slope N + intercept + curvature / N``."""
    pts = sorted((int(n), float(e)) for n, e in energies.items())
    if parity is not None:
        odd = _is_odd(parity)
        pts = [(n, e) for n, e in pts if (n % 2 == 1) == odd]
    if len(pts) < 3:
        raise ValueError("need at least three sizes of the same parity")
    ns = np.array([p[0] for p in pts], dtype=float)
    es = np.array([p[1] for p in pts])
    design = np.column_stack([ns, np.ones_like(ns), 1 / ns])
    coef, _, rank, _ = np.linalg.lstsq(design, es, rcond=None)
    if rank < 3:
        raise np.linalg.LinAlgError("rank-deficient extrapolation fit")
    res = float(np.linalg.norm(design @ coef - es))
    return ExtrapolationFit(float(coef[0]), float(coef[1]), float(coef[2]), res)


# --------------------------------------------------------------------------
# summaries and sweeps
# --------------------------------------------------------------------------


@dataclass
class ThermoResult:
    regime: Regime
    energy_density: float
    discrete_zero_energies: dict
    surface_energies: dict
    gap: float
    kmax_used: int
    tail_estimate: float


def thermo_result(params: EllipticParams, twist="0", parity="even",
                  policy: KmaxPolicy | None = None) -> ThermoResult:
    regime = Regime.of(params)
    ed = _energy_density_series(params, policy)
    w0 = _boundary_point(params)
    off = _pair_offset(params)
    labels = {"boundary": w0, "pair+": w0 + off, "pair-": w0 - off}
    series = {name: _discrete_series(w, params, policy) for name, w in labels.items()}
    kmax = max([ed.kmax] + [s.kmax for s in series.values()])
    tail = max([ed.tail] + [s.tail for s in series.values()])
    surf = {tw.label: surface_energy(params, tw, parity, policy) for tw in (Twist.X, Twist.Y, Twist.Z)}
    return ThermoResult(
        regime=regime,
        energy_density=ed.value,
        discrete_zero_energies={k: s.value for k, s in series.items()},
        surface_energies=surf,
        gap=excitation_gap(params, twist, parity, policy),
        kmax_used=kmax,
        tail_estimate=tail,
    )


def boundary_minimizer(params: EllipticParams, n_grid=201, policy=None):
    """Scan E^w along the real line and return ``(argmin, min value)``.

    The scan runs over ``Re w in [-t/2, t/2]`` (real eta) or ``[-1/2, 1/2]``.
    """
    edge = _boundary_point(params).real
    xs = np.linspace(-edge, edge, n_grid)
    vals = np.array([discrete_zero_energy(complex(x), params, policy) for x in xs])
    i = int(np.argmin(vals))
    return float(xs[i]), float(vals[i])


def sweep(tau_values, eta_values, twists=("x", "y", "z"), parities=("even", "odd"), policy=None):
    """Rows of thermodynamic data over a parameter grid (dicts keyed by SWEEP_HEADER)."""
    rows = []
    for tau in tau_values:
        for eta in eta_values:
            p = EllipticParams(complex(tau), complex(eta))
            ed = _energy_density_series(p, policy)
            for tw in twists:
                tw = Twist.parse(tw)
                for par in parities:
                    rows.append({
                        "regime": Regime.of(p).value,
                        "twist": tw.label,
                        "parity": par,
                        "eta_re": p.eta.real,
                        "eta_im": p.eta.imag,
                        "tau_im": p.t,
                        "e_density": ed.value,
                        "E_surface": surface_energy(p, tw, par, policy) if tw is not Twist.PERIODIC else 0.0,
                        "gap": excitation_gap(p, tw, par, policy),
                        "kmax": ed.kmax,
                        "tail": ed.tail,
                    })
    return rows


def write_sweep_csv(rows, fh, digits=12):
    writer = csv.DictWriter(fh, fieldnames=SWEEP_HEADER)
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.{digits}g}" if isinstance(v, float) else v) for k, v in r.items()})
