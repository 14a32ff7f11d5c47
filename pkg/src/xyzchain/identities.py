"""Residual checks for the elliptic identities and the integrability structure.

Each check returns the largest relative residual over its sample; the
``battery`` runner collects them with their tolerances.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .elliptic import EllipticParams, theta
from .model import SpinChainModel, Twist, hamiltonian, hamiltonian_from_transfer, r_matrix, \
    transfer_matrix, twist_operator

__all__ = [
    "random_points",
    "riemann_residual",
    "double_angle_residual",
    "sigma_factorization_residual",
    "theta_factorization_residual",
    "qybe_residual",
    "transfer_commutator_residual",
    "twist_commutator_residual",
    "hamiltonian_residual",
    "functional_relation_residual",
    "CheckResult",
    "battery",
]


def random_points(rng, tau, n, scale=1.0):
    """``n`` points in the rectangle |Re| <= 1/2, |Im| <= t/2 (scaled)."""
    t = complex(tau).imag
    return scale * (rng.uniform(-0.5, 0.5, n) + 1j * rng.uniform(-t / 2, t / 2, n))


def _rel(lhs, rhs, scale):
    return float(np.max(np.abs(lhs - rhs) / np.maximum(scale, 1e-300)))


def riemann_residual(tau, rng, n=200) -> float:
    p = EllipticParams(tau, 0.3)
    s = p.sigma
    worst = 0.0
    for _ in range(n):
        u, v, x, y = random_points(rng, tau, 4)
        t1 = s(u + x) * s(u - x) * s(v + y) * s(v - y)
        t2 = s(u + y) * s(u - y) * s(v + x) * s(v - x)
        rhs = s(u + v) * s(u - v) * s(x + y) * s(x - y)
        worst = max(worst, _rel(t1 - t2, rhs, max(abs(t1), abs(t2), abs(rhs))))
    return worst


def double_angle_residual(tau, rng, n=100) -> float:
    tau = complex(tau)
    p = EllipticParams(tau, 0.3)
    s = p.sigma
    den = s(0.5) * s(tau / 2) * s(-(1 + tau) / 2)
    worst = 0.0
    for u in random_points(rng, tau, n, scale=0.5):
        rhs = 2 * s(u) * s(u + 0.5) * s(u + tau / 2) * s(u - (1 + tau) / 2) / den
        lhs = s(2 * u)
        worst = max(worst, _rel(lhs, rhs, max(abs(lhs), abs(rhs))))
    return worst


def sigma_factorization_residual(tau, rng, n=100) -> float:
    """sigma(u)/sigma(tau/2) as a product of two theta functions of modulus 2 tau."""
    tau = complex(tau)
    p = EllipticParams(tau, 0.3)
    worst = 0.0
    den = theta(0, 0.5, tau / 2, 2 * tau) * theta(0.5, 0.5, tau / 2, 2 * tau)
    for u in random_points(rng, tau, n):
        lhs = p.sigma(u) / p.sigma(tau / 2)
        rhs = theta(0, 0.5, u, 2 * tau) * theta(0.5, 0.5, u, 2 * tau) / den
        worst = max(worst, _rel(lhs, rhs, max(abs(lhs), abs(rhs))))
    return worst


def theta_factorization_residual(tau, rng, n=100) -> float:
    """The two factorisations of theta(2u, 2 tau) into sigma products."""
    tau = complex(tau)
    p = EllipticParams(tau, 0.3)
    s = p.sigma
    worst = 0.0
    for u in random_points(rng, tau, n, scale=0.5):
        lhs1 = theta(0.5, 0.5, 2 * u, 2 * tau)
        rhs1 = theta(0.5, 0.5, tau, 2 * tau) * s(u) * s(u + 0.5) / (s(tau / 2) * s(tau / 2 + 0.5))
        lhs2 = theta(0, 0.5, 2 * u, 2 * tau)
        rhs2 = (theta(0, 0.5, 0, 2 * tau) * s(u - tau / 2) * s(u + 0.5 + tau / 2)
                / (s(-tau / 2) * s(tau / 2 + 0.5)))
        worst = max(worst, _rel(lhs1, rhs1, max(abs(lhs1), abs(rhs1))),
                    _rel(lhs2, rhs2, max(abs(lhs2), abs(rhs2))))
    return worst


def _embed(r, pair):
    """Embed a two-site operator on sites ``pair`` of three."""
    r4 = r.reshape(2, 2, 2, 2)
    i, j = pair
    out = np.zeros((2,) * 6, dtype=complex)
    k = 3 - i - j
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    for e in range(2):
                        idx_out = [0, 0, 0]
                        idx_in = [0, 0, 0]
                        idx_out[i], idx_out[j], idx_out[k] = a, b, e
                        idx_in[i], idx_in[j], idx_in[k] = c, d, e
                        out[tuple(idx_out) + tuple(idx_in)] = r4[a, b, c, d]
    return out.reshape(8, 8)


def qybe_residual(params: EllipticParams, rng, n=20) -> float:
    worst = 0.0
    for _ in range(n):
        u1, u2, u3 = random_points(rng, params.tau, 3, scale=0.5)
        r12 = _embed(r_matrix(u1 - u2, params), (0, 1))
        r13 = _embed(r_matrix(u1 - u3, params), (0, 2))
        r23 = _embed(r_matrix(u2 - u3, params), (1, 2))
        lhs, rhs = r12 @ r13 @ r23, r23 @ r13 @ r12
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-300)))
    return worst


def transfer_commutator_residual(model: SpinChainModel, rng, n=3) -> float:
    worst = 0.0
    for _ in range(n):
        u, v = random_points(rng, model.params.tau, 2, scale=0.5)
        tu, tv = transfer_matrix(u, model), transfer_matrix(v, model)
        c = tu @ tv - tv @ tu
        worst = max(worst, float(np.linalg.norm(c) / (np.linalg.norm(tu) * np.linalg.norm(tv))))
    return worst


def twist_commutator_residual(model: SpinChainModel, rng, n=3) -> float:
    ub = twist_operator(model.twist, model.n_sites)
    worst = 0.0
    for u in random_points(rng, model.params.tau, n, scale=0.5):
        tu = transfer_matrix(u, model)
        worst = max(worst, float(np.linalg.norm(tu @ ub - ub @ tu) / np.linalg.norm(tu)))
    return worst


def hamiltonian_residual(model: SpinChainModel) -> float:
    h = hamiltonian(model, sparse=False)
    rebuilt = hamiltonian_from_transfer(model)
    return float(np.max(np.abs(h - rebuilt)) / np.linalg.norm(h, 2))


def functional_relation_residual(model: SpinChainModel) -> tuple[float, bool]:
    """Worst residual of the four relations over all eigenstates.

    Also reports whether the sign in the product relation matches the
    ``U^beta`` eigenvalue of each state.
    """
    from .spectrum import LambdaEvaluator, diagonalize
    from .zeros import verify_functional_relations

    worst, signs_ok = 0.0, True
    for rec in diagonalize(model):
        rep = verify_functional_relations(LambdaEvaluator(model, rec.state), model)
        worst = max(worst, rep["max"])
        signs_ok &= int(rep["charge"]) == rec.twist_charge
    return worst, signs_ok


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tol: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual < self.tol)


def battery(seed=0, taus=(0.6j, 1.6j), quick=False) -> list[CheckResult]:
    """Run every identity check and return the results in a fixed order."""
    rng = np.random.default_rng(seed)
    out = []

    def run(name, tol, fn, *args):
        t0 = time.perf_counter()
        val = fn(*args)
        out.append(CheckResult(name, float(val), tol, time.perf_counter() - t0))

    n_pts = 40 if quick else 200
    for tau in taus:
        tag = f"tau={tau.imag:g}i"
        run(f"riemann[{tag}]", 1e-11, riemann_residual, tau, rng, n_pts)
        run(f"double_angle[{tag}]", 1e-11, double_angle_residual, tau, rng, n_pts // 2)
        run(f"sigma_factorization[{tag}]", 1e-11, sigma_factorization_residual, tau, rng, n_pts // 2)
        run(f"theta_factorization[{tag}]", 1e-11, theta_factorization_residual, tau, rng, n_pts // 2)
    regimes = (EllipticParams(0.6j, 0.7), EllipticParams(1.6j, 0.4j))
    n_chain = 4 if quick else 6
    for p in regimes:
        tag = f"eta={p.eta:g}"
        run(f"qybe[{tag}]", 1e-10, qybe_residual, p, rng, 20)
        run(f"transfer_commutator[{tag}]", 1e-9, transfer_commutator_residual,
            SpinChainModel(n_chain, p), rng)
        for tw in Twist:
            run(f"twist_commutator[{tag},{tw.label}]", 1e-10, twist_commutator_residual,
                SpinChainModel(n_chain, p, tw), rng)
        run(f"hamiltonian[{tag}]", 1e-6, hamiltonian_residual, SpinChainModel(4, p))
    return out
