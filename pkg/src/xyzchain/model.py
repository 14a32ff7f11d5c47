"""Eight-vertex R-matrix, twisted transfer matrix and the XYZ Hamiltonian.

Basis convention: site ``j`` (1-based) is bit ``j - 1`` of the computational
index, and bit value 0 is the sigma^z = +1 state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elliptic import EllipticParams

__all__ = [
    "Twist",
    "CouplingConstants",
    "SpinChainModel",
    "RegimeError",
    "PAULI",
    "couplings",
    "r_matrix",
    "twist_operator",
    "transfer_matrix",
    "apply_transfer",
    "hamiltonian",
    "hamiltonian_from_transfer",
]

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"0": I2, "x": SX, "y": SY, "z": SZ}

MAX_DENSE_SITES = 14


class RegimeError(ValueError):
    """Parameters put the Hamiltonian outside its Hermitian family."""


class Twist(enum.Enum):
    """Boundary twist beta: periodic, or a pi rotation about x, y or z."""

    PERIODIC = "0"
    X = "x"
    Y = "y"
    Z = "z"

    @classmethod
    def parse(cls, text) -> "Twist":
        if isinstance(text, cls):
            return text
        key = str(text).lower()
        aliases = {"p": "0", "0": "0", "periodic": "0", "x": "x", "y": "y", "z": "z"}
        if key not in aliases:
            raise ValueError(f"unknown twist {text!r}")
        return cls(aliases[key])

    @property
    def dx(self) -> int:
        return int(self is Twist.X)

    @property
    def dy(self) -> int:
        return int(self is Twist.Y)

    @property
    def dz(self) -> int:
        return int(self is Twist.Z)

    @property
    def label(self) -> str:
        return "p" if self is Twist.PERIODIC else self.value

    @property
    def matrix(self) -> np.ndarray:
        return PAULI[self.value]


@dataclass(frozen=True)
class CouplingConstants:
    jx: complex
    jy: complex
    jz: complex

    def as_real(self, tol=1e-12):
        vals = (self.jx, self.jy, self.jz)
        if max(abs(complex(v).imag) for v in vals) > tol:
            raise RegimeError(f"couplings are not real: {vals}")
        return tuple(complex(v).real for v in vals)


@dataclass(frozen=True)
class SpinChainModel:
    n_sites: int
    params: EllipticParams
    twist: Twist = Twist.PERIODIC
    inhomogeneities: tuple = field(default=None)

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("need at least two sites")
        object.__setattr__(self, "twist", Twist.parse(self.twist))
        th = self.inhomogeneities
        th = (0j,) * self.n_sites if th is None else tuple(complex(x) for x in th)
        if len(th) != self.n_sites:
            raise ValueError("one inhomogeneity per site is required")
        part = [x.real for x in th] if self.params.real_eta else [x.imag for x in th]
        if any(abs(p) > 1e-14 for p in part):
            kind = "pure imaginary" if self.params.real_eta else "real"
            raise ValueError(f"inhomogeneities must be {kind} in this eta regime")
        object.__setattr__(self, "inhomogeneities", th)

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    @property
    def homogeneous(self) -> bool:
        return all(x == 0 for x in self.inhomogeneities)

    def with_(self, **kw) -> "SpinChainModel":
        data = dict(n_sites=self.n_sites, params=self.params, twist=self.twist,
                    inhomogeneities=self.inhomogeneities)
        data.update(kw)
        if "n_sites" in kw and "inhomogeneities" not in kw:
            data["inhomogeneities"] = None
        return SpinChainModel(**data)


def couplings(params: EllipticParams) -> CouplingConstants:
    eta, tau = params.eta, params.tau
    ph = np.exp(1j * np.pi * eta)
    s = params.sigma
    jx = ph * s(eta + tau / 2) / s(tau / 2)
    jy = ph * s(eta + (1 + tau) / 2) / s((1 + tau) / 2)
    jz = s(eta + 0.5) / s(0.5)
    return CouplingConstants(complex(jx), complex(jy), complex(jz))


def _r_weights(u, params: EllipticParams):
    """Return (alpha, beta, gamma, delta) for scalar or array ``u``."""
    eta = params.eta
    t2 = 2 * params.tau
    th = params.theta
    u = np.asarray(u, dtype=complex)
    t0u, t0ue = th(0, 0.5, u, t2), th(0, 0.5, u + eta, t2)
    t1u, t1ue = th(0.5, 0.5, u, t2), th(0.5, 0.5, u + eta, t2)
    t00, t0e, t1e = th(0, 0.5, 0, t2), th(0, 0.5, eta, t2), th(0.5, 0.5, eta, t2)
    alpha = t0u * t1ue / (t00 * t1e)
    beta = t1u * t0ue / (t00 * t1e)
    gamma = t0u * t0ue / (t00 * t0e)
    delta = t1u * t1ue / (t00 * t0e)
    return alpha, beta, gamma, delta


def r_matrix(u, params: EllipticParams) -> np.ndarray:
    """Eight-vertex R-matrix on C^2 (x) C^2, basis order 00, 01, 10, 11."""
    a, b, c, d = (complex(x) for x in _r_weights(u, params))
    return np.array([[a, 0, 0, d],
                     [0, b, c, 0],
                     [0, c, b, 0],
                     [d, 0, 0, a]], dtype=complex)


def twist_operator(twist, n_sites: int) -> np.ndarray:
    """Dense ``U^beta = sigma^beta_1 ... sigma^beta_N``."""
    twist = Twist.parse(twist)
    if n_sites > MAX_DENSE_SITES:
        raise ValueError("dense operators are limited to 14 sites")
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n_sites):
        out = np.kron(out, twist.matrix)
    return out


def twist_apply(twist, n_sites: int, vec: np.ndarray) -> np.ndarray:
    """Apply ``U^beta`` to the leading axis of ``vec`` without building it."""
    twist = Twist.parse(twist)
    if twist is Twist.PERIODIC:
        return vec.copy()
    idx = np.arange(1 << n_sites)
    ones = np.array([bin(i).count("1") for i in idx])
    n = n_sites
    if twist is Twist.Z:
        ph = (-1.0) ** ones
        return ph.reshape((-1,) + (1,) * (vec.ndim - 1)) * vec
    flipped = idx ^ ((1 << n) - 1)
    if twist is Twist.X:
        return vec[flipped]
    # sigma^y |0> = i|1>, sigma^y |1> = -i|0>: out[s] = prod(...) * vec[~s]
    # component s of out comes from flipped source r = ~s; phase i^{#zeros(r)} (-i)^{#ones(r)}
    src_ones = n - ones
    ph = (1j) ** (n - src_ones) * (-1j) ** src_ones
    return ph.reshape((-1,) + (1,) * (vec.ndim - 1)) * vec[flipped]


def apply_transfer(u, model: SpinChainModel, vec: np.ndarray) -> np.ndarray:
    """Compute ``t(u) @ vec`` by sequential contraction of the auxiliary space.

    ``vec`` has shape ``(2**N,)`` or ``(2**N, m)``. Cost is O(N 2^N m).
    """
    n = model.n_sites
    vec = np.asarray(vec, dtype=complex)
    squeeze = vec.ndim == 1
    if squeeze:
        vec = vec[:, None]
    m = vec.shape[1]
    # tensor axes: (aux_row, aux_col, site_N, ..., site_1, batch)
    psi = vec.reshape((2,) * n + (m,))
    v = np.zeros((2, 2) + psi.shape, dtype=complex)
    v[0, 0] = psi
    v[1, 1] = psi
    cache = {}
    for j in range(1, n + 1):
        th = model.inhomogeneities[j - 1]
        if th not in cache:
            cache[th] = r_matrix(u - th, model.params).reshape(2, 2, 2, 2)
        r = cache[th]
        ax = 2 + (n - j)
        # v'[a, c, .., s, ..] = sum_{b, s'} r[a, s, b, s'] v[b, c, .., s', ..]
        v = np.tensordot(r, v, axes=([2, 3], [0, ax]))  # -> (a, s, c, rest...)
        v = np.moveaxis(v, 1, ax)  # put site axis back
    out = np.einsum("ba,ab...->...", model.twist.matrix, v)
    out = out.reshape(1 << n, m)
    return out[:, 0] if squeeze else out


def transfer_matrix(u, model: SpinChainModel) -> np.ndarray:
    """Dense ``t(u)`` built column-wise through :func:`apply_transfer`."""
    if model.n_sites > MAX_DENSE_SITES:
        raise ValueError("dense operators are limited to 14 sites")
    return apply_transfer(u, model, np.eye(model.dim, dtype=complex))


def _bond_terms(n_sites):
    idx = np.arange(1 << n_sites)
    bit = lambda j: (idx >> (j - 1)) & 1  # noqa: E731
    return idx, bit


def hamiltonian(model: SpinChainModel, sparse=True):
    """XYZ Hamiltonian with the twisted boundary bond.

    Returned as a real symmetric matrix (scipy CSR when ``sparse``). Raises
    :class:`RegimeError` when the couplings are not real.
    """
    if not model.homogeneous:
        import warnings

        warnings.warn("physical Hamiltonian ignores the inhomogeneities", stacklevel=2)
    jx, jy, jz = couplings(model.params).as_real(tol=1e-10)
    n = model.n_sites
    dim = 1 << n
    idx, bit = _bond_terms(n)
    diag = np.zeros(dim)
    rows, cols, vals = [], [], []
    tw = model.twist
    for j in range(1, n + 1):
        k = j % n + 1
        # boundary bond: sigma^a_{N+1} = sigma^b sigma^a sigma^b -> sign flips
        sx = sy = sz = 1.0
        if j == n:
            sx = -1.0 if tw in (Twist.Y, Twist.Z) else 1.0
            sy = -1.0 if tw in (Twist.X, Twist.Z) else 1.0
            sz = -1.0 if tw in (Twist.X, Twist.Y) else 1.0
        zj = 1 - 2 * bit(j)
        zk = 1 - 2 * bit(k)
        diag += 0.5 * sz * jz * zj * zk
        flipped = idx ^ ((1 << (j - 1)) | (1 << (k - 1)))
        # <s'| sx sx |s> = 1, <s'| sy sy |s> = -(zj zk)  (i*z convention)
        amp = 0.5 * (sx * jx - sy * jy * zj * zk)
        rows.append(flipped)
        cols.append(idx)
        vals.append(amp)
    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    h = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim))
    h.sum_duplicates()
    h.eliminate_zeros()
    return h if sparse else h.toarray()


def hamiltonian_from_transfer(model: SpinChainModel, h=1e-5) -> np.ndarray:
    """Rebuild H from the logarithmic derivative of t(u) at u = 0.

    The derivative uses central differences with one Richardson step
    (steps ``h`` and ``h/2``).
    """
    m = model.with_(inhomogeneities=None)
    p = m.params
    t0 = transfer_matrix(0.0, m)

    def cd(step):
        return (transfer_matrix(step, m) - transfer_matrix(-step, m)) / (2 * step)

    d1, d2 = cd(h), cd(h / 2)
    dt = (4 * d2 - d1) / 3
    dlog = np.linalg.solve(t0, dt)
    pref = p.sigma(p.eta) / p.sigma_prime(0.0)
    return pref * (dlog - 0.5 * m.n_sites * p.zeta(p.eta) * np.eye(m.dim))
