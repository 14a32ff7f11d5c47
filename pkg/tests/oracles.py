"""Independent reference implementations used only by the tests."""

import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
PAULI = {"0": I2, "x": SX, "y": SY, "z": SZ}


def direct_theta(a, b, u, tau, m=200):
    """Plain theta series summed over |n| <= m with no acceleration."""
    ms = np.arange(-m, m + 1) + a
    ex = 1j * np.pi * ms**2 * tau + 2j * np.pi * ms * (u + b)
    top = ex.real.max()
    return complex(np.exp(top) * np.sum(np.exp(ex - top)))


def direct_sigma(u, tau):
    return direct_theta(0.5, 0.5, u, tau)


def site_op(op, j, n):
    """``op`` acting on site ``j`` (1-based) of ``n``, site 1 as the least significant bit."""
    out = np.ones((1, 1), dtype=complex)
    for k in range(n, 0, -1):
        out = np.kron(out, op if k == j else I2)
    return out


def kron_hamiltonian(n, jx, jy, jz, twist="0"):
    """Dense XYZ Hamiltonian assembled from Kronecker products."""
    b = PAULI[twist]
    h = np.zeros((2**n, 2**n), dtype=complex)
    for j in range(1, n + 1):
        for coef, s in ((jx, SX), (jy, SY), (jz, SZ)):
            if j < n:
                right = site_op(s, j + 1, n)
            else:
                right = site_op(b @ s @ b, 1, n)
            h += 0.5 * coef * site_op(s, j, n) @ right
    return h


def direct_couplings(tau, eta):
    s = lambda u: direct_sigma(u, tau)  # noqa: E731
    ph = np.exp(1j * np.pi * eta)
    return (ph * s(eta + tau / 2) / s(tau / 2),
            ph * s(eta + (1 + tau) / 2) / s((1 + tau) / 2),
            s(eta + 0.5) / s(0.5))


def direct_r_matrix(u, tau, eta):
    th = lambda a, x: direct_theta(a, 0.5, x, 2 * tau)  # noqa: E731
    t00, t0e, t1e = th(0, 0), th(0, eta), th(0.5, eta)
    a = th(0, u) * th(0.5, u + eta) / (t00 * t1e)
    b = th(0.5, u) * th(0, u + eta) / (t00 * t1e)
    c = th(0, u) * th(0, u + eta) / (t00 * t0e)
    d = th(0.5, u) * th(0.5, u + eta) / (t00 * t0e)
    return np.array([[a, 0, 0, d], [0, b, c, 0], [0, c, b, 0], [d, 0, 0, a]])


def brute_transfer(u, n, tau, eta, twist="0", thetas=None):
    """t(u) = tr_0 (sigma^beta_0 R_0N ... R_01) on the full (N+1)-site space.

    The auxiliary space is the most significant factor; quantum site j is
    bit j-1 of the basis index.
    """
    thetas = [0.0] * n if thetas is None else thetas
    dim = 2 ** (n + 1)
    mono = np.eye(dim, dtype=complex)
    for j in range(n, 0, -1):
        r = direct_r_matrix(u - thetas[j - 1], tau, eta).reshape(2, 2, 2, 2)
        op = np.zeros((dim, dim), dtype=complex)
        for col in range(dim):
            a, s = col >> n, (col >> (j - 1)) & 1
            for a2 in range(2):
                for s2 in range(2):
                    row = (col & ~(1 << n) & ~(1 << (j - 1))) | (a2 << n) | (s2 << (j - 1))
                    op[row, col] += r[a2, s2, a, s]
        mono = mono @ op
    tw = np.kron(PAULI[twist], np.eye(2**n))
    full = (tw @ mono).reshape(2, 2**n, 2, 2**n)
    return np.einsum("aiaj->ij", full)
