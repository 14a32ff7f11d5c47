"""Joint eigenstates of H, U^beta and t(u), and the eigenvalue function Lambda(u)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import (
    MAX_DENSE_SITES,
    SpinChainModel,
    Twist,
    apply_transfer,
    couplings,
    hamiltonian,
    r_matrix,
    twist_apply,
)

__all__ = [
    "SpectrumRecord",
    "LambdaEvaluator",
    "SpectrumError",
    "DegeneracyError",
    "Which",
    "diagonalize",
    "lambda_of",
    "select_states",
    "ground_tower",
    "a_function",
    "d_function",
]

PROBE = 0.1234 + 0.0567j
DEGEN_RTOL = 1e-9
SECTOR_DENSE_LIMIT = 2048


class SpectrumError(RuntimeError):
    pass


class DegeneracyError(SpectrumError):
    """A vector is not an eigenvector of t(u) to the required accuracy."""


class Which(enum.Enum):
    GROUND = "ground"
    FIRST_EXCITED = "first"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).lower()
        if key in ("ground", "g"):
            return cls.GROUND
        if key in ("first", "first_excited", "e", "excited"):
            return cls.FIRST_EXCITED
        raise ValueError(f"unknown state selector {text!r}")


@dataclass(frozen=True, eq=False)
class SpectrumRecord:
    index: int
    energy: float
    twist_charge: int
    state: np.ndarray
    degeneracy_group: int
    intra_multiplet: bool = False


def _phase_fix(vec):
    k = int(np.argmax(np.abs(vec) > 1e-8))
    ph = vec[k] / abs(vec[k])
    return vec / ph


def _is_degen(e1, e2):
    return abs(e1 - e2) < DEGEN_RTOL * max(1.0, abs(e1))


def _groups(energies):
    groups, start = [], 0
    for i in range(1, len(energies) + 1):
        if i == len(energies) or not _is_degen(energies[start], energies[i]):
            groups.append((start, i))
            start = i
    return groups


def _resolve_block(model, vecs):
    """Rotate a degenerate H block into joint U^beta / t(PROBE) eigenvectors."""
    out = []
    uv = twist_apply(model.twist, model.n_sites, vecs)
    ublock = vecs.conj().T @ uv
    ublock = 0.5 * (ublock + ublock.conj().T)
    cw, cv = np.linalg.eigh(ublock)
    if np.max(np.abs(np.abs(cw) - 1)) > 1e-7:
        raise SpectrumError(f"U^beta block not diagonalizable with +-1 eigenvalues: {cw}")
    charges = np.where(cw > 0, 1, -1)
    for c in (-1, 1):
        sel = charges == c
        if not sel.any():
            continue
        sub = vecs @ cv[:, sel]
        if sub.shape[1] > 1:
            tb = sub.conj().T @ apply_transfer(PROBE, model, sub)
            # t(u) is normal, so the Schur form of the small block is diagonal
            tt, z = sla.schur(tb, output="complex")
            sub = sub @ z
            order = np.lexsort((np.angle(np.diag(tt)), np.abs(np.diag(tt))))
            sub = sub[:, order]
        for k in range(sub.shape[1]):
            out.append((c, _phase_fix(sub[:, k])))
    return out


def _popcount(idx):
    out = np.zeros_like(idx)
    x = idx.copy()
    while x.any():
        out += x & 1
        x >>= 1
    return out


def _sector_isometries(n_sites):
    """Sparse isometries onto the common eigenspaces of the global spin flips.

    U^z commutes with H for every twist; for even N so does U^x, and the two
    commute, giving four real sectors. For odd N they anticommute and only U^z
    is used.
    """
    dim = 1 << n_sites
    idx = np.arange(dim)
    parity = 1 - 2 * (_popcount(idx) & 1)
    out = []
    for qz in (1, -1):
        cls = idx[parity == qz]
        if n_sites % 2:
            out.append(sp.csr_matrix((np.ones(len(cls)), (cls, np.arange(len(cls)))),
                                     shape=(dim, len(cls))))
            continue
        rep = cls[cls < (cls ^ (dim - 1))]
        for qx in (1, -1):
            k = np.arange(len(rep))
            rows = np.concatenate([rep, rep ^ (dim - 1)])
            cols = np.concatenate([k, k])
            vals = np.concatenate([np.ones(len(rep)), qx * np.ones(len(rep))]) / np.sqrt(2)
            out.append(sp.csr_matrix((vals, (rows, cols)), shape=(dim, len(rep))))
    return out


def _sector_spectrum(h, iso, n_levels):
    hs = (iso.T @ h @ iso)
    d = hs.shape[0]
    if n_levels is None or d <= SECTOR_DENSE_LIMIT or n_levels + 8 >= d:
        w, v = np.linalg.eigh(hs.toarray())
        return w, v, np.inf
    k = n_levels + 6
    try:
        w, v = spla.eigsh(hs.tocsr(), k=k, which="SA", tol=1e-14,
                          v0=np.ones(d) / np.sqrt(d))
    except spla.ArpackNoConvergence as exc:
        raise SpectrumError("Lanczos solver did not converge") from exc
    order = np.argsort(w)
    return w[order], v[:, order], w[order][-1]


def diagonalize(model: SpinChainModel, n_levels: int | None = None):
    """Eigen-decompose H and return a list of :class:`SpectrumRecord`.

    H is first split into spin-flip symmetry sectors, each diagonalized
    densely (sectors above 2048 states use Lanczos when ``n_levels`` is
    given). With ``n_levels`` only the lowest complete degenerate groups
    covering at least that many states are turned into records.
    """
    if model.n_sites > MAX_DENSE_SITES:
        raise ValueError("exact diagonalization is limited to 14 sites")
    h = hamiltonian(model)
    ws, vs, cut = [], [], np.inf
    for iso in _sector_isometries(model.n_sites):
        w, v, top = _sector_spectrum(h, iso, n_levels)
        ws.append(w)
        vs.append(iso @ v)
        cut = min(cut, top)
    w = np.concatenate(ws)
    v = np.concatenate(vs, axis=1)
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    groups = _groups(w)
    if np.isfinite(cut):
        # a group touching the Lanczos window edge may be incomplete
        groups = [g for g in groups if w[g[1] - 1] < cut - DEGEN_RTOL * max(1.0, abs(cut))]
    if n_levels is not None:
        kept, count = [], 0
        for g in groups:
            if count >= n_levels:
                break
            kept.append(g)
            count += g[1] - g[0]
        groups = kept
    records = []
    for g, (a, b) in enumerate(groups):
        e = float(np.mean(w[a:b]))
        resolved = _resolve_block(model, v[:, a:b].astype(complex))
        resolved.sort(key=lambda cv: cv[0])
        for c, vec in resolved:
            records.append(SpectrumRecord(len(records), e, int(c), vec, g))
    if model.twist is Twist.PERIODIC and any(r.twist_charge != 1 for r in records):
        raise SpectrumError("periodic chain produced a twist charge other than +1")
    return records


def select_states(records, which, tower=None) -> SpectrumRecord:
    """Pick the ground or first excited record.

    Without ``tower`` the first excited state is the lowest record outside the
    ground degeneracy group (or, if there is none, the second member of that
    group, flagged ``intra_multiplet``). ``tower`` is a set of degeneracy-group
    ids to skip instead, e.g. from :func:`ground_tower`.
    """
    which = Which.parse(which)
    if not records:
        raise SpectrumError("empty spectrum")
    ground = records[0]
    if which is Which.GROUND:
        return ground
    if len(records) < 2:
        raise SpectrumError("need at least two levels for the first excited state")
    skip = {ground.degeneracy_group} if tower is None else set(tower)
    for r in records[1:]:
        if r.degeneracy_group not in skip:
            return r
    r = records[1]
    return SpectrumRecord(r.index, r.energy, r.twist_charge, r.state, r.degeneracy_group,
                          intra_multiplet=True)


def _charges(model, records, group):
    """Joint (easy-axis, flip) spin-flip charges present in a degeneracy group."""
    n = model.n_sites
    axis = int(np.argmax(np.abs(couplings(model.params).as_real())))
    ux = lambda v: twist_apply(Twist.X, n, v)  # noqa: E731
    uz = lambda v: twist_apply(Twist.Z, n, v)  # noqa: E731
    easy = {0: ux, 1: lambda v: ux(uz(v)), 2: uz}[axis]
    flip = uz if axis == 0 else ux
    vecs = np.stack([r.state for r in records if r.degeneracy_group == group], axis=1)
    # both operators commute with H and with each other for even N
    fm = vecs.conj().T @ np.stack([flip(v) for v in vecs.T], axis=1)
    em = vecs.conj().T @ np.stack([easy(v) for v in vecs.T], axis=1)
    w, q = np.linalg.eigh((fm + fm.conj().T) / 2)
    e_diag = np.real(np.diag(q.conj().T @ em @ q))
    return {(int(np.sign(a)), int(np.sign(b))) for a, b in zip(np.round(e_diag), np.round(w))}


def ground_tower(model: SpinChainModel, records) -> frozenset:
    """Degeneracy groups that collapse onto the ground state as N grows.

    For even N the ordered ground state of the gapped chain has a partner in
    the sector where the easy-axis order (largest coupling) is reversed; at
    finite N the two are split by an exponentially small amount. The partner
    is the lowest group carrying the same easy-axis charge and the opposite
    flip charge. A degenerate ground level (odd N, or a twist that frustrates
    the order) already is the whole tower.
    """
    ground = records[0].degeneracy_group
    if model.n_sites % 2 or sum(r.degeneracy_group == ground for r in records) > 1:
        return frozenset({ground})
    present = _charges(model, records, ground)
    wanted = {(e, -f) for e, f in present} - present
    if not wanted:
        return frozenset({ground})
    seen = set()
    for r in records:
        g = r.degeneracy_group
        if g == ground or g in seen:
            continue
        seen.add(g)
        if _charges(model, records, g) & wanted:
            return frozenset({ground, g})
    return frozenset({ground})


@dataclass(frozen=True, eq=False)
class LambdaEvaluator:
    """Eigenvalue Lambda(u) of t(u) on a fixed joint eigenvector."""

    model: SpinChainModel
    state: np.ndarray

    def __call__(self, u):
        return lambda_of(self, u)

    def with_residual(self, u):
        """Return ``(Lambda(u), residual, scale)``.

        ``scale`` estimates the operator norm of t(u) by the product of the
        R-matrix norms, which stays meaningful close to zeros of Lambda.
        """
        tv = apply_transfer(u, self.model, self.state)
        lam = complex(np.vdot(self.state, tv))
        res = float(np.linalg.norm(tv - lam * self.state))
        return lam, res, max(float(np.linalg.norm(tv)), transfer_norm_bound(u, self.model))

    def batch(self, us):
        """Rayleigh quotients at many points (no residual check)."""
        return np.array([complex(np.vdot(self.state, apply_transfer(u, self.model, self.state)))
                         for u in np.ravel(us)]).reshape(np.shape(us))


def lambda_of(evaluator: LambdaEvaluator, u) -> complex:
    lam, res, scale = evaluator.with_residual(u)
    if res > 1e-6 * max(scale, 1e-300):
        raise DegeneracyError(
            f"state is not a t(u) eigenvector at u={u}: residual {res:.2e} vs |t| {scale:.2e}"
        )
    return lam


def transfer_norm_bound(u, model: SpinChainModel) -> float:
    norms = {}
    out = 1.0
    for th in model.inhomogeneities:
        if th not in norms:
            norms[th] = np.linalg.norm(r_matrix(u - th, model.params), 2)
        out *= norms[th]
    return float(out)


def a_function(u, model: SpinChainModel):
    p = model.params
    se = p.sigma(p.eta)
    out = 1.0 + 0j
    for th in model.inhomogeneities:
        out *= p.sigma(u - th + p.eta) / se
    return out


def d_function(u, model: SpinChainModel):
    return a_function(u - model.params.eta, model)
