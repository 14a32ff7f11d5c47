"""Degenerate crossing points, the T-Q relation and Bethe ansatz solutions."""

import cmath
import json
import math

import numpy as np
import pytest

from xyzchain import bae
from xyzchain.bae import (
    BaeConvergenceError,
    BetheState,
    CoalescenceError,
    InvalidStateError,
    check_poles,
    degenerate_eta,
    selection_count,
    solve_bae,
    solve_many,
    string_seed,
    tq_lambda,
)
from xyzchain.elliptic import DomainError
from xyzchain.model import SpinChainModel, Twist
from xyzchain.spectrum import LambdaEvaluator, diagonalize
from xyzchain.zeros import find_zeros


def ed_lambdas(point, probes):
    m = SpinChainModel(point.N, point.params(), point.twist)
    recs = diagonalize(m)
    return m, recs, [np.array([LambdaEvaluator(m, r.state)(u) for u in probes]) for r in recs]


def best_match(state, probes, ed):
    tq = np.array([tq_lambda(u, state) for u in probes])
    errs = [float(np.max(np.abs(tq - e)) / np.max(np.abs(e))) for e in ed]
    i = int(np.argmin(errs))
    return i, errs[i]


PROBES = [complex(a, b) for a, b in np.random.default_rng(7).uniform(-0.3, 0.3, (20, 2))]


@pytest.fixture(scope="module")
def x_point_states():
    pt = degenerate_eta(-1, 0, 4, 4, "x", 0.6j)
    rng = np.random.default_rng(0)
    seeds = [list(rng.normal(0, 0.3, 4) + 1j * rng.normal(0, 0.3, 4)) for _ in range(30)]
    states, _ = solve_many(pt, seeds)
    return pt, states


@pytest.fixture(scope="module")
def n5_point():
    return degenerate_eta(0, 1, 5, 1, "0", 0.6j)


class TestDegenerateEta:
    def test_real_boundary(self):
        pt = degenerate_eta(0, 1, 6, 1, "0", 0.6j)
        assert pt.eta_value == 0.5 and pt.regime == "real-boundary"

    def test_imag_boundary(self):
        pt = degenerate_eta(1, 0, 6, 1, "0", 1.6j)
        assert pt.eta_value == pytest.approx(0.8j) and pt.regime == "imag-boundary"

    def test_formula(self):
        for L, K, N, N1, tw in [(0, 1, 5, 1, "0"), (-1, 0, 4, 4, "x"), (0, -1, 4, 4, "z"), (0, 0, 2, 0, "x")]:
            pt = degenerate_eta(L, K, N, N1, tw, 1.6j)
            t = Twist.parse(tw)
            ref = ((2 * L + t.dx + t.dy) * 1.6j + 2 * K + t.dy + t.dz) / (N - 2 * N1)
            assert pt.eta_value == pytest.approx(ref, abs=1e-15)

    def test_lattice_spacing(self):
        n = 40
        etas = [degenerate_eta(0, k, n, 0, "0", 0.6j).eta_value.real for k in range(1, 5)]
        assert np.allclose(np.diff(etas), 2 / n)

    @pytest.mark.parametrize("args", [(0, 0, 4, 0, "0"), (0, 2, 4, 0, "0"), (2, 0, 4, 0, "0")])
    def test_excluded_points(self, args):
        with pytest.raises(DomainError):
            degenerate_eta(*args, 0.6j)

    @pytest.mark.parametrize("L,K", [(0, 0), (1, -1), (-1, 2), (3, 0)])
    def test_y_twist_never_real_or_imaginary(self, L, K):
        with pytest.raises(DomainError):
            degenerate_eta(L, K, 4, 0, "y", 0.6j)

    def test_zero_denominator(self):
        with pytest.raises(ValueError):
            degenerate_eta(0, 1, 4, 2, "0", 0.6j)

    def test_selection_count(self):
        assert selection_count(degenerate_eta(0, 1, 5, 1, "0", 0.6j)) == 5
        assert selection_count(degenerate_eta(-1, 0, 4, 4, "x", 0.6j)) == 8


class TestSeeds:
    def test_real_string(self, n5_point):
        u = string_seed([(1, 1, 0.1)], n5_point)
        assert u[0] == pytest.approx(1j * 0.1 - n5_point.eta_value / 2)

    def test_two_string_imag(self):
        pt = degenerate_eta(-1, 0, 4, 4, "x", 0.6j)
        eta = pt.eta_value
        u = string_seed([(2, -1, 0.05), (1, 1, 0.2), (1, 1, -0.2)], pt)
        lam = u + eta / 2
        assert lam[0] - lam[1] == pytest.approx(eta)
        assert (lam[0] + lam[1]) / 2 == pytest.approx(0.05 + 0.5 * pt.tau)
        assert len(u) == 4

    def test_seed_count_checked(self, n5_point):
        with pytest.raises(ValueError):
            solve_bae(n5_point, seed=[(2, 1, 0.0)])


class TestSolve:
    def test_string_seed_converges_with_monotone_trace(self, n5_point):
        st = solve_bae(n5_point, seed=[(1, 1, 0.0)], k=1)
        assert st.residual < 1e-10
        assert all(b < a for a, b in zip(st.trace, st.trace[1:]))
        assert np.max(bae.bae_residuals(st)) < 1e-10

    def test_coalescing_seed(self):
        pt = degenerate_eta(-1, 0, 4, 4, "x", 0.6j)
        with pytest.raises(CoalescenceError):
            solve_bae(pt, seed=[0.1, 0.1, 0.2j, -0.2j])

    def test_iteration_cap_reports_trace(self, n5_point):
        with pytest.raises(BaeConvergenceError) as info:
            solve_bae(n5_point, seed=[0.2 + 0.1j], k=2, max_iter=1, tol=1e-30, accept=0)
        assert len(info.value.trace) >= 1

    def test_states_match_ed(self, x_point_states):
        pt, states = x_point_states
        assert states
        _, recs, ed = ed_lambdas(pt, PROBES)
        matched = set()
        for st in states:
            i, err = best_match(st, PROBES, ed)
            if err < 1e-6:
                matched.add(i)
        assert len(matched) >= 4

    def test_accepted_state_invariants(self, x_point_states):
        pt, states = x_point_states
        m = SpinChainModel(pt.N, pt.params(), pt.twist)
        recs = diagonalize(m)
        _, _, ed = ed_lambdas(pt, PROBES)
        p = pt.params()
        for st in states[:6]:
            assert np.max(bae.bae_residuals(st)) < 1e-10
            # selection rule: Lambda(0) is the prescribed root of unity
            ph = cmath.exp(1j * st.selection_index * math.pi / pt.N)
            assert tq_lambda(0.0, st) == pytest.approx(ph, abs=1e-10)
            assert check_poles(st) < 1e3
            i, err = best_match(st, PROBES, ed)
            if err < 1e-6:
                zs = find_zeros(LambdaEvaluator(m, recs[i].state))
                for z in zs.zeros:
                    for ul in st.roots:
                        d = (z - p.eta / 2) - ul
                        d -= round(d.imag / p.t) * p.tau
                        d -= round(d.real)
                        assert abs(d) > 1e-8

    def test_quasi_periodicity(self, x_point_states):
        pt, states = x_point_states
        p = pt.params()
        tw = pt.twist
        u = 0.1234 + 0.0567j
        for st in states[:4]:
            lu = tq_lambda(u, st)
            p3 = (-1) ** pt.N * cmath.exp(-1j * math.pi * (tw.dx + tw.dy)) * lu
            assert abs(tq_lambda(u + 1, st) - p3) < 1e-8 * max(1, abs(lu))
            expo = pt.N * u + pt.N * (p.eta + p.tau) / 2 + (tw.dy + tw.dz) / 2
            p4 = (-1) ** pt.N * cmath.exp(-2j * math.pi * expo) * lu
            assert abs(tq_lambda(u + p.tau, st) - p4) < 1e-8 * max(1, abs(p4))

    def test_empty_root_set_at_boundary_point(self):
        # eta = tau/2 with N1 = 0: every ED level is reached by some selection index
        pt = degenerate_eta(0, 0, 2, 0, "x", 0.6j)
        states, failures = solve_many(pt, [[]])
        assert not failures
        _, recs, ed = ed_lambdas(pt, PROBES)
        matched = {best_match(st, PROBES, ed) for st in states}
        assert {i for i, err in matched if err < 1e-7} == set(range(len(recs)))

    def test_invalid_state_detected(self, n5_point):
        st = solve_bae(n5_point, seed=[(1, 1, 0.0)], k=1)
        broken = BetheState(st.roots + 0.05, st.phi, st.selection_index, st.point)
        with pytest.raises(InvalidStateError):
            check_poles(broken)

    def test_json(self, n5_point):
        st = solve_bae(n5_point, seed=[(1, 1, 0.0)], k=1)
        data = json.loads(st.to_json())
        assert data["point"]["N1"] == 1 and len(data["roots"]) == 1

    def test_size_limit(self):
        pt = degenerate_eta(0, 1, 10, 0, "0", 0.6j)
        with pytest.raises(ValueError):
            solve_bae(pt, seed=[])
