import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracquant.closed_forms import (SimilarSystem, beta_inhomogeneous, critical_q,
                                    equation_residual, solve_beta_selfsim,
                                    solve_beta_selfsim_root, solve_epsilon, solve_kr,
                                    solve_kr_root)
from fracquant.errors import DomainError, InputError
from fracquant.spectrum import qdim_from_qr, solve_qr

from conftest import CANTOR_DIM, TETRA_P, tetra_beta

CANTOR = SimilarSystem((1 / 3, 1 / 3), (0.5, 0.5))


@st.composite
def systems(draw):
    n = draw(st.integers(2, 5))
    ratios = draw(st.lists(st.floats(0.05, 0.6), min_size=n, max_size=n))
    raw = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n)))
    return SimilarSystem(ratios, tuple(raw / raw.sum()))


class TestKr:
    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0, 4.0])
    def test_cantor(self, r):
        assert solve_kr(CANTOR, r) == pytest.approx(CANTOR_DIM, abs=1e-10)

    @pytest.mark.parametrize("r", [0.3, 1.0, 7.0])
    def test_uniform(self, r):
        assert solve_kr(SimilarSystem((0.5, 0.5), (0.5, 0.5)), r) == pytest.approx(1.0, abs=1e-10)

    def test_tetraeder_matches_spectrum(self):
        s = SimilarSystem((0.5,) * 4, TETRA_P, dimension=3)
        q = solve_qr(tetra_beta, 2.3, tol=1e-13).q_r
        assert solve_kr(s, 2.3) == pytest.approx(qdim_from_qr(2.3, q), abs=1e-8)

    def test_requires_two_maps(self):
        with pytest.raises(DomainError):
            solve_kr(SimilarSystem((0.5,), (1.0,)), 1.0)

    def test_requires_probability(self):
        with pytest.raises(DomainError):
            solve_kr(SimilarSystem((0.5, 0.5), (0.3, 0.3)), 1.0)

    @settings(max_examples=20, deadline=None)
    @given(systems(), st.floats(0.2, 5.0))
    def test_residual_and_equivalence(self, system, r):
        root = solve_kr_root(system, r)
        assert abs(root.residual) <= 1e-10
        assert abs(equation_residual("kr", system, root.value, r)) <= 1e-10
        q = critical_q(lambda x: solve_beta_selfsim(system, x), r)
        assert root.value == pytest.approx(r * q / (1 - q), rel=1e-8, abs=1e-8)


class TestBetaSelfsim:
    @pytest.mark.parametrize("q", [0.0, 0.25, 0.5, 1.3])
    def test_cantor(self, q):
        assert solve_beta_selfsim(CANTOR, q) == pytest.approx((1 - q) * CANTOR_DIM, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 8])
    def test_equal_weights(self, n):
        s = SimilarSystem((0.5,) * n, (1 / n,) * n)
        for q in (0.0, 0.4, 1.7):
            assert solve_beta_selfsim(s, q) == pytest.approx((1 - q) * math.log2(n), abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(systems(), st.floats(0.0, 3.0))
    def test_residual(self, system, q):
        root = solve_beta_selfsim_root(system, q)
        assert abs(equation_residual("beta", system, root.value, q)) <= 1e-10
        assert solve_beta_selfsim(system, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_negative_q(self):
        with pytest.raises(DomainError):
            solve_beta_selfsim(CANTOR, -0.1)


class TestInhomogeneous:
    def test_dirac_condensation(self):
        s = SimilarSystem((0.4, 0.4), (0.35, 0.35))
        for q in (0.2, 0.5, 0.8):
            rho = solve_beta_selfsim(s, q)
            assert beta_inhomogeneous(lambda x: 0.0, s, q) == max(0.0, rho)

    def test_lebesgue_condensation(self):
        s = SimilarSystem((0.4, 0.4), (0.05, 0.05))
        for q in (0.2, 0.5, 0.8):
            expect = max(1 - q, solve_beta_selfsim(s, q))
            assert beta_inhomogeneous(lambda x: 1 - x, s, q) == pytest.approx(expect)

    def test_domain(self):
        with pytest.raises(DomainError):
            beta_inhomogeneous(lambda x: 0.0, CANTOR, 1.0)

    def test_round_trip(self):
        s = SimilarSystem((0.4, 0.4), (0.7, 0.3), (0.5, 0.5))
        r = 1.0
        e1, e2 = solve_epsilon(s, r, which="p"), solve_epsilon(s, r, which="t")
        mu = s.weights("t")

        def beta_mu(q):
            return solve_beta_selfsim(s, q, which="t")

        def beta(q):
            return max(solve_beta_selfsim(s, q, which="p"), beta_mu(q))

        q = critical_q(beta, r)
        assert max(e1, e2) == pytest.approx(r * q / (1 - q), abs=1e-8)
        assert mu.sum() == pytest.approx(1.0)


class TestEpsilon:
    def test_cantor(self):
        s = SimilarSystem((1 / 3, 1 / 3), (0.9, 0.1), (0.5, 0.5))
        assert solve_epsilon(s, 1.0) == pytest.approx(CANTOR_DIM, abs=1e-10)

    def test_zero_weight(self):
        with pytest.raises(DomainError):
            SimilarSystem((0.5, 0.5), (0.5, 0.5), (1.0, 0.0))

    def test_increasing_towards_balance(self):
        # moving weight toward equal shares raises the entropy-like root
        vals = [solve_epsilon(SimilarSystem((0.3, 0.3), (0.5, 0.5), (t, 1 - t)), 1.0)
                for t in (0.9, 0.7, 0.5)]
        assert vals[0] < vals[1] < vals[2]


class TestSystem:
    def test_validation(self):
        with pytest.raises(DomainError):
            SimilarSystem((1.2, 0.5), (0.5, 0.5))
        with pytest.raises(InputError):
            SimilarSystem((0.5, 0.5), (1.0,))
        with pytest.raises(DomainError):
            SimilarSystem((0.5, 0.5), (0.7, 0.7))
        with pytest.raises(InputError):
            CANTOR.weights("t")
