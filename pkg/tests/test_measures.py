
import numpy as np
import pytest

from fracquant.dyadic import DyadicCube
from fracquant.errors import ConfigError, PrecisionError
from fracquant.measures import (AtomicMeasure, EmpiricalSample, InhomogeneousSelfSimilarMeasure,
                                UniformDensity, cantor_measure,
                                measure_from_dict, sierpinski_tetraeder)

from conftest import half_mixture


def pullback_mass(model, level, idx, system, i, inner):
    """``nu(f_i^{-1} Q)`` for a dyadic-aligned map ``f_i`` and level cube ``idx``."""
    k = system.k[i]
    if level < k:
        return None
    local = np.asarray(idx) - system.m[i] * (1 << (level - k))
    if np.any(local < 0) or np.any(local >= 1 << (level - k)):
        return 0.0
    return inner.masses(level - k, local[None, :])[0]


class TestCubeMass:
    def test_uniform(self, uniform1):
        assert uniform1.cube_mass(DyadicCube(3, (5,))) == 0.125

    def test_tetraeder_level_one(self, tetra):
        assert tetra.cube_mass(DyadicCube(1, (0, 0, 0))) == pytest.approx(0.66, abs=1e-15)
        off = [DyadicCube(1, k) for k in [(1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 1)]]
        assert all(tetra.cube_mass(q) == 0 for q in off)

    def test_dirac(self, point_mass):
        assert point_mass.cube_mass(DyadicCube(1, (0,))) == 1.0
        assert point_mass.cube_mass(DyadicCube(1, (1,))) == 0.0


class TestLevelMasses:
    def test_uniform_2d(self):
        t = UniformDensity(2).level_masses(2)
        assert len(t) == 16 and np.all(t.masses == 1 / 16)

    def test_cantor_level_one(self, cantor):
        t = cantor.level_masses(1)
        assert len(t) == 2
        assert t.masses == pytest.approx([0.5, 0.5], abs=cantor.mass_tolerance)

    def test_tetraeder_level_two(self, tetra):
        t = tetra.level_masses(2)
        p = np.array([0.66, 0.2, 0.08, 0.06])
        assert len(t) == 16
        assert np.sort(t.masses) == pytest.approx(np.sort(np.outer(p, p).ravel()), abs=1e-15)
        assert t.total() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", range(0, 9))
    def test_totals_and_subadditivity(self, tetra, cantor, n):
        for model in (tetra, cantor, half_mixture()):
            t = model.level_masses(n)
            assert t.total() == pytest.approx(1.0, abs=max(model.mass_tolerance, 1e-12))
            if n:
                parents = model.masses(n - 1, t.indices >> 1)
                assert np.all(parents >= t.masses - model.mass_tolerance - 1e-15)


class TestSampling:
    def test_dirac_samples(self, point_mass):
        assert np.all(point_mass.sample(100, seed=3) == 0.3)

    def test_uniform_ks(self, uniform1):
        x = np.sort(uniform1.sample(100_000, seed=1)[:, 0])
        grid = np.arange(1, len(x) + 1) / len(x)
        assert np.max(np.abs(grid - x)) < 0.01

    def test_cantor_half(self, cantor):
        x = cantor.sample(100_000, seed=2)[:, 0]
        assert np.mean(x <= 0.5) == pytest.approx(0.5, abs=0.01)

    def test_reproducible(self, cantor):
        assert np.array_equal(cantor.sample(50, seed=7), cantor.sample(50, seed=7))


class TestSelfSimilarity:
    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_tetraeder_fixed_point(self, tetra, n):
        t = tetra.level_masses(n)
        for idx, m in zip(t.indices[:50], t.masses[:50]):
            rhs = sum(p * pullback_mass(tetra, n, idx, tetra.system, i, tetra)
                      for i, p in enumerate(tetra.probabilities))
            assert m == pytest.approx(rhs, rel=1e-12)

    @pytest.mark.parametrize("n", [3, 5])
    def test_inhomogeneous_fixed_point(self, n):
        mu = UniformDensity(1)
        nu = InhomogeneousSelfSimilarMeasure([0.5, 0.5], [[0.0], [0.5]], [0.3, 0.2], 0.5, mu)
        assert nu.exact
        t = nu.level_masses(n)
        assert t.total() == pytest.approx(1.0, abs=1e-12)
        for idx, m in zip(t.indices, t.masses):
            rhs = 0.5 * mu.masses(n, idx[None, :])[0]
            rhs += sum(p * pullback_mass(nu, n, idx, nu.system, i, nu)
                       for i, p in enumerate(nu.probabilities))
            assert m == pytest.approx(rhs, abs=1e-12)


class TestOracleAgreement:
    """Monte Carlo masses of an aligned model against its exact recursion."""

    @pytest.mark.parametrize("n", range(1, 7))
    def test_tetraeder(self, tetra, n):
        samples = 1_000_000
        mc = sierpinski_tetraeder(oracle="monte_carlo", samples=samples, seed=11)
        exact = tetra.level_masses(n)
        est = mc.masses(n, exact.indices)
        sigma = np.sqrt(exact.masses * (1 - exact.masses) / samples)
        z = np.abs(est - exact.masses) / sigma
        # the normal approximation needs a few expected hits per cube
        big = exact.masses * samples >= 20
        assert np.count_nonzero(big) > 0
        # a 3 sigma band is exceeded by chance on about 0.3% of cubes
        assert np.mean(z[big] > 3) <= 0.01
        assert np.all(z[big] <= 5.5)
        assert np.all(est[~big] <= 1e-4)


class TestParsing:
    def test_minimal_uniform(self):
        m = measure_from_dict({"kind": "uniform_density", "dimension": 1})
        assert isinstance(m, UniformDensity)

    def test_probability_sum_reported(self):
        spec = {"kind": "self_similar", "dimension": 1,
                "maps": [{"ratio": 0.5, "translation": [0]}, {"ratio": 0.5, "translation": [0.5]}],
                "probabilities": [0.6, 0.5]}
        with pytest.raises(ConfigError) as info:
            measure_from_dict(spec)
        assert any("probabilities sum 1.1 ≠ 1" in e for e in info.value.errors)

    def test_tetraeder_spec_is_exact(self):
        spec = {"kind": "self_similar", "dimension": 3, "probabilities": [0.66, 0.2, 0.08, 0.06],
                "maps": [{"ratio": 0.5, "translation": t} for t in
                         ([0, 0, 0], [0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5])]}
        m = measure_from_dict(spec)
        assert m.exact and m.level_exact

    def test_cantor_is_approximate(self, cantor):
        assert not cantor.exact
        assert cantor.mass_tolerance > 0

    def test_all_errors_collected(self):
        spec = {"kind": "self_similar", "dimension": 1, "probabilities": [0.9, 0.5],
                "maps": [{"ratio": 1.5, "translation": [0]}, {"ratio": "x"}]}
        with pytest.raises(ConfigError) as info:
            measure_from_dict(spec)
        assert len(info.value.errors) >= 2

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            measure_from_dict({"kind": "gibbs"})

    @pytest.mark.parametrize("model", [UniformDensity(2), cantor_measure(samples=1000),
                                       AtomicMeasure([[0.1], [0.7]], [0.25, 0.75]),
                                       EmpiricalSample([[0.2, 0.2], [0.9, 0.1]])])
    def test_roundtrip(self, model):
        again = measure_from_dict(model.to_dict())
        assert again.to_dict() == model.to_dict()
        assert np.array_equal(again.level_masses(4).masses, model.level_masses(4).masses)

    def test_mixture_components(self):
        m = half_mixture(samples=10_000)
        assert m.level_masses(1).masses == pytest.approx([0.5, 0.5], abs=1e-12)
        again = measure_from_dict(m.to_dict())
        assert again.kind == "mixture"


class TestAffineInvariance:
    def test_scaled_atoms_same_exponent(self):
        from fracquant.spectrum import quantization_dimension
        rng = np.random.default_rng(5)
        pts = rng.random((400, 1))
        a = AtomicMeasure(pts)
        b = AtomicMeasure(0.25 + 0.5 * pts)
        da = quantization_dimension(a, 1.0, n_max=8, method="regression")[1]
        db = quantization_dimension(b, 1.0, n_max=9, n_min=4, method="regression")[1]
        assert da == pytest.approx(db, abs=0.1)


class TestDepth:
    def test_mc_depth_limited(self, cantor):
        with pytest.raises(PrecisionError):
            cantor.level_masses(cantor.max_level + 1)
