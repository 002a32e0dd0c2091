import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affourier import systems
from affourier.errors import BudgetExceeded, EmptyPool, InsufficientSamples
from affourier.fourier import (FourierQuery, barycenter, chaos_sample, check_cs_bound, evaluate,
                               fourier_mc, fourier_recursive, frostman, frostman_lower_exponent,
                               leaf_bound, tube_mass)
from affourier.ifs import attractor_ball

from conftest import random_system


def cantor_oracle(x, terms=60):
    """Infinite product over ternary digits in {0, 2}."""
    k = np.arange(1, terms + 1)
    return complex(np.prod(np.exp(-2j * np.pi * x / 3.0**k) * np.cos(2 * np.pi * x / 3.0**k)))


@pytest.fixture
def small_systems(rng):
    return [random_system(rng, k, d, max_norm=0.5) for k, d in [(2, 2), (3, 2), (2, 3)]]


@pytest.fixture(scope="module")
def proximal_pool():
    return chaos_sample(systems.proximal_pair(), 200_000, seed=3)


@pytest.fixture(scope="module")
def cantor_pool():
    return chaos_sample(systems.cantor_product(), 200_000, seed=4)


class TestSampler:
    def test_deterministic(self, proximal):
        a = chaos_sample(proximal, 5000, seed=9)
        b = chaos_sample(proximal, 5000, seed=9)
        c = chaos_sample(proximal, 5000, seed=10)
        assert np.array_equal(a.points, b.points)
        assert not np.array_equal(a.points, c.points)

    def test_dirac(self, dirac):
        pool = chaos_sample(dirac, 1000)
        assert np.allclose(pool.points, [2.0, 0.0], atol=1e-11)

    def test_within_ball(self, random_systems):
        for s in random_systems:
            c, r = attractor_ball(s)
            pts = chaos_sample(s, 20_000, seed=2).points
            assert np.all(np.linalg.norm(pts - c, axis=1) <= r * (1 + 1e-9) + 1e-12)

    def test_mean_matches_barycenter(self, proximal_pool, proximal):
        m = proximal_pool.points.mean(axis=0)
        se = proximal_pool.points.std(axis=0) / math.sqrt(len(proximal_pool))
        assert np.all(np.abs(m - barycenter(proximal)) < 5 * se)

    def test_cantor_digits(self, cantor_pool):
        # ternary digits of the first coordinate are 0 or 2
        x = cantor_pool.points[:2000, 0]
        for _ in range(8):
            x = 3 * x
            d = np.floor(x + 1e-9)
            assert set(np.unique(d).tolist()) <= {0.0, 2.0}
            x -= d
        assert np.all(cantor_pool.points[:, 1] == 0)


def test_barycenter_cantor(cantor):
    assert np.allclose(barycenter(cantor), [0.5, 0.0])


def test_barycenter_fixed_point_of_mean_map(random_systems):
    for s in random_systems:
        c = barycenter(s)
        mean_map = np.einsum("k,kij,j->i", s.weights, s.linear, c) + s.weights @ s.translation
        assert np.allclose(mean_map, c, atol=1e-12)


class TestRecursive:
    @pytest.mark.parametrize("x", [0.0, 0.37, 1.0, 2.5, 17.0, 81.0, 200.3])
    def test_cantor_product_formula(self, cantor, x):
        v = fourier_recursive(cantor, [x, 5.0], tol=1e-9)
        assert abs(v.value - cantor_oracle(x)) <= v.error + 1e-12
        assert v.error <= 1e-9

    def test_zero_frequency(self, random_systems):
        for s in random_systems:
            v = fourier_recursive(s, np.zeros(s.dim))
            assert v.value == 1 and v.error == 0

    def test_dirac_phase(self, dirac):
        xi = np.array([3.3, -1.2])
        v = fourier_recursive(dirac, xi, tol=1e-10)
        assert abs(v.value - np.exp(-2j * np.pi * 2 * 3.3)) <= 1e-10

    def test_lattice_constant_along_powers(self, lattice):
        vals = [fourier_recursive(lattice, [3.0**k, 0.0], tol=1e-10) for k in range(9)]
        oracle = np.prod([abs(np.cos(2 * np.pi / 3.0**m)) for m in range(1, 80)])
        for v in vals:
            assert abs(abs(v.value) - oracle) <= 1e-9
            assert v.nodes < 1000

    def test_budget(self, proximal):
        with pytest.raises(BudgetExceeded):
            fourier_recursive(proximal, [500.0, 300.0], tol=1e-8, cap=1000)

    def test_self_affinity(self, rng, small_systems):
        for s in small_systems:
            xi = rng.normal(size=s.dim) * 2
            lhs = fourier_recursive(s, xi, tol=1e-6)
            rhs = 0j
            err = 0.0
            for a, b, p in zip(s.linear, s.translation, s.weights):
                v = fourier_recursive(s, a.T @ xi, tol=1e-6)
                rhs += p * np.exp(-2j * np.pi * xi @ b) * v.value
                err += p * v.error
            assert abs(lhs.value - rhs) <= lhs.error + err + 1e-12

    def test_conjugate_symmetry(self, rng, proximal):
        for _ in range(5):
            xi = rng.normal(size=2) * 20
            a = fourier_recursive(proximal, xi, tol=1e-8)
            b = fourier_recursive(proximal, -xi, tol=1e-8)
            assert abs(a.value - np.conj(b.value)) <= a.error + b.error + 1e-12

    def test_translation_covariance(self, rng, small_systems):
        for s in small_systems:
            v = rng.normal(size=s.dim)
            xi = rng.normal(size=s.dim) * 2
            a = fourier_recursive(s, xi, tol=1e-6)
            b = fourier_recursive(s.translated(v), xi, tol=1e-6)
            assert abs(b.value - np.exp(-2j * np.pi * xi @ v) * a.value) <= a.error + b.error + 1e-11

    def test_agrees_with_mc(self, proximal, proximal_pool, rng):
        for _ in range(10):
            xi = rng.normal(size=2) * 15
            r = fourier_recursive(proximal, xi, tol=1e-6)
            m = fourier_mc(proximal_pool, xi)
            assert abs(r.value - m.value) <= 4 * m.error + r.error

    def test_leaf_bound(self):
        assert leaf_bound(0.0, 1.0) == 0.0
        assert leaf_bound(1e-3, 1.0) == pytest.approx(0.5 * (2e-3 * np.pi) ** 2)
        assert leaf_bound(100.0, 1.0) == 2.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.1, 30))
def test_modulus_at_most_one(seed, scale):
    rng = np.random.default_rng(seed)
    s = random_system(rng, 2, 2, max_norm=0.6)
    v = fourier_recursive(s, rng.normal(size=2) * scale, tol=1e-4)
    assert abs(v.value) <= 1 + v.error + 1e-12


class TestMonteCarlo:
    def test_empty_pool(self):
        with pytest.raises(EmptyPool):
            fourier_mc(np.zeros((0, 2)), [1.0, 0.0])

    def test_dirac_exact(self, dirac):
        v = fourier_mc(chaos_sample(dirac, 100), [0.3, 0.0])
        assert abs(v.value - np.exp(-2j * np.pi * 0.6)) < 1e-10
        assert v.error < 1e-10

    def test_stderr_plugin(self, rng):
        pts = rng.uniform(size=(400, 2))
        xi = np.array([0.7, 0.2])
        v = fourier_mc(pts, xi)
        e = np.exp(-2j * np.pi * pts @ xi)
        assert v.value == pytest.approx(e.mean())
        assert v.error == pytest.approx(np.sqrt(np.mean(np.abs(e - e.mean()) ** 2) / 400))

    def test_evaluate_dispatch(self, cantor):
        q = FourierQuery((1.0, 0.0), method="montecarlo", samples=50_000)
        v = evaluate(cantor, q, seed=1)
        assert v.method == "montecarlo"
        assert abs(v.value - cantor_oracle(1.0)) < 5 * v.error
        assert evaluate(cantor, FourierQuery((1.0, 0.0))).method == "recursive"
        with pytest.raises(ValueError):
            FourierQuery((1.0, 0.0), method="exact")


class TestFrostman:
    def test_cantor_exponents(self, cantor, cantor_pool):
        radii = 0.9 * 3.0 ** -np.arange(1, 8)
        est = frostman(cantor, cantor_pool, radii)
        assert est.s1 == pytest.approx(math.log(2) / math.log(3))
        assert 0.5 <= est.s2_hat <= 0.75
        # a ball of radius 0.9 * 3^-n about a Cantor point holds between 2^-(n+1) and 2^-n
        for n, m in zip(range(1, 8), est.sup_mass):
            assert 0.9 * 2.0 ** -(n + 1) <= m <= 1.1 * 2.0**-n

    def test_lower_exponent_closed_form(self, proximal):
        expect = max(math.log(0.5) / math.log(0.45), math.log(0.5) / math.log(0.6))
        assert frostman_lower_exponent(proximal) == pytest.approx(expect)

    def test_insufficient(self, cantor):
        with pytest.raises(InsufficientSamples):
            frostman(cantor, np.zeros((10, 2)), [0.1, 0.01])

    def test_radii_order(self, cantor, cantor_pool):
        with pytest.raises(ValueError):
            frostman(cantor, cantor_pool, [0.01, 0.1])


class TestPairwise:
    def test_tube_mass_bruteforce(self, proximal_pool):
        pts = proximal_pool.points[:1500]
        delta = 0.05
        d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        iu = np.triu_indices(len(pts), 1)
        oracle = np.mean(d[iu] <= delta)
        est, se = tube_mass(pts, delta)
        assert est == pytest.approx(oracle, abs=1e-12)
        assert se > 0

    def test_tube_mass_dirac(self, dirac):
        est, se = tube_mass(chaos_sample(dirac, 500), 0.0)
        assert est == 1.0 and se == 0.0

    def test_cs_trivial_cases(self, proximal, proximal_pool, dirac):
        r = check_cs_bound(proximal, proximal_pool, [0.0, 0.0], 2.0)
        assert r.lhs == r.rhs == 1.0 and not r.violated
        r = check_cs_bound(dirac, chaos_sample(dirac, 1000), [4.0, 1.0], 1.0)
        assert r.lhs == pytest.approx(1.0) and r.rhs == pytest.approx(1.0)

    @pytest.mark.parametrize("t", [0.0, 1.0, 2.5])
    def test_cs_holds(self, proximal, proximal_pool, t):
        xi = np.array([6.0, 3.0])
        r = check_cs_bound(proximal, proximal_pool, xi, t)
        assert not r.violated
        # lhs estimates |mu_hat(xi)|^2
        exact = abs(fourier_recursive(proximal, xi, tol=1e-8).value) ** 2
        assert abs(r.lhs - exact) < 5 * r.lhs_stderr
