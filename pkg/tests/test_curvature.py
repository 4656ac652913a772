import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flagein import DomainError, Metric, curvature_summary, residual_jacobian, residual_system, ricci_component
from flagein.classify import apply_permutation
from flagein.curvature import ricci_vector
from flagein.flag_model import FlagManifold, positive_roots

import oracles

KE4 = [1, 1, 2, 3, 2, 3, 4, 1, 2, 1]


def test_ricci_examples():
    assert ricci_component(Metric(2, [1, 1, 1]), (1, 2)) == pytest.approx(5 / 12, abs=1e-15)
    ke = Metric(2, [1, 2, 1])
    for r in positive_roots(2):
        assert ricci_component(ke, r) == pytest.approx(1 / 3, abs=1e-15)
    bi = Metric(4, np.ones(10))
    for r in positive_roots(4):
        assert ricci_component(bi, r) == pytest.approx(7 / 20, abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_ricci_matches_exact_rationals(n):
    rng = np.random.default_rng(n)
    fm = FlagManifold(n)
    lam = [Fraction(int(v), 7) for v in rng.integers(1, 30, fm.N)]
    exact = oracles.ricci_exact(lam, n + 1)
    got = ricci_vector(Metric(n, [float(v) for v in lam]))
    assert np.max(np.abs(got - np.array([float(v) for v in exact]))) < 1e-13


@pytest.mark.parametrize("n", [2, 3])
def test_ricci_matches_general_bracket_formula(n):
    # general Wang-Ziller style formula with brackets from su(n+1) matrices
    roots, br = oracles.all_brackets(n + 1)
    rng = np.random.default_rng(7)
    for _ in range(5):
        lam = rng.uniform(0.2, 5, len(roots))
        expected = oracles.ricci_general(lam, n + 1, br)
        assert np.max(np.abs(ricci_vector(Metric(n, lam)) - expected)) < 1e-12


def test_ricci_component_agrees_with_vector(backend):
    lam = np.random.default_rng(3).uniform(0.3, 4, 10)
    m = Metric(4, lam)
    vec = ricci_vector(m, backend=backend)
    scalar = [ricci_component(m, r) for r in positive_roots(4)]
    assert np.max(np.abs(vec - scalar)) < 1e-14


def test_summary_bi_invariant():
    s = curvature_summary(Metric(4, np.ones(10)))
    assert abs(s.scalar_curvature - 7) < 1e-12
    assert abs(s.volume_factor - 1) < 1e-12
    assert abs(s.h_invariant - 7) < 1e-12
    assert s.einstein_constant == pytest.approx(0.35, abs=1e-14)
    assert s.is_einstein


def test_summary_kaehler_einstein_n4():
    s = curvature_summary(Metric(4, KE4))
    assert abs(s.scalar_curvature - 4) < 1e-10
    assert abs(s.volume_factor - 1.76172959) < 1e-7
    assert abs(s.h_invariant - 7.046918359) < 1e-9


def test_summary_n2():
    s = curvature_summary(Metric(2, [1, 2, 1]))
    assert s.scalar_curvature == pytest.approx(2, abs=1e-14)
    # prod(lam^2) = 4 and d = 6
    assert s.volume_factor == pytest.approx(4 ** (1 / 6), abs=1e-14)
    assert s.h_invariant == pytest.approx(2 * 4 ** (1 / 6), abs=1e-13)


def test_summary_non_einstein_has_no_constant():
    s = curvature_summary(Metric(2, [1, 2, 2]))
    assert s.einstein_constant is None
    assert not s.is_einstein
    assert s.max_ricci_deviation > 1e-3
    assert s.scalar_curvature == 2 * s.ricci.sum()
    assert s.h_invariant == s.volume_factor * s.scalar_curvature


def test_residual_examples(backend):
    assert np.max(np.abs(residual_system([1, 1], 2, backend=backend))) < 1e-15
    assert np.max(np.abs(residual_system([2, 1], 2, backend=backend))) < 1e-15
    F = residual_system([2, 2], 2, backend=backend)
    r12 = 0.5 + (0.25 - 1 - 1) / 12
    r13 = 0.25 + (2 / 2 - 1 / 4 - 2 / 2) / 12
    assert F[0] == pytest.approx(r12 - r13, abs=1e-15)
    assert np.any(np.abs(F) > 1e-3)


@pytest.mark.parametrize(
    "call,args",
    [
        (residual_system, ([1.0, -1.0], 2)),
        (residual_system, ([1.0, 0.0], 2)),
        (residual_jacobian, ([1.0, np.nan], 2)),
        (residual_system, ([1.0], 2)),
    ],
)
def test_residual_domain_errors(call, args):
    with pytest.raises(ValueError):
        call(*args)


def test_metric_validation():
    with pytest.raises(DomainError):
        Metric(2, [1, 0, 1])
    with pytest.raises(ValueError):
        Metric(2, [1, 1])
    with pytest.raises(ValueError):
        ricci_component(Metric(2, [1, 1, 1]), (1, 4))
    m = Metric(2, [1, 2, 1])
    with pytest.raises(ValueError):
        m.lam[0] = 3.0


@pytest.mark.parametrize("n", [2, 3, 4])
def test_jacobian_matches_finite_differences(n, backend):
    rng = np.random.default_rng(100 + n)
    k = n * (n + 1) // 2 - 1
    for _ in range(10):
        x = rng.uniform(0.5, 2, k)
        J = residual_jacobian(x, n, backend=backend)
        fd = oracles.central_jacobian(lambda y: residual_system(y, n, backend=backend), x)
        assert np.max(np.abs(J - fd)) / max(1.0, np.max(np.abs(fd))) < 1e-6


def test_jacobian_nonsingular_at_isolated_solution():
    assert abs(np.linalg.det(residual_jacobian([2, 1], 2))) > 1e-3


positive = st.floats(min_value=0.05, max_value=20, allow_nan=False, allow_infinity=False)


@st.composite
def metrics(draw, ranks=(2, 3, 4)):
    n = draw(st.sampled_from(ranks))
    N = n * (n + 1) // 2
    return Metric(n, draw(st.lists(positive, min_size=N, max_size=N)))


@settings(max_examples=60, deadline=None)
@given(metrics(), st.sampled_from([0.1, 2.0, 17.0]))
def test_homothety(m, c):
    base = ricci_vector(m)
    scaled = ricci_vector(m.scaled(c))
    assert np.allclose(scaled * c, base, rtol=1e-12, atol=0)
    h0 = curvature_summary(m).h_invariant
    assert abs(curvature_summary(m.scaled(c)).h_invariant - h0) <= 1e-10 * abs(h0)


@settings(max_examples=60, deadline=None)
@given(metrics(), st.data())
def test_permutation_equivariance(m, data):
    sigma = data.draw(st.permutations(range(1, m.n + 2)))
    img = apply_permutation(m, sigma)
    for i, j in positive_roots(m.n):
        a, b = sorted((sigma[i - 1], sigma[j - 1]))
        assert abs(ricci_component(img, (a, b)) - ricci_component(m, (i, j))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(metrics())
def test_reversed_root_gives_same_value(m):
    for i, j in positive_roots(m.n):
        assert ricci_component(m, (j, i)) == ricci_component(m, (i, j))


def test_kaehler_einstein_points_have_zero_residual():
    for w in itertools.permutations(range(1, 6)):
        lam = np.array([abs(w[i - 1] - w[j - 1]) for i, j in positive_roots(4)], float)
        lam /= lam[0]
        assert np.max(np.abs(residual_system(lam[1:], 4))) < 1e-12
