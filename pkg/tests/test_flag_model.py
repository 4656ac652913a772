import itertools
from fractions import Fraction

import numpy as np
import pytest

from flagein import FlagManifold, positive_roots, structure_constant
from flagein.flag_model import chain_table

import oracles


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_root_count_and_order(n):
    roots = positive_roots(n)
    assert len(roots) == n * (n + 1) // 2
    assert roots == sorted(roots)
    assert all(1 <= i < j <= n + 1 for i, j in roots)


def test_manifold_dimensions():
    fm = FlagManifold(4)
    assert (fm.m, fm.N, fm.d) == (5, 10, 20)
    assert fm.column_names()[:3] == ["l_1_2", "l_1_3", "l_1_4"]
    assert fm.root_index((3, 1)) == fm.root_index((1, 3)) == 1


@pytest.mark.parametrize("bad", [0, -1, 2.5, "3"])
def test_rank_validation(bad):
    with pytest.raises((ValueError, TypeError)):
        FlagManifold(bad)


def test_root_index_rejects_diagonal():
    with pytest.raises(ValueError):
        FlagManifold(3).root_index((2, 2))


@pytest.mark.parametrize("m", [3, 4, 5])
def test_structure_constants_match_matrix_brackets(m):
    # brackets computed from explicit su(m) matrices, Q = -2m tr
    n = m - 1
    roots, br = oracles.all_brackets(m)
    for a, b, c in itertools.product(roots, repeat=3):
        expected = br[(a, b, c)]
        if len({a, b, c}) < 3:
            # only distinct triples are modelled; repeated ones vanish for A_n
            assert expected == pytest.approx(0.0, abs=1e-12)
            continue
        assert float(structure_constant(n, a, b, c)) == pytest.approx(expected, abs=1e-12)


def test_structure_constant_is_exact_and_symmetric():
    n = 3
    v = structure_constant(n, (1, 2), (2, 3), (1, 3))
    assert v == Fraction(1, 4)
    for p in itertools.permutations([(1, 2), (2, 3), (1, 3)]):
        assert structure_constant(n, *p) == v
    assert structure_constant(n, (1, 2), (3, 4), (1, 3)) == 0


def test_chain_table_lists_both_legs():
    n = 3
    fm = FlagManifold(n)
    b, c = chain_table(n)
    assert b.shape == c.shape == (fm.N, n - 1)
    assert not b.flags.writeable
    for p, (i, j) in enumerate(fm.roots):
        ks = sorted(set(range(1, n + 2)) - {i, j})
        assert list(b[p]) == [fm.root_index((i, k)) for k in ks]
        assert list(c[p]) == [fm.root_index((k, j)) for k in ks]
