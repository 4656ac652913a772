"""Root-system combinatorics for the full flag manifold SU(n+1)/T^n.

Positive roots of A_n are the pairs ``(i, j)`` with ``1 <= i < j <= n+1``.
All external indices are 1-based; the lexicographic root order defined here
is the column order used everywhere else in the package.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

Root = tuple[int, int]


def _check_rank(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError(f"rank must be an integer, got {type(n).__name__}")
    if n < 1:
        raise ValueError(f"invalid rank n={n}: need n >= 1")
    return int(n)


def positive_roots(n: int) -> list[Root]:
    """All positive roots of A_n as 1-based pairs, lexicographically sorted."""
    n = _check_rank(n)
    m = n + 1
    return [(i, j) for i in range(1, m + 1) for j in range(i + 1, m + 1)]


@dataclass(frozen=True)
class FlagManifold:
    """Combinatorial descriptor of SU(n+1)/T^n."""

    n: int
    m: int = field(init=False)
    roots: tuple[Root, ...] = field(init=False)
    N: int = field(init=False)
    d: int = field(init=False)

    def __post_init__(self):
        n = _check_rank(self.n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", n + 1)
        object.__setattr__(self, "roots", tuple(positive_roots(n)))
        object.__setattr__(self, "N", n * (n + 1) // 2)
        object.__setattr__(self, "d", n * (n + 1))

    def root_index(self, root: Root) -> int:
        """0-based position of ``root`` in the lexicographic order.

        The pair may be given in either orientation.
        """
        i, j = _normalize_root(self.n, root)
        return _index_map(self.n)[(i, j)]

    def column_names(self) -> list[str]:
        return [f"l_{i}_{j}" for i, j in self.roots]


def _normalize_root(n: int, root: Root) -> Root:
    try:
        i, j = (int(v) for v in root)
    except (TypeError, ValueError):
        raise ValueError(f"not an index pair: {root!r}") from None
    m = n + 1
    if not (1 <= i <= m and 1 <= j <= m) or i == j:
        raise ValueError(f"root ({i},{j}) out of range for n={n}: indices must be distinct in [1, {m}]")
    return (i, j) if i < j else (j, i)


@functools.lru_cache(maxsize=None)
def _index_map(n: int) -> dict[Root, int]:
    return {r: p for p, r in enumerate(positive_roots(n))}


def structure_constant(n: int, a: Root, b: Root, c: Root) -> Fraction:
    """Bracket value for three positive roots of A_n.

    Nonzero (equal to 1/(n+1)) exactly when the three unsigned roots form a
    chain ``(i, j), (i, k), (k, j)``, i.e. their index pairs are the three
    edges of a triangle on distinct indices ``i, j, k``. Symmetric in all
    three slots.
    """
    n = _check_rank(n)
    pa, pb, pc = (_normalize_root(n, r) for r in (a, b, c))
    if len({pa, pb, pc}) < 3:
        return Fraction(0)
    verts = set(pa) | set(pb) | set(pc)
    if len(verts) == 3:
        return Fraction(1, n + 1)
    return Fraction(0)


@functools.lru_cache(maxsize=None)
def chain_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Index tables of the chains through each root.

    Returns ``(b, c)``, both of shape ``(N, n-1)``: for root ``p = (i, j)`` and
    its ``t``-th third index ``k`` (increasing, ``k`` not in ``{i, j}``),
    ``b[p, t]`` is the 0-based index of root ``{i, k}`` and ``c[p, t]`` that of
    ``{j, k}``. Arrays are read-only and C-contiguous.
    """
    n = _check_rank(n)
    m = n + 1
    idx = _index_map(n)
    roots = positive_roots(n)
    b = np.empty((len(roots), m - 2), dtype=np.intc)
    c = np.empty((len(roots), m - 2), dtype=np.intc)
    for p, (i, j) in enumerate(roots):
        ks = [k for k in range(1, m + 1) if k != i and k != j]
        for t, k in enumerate(ks):
            b[p, t] = idx[(min(i, k), max(i, k))]
            c[p, t] = idx[(min(j, k), max(j, k))]
    b.setflags(write=False)
    c.setflags(write=False)
    return b, c
