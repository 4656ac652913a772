"""Isometry classes of Einstein metrics under index permutations and homothety.

Permutations are 1-based tuples ``sigma = (sigma(1), ..., sigma(n+1))``. The
permuted metric is ``mu_ij = lam_{sigma^-1(i) sigma^-1(j)}``. Homothety is
removed by dividing by the coefficient of root (1, 2).
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .curvature import Metric, curvature_summary, residual_system
from .flag_model import FlagManifold, _check_rank, positive_roots

CANONICAL_DECIMALS = 4
CLASS_TOLERANCE = 1e-3
H_SPREAD_TOLERANCE = 1e-6
KE_RESIDUAL_TOLERANCE = 1e-12

Permutation = tuple[int, ...]


class ClassificationError(RuntimeError):
    """Inconsistent classification (tolerances or missing solutions)."""


@dataclass(frozen=True, eq=False)
class IsometryClass:
    canonical: np.ndarray
    members: tuple[int, ...]
    h_value: float
    s_value: float
    is_kaehler_einstein: bool = False
    kaehler_permutation: Optional[Permutation] = None
    h_shared_with: tuple[int, ...] = field(default=())

    @property
    def size(self) -> int:
        return len(self.members)


def _check_permutation(sigma, m: int) -> Permutation:
    try:
        sigma = tuple(int(v) for v in sigma)
    except (TypeError, ValueError):
        raise ValueError(f"not a permutation: {sigma!r}") from None
    if sorted(sigma) != list(range(1, m + 1)):
        raise ValueError(f"{sigma} is not a permutation of 1..{m}")
    return sigma


def _source_indices(n: int, sigma: Permutation) -> np.ndarray:
    """``src`` with ``mu = lam[src]`` for the action of ``sigma``."""
    fm = FlagManifold(n)
    inv = [0] * fm.m
    for a, b in enumerate(sigma):
        inv[b - 1] = a + 1
    return np.array([fm.root_index((inv[i - 1], inv[j - 1])) for i, j in fm.roots], dtype=np.intp)


@functools.lru_cache(maxsize=None)
def permutation_table(n: int) -> tuple[tuple[Permutation, ...], np.ndarray]:
    """All permutations of 1..n+1 (lexicographic) and their index maps, shape (m!, N)."""
    n = _check_rank(n)
    perms = tuple(itertools.permutations(range(1, n + 2)))
    table = np.array([_source_indices(n, s) for s in perms], dtype=np.intp)
    table.setflags(write=False)
    return perms, table


def apply_permutation(metric: Metric, sigma) -> Metric:
    sigma = _check_permutation(sigma, metric.n + 1)
    return Metric(metric.n, metric.lam[_source_indices(metric.n, sigma)])


def _full_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    N = n * (n + 1) // 2
    if x.shape == (N - 1,):
        return np.concatenate(([1.0], x))
    if x.shape == (N,):
        return x / x[0]
    raise ValueError(f"expected a vector of length {N - 1} or {N}, got shape {x.shape}")


def orbit(x, n: int) -> np.ndarray:
    """Normalized images of ``x`` under every permutation, shape (m!, N)."""
    lam = _full_vector(x, _check_rank(n))
    _, table = permutation_table(n)
    imgs = lam[table]
    return imgs / imgs[:, :1]


def _lexmin_row(rows: np.ndarray) -> np.ndarray:
    order = np.lexsort(rows.T[::-1])
    return rows[order[0]].copy()


def canonical_form(x, n: int) -> np.ndarray:
    """Lexicographically smallest normalized image of ``x`` over all
    permutations, rounded to four decimals. ``x`` may be the gauge vector
    (length N-1) or a full coefficient vector (length N)."""
    rows = np.round(orbit(x, n), CANONICAL_DECIMALS) + 0.0
    return _lexmin_row(rows)


def _in_orbit(x_full: np.ndarray, target: np.ndarray, n: int, tol: float) -> bool:
    return bool(np.any(np.all(np.abs(orbit(x_full, n) - target) <= tol, axis=1)))


def group_classes(solutions: Sequence, n: int, tolerance: float = CLASS_TOLERANCE) -> list[IsometryClass]:
    """Partition solutions into classes of equal canonical form.

    ``solutions`` are gauge vectors (length N-1) or full coefficient vectors.
    Two solutions share a class when their canonical forms agree within
    ``tolerance`` per coordinate, or when one lies within ``tolerance`` of
    an image of the other (which absorbs lexicographic ties broken
    differently by rounding noise).
    """
    n = _check_rank(n)
    vecs = [_full_vector(s, n) for s in solutions]
    canon = [canonical_form(v, n) for v in vecs]
    reps: list[np.ndarray] = []
    groups: list[list[int]] = []
    for idx, (v, c) in enumerate(zip(vecs, canon)):
        for g, rep in enumerate(reps):
            if np.all(np.abs(c - rep) <= tolerance) or _in_orbit(v, rep, n, tolerance):
                groups[g].append(idx)
                break
        else:
            reps.append(c)
            groups.append([idx])

    classes = []
    for rep, members in zip(reps, groups):
        hs = np.array([curvature_summary(Metric(n, vecs[i])).h_invariant for i in members])
        spread = float(hs.max() - hs.min())
        if spread > H_SPREAD_TOLERANCE:
            raise ClassificationError(
                f"H spread {spread:.3e} inside class with canonical form {np.round(rep, 4).tolist()} "
                f"exceeds {H_SPREAD_TOLERANCE:g}; class tolerance is too loose"
            )
        classes.append(
            IsometryClass(
                canonical=rep,
                members=tuple(members),
                h_value=float(hs.mean()),
                s_value=curvature_summary(Metric(n, rep)).scalar_curvature,
            )
        )
    classes.sort(key=lambda c: (c.h_value, tuple(c.canonical.tolist())))

    flagged = []
    for a, ca in enumerate(classes):
        shared = tuple(b for b, cb in enumerate(classes) if b != a and abs(ca.h_value - cb.h_value) < H_SPREAD_TOLERANCE)
        flagged.append(replace(ca, h_shared_with=shared))
    return flagged


def _ke_exact(n: int, w: Permutation) -> tuple[Fraction, ...]:
    vals = [Fraction(abs(w[i - 1] - w[j - 1])) for i, j in positive_roots(n)]
    return tuple(v / vals[0] for v in vals)


def kaehler_einstein_table(n: int) -> list[tuple[Permutation, Metric]]:
    """The distinct Kaehler-Einstein metrics lam_ij = |w(i) - w(j)| (normalized),
    each with the first permutation ``w`` producing it."""
    n = _check_rank(n)
    seen = {}
    for w in itertools.permutations(range(1, n + 2)):
        key = _ke_exact(n, w)
        if key not in seen:
            seen[key] = w
    return [(w, Metric(n, np.array([float(v) for v in key]))) for key, w in seen.items()]


def kaehler_einstein_metrics(n: int) -> list[Metric]:
    """All (n+1)!/2 invariant Kaehler-Einstein metrics, normalized to lam_12 = 1."""
    out = kaehler_einstein_table(n)
    for w, metric in out:
        if metric.lam.size > 1:
            res = float(np.max(np.abs(residual_system(metric.lam[1:], n))))
            if not res < KE_RESIDUAL_TOLERANCE:
                raise ClassificationError(f"Kaehler-Einstein metric of w={w} has residual {res:.3e}")
    return [metric for _, metric in out]


def match_kaehler(classes: Sequence[IsometryClass], n: int, tolerance: float = CLASS_TOLERANCE) -> list[IsometryClass]:
    """Mark the unique class containing the Kaehler-Einstein metrics."""
    n = _check_rank(n)
    table = kaehler_einstein_table(n)
    hits: set[int] = set()
    witness: Optional[Permutation] = None
    for w, metric in table:
        matched = [
            ci for ci, cls in enumerate(classes)
            if np.all(np.abs(canonical_form(metric.lam, n) - cls.canonical) <= tolerance)
            or _in_orbit(metric.lam, cls.canonical, n, tolerance)
        ]
        if len(matched) != 1:
            raise ClassificationError(
                f"Kaehler-Einstein metric of w={w} matches {len(matched)} classes; expected exactly one"
            )
        hits.add(matched[0])
        # witness: a w whose metric is the canonical representative itself
        if witness is None and np.all(np.abs(metric.lam - classes[matched[0]].canonical) <= tolerance):
            witness = w
    if len(hits) != 1:
        raise ClassificationError(f"Kaehler-Einstein metrics spread over {len(hits)} classes; expected one")
    (ci,) = hits
    if witness is None:
        witness = table[0][0]
    return [
        replace(c, is_kaehler_einstein=(k == ci), kaehler_permutation=(witness if k == ci else None))
        for k, c in enumerate(classes)
    ]
