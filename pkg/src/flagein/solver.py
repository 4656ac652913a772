"""Multistart root finding for the Einstein residual system.

Each trial draws a start point uniformly from ``(0, box_max]^(N-1)`` and runs
a damped Newton iteration (backtracking on ||F||^2, Levenberg-Marquardt after
two rejected Newton steps). Converged points are filtered for positivity,
rounded to a decimal grid and deduplicated.

Trial ``t`` draws from ``numpy.random.default_rng([rng_seed, t])`` (PCG64
seeded through SeedSequence), so the start points, and hence the deduplicated
result, do not depend on how trials are split across workers.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import _backend
from .flag_model import _check_rank

log = logging.getLogger(__name__)

CHUNK_SIZE = 4096


@dataclass(frozen=True)
class SolverConfig:
    n: int
    trials: int
    rng_seed: int
    box_max: float = 10.0
    residual_tolerance: float = 1e-10
    max_iterations: int = 200
    positivity_threshold: float = 1e-4
    rounding_decimals: int = 5

    def __post_init__(self):
        object.__setattr__(self, "n", _check_rank(self.n))
        if int(self.trials) < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError(f"rng_seed must be an unsigned 64-bit integer, got {self.rng_seed}")
        if not self.residual_tolerance > 0:
            raise ValueError("residual_tolerance must be positive")
        if not self.positivity_threshold > 0:
            raise ValueError("positivity_threshold must be positive")
        if not self.box_max > self.positivity_threshold:
            raise ValueError("box_max must exceed positivity_threshold")
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 1 <= int(self.rounding_decimals) <= 12:
            raise ValueError("rounding_decimals must be in [1, 12]")
        # the rounding grid must be coarser than the converged error
        if 10.0 ** -self.rounding_decimals <= 10 * self.residual_tolerance:
            raise ValueError("rounding grid is finer than the residual tolerance resolves")

    @property
    def num_unknowns(self) -> int:
        return self.n * (self.n + 1) // 2 - 1

    def echo(self) -> dict:
        """Parameters that determine the output, in a stable order."""
        return {
            "trials": int(self.trials),
            "seed": int(self.rng_seed),
            "box_max": float(self.box_max),
            "residual_tolerance": float(self.residual_tolerance),
            "max_iterations": int(self.max_iterations),
            "positivity_threshold": float(self.positivity_threshold),
            "rounding_decimals": int(self.rounding_decimals),
        }


@dataclass(frozen=True, eq=False)
class RawSolution:
    """A converged start. ``x`` is the lambda_12 = 1 gauge vector.

    After :func:`filter_round_dedup`, ``x`` is on the rounding grid and
    ``unrounded`` keeps the converged point it came from.
    """

    x: np.ndarray
    residual_norm: float
    iterations: int
    trial_index: int
    unrounded: Optional[np.ndarray] = field(default=None, repr=False)

    def __eq__(self, other):
        if not isinstance(other, RawSolution):
            return NotImplemented
        return (
            np.array_equal(self.x, other.x)
            and self.residual_norm == other.residual_norm
            and self.iterations == other.iterations
            and self.trial_index == other.trial_index
        )


def sample_initial(config: SolverConfig, trial: int) -> np.ndarray:
    """Start point of ``trial``: uniform on (0, box_max]^(N-1)."""
    if not 0 <= trial < config.trials:
        raise ValueError(f"trial {trial} outside [0, {config.trials})")
    u = np.random.default_rng([int(config.rng_seed), int(trial)]).random(config.num_unknowns)
    return config.box_max * (1.0 - u)


def _sample_block(config: SolverConfig, start: int, stop: int) -> np.ndarray:
    out = np.empty((stop - start, config.num_unknowns))
    for r, t in enumerate(range(start, stop)):
        u = np.random.default_rng([int(config.rng_seed), t]).random(config.num_unknowns)
        out[r] = config.box_max * (1.0 - u)
    return out


def solve_one(config: SolverConfig, x0, backend: str | None = None, trial_index: int = -1) -> Optional[RawSolution]:
    """Solve from ``x0``; ``None`` when the iteration does not converge."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.shape[0] != config.num_unknowns:
        raise ValueError(f"x0 must have length {config.num_unknowns}, got shape {x0.shape}")
    k = _backend.get_kernel(backend)
    X, res, it, ok = k.solve_batch(config.n, x0[None, :], config.residual_tolerance, config.max_iterations)
    if not ok[0]:
        return None
    x = X[0]
    if x.size and (not np.all(np.isfinite(x)) or np.any(x <= 0)):
        return None
    return RawSolution(x=x, residual_norm=float(res[0]), iterations=int(it[0]), trial_index=trial_index)


def _keys(X: np.ndarray, decimals: int) -> np.ndarray:
    return np.rint(X * 10.0**decimals).astype(np.int64)


def _reduce(X, res, iters, trials, config):
    """Positivity filter + rounding + dedup of a block; min trial index wins."""
    if X.shape[0] == 0:
        return {}
    if X.shape[1]:
        keep = np.all(X >= config.positivity_threshold, axis=1)
    else:
        keep = np.ones(X.shape[0], dtype=bool)
    X, res, iters, trials = X[keep], res[keep], iters[keep], trials[keep]
    keys = _keys(X, config.rounding_decimals)
    order = np.argsort(trials, kind="stable")
    out = {}
    for r in order:
        key = keys[r].tobytes()
        if key not in out:
            out[key] = (int(trials[r]), keys[r], X[r].copy(), float(res[r]), int(iters[r]))
    return out


def _merge(acc: dict, part: dict) -> None:
    for key, rec in part.items():
        cur = acc.get(key)
        if cur is None or rec[0] < cur[0]:
            acc[key] = rec


def _finalize(acc: dict, config: SolverConfig) -> list[RawSolution]:
    scale = 10.0**config.rounding_decimals
    recs = sorted(acc.values(), key=lambda r: tuple(r[1].tolist()))
    out = []
    for trial, key, x, res, it in recs:
        rounded = key / scale
        rounded.setflags(write=False)
        x.setflags(write=False)
        out.append(RawSolution(x=rounded, residual_norm=res, iterations=it, trial_index=trial, unrounded=x))
    return out


def filter_round_dedup(solutions: Iterable[RawSolution], config: SolverConfig) -> list[RawSolution]:
    """Drop solutions with a coordinate below the positivity threshold, round
    to ``rounding_decimals``, keep one per rounded vector (lowest trial index),
    sorted lexicographically by the rounded vector."""
    sols = list(solutions)
    if not sols:
        return []
    X = np.array([s.x for s in sols], dtype=float).reshape(len(sols), config.num_unknowns)
    res = np.array([s.residual_norm for s in sols])
    iters = np.array([s.iterations for s in sols])
    trials = np.array([s.trial_index for s in sols])
    return _finalize(_reduce(X, res, iters, trials, config), config)


def _chunks(trials: int, size: int):
    return [(s, min(s + size, trials)) for s in range(0, trials, size)]


def _run_chunk(config, start, stop, kernel, keep_all):
    X0 = _sample_block(config, start, stop)
    X, res, iters, ok = kernel.solve_batch(config.n, X0, config.residual_tolerance, config.max_iterations)
    good = ok.astype(bool)
    if X.shape[1]:
        good &= np.all(np.isfinite(X), axis=1) & np.all(X > 0, axis=1)
    trials = np.arange(start, stop)
    X, res, iters, trials = X[good], res[good], iters[good], trials[good]
    if keep_all:
        return X, res, iters, trials
    return int(good.sum()), _reduce(X, res, iters, trials, config)


def _threads(threads):
    if threads is None:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def multistart(config: SolverConfig, threads: int | None = None, backend: str | None = None) -> list[RawSolution]:
    """Every converged trial (no dedup), ordered by trial index."""
    kernel = _backend.get_kernel(backend)
    with ThreadPoolExecutor(max_workers=_threads(threads)) as pool:
        parts = list(pool.map(lambda c: _run_chunk(config, c[0], c[1], kernel, True), _chunks(config.trials, CHUNK_SIZE)))
    out = []
    for X, res, iters, trials in parts:
        for r in range(X.shape[0]):
            out.append(RawSolution(x=X[r], residual_norm=float(res[r]), iterations=int(iters[r]), trial_index=int(trials[r])))
    return out


@dataclass
class MultistartSummary:
    trials: int
    successes: int
    solutions: list[RawSolution]
    half_trials: int
    distinct_at_half: int
    backend: str

    @property
    def distinct(self) -> int:
        return len(self.solutions)

    @property
    def stable(self) -> bool:
        return self.distinct == self.distinct_at_half


def run(
    config: SolverConfig,
    threads: int | None = None,
    backend: str | None = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> MultistartSummary:
    """Streaming equivalent of ``filter_round_dedup(multistart(config))``.

    Deduplicates chunk by chunk so memory stays bounded, and also reports the
    distinct count over the first half of the trials as a plateau check.
    """
    kernel = _backend.get_kernel(backend)
    half = config.trials // 2
    # split at the half point so both counts come from the same chunk results
    chunks = [c for c in _chunks(half, CHUNK_SIZE)] + [(s + half, e + half) for s, e in _chunks(config.trials - half, CHUNK_SIZE)]
    acc_half: dict = {}
    acc: dict = {}
    successes = 0
    done = 0
    with ThreadPoolExecutor(max_workers=_threads(threads)) as pool:
        for (start, stop), (nok, part) in zip(chunks, pool.map(lambda c: _run_chunk(config, c[0], c[1], kernel, False), chunks)):
            successes += nok
            if stop <= half:
                _merge(acc_half, part)
            _merge(acc, part)
            done += stop - start
            if progress is not None:
                progress(done, config.trials)
    return MultistartSummary(
        trials=config.trials,
        successes=successes,
        solutions=_finalize(acc, config),
        half_trials=half,
        distinct_at_half=len(acc_half),
        backend=kernel.BACKEND,
    )


def repolish(config: SolverConfig, solution: RawSolution, backend: str | None = None) -> Optional[RawSolution]:
    """Re-solve starting from the (rounded) point of ``solution``."""
    return solve_one(config, solution.x, backend=backend, trial_index=solution.trial_index)
