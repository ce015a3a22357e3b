"""Shared numeric foundations.

Simplex geometry, finite differences, 1-D quadrature, monotone root
finding, and the seeded random-stream contract used by the Monte Carlo
code. Everything here is pure given its inputs; random state is always
created locally from an explicit seed.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtri

SIMPLEX_TOL = 1e-10

# Fixed Monte Carlo partition size. Sample index -> stream mapping depends
# only on (seed, partition index), never on worker count.
MC_CHUNK = 1 << 16


class NumericError(RuntimeError):
    """A numeric operation produced non-finite values or failed to converge."""


class QuadratureError(NumericError):
    """Adaptive quadrature could not reach the requested absolute error."""


class BracketError(ValueError):
    """Root-finding target lies outside the supplied bracket."""


@dataclass(frozen=True)
class NumericConfig:
    """Tolerances and seeding shared across modules.

    fd_step_first: central-difference step for first-order derivatives.
    fd_step_high: step for order >= 2 mixed differences (larger, since
        higher-order differences amplify roundoff).
    """

    fd_step_first: float = 1e-6
    fd_step_high: float = 1e-2
    quad_abs_tol: float = 1e-10
    root_tol: float = 1e-12
    seed: int = 0
    solver_tol: float = 1e-9
    solver_max_iter: int = 100_000

    def __post_init__(self) -> None:
        for field in ("fd_step_first", "fd_step_high", "quad_abs_tol",
                      "root_tol", "solver_tol"):
            if not getattr(self, field) > 0:
                raise ValueError(f"{field} must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


DEFAULT_CONFIG = NumericConfig()


def as_utility(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate and return a deterministic-utility vector (n >= 2, finite)."""
    mu = np.asarray(values, dtype=float)
    if mu.ndim != 1 or mu.size < 2:
        raise ValueError("utility vector must be one-dimensional with n >= 2")
    if not np.all(np.isfinite(mu)):
        raise ValueError("utility vector must be finite")
    return mu


def as_probability(values: Sequence[float] | np.ndarray,
                   tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate and return a point on the probability simplex."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("probability vector must be one-dimensional with n >= 2")
    if not np.all(np.isfinite(x)):
        raise ValueError("probability vector must be finite")
    if np.min(x) < -tol:
        raise ValueError(f"entry {np.min(x):.3e} below -{tol:.0e}")
    if abs(float(np.sum(x)) - 1.0) > tol:
        raise ValueError(f"entries sum to {np.sum(x)!r}, not 1")
    return x


def is_interior(x: np.ndarray, margin: float = 1e-6) -> bool:
    """True when every coordinate of a simplex point is at least `margin`."""
    return bool(np.min(x) >= margin)


def project_to_simplex(v: Sequence[float] | np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Sort-based algorithm: O(n log n), exact up to floating point.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a non-finite vector")
    n = v.size
    a = np.sort(v)[::-1]
    cssv = (np.cumsum(a) - 1.0) / np.arange(1, n + 1)
    k = np.nonzero(a > cssv)[0][-1]
    return np.maximum(v - cssv[k], 0.0)


def finite_diff_gradient(f: Callable[[np.ndarray], float],
                         mu: np.ndarray,
                         h: float = DEFAULT_CONFIG.fd_step_first) -> np.ndarray:
    """Central-difference gradient of a scalar function at `mu`."""
    mu = np.asarray(mu, dtype=float)
    g = np.empty(mu.size)
    for i in range(mu.size):
        e = np.zeros(mu.size)
        e[i] = h
        hi, lo = f(mu + e), f(mu - e)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericError(f"non-finite function value near coordinate {i}")
        g[i] = (hi - lo) / (2.0 * h)
    return g


def mixed_partial(f: Callable[[np.ndarray], float],
                  mu: np.ndarray,
                  indices: Sequence[int],
                  h: float = DEFAULT_CONFIG.fd_step_high) -> float:
    """Nested central difference estimating a k-th order mixed partial.

    `indices` lists the coordinates differentiated once each; they must be
    distinct. Cost is 2^k function evaluations.
    """
    mu = np.asarray(mu, dtype=float)
    idx = list(indices)
    if len(set(idx)) != len(idx):
        raise ValueError("indices must be distinct")
    if not 1 <= len(idx) <= mu.size:
        raise ValueError("need between 1 and n distinct indices")
    total = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=len(idx)):
        point = mu.copy()
        for s, i in zip(signs, idx):
            point[i] += s * h
        val = f(point)
        if not np.isfinite(val):
            raise NumericError("non-finite function value in difference stencil")
        total += float(np.prod(signs)) * val
    return total / (2.0 * h) ** len(idx)


def _quad_panel(g, a: float, b: float, abs_tol: float, depth: int) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(g, a, b, epsabs=abs_tol, epsrel=0.0, limit=200)
    if not np.isfinite(val):
        raise QuadratureError("quadrature produced a non-finite value")
    if err <= max(abs_tol, 1e-13 * abs(val)):
        return float(val)
    if depth >= 24 or b - a <= 1e-14 * max(1.0, abs(a) + abs(b)):
        raise QuadratureError(
            f"quadrature error estimate {err:.2e} exceeds tolerance "
            f"{abs_tol:.2e} after maximal refinement")
    mid = 0.5 * (a + b)
    return (_quad_panel(g, a, mid, 0.5 * abs_tol, depth + 1)
            + _quad_panel(g, mid, b, 0.5 * abs_tol, depth + 1))


def integrate_1d(g: Callable[[float], float], a: float, b: float,
                 abs_tol: float = DEFAULT_CONFIG.quad_abs_tol) -> float:
    """Adaptive quadrature of g over [a, b] with absolute error <= abs_tol.

    Panels whose error estimate misses the tolerance are bisected
    recursively, which isolates integrable endpoint singularities.
    """
    if b < a:
        raise ValueError("integration bounds must satisfy a <= b")
    if a == b:
        return 0.0
    return _quad_panel(g, a, b, abs_tol, depth=0)


def bisect_increasing(g: Callable[[float], float], target: float,
                      lo: float, hi: float,
                      tol: float = DEFAULT_CONFIG.root_tol) -> float:
    """Solve g(x) = target for nondecreasing g on [lo, hi] by bisection."""
    flo, fhi = g(lo), g(hi)
    if not (flo <= target <= fhi):
        raise BracketError(
            f"target {target!r} outside [g(lo), g(hi)] = [{flo!r}, {fhi!r}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = g(mid)
        if abs(fmid - target) <= tol:
            return mid
        if fmid < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def normal_quantile(p: float | np.ndarray) -> float | np.ndarray:
    """Standard normal quantile (inverse CDF), accurate to machine precision."""
    return ndtri(p)


def normal_pdf(z: float | np.ndarray) -> float | np.ndarray:
    """Standard normal density."""
    return np.exp(-0.5 * np.square(z)) / np.sqrt(2.0 * np.pi)


def stream_rng(seed: int, key: int = 0) -> np.random.Generator:
    """Deterministic generator for stream `key` of a seeded family."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def mc_partitions(seed: int, samples: int,
                  chunk: int = MC_CHUNK) -> Iterator[tuple[int, int, int]]:
    """Yield (index, start, stop) partitions of a Monte Carlo run.

    Partition boundaries depend only on `samples` and `chunk`, so results
    merged in index order are independent of how partitions are scheduled.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    idx = 0
    for start in range(0, samples, chunk):
        yield idx, start, min(start + chunk, samples)
        idx += 1
