"""Random utility simulation and consistency testing.

Monte Carlo choice probabilities and welfare under argmax-of-noisy-utility
sampling, the exact two-alternative noise construction that reproduces any
welfare function from a single scalar random variable, and the
alternating-sign test on mixed partial derivatives that separates
welfare models with a random-utility representation from those without.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (DEFAULT_CONFIG, NumericConfig, as_utility, mc_partitions,
                   mixed_partial, normal_quantile, stream_rng)
from .welfare import WelfareModel

THREADS_ENV = "WELFARECHOICE_THREADS"


@dataclass(frozen=True)
class NoiseSampler:
    """Noise distribution for random-utility simulation.

    `draw(rng, size)` returns a (size, n) array. All built-in families are
    generated by inverse-CDF transforms of uniforms so a stream's draws are
    fully determined by its generator state.
    """

    n: int
    family: str
    draw: Callable[[np.random.Generator, int], np.ndarray]


def gumbel_sampler(eta: float, n: int) -> NoiseSampler:
    """iid Gumbel(scale eta, location 0): eps = -eta log(-log U)."""
    if eta <= 0:
        raise ValueError("eta must be positive")

    def draw(rng, size):
        u = rng.random((size, n))
        return -eta * np.log(-np.log(u))

    return NoiseSampler(n=n, family=f"gumbel(eta={eta:g})", draw=draw)


def normal_sampler(sd: float, n: int) -> NoiseSampler:
    """iid centered normal noise."""
    if sd <= 0:
        raise ValueError("sd must be positive")

    def draw(rng, size):
        return sd * normal_quantile(rng.random((size, n)))

    return NoiseSampler(n=n, family=f"normal(sd={sd:g})", draw=draw)


def logistic_sampler(scale: float, n: int) -> NoiseSampler:
    """iid centered logistic noise."""
    if scale <= 0:
        raise ValueError("scale must be positive")

    def draw(rng, size):
        u = rng.random((size, n))
        return scale * (np.log(u) - np.log1p(-u))

    return NoiseSampler(n=n, family=f"logistic(scale={scale:g})", draw=draw)


def degenerate_sampler(n: int) -> NoiseSampler:
    """Noise identically zero (welfare reduces to max_i mu_i)."""
    return NoiseSampler(n=n, family="degenerate",
                        draw=lambda rng, size: np.zeros((size, n)))


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        val = int(raw)
    except ValueError:
        val = 1
    if val == 0:
        return os.cpu_count() or 1
    return max(1, val)


def _run_partitions(worker, seed: int, samples: int) -> list:
    """Evaluate `worker(rng, size)` on every fixed partition, in index order.

    Partition index -> stream mapping is fixed, and results are reduced in
    index order, so the output is independent of the thread count.
    """
    parts = list(mc_partitions(seed, samples))
    threads = _thread_count()

    def run_one(part):
        idx, start, stop = part
        return worker(stream_rng(seed, idx), stop - start)

    if threads == 1 or len(parts) == 1:
        return [run_one(p) for p in parts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_one, parts))


@dataclass(frozen=True)
class MCProbabilities:
    probs: np.ndarray
    std_errors: np.ndarray
    samples: int
    seed: int


@dataclass(frozen=True)
class MCWelfare:
    value: float
    std_error: float
    samples: int
    seed: int


def mc_choice_probs(sampler: NoiseSampler, mu, samples: int,
                    seed: int) -> MCProbabilities:
    """Empirical argmax frequencies of mu + eps (ties to the lowest index)."""
    mu = as_utility(mu)

    def worker(rng, size):
        eps = sampler.draw(rng, size)
        winners = np.argmax(mu[None, :] + eps, axis=1)
        return np.bincount(winners, minlength=sampler.n)

    counts = np.zeros(sampler.n, dtype=np.int64)
    for c in _run_partitions(worker, seed, samples):
        counts += c
    p = counts / samples
    se = np.sqrt(p * (1.0 - p) / samples)
    return MCProbabilities(probs=p, std_errors=se, samples=samples, seed=seed)


def mc_welfare(sampler: NoiseSampler, mu, samples: int, seed: int) -> MCWelfare:
    """Sample mean of max_i(mu_i + eps_i) with its standard error."""
    mu = as_utility(mu)

    def worker(rng, size):
        eps = sampler.draw(rng, size)
        m = np.max(mu[None, :] + eps, axis=1)
        return float(np.sum(m)), float(np.sum(m * m))

    total = 0.0
    total_sq = 0.0
    for s, sq in _run_partitions(worker, seed, samples):
        total += s
        total_sq += sq
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    se = np.sqrt(var / samples)
    return MCWelfare(value=mean, std_error=se, samples=samples, seed=seed)


class InvalidBinaryWelfareError(ValueError):
    """The welfare slice v'(x) is not a CDF on the validation grid."""


@dataclass(frozen=True)
class BinaryRUMConstruction:
    """Exact two-alternative noise construction for a welfare function.

    The slice v(x) = w(x, 0) has derivative v'(x) in [0, 1], nondecreasing;
    it is used as the CDF of a scalar variable xi, and the noise pair is
    eps = (v0 - max(xi, 0), v0 - max(-xi, 0)) with v0 = w(0, 0). The
    expected maximum of mu + eps then reproduces w(mu) exactly.
    """

    model: WelfareModel
    v0: float
    xi_cdf: Callable[[np.ndarray], np.ndarray]
    bracket: float
    truncated: bool

    def sample_xi(self, uniforms: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Invert the CDF at each uniform by bisection on [-T, T]."""
        u = np.asarray(uniforms, dtype=float)
        lo = np.full(u.shape, -self.bracket)
        hi = np.full(u.shape, self.bracket)
        # fixed iteration count: halves the bracket below tol for any T
        iters = int(np.ceil(np.log2(2.0 * self.bracket / tol))) + 1
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            below = self.xi_cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def noise_from_xi(self, xi: np.ndarray) -> np.ndarray:
        eps1 = self.v0 - np.maximum(xi, 0.0)
        eps2 = self.v0 - np.maximum(-xi, 0.0)
        return np.stack([eps1, eps2], axis=-1)

    def sampler(self) -> NoiseSampler:
        def draw(rng, size):
            xi = self.sample_xi(rng.random(size))
            return self.noise_from_xi(xi)

        return NoiseSampler(n=2, family="binary-construction", draw=draw)


def binary_rum_from_welfare(model: WelfareModel,
                            validation_grid: int = 201,
                            bracket_cap: float = 1e6) -> BinaryRUMConstruction:
    """Build the exact two-alternative noise representation of a welfare model.

    Validates that x -> dw/dmu_1 (x, 0) is nondecreasing with range inside
    [0, 1]; grows the inversion bracket geometrically until the CDF is
    within 1e-9 of {0, 1} at the ends, capping at `bracket_cap` with the
    truncation flagged.
    """
    if model.n != 2:
        raise ValueError("the construction applies to two-alternative models")
    v0 = model.value(np.zeros(2))

    if model.vectorized:
        def xi_cdf(x):
            x = np.asarray(x, dtype=float)
            pts = np.stack([x, np.zeros_like(x)], axis=-1)
            return np.asarray(model.gradient(pts))[..., 0]
    else:
        def xi_cdf(x):
            x = np.asarray(x, dtype=float)
            flat = [float(model.gradient(np.array([xi, 0.0]))[0])
                    for xi in np.atleast_1d(x).ravel()]
            return np.asarray(flat).reshape(np.atleast_1d(x).shape)

    grid = np.linspace(-30.0, 30.0, validation_grid)
    vals = np.asarray(xi_cdf(grid), dtype=float)
    if np.any(np.diff(vals) < -1e-10):
        raise InvalidBinaryWelfareError("v'(x) is decreasing on the grid")
    if np.min(vals) < -1e-10 or np.max(vals) > 1.0 + 1e-10:
        raise InvalidBinaryWelfareError("v'(x) leaves [0, 1] on the grid")

    bracket = 1.0
    truncated = False
    while True:
        lo_val = float(xi_cdf(np.array([-bracket]))[0])
        hi_val = float(xi_cdf(np.array([bracket]))[0])
        if lo_val <= 1e-9 and hi_val >= 1.0 - 1e-9:
            break
        if bracket >= bracket_cap:
            truncated = True
            break
        bracket = min(bracket * 2.0, bracket_cap)

    return BinaryRUMConstruction(model=model, v0=v0, xi_cdf=xi_cdf,
                                 bracket=bracket, truncated=truncated)


@dataclass(frozen=True)
class OrderVerdict:
    order: int
    passed: bool
    worst_violation: float
    witness_point: Optional[np.ndarray]
    witness_indices: Optional[tuple]
    tuples_tested: int


@dataclass(frozen=True)
class SignTestReport:
    """Alternating-sign test on mixed partials: (-1)^k d^k w <= 0.

    Order 2 requires cross partials <= 0 (substitutability); order 3
    requires them >= 0. Violations carry the worst witness. Estimates use
    nested central differences, so the tolerance scales with the local
    welfare magnitude; orders above 3 are refused as numerically
    meaningless in double precision.
    """

    max_order: int
    verdicts: tuple

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, order: int) -> OrderVerdict:
        for v in self.verdicts:
            if v.order == order:
                return v
        raise KeyError(order)


def rum_sign_test(model: WelfareModel, max_order: int, points: Sequence,
                  cfg: NumericConfig = DEFAULT_CONFIG,
                  rel_tol: float = 1e-4) -> SignTestReport:
    """Check (-1)^k * (mixed partial of order k) <= 0 for distinct indices."""
    if max_order not in (2, 3):
        raise ValueError("max_order must be 2 or 3")
    verdicts = []
    for order in range(2, max_order + 1):
        sign = (-1.0) ** order
        worst = -np.inf
        witness = None
        witness_idx = None
        tested = 0
        for point in points:
            point = as_utility(point)
            tol = rel_tol * max(1.0, abs(model.value(point)))
            for combo in itertools.combinations(range(model.n), order):
                est = mixed_partial(model.value, point, combo,
                                    h=cfg.fd_step_high)
                violation = sign * est - tol
                tested += 1
                if violation > worst:
                    worst = violation
                    witness = point
                    witness_idx = combo
        passed = worst <= 0.0
        verdicts.append(OrderVerdict(order=order, passed=passed,
                                     worst_violation=float(worst),
                                     witness_point=None if passed else witness,
                                     witness_indices=None if passed else witness_idx,
                                     tuples_tested=tested))
    return SignTestReport(max_order=max_order, verdicts=tuple(verdicts))


def mc_welfare_model(sampler: NoiseSampler, samples: int, seed: int) -> WelfareModel:
    """Welfare model backed by a frozen Monte Carlo noise panel.

    The same draws serve every evaluation (common random numbers), so
    finite-difference stencils of the choice probabilities difference out
    the sampling noise instead of being swamped by it.
    """
    draws = []
    for idx, start, stop in mc_partitions(seed, samples):
        draws.append(sampler.draw(stream_rng(seed, idx), stop - start))
    panel = np.concatenate(draws, axis=0)

    def value(mu):
        return float(np.mean(np.max(np.asarray(mu, float)[None, :] + panel, axis=1)))

    def gradient(mu):
        winners = np.argmax(np.asarray(mu, float)[None, :] + panel, axis=1)
        return np.bincount(winners, minlength=sampler.n) / samples

    return WelfareModel(n=sampler.n, value=value, gradient=gradient,
                        name=f"mc[{sampler.family}]")
