"""Welfare-function models and the axioms that define them.

A `WelfareModel` bundles a scalar welfare function w over deterministic
utilities with its gradient, which is the choice probability map. The
closed-form zoo lives here (multinomial logit, nested logit, generator-based
extreme-value models, log-sum-of-exponentials composites) together with
sampling-based checkers for the defining axioms (monotonicity, translation
invariance, convexity) and for the superlinear lower-bound property.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import as_utility, stream_rng


@dataclass(frozen=True)
class WelfareModel:
    """Evaluable welfare function w with gradient q = grad w.

    `value` maps a utility vector to a float; `gradient` maps it to a point
    on the probability simplex. When `vectorized` is True both accept
    arrays of shape (..., n) and broadcast over leading axes.
    `superlinear_bounds` holds per-alternative constants b with
    w(mu) >= mu_i + b_i when such bounds are known analytically.
    """

    n: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    superlinear_bounds: Optional[np.ndarray] = None
    name: str = "welfare"
    vectorized: bool = False

    def __call__(self, mu) -> float:
        return float(self.value(np.asarray(mu, dtype=float)))


def logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray | float:
    """Shift-stabilized log(sum(exp(a))); safe for entries up to +-700."""
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def softmax(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shift-stabilized exp(a)/sum(exp(a))."""
    a = np.asarray(a, dtype=float)
    z = np.exp(a - np.max(a, axis=axis, keepdims=True))
    return z / np.sum(z, axis=axis, keepdims=True)


def mnl_welfare(eta: float, n: int) -> WelfareModel:
    """Multinomial logit: w(mu) = eta * log(sum_i exp(mu_i / eta))."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if n < 2:
        raise ValueError("need at least two alternatives")

    def value(mu):
        return eta * logsumexp(np.asarray(mu, float) / eta)

    def gradient(mu):
        return softmax(np.asarray(mu, float) / eta)

    return WelfareModel(n=n, value=value, gradient=gradient,
                        superlinear_bounds=np.zeros(n),
                        name=f"mnl(eta={eta:g})", vectorized=True)


def nested_logit_welfare(nests: Sequence[Sequence[int]],
                         lambdas: Sequence[float],
                         n: int) -> WelfareModel:
    """Nested logit with w(mu) = log sum_l (sum_{i in B_l} e^{mu_i/l_l})^{l_l}.

    `nests` partitions range(n) into disjoint blocks; each block has a
    dissimilarity parameter in (0, 1].
    """
    blocks = [np.asarray(sorted(b), dtype=int) for b in nests]
    lam = np.asarray(lambdas, dtype=float)
    if len(blocks) != lam.size:
        raise ValueError("one lambda per nest required")
    if any(b.size == 0 for b in blocks):
        raise ValueError("empty nest")
    flat = np.concatenate(blocks) if blocks else np.array([], dtype=int)
    if sorted(flat.tolist()) != list(range(n)):
        raise ValueError("nests must partition the alternatives")
    if np.any(lam <= 0) or np.any(lam > 1):
        raise ValueError("nest parameters must lie in (0, 1]")

    nest_of = np.empty(n, dtype=int)
    for k, b in enumerate(blocks):
        nest_of[b] = k

    def nest_logsums(mu):
        return np.array([logsumexp(mu[b] / lam[k]) for k, b in enumerate(blocks)])

    def value(mu):
        mu = np.asarray(mu, float)
        return float(logsumexp(lam * nest_logsums(mu)))

    def gradient(mu):
        mu = np.asarray(mu, float)
        ls = nest_logsums(mu)
        w = logsumexp(lam * ls)
        k = nest_of
        logq = mu / lam[k] + (lam[k] - 1.0) * ls[k] - w
        return np.exp(logq)

    return WelfareModel(n=n, value=value, gradient=gradient,
                        superlinear_bounds=np.zeros(n),
                        name=f"nested_logit(K={len(blocks)})")


def log_sum_welfare(weights: Sequence[Sequence[float]],
                    name: str = "log_sum") -> WelfareModel:
    """Welfare w(mu) = log sum_r exp((W mu)_r) for a nonnegative matrix W.

    Rows of W are mixing weights over alternatives. With row sums equal to
    one the gradient W^T softmax(W mu) stays on the simplex. Rows equal to a
    unit vector certify the bound w(mu) >= mu_i, which is recorded when it
    holds for every alternative.
    """
    W = np.asarray(weights, dtype=float)
    if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 2:
        raise ValueError("weights must be an m x n matrix with n >= 2")
    if np.any(W < 0):
        raise ValueError("weights must be nonnegative")
    if np.max(np.abs(W.sum(axis=1) - 1.0)) > 1e-12:
        raise ValueError("each weight row must sum to 1")
    n = W.shape[1]

    def value(mu):
        return logsumexp(np.asarray(mu, float) @ W.T)

    def gradient(mu):
        p = softmax(np.asarray(mu, float) @ W.T)
        return p @ W

    has_unit_row = all(
        any(np.allclose(W[r], np.eye(n)[i]) for r in range(W.shape[0]))
        for i in range(n))
    bounds = np.zeros(n) if has_unit_row else None
    return WelfareModel(n=n, value=value, gradient=gradient,
                        superlinear_bounds=bounds, name=name, vectorized=True)


@dataclass(frozen=True)
class GEVGenerator:
    """Generator function H for an extreme-value model.

    H maps the positive orthant to nonnegative reals and must be homogeneous
    of degree 1/eta. `partials` optionally supplies the first-order partial
    derivatives H_i; without them the model gradient falls back to finite
    differences of the welfare function.
    """

    eta: float
    H: Callable[[np.ndarray], float]
    partials: Optional[Callable[[np.ndarray], np.ndarray]] = None


class GeneratorInvalidError(ValueError):
    """The generator violated nonnegativity or homogeneity on a sample."""


@dataclass(frozen=True)
class GeneratorSignReport:
    """Alternating-sign check on generator partials, orders 1..max_order.

    A generator with (-1)^k d^k H <= 0 for distinct indices defines an
    extreme-value noise model; one that fails still defines a welfare
    function, just without the random-utility interpretation. Orders above
    3 are numerically unreliable with finite differences and are refused.
    """

    max_order: int
    passed: bool
    worst_violation: float
    witness: Optional[dict] = None


def check_generator_signs(gen: GEVGenerator, n: int, samples: int = 30,
                          max_order: int = 3, seed: int = 7,
                          rel_tol: float = 1e-4) -> GeneratorSignReport:
    """Advisory finite-difference test of the alternating-sign condition."""
    if not 1 <= max_order <= 3:
        raise ValueError("max_order must be in {1, 2, 3}")
    rng = stream_rng(seed)
    worst = -np.inf
    witness = None
    for _ in range(samples):
        y = rng.uniform(0.3, 2.5, size=n)
        h = 1e-2
        tol = rel_tol * max(1.0, abs(gen.H(y)))
        for order in range(1, max_order + 1):
            sign = (-1.0) ** order
            for combo in itertools.combinations(range(n), order):
                total = 0.0
                for signs in itertools.product((1.0, -1.0), repeat=order):
                    point = y.copy()
                    for s, i in zip(signs, combo):
                        point[i] += s * h
                    total += float(np.prod(signs)) * gen.H(point)
                est = total / (2.0 * h) ** order
                violation = sign * est - tol
                if violation > worst:
                    worst = violation
                    witness = {"y": y.copy(), "indices": combo, "order": order,
                               "estimate": est}
    passed = worst <= 0.0
    return GeneratorSignReport(max_order=max_order, passed=passed,
                               worst_violation=float(worst),
                               witness=None if passed else witness)


def gev_welfare(gen: GEVGenerator, n: int, validation_samples: int = 64,
                seed: int = 7) -> WelfareModel:
    """Welfare w(mu) = eta * log H(e^{mu_1}, ..., e^{mu_n}).

    The generator is validated on random positive points: H >= 0 and
    |H(alpha y) - alpha^{1/eta} H(y)| <= 1e-8 (1 + |H(y)|).
    """
    if gen.eta <= 0:
        raise ValueError("eta must be positive")
    rng = stream_rng(seed)
    for _ in range(validation_samples):
        y = rng.uniform(0.05, 3.0, size=n)
        hy = gen.H(y)
        if not np.isfinite(hy) or hy < 0:
            raise GeneratorInvalidError(f"H({y}) = {hy!r} is not nonnegative")
        alpha = rng.uniform(0.5, 2.0)
        scaled = gen.H(alpha * y)
        if abs(scaled - alpha ** (1.0 / gen.eta) * hy) > 1e-8 * (1.0 + abs(hy)):
            raise GeneratorInvalidError(
                f"H is not homogeneous of degree 1/eta at alpha={alpha:.4f}, y={y}")

    eta = gen.eta

    def value(mu):
        mu = np.asarray(mu, float)
        shift = float(np.max(mu))
        # homogeneity: H(e^mu) = e^{shift/eta} H(e^{mu - shift})
        h = gen.H(np.exp(mu - shift))
        if h <= 0:
            raise GeneratorInvalidError("H vanished at an evaluation point")
        return eta * np.log(h) + shift

    if gen.partials is not None:
        def gradient(mu):
            mu = np.asarray(mu, float)
            shift = float(np.max(mu))
            y = np.exp(mu - shift)
            h = gen.H(y)
            return eta * y * gen.partials(y) / h
    else:
        def gradient(mu):
            mu = np.asarray(mu, float)
            g = np.empty(n)
            h = 1e-6
            for i in range(n):
                e = np.zeros(n)
                e[i] = h
                g[i] = (value(mu + e) - value(mu - e)) / (2 * h)
            return g

    return WelfareModel(n=n, value=value, gradient=gradient,
                        name=f"gev(eta={eta:g})")


@dataclass(frozen=True)
class AxiomCheck:
    passed: bool
    witness: Optional[dict] = None


@dataclass(frozen=True)
class AxiomReport:
    """Outcome of randomized axiom testing.

    A pass means no violation was found in `samples_used` draws; it is
    evidence, not proof. Failures carry the violating sample.
    """

    monotonic: AxiomCheck
    translation_invariant: AxiomCheck
    convex: AxiomCheck
    samples_used: int

    @property
    def all_passed(self) -> bool:
        return (self.monotonic.passed and self.translation_invariant.passed
                and self.convex.passed)


def check_axioms(model: WelfareModel, samples: int = 1000, box: float = 10.0,
                 seed: int = 0) -> AxiomReport:
    """Randomized test of monotonicity, translation invariance, convexity."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = stream_rng(seed)
    n = model.n
    slack = 1e-9

    mono = AxiomCheck(True)
    trans = AxiomCheck(True)
    conv = AxiomCheck(True)
    shifts = [-3.0, 0.7, 10.0]

    for k in range(samples):
        mu = rng.uniform(-box, box, n)
        w_mu = model.value(mu)

        if mono.passed:
            delta = rng.uniform(0.0, box / 2, n)
            if model.value(mu + delta) < w_mu - slack:
                mono = AxiomCheck(False, {"mu": mu, "delta": delta,
                                          "gap": float(w_mu - model.value(mu + delta))})

        if trans.passed:
            t = shifts[k % len(shifts)] if k < 3 * len(shifts) else float(
                rng.uniform(-box, box))
            err = abs(model.value(mu + t * np.ones(n)) - w_mu - t)
            if err > 1e-8:
                trans = AxiomCheck(False, {"mu": mu, "t": t, "error": float(err)})

        if conv.passed:
            nu = rng.uniform(-box, box, n)
            mid = model.value(0.5 * (mu + nu))
            if 0.5 * (w_mu + model.value(nu)) < mid - slack:
                conv = AxiomCheck(False, {
                    "mu": mu, "nu": nu,
                    "gap": float(mid - 0.5 * (w_mu + model.value(nu)))})

        if not (mono.passed or trans.passed or conv.passed):
            break

    return AxiomReport(monotonic=mono, translation_invariant=trans,
                       convex=conv, samples_used=samples)


@dataclass(frozen=True)
class SuperlinearReport:
    passed: bool
    witness: Optional[dict] = None
    worst_margin: float = np.inf


def check_superlinear(model: WelfareModel, b: Sequence[float] | np.ndarray,
                      samples: int = 1000, box: float = 10.0,
                      seed: int = 0) -> SuperlinearReport:
    """Test w(mu) >= mu_i + b_i at random points; failures carry (mu, i)."""
    b = np.asarray(b, dtype=float)
    rng = stream_rng(seed)
    worst = np.inf
    for _ in range(samples):
        mu = rng.uniform(-box, box, model.n)
        margins = model.value(mu) - mu - b
        m = float(np.min(margins))
        worst = min(worst, m)
        if m < -1e-9:
            i = int(np.argmin(margins))
            return SuperlinearReport(False, {"mu": mu, "i": i, "margin": m}, m)
    return SuperlinearReport(True, None, worst)


def estimate_superlinear_bounds(model: WelfareModel, box: float = 20.0,
                                grid_points: int = 5) -> np.ndarray:
    """Coarse-grid estimate of the largest valid superlinear constants.

    Returns elementwise minima of w(mu) - mu_i over a uniform grid on
    [-box, box]^n; the result may overestimate the true infimum and is
    only used as a search-radius heuristic.
    """
    n = model.n
    axes = [np.linspace(-box, box, grid_points)] * n
    best = np.full(n, np.inf)
    for point in np.stack(np.meshgrid(*axes), axis=-1).reshape(-1, n):
        best = np.minimum(best, model.value(point) - point)
    return best


def model_bounds(model: WelfareModel, estimate_box: float = 20.0) -> tuple[np.ndarray, bool]:
    """Superlinear constants for a model: analytic if present, else estimated.

    Returns (bounds, estimated_flag).
    """
    if model.superlinear_bounds is not None:
        return np.asarray(model.superlinear_bounds, dtype=float), False
    return estimate_superlinear_bounds(model, box=estimate_box), True


def validate_gradient_simplex(model: WelfareModel, mu) -> np.ndarray:
    """Gradient of the model at mu, checked against the simplex invariants."""
    q = np.asarray(model.gradient(as_utility(mu)), dtype=float)
    if abs(float(q.sum()) - 1.0) > 1e-9 or np.min(q) < -1e-12:
        raise ValueError(f"gradient {q} is not a choice probability vector")
    return q
