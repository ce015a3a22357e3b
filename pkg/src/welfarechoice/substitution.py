"""Substitutability and complementarity analysis.

Pairwise classification asks whether raising the utility of alternative i
locally raises or lowers the choice probability of alternative j. Every
alternative is complementary to itself (a consequence of convexity of the
welfare function); off-diagonal signs distinguish model families. The
quadratic-matrix criterion, the dimension-reduced regularizer slices, and
the sampled lattice (super/submodularity) tests provide the structural
counterparts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import DEFAULT_CONFIG, as_utility, stream_rng
from .ram import Regularizer
from .welfare import WelfareModel

SUBSTITUTABLE = "substitutable"
COMPLEMENTARY = "complementary"
INDETERMINATE = "indeterminate"

DEAD_ZONE = 1e-7


def _label(estimate: float, dead_zone: float) -> str:
    if estimate > dead_zone:
        return COMPLEMENTARY
    if estimate < -dead_zone:
        return SUBSTITUTABLE
    return INDETERMINATE


@dataclass(frozen=True)
class PairClassification:
    i: int
    j: int
    estimate: float
    label: str


def classify_pair(model: WelfareModel, mu, i: int, j: int,
                  step: float = DEFAULT_CONFIG.fd_step_high,
                  dead_zone: float = DEAD_ZONE) -> PairClassification:
    """Classify the (i, j) relation at mu from the sign of dq_j/dmu_i.

    A central difference at `step` estimates the cross effect; estimates
    inside the dead zone are reported indeterminate rather than forced to a
    sign. The diagonal is complementary for every welfare-derived model, so
    i == j returns that label directly (with the estimate attached).
    """
    mu = as_utility(mu)
    e = np.zeros(model.n)
    e[i] = step
    q_hi = np.asarray(model.gradient(mu + e), dtype=float)
    q_lo = np.asarray(model.gradient(mu - e), dtype=float)
    est = float((q_hi[j] - q_lo[j]) / (2.0 * step))
    if i == j:
        return PairClassification(i=i, j=j, estimate=est, label=COMPLEMENTARY)
    return PairClassification(i=i, j=j, estimate=est, label=_label(est, dead_zone))


@dataclass(frozen=True)
class SubstitutionReport:
    """Pairwise classification matrix at a single utility point."""

    mu: np.ndarray
    labels: np.ndarray        # (n, n) array of label strings
    estimates: np.ndarray     # (n, n) cross-partial estimates
    symmetric: bool


def substitution_report(model: WelfareModel, mu,
                        step: float = DEFAULT_CONFIG.fd_step_high,
                        dead_zone: float = DEAD_ZONE,
                        symmetry_rel_tol: float = 1e-4) -> SubstitutionReport:
    """All-pairs classification; flags whether estimates are symmetric."""
    mu = as_utility(mu)
    n = model.n
    labels = np.empty((n, n), dtype=object)
    estimates = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            c = classify_pair(model, mu, i, j, step=step, dead_zone=dead_zone)
            labels[i, j] = c.label
            estimates[i, j] = c.estimate
    tol = symmetry_rel_tol * max(1.0, abs(model.value(mu)))
    symmetric = bool(np.max(np.abs(estimates - estimates.T)) <= tol)
    return SubstitutionReport(mu=mu, labels=labels, estimates=estimates,
                              symmetric=symmetric)


@dataclass(frozen=True)
class ScanRow:
    mu_i: float
    q_j: float
    label: str


def scan_line(model: WelfareModel, mu_base, i: int, j: int,
              lo: float, hi: float, steps: int,
              dead_zone: float = DEAD_ZONE) -> list[ScanRow]:
    """Evaluate q_j along mu_i in [lo, hi]; classify interior grid points.

    Classification uses the grid's own central differences; the two
    endpoints are reported indeterminate.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    mu_base = as_utility(mu_base)
    grid = np.linspace(lo, hi, steps)
    q_vals = np.empty(steps)
    for k, t in enumerate(grid):
        mu = mu_base.copy()
        mu[i] = t
        q_vals[k] = float(np.asarray(model.gradient(mu))[j])
    rows = []
    spacing = grid[1] - grid[0]
    for k in range(steps):
        if 0 < k < steps - 1:
            slope = (q_vals[k + 1] - q_vals[k - 1]) / (2.0 * spacing)
            label = _label(slope, dead_zone)
        else:
            label = INDETERMINATE
        rows.append(ScanRow(mu_i=float(grid[k]), q_j=q_vals[k], label=label))
    return rows


@dataclass(frozen=True)
class TripleCheck:
    center: int
    pair: tuple
    margin: float

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0


@dataclass(frozen=True)
class QuadraticCriterionReport:
    """A_jk - A_ik - A_ij + A_ii >= 0 over all distinct triples.

    Passing for every triple is equivalent to supermodularity of all the
    dimension-reduced slices of V(x) = x'Ax, hence to substitutability of
    the induced choice model when n = 3.
    """

    triples: tuple
    passed: bool

    @property
    def failing(self) -> tuple:
        return tuple(t for t in self.triples if not t.passed)


def quadratic_criterion(A: Sequence[Sequence[float]]) -> QuadraticCriterionReport:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if np.max(np.abs(A - A.T)) > 1e-10:
        raise ValueError("A must be symmetric")
    n = A.shape[0]
    checks = []
    for i in range(n):
        for j, k in itertools.combinations([m for m in range(n) if m != i], 2):
            margin = float(A[j, k] - A[i, k] - A[i, j] + A[i, i])
            checks.append(TripleCheck(center=i, pair=(j, k), margin=margin))
    return QuadraticCriterionReport(triples=tuple(checks),
                                    passed=all(t.passed for t in checks))


@dataclass(frozen=True)
class ReducedRegularizer:
    """Slice of V with coordinate `index` eliminated via the simplex equation.

    value(z) = V(z_1, .., z_{index-1}, 1 - sum z, z_index, .., z_{n-2}) on
    {z >= 0, sum z <= 1}, +inf outside. The eliminated coordinate absorbs
    the simplex constraint so lattice operations on z are meaningful.
    """

    index: int
    n: int
    value: Callable[[np.ndarray], float]


def reduced_regularizer(reg: Regularizer, index: int) -> ReducedRegularizer:
    if not 0 <= index < reg.n:
        raise ValueError("index out of range")
    n = reg.n

    def value(z):
        z = np.asarray(z, dtype=float)
        if z.size != n - 1:
            raise ValueError(f"expected {n - 1} coordinates")
        total = float(np.sum(z))
        if np.min(z) < 0.0 or total > 1.0:
            return np.inf
        x = np.insert(z, index, 1.0 - total)
        return float(reg.value(x))

    return ReducedRegularizer(index=index, n=n, value=value)


@dataclass(frozen=True)
class ModularityReport:
    """Sampled lattice-inequality test.

    verdict is one of "supermodular-consistent", "submodular-consistent",
    "modular-consistent" (both inequalities held everywhere), or "neither".
    Consistency means no counterexample among the sampled pairs; that is
    evidence, never proof.
    """

    verdict: str
    samples_used: int
    supermodular_violation: float
    submodular_violation: float
    supermodular_witness: Optional[tuple]
    submodular_witness: Optional[tuple]


def check_modularity(f: Callable[[np.ndarray], float],
                     domain_sampler: Callable[[np.random.Generator], np.ndarray],
                     samples: int = 1000, seed: int = 0,
                     tol: float = 1e-9,
                     max_resamples: int = 50) -> ModularityReport:
    """Test f(x v y) + f(x ^ y) >= / <= f(x) + f(y) on sampled pairs.

    Sampled pairs themselves must lie in the effective domain (non-finite
    f(x) or f(y) triggers a resample), but join and meet values use
    extended arithmetic: a +inf at the join never falsifies
    supermodularity, while it does falsify submodularity. That matches the
    asymmetric typing of the two properties (supermodular functions may
    take +inf, submodular ones -inf).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = stream_rng(seed)
    sup_viol = 0.0
    sub_viol = 0.0
    sup_wit = None
    sub_wit = None
    used = 0
    for _ in range(samples):
        for _attempt in range(max_resamples):
            x = np.asarray(domain_sampler(rng), dtype=float)
            y = np.asarray(domain_sampler(rng), dtype=float)
            fx, fy = f(x), f(y)
            if np.isfinite(fx) and np.isfinite(fy):
                break
        else:
            continue
        used += 1
        join = np.maximum(x, y)
        meet = np.minimum(x, y)
        lattice = f(join) + f(meet)
        plain = fx + fy
        if np.isnan(lattice):
            continue
        if plain - lattice > max(sup_viol, tol):
            sup_viol = plain - lattice
            sup_wit = (x, y)
        if lattice - plain > max(sub_viol, tol):
            sub_viol = lattice - plain
            sub_wit = (x, y)
    sup_ok = sup_viol <= tol
    sub_ok = sub_viol <= tol
    if sup_ok and sub_ok:
        verdict = "modular-consistent"
    elif sup_ok:
        verdict = "supermodular-consistent"
    elif sub_ok:
        verdict = "submodular-consistent"
    else:
        verdict = "neither"
    return ModularityReport(verdict=verdict, samples_used=used,
                            supermodular_violation=sup_viol,
                            submodular_violation=sub_viol,
                            supermodular_witness=sup_wit,
                            submodular_witness=sub_wit)


def corner_simplex_sampler(n: int, margin: float = 1e-6
                           ) -> Callable[[np.random.Generator], np.ndarray]:
    """Uniform sampler over {z >= 0, sum z <= 1 - margin} in n-1 variables.

    Uniformity comes from sampling the full simplex with a slack coordinate
    and dropping the slack.
    """

    def sample(rng):
        z = rng.dirichlet(np.ones(n))[: n - 1]
        return z * (1.0 - margin)

    return sample


def utility_box_sampler(n: int, box: float
                        ) -> Callable[[np.random.Generator], np.ndarray]:
    def sample(rng):
        return rng.uniform(-box, box, n)

    return sample


@dataclass(frozen=True)
class SubstitutabilityReport:
    """Combined verdict from lattice sampling and pairwise classification."""

    verdict: str                      # "substitutable-consistent" or "violation"
    submodularity: ModularityReport
    complementary_witness: Optional[PairClassification]
    witness_mu: Optional[np.ndarray]
    points_tested: int


def substitutable_model_check(model: WelfareModel, samples: int = 1000,
                              box: float = 10.0, seed: int = 0,
                              step: float = DEFAULT_CONFIG.fd_step_high,
                              dead_zone: float = DEAD_ZONE,
                              lattice_tol: float = 1e-9,
                              span_probes: int | None = None) -> SubstitutabilityReport:
    """Look for substitutability violations: a submodularity counterexample
    for w, or a complementary off-diagonal pair at a sampled point.

    Candidate points mix uniform box draws with utilities that realize
    random interior choice targets (via choice inversion). The inverted
    points always lie in the full-support pattern, which box sampling can
    miss almost entirely for badly conditioned models and which is where
    the quadratic family hides its complementary pairs.

    "substitutable-consistent" means no violation was found.
    """
    from .duality import ConvergenceError, invert_choice

    sub_report = check_modularity(model.value, utility_box_sampler(model.n, box),
                                  samples=samples, seed=seed, tol=lattice_tol)
    rng = stream_rng(seed, key=1)
    pairs = list(itertools.combinations(range(model.n), 2))
    candidates = []
    points = max(1, samples // max(1, len(pairs)))
    for _ in range(points):
        candidates.append(rng.uniform(-box, box, model.n))
    if span_probes is None:
        span_probes = max(10, min(50, samples // 20))
    rng_span = stream_rng(seed, key=2)
    for _ in range(span_probes):
        target = rng_span.dirichlet(np.ones(model.n)) * 0.9 + 0.1 / model.n
        try:
            candidates.append(invert_choice(model, target))
        except (ConvergenceError, ValueError, ArithmeticError):
            continue

    witness = None
    witness_mu = None
    tested = 0
    for mu in candidates:
        for i, j in pairs:
            c = classify_pair(model, mu, i, j, step=step, dead_zone=dead_zone)
            tested += 1
            if c.label == COMPLEMENTARY:
                witness = c
                witness_mu = mu
                break
        if witness is not None:
            break
    sub_ok = sub_report.submodular_violation <= lattice_tol
    verdict = ("substitutable-consistent"
               if sub_ok and witness is None else "violation")
    return SubstitutabilityReport(verdict=verdict, submodularity=sub_report,
                                  complementary_witness=witness,
                                  witness_mu=witness_mu, points_tested=tested)
