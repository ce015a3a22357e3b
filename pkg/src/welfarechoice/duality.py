"""Numerical conversions among the three equivalent model representations.

welfare -> regularizer: the convex conjugate V(x) = sup_y { y.x - w(y) },
computed by concave maximization over the zero-sum hyperplane (translation
invariance collapses one dimension, and the superlinear constants bound the
search radius).

welfare -> choice inversion: the same maximizer y* satisfies q(y*) = x, so
the ascent doubles as the inverse choice map on the simplex interior.

welfare -> discrete distribution family: each anchor point z yields an
n-point noise distribution whose expected maximum equals w at z and never
exceeds w elsewhere; the supremum over anchors is a certified lower bound
on w that is exact on the anchor set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import DEFAULT_CONFIG, NumericConfig, as_utility
from .welfare import WelfareModel, model_bounds

INTERIOR_MIN = 1e-6


class ConvergenceError(RuntimeError):
    """Ascent failed to reach tolerance; carries the best iterate found."""

    def __init__(self, message: str, best: np.ndarray, residual: float):
        super().__init__(message)
        self.best = best
        self.residual = residual


def _search_radius(model: WelfareModel, x: np.ndarray) -> float:
    """Bound on coordinates of the conjugate maximizer, with 2x safety.

    Derived from w(0) and the superlinear constants: any optimal zero-sum y
    satisfies y_i <= (w(0) - min_k b_k) / min_i x_i. Estimated constants may
    be loose, hence the safety factor.
    """
    b, _ = model_bounds(model)
    w0 = model.value(np.zeros(model.n))
    k = (w0 - float(np.min(b))) / float(np.min(x))
    return 2.0 * max(k, 1.0)


def _ascend(model: WelfareModel, x: np.ndarray, grad_tol: float,
            max_iter: int = 20000) -> tuple[np.ndarray, float, int]:
    """Maximize y.x - w(y) over the zero-sum hyperplane from y = 0.

    Projected gradient ascent with Armijo backtracking, plus a Newton
    refinement on the hyperplane (bordered system with the finite-difference
    Hessian of w) once the gradient is small. Returns (y, residual, iters).
    """
    n = model.n
    radius = _search_radius(model, x)
    y = np.zeros(n)
    g_val = -model.value(y)
    step = 1.0

    def residual_at(y_):
        return float(np.max(np.abs(x - model.gradient(y_))))

    for it in range(max_iter):
        q = np.asarray(model.gradient(y), dtype=float)
        grad = x - q
        d = grad - grad.mean()
        res = float(np.max(np.abs(grad)))
        if res <= grad_tol:
            return y, res, it

        if res <= 1e-3 or it % 40 == 0:
            y_ref = _newton_refine(model, x, y, grad_tol)
            if y_ref is not None:
                return y_ref, residual_at(y_ref), it

        a = step
        accepted = False
        for _ in range(70):
            y_new = y + a * d
            val = float(y_new @ x - model.value(y_new))
            if np.isfinite(val) and val >= g_val + 1e-4 * a * float(d @ d):
                accepted = True
                break
            a *= 0.5
        if not accepted:
            y_ref = _newton_refine(model, x, y, grad_tol)
            if y_ref is not None:
                return y_ref, residual_at(y_ref), it
            return y, res, it
        y, g_val = y_new, val
        step = min(a * 2.0, 1e6)
        if float(np.max(np.abs(y))) > radius + 10.0:
            break

    return y, residual_at(y), max_iter


def _newton_refine(model: WelfareModel, x: np.ndarray, y0: np.ndarray,
                   grad_tol: float, max_iter: int = 30) -> Optional[np.ndarray]:
    """Newton steps for q(y) = x on the zero-sum hyperplane.

    The Hessian of w annihilates the all-ones vector, so the system is
    bordered with it. Returns None when the refinement does not converge.
    """
    n = model.n
    y = y0.copy()
    h = 1e-6
    e = np.ones(n)
    for _ in range(max_iter):
        q = np.asarray(model.gradient(y), dtype=float)
        grad = x - q
        if float(np.max(np.abs(grad))) <= grad_tol:
            return y
        jac = np.empty((n, n))
        for i in range(n):
            step_vec = np.zeros(n)
            step_vec[i] = h
            jac[:, i] = (np.asarray(model.gradient(y + step_vec), float)
                         - np.asarray(model.gradient(y - step_vec), float)) / (2 * h)
        bordered = np.zeros((n + 1, n + 1))
        bordered[:n, :n] = 0.5 * (jac + jac.T)
        bordered[:n, n] = e
        bordered[n, :n] = e
        rhs = np.concatenate([grad, [0.0]])
        try:
            sol = np.linalg.solve(bordered, rhs)
        except np.linalg.LinAlgError:
            return None
        delta = sol[:n]
        delta -= delta.mean()
        if not np.all(np.isfinite(delta)):
            return None
        y = y + delta
        if float(np.max(np.abs(delta))) > 1e6:
            return None
    q = np.asarray(model.gradient(y), dtype=float)
    if float(np.max(np.abs(x - q))) <= grad_tol:
        return y
    return None


def conjugate_V(model: WelfareModel, x, grad_tol: float = 1e-8,
                cfg: NumericConfig = DEFAULT_CONFIG) -> float:
    """Convex conjugate V(x) = sup_y { y.x - w(y) } at an interior point."""
    x = np.asarray(x, dtype=float)
    if x.size != model.n:
        raise ValueError("dimension mismatch")
    if np.min(x) < INTERIOR_MIN:
        raise ValueError(
            f"x must be strictly interior (min entry >= {INTERIOR_MIN:g})")
    y, res, _ = _ascend(model, x, grad_tol)
    if res > max(grad_tol, 1e-6):
        raise ConvergenceError(
            f"conjugate ascent stalled at gradient residual {res:.2e}", y, res)
    return float(y @ x - model.value(y))


def invert_choice(model: WelfareModel, x_target,
                  residual_tol: float = 1e-6,
                  cfg: NumericConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Zero-sum utility vector mu with q(mu) = x_target on the interior.

    Raises ConvergenceError carrying the best iterate when the gradient
    residual cannot be brought below `residual_tol`.
    """
    x = np.asarray(x_target, dtype=float)
    if x.size != model.n:
        raise ValueError("dimension mismatch")
    if np.min(x) < INTERIOR_MIN:
        raise ValueError(
            f"target must be strictly interior (min entry >= {INTERIOR_MIN:g})")
    y, res, _ = _ascend(model, x, grad_tol=min(residual_tol, 1e-8))
    if res > residual_tol:
        raise ConvergenceError(
            f"inversion residual {res:.2e} exceeds {residual_tol:.0e}", y, res)
    return y


@dataclass(frozen=True)
class AnchorDistribution:
    """n-point noise distribution anchored at z.

    Atom i (probability weights[i]) places `offset` on coordinate i and
    `offset - penalty` elsewhere; t_star is the smallest positive weight.
    The expected maximum of mu + noise equals w(z) at mu = z and is bounded
    above by w everywhere when the penalty is computed from valid
    superlinear constants.
    """

    z: np.ndarray
    weights: np.ndarray
    offset: float
    penalty: float
    t_star: float
    bounds_estimated: bool = False

    def expected_max(self, mu) -> float:
        mu = np.asarray(mu, dtype=float)
        total = 0.0
        for i in range(mu.size):
            if self.weights[i] <= 0.0:
                continue
            others = np.delete(mu, i)
            best = max(float(mu[i]), float(np.max(others)) - self.penalty)
            total += self.weights[i] * (self.offset + best)
        return total


def anchor_family(model: WelfareModel,
                  anchors: Sequence) -> list[AnchorDistribution]:
    """Anchor distributions for each z: weights q(z), offset l(z), penalty M(z).

    M(z) = max{ 1 + max_{ij}(z_i - z_j), (l(z) - min_i b_i) / t*(z) } with
    t*(z) the smallest positive weight.
    """
    b, estimated = model_bounds(model)
    out = []
    for z in anchors:
        z = as_utility(z)
        q = np.asarray(model.gradient(z), dtype=float)
        positive = q[q > 0.0]
        if positive.size == 0:
            raise AssertionError("gradient has no positive entry on the simplex")
        t_star = float(np.min(positive))
        offset = float(model.value(z) - z @ q)
        spread = float(np.max(z) - np.min(z))
        penalty = max(1.0 + spread, (offset - float(np.min(b))) / t_star)
        out.append(AnchorDistribution(z=z, weights=q, offset=offset,
                                      penalty=penalty, t_star=t_star,
                                      bounds_estimated=estimated))
    return out


def semiparametric_sup(model: WelfareModel, anchors: Sequence, mu) -> float:
    """Max over the anchor family of the expected maximum at mu.

    A lower bound on w(mu), exact when mu is one of the anchors.
    """
    if not len(anchors):
        raise ValueError("anchors must be nonempty")
    family = anchor_family(model, anchors)
    mu = as_utility(mu)
    return max(dist.expected_max(mu) for dist in family)


def simplex_grid(n: int, spacing: float, margin: float = INTERIOR_MIN) -> np.ndarray:
    """Interior grid nodes of the simplex with the given spacing (n <= 3)."""
    if n not in (2, 3):
        raise ValueError("grids are supported for n in {2, 3}")
    steps = int(round(1.0 / spacing))
    nodes = []
    if n == 2:
        for i in range(steps + 1):
            x = np.array([i, steps - i], dtype=float) / steps
            if np.min(x) >= margin:
                nodes.append(x)
    else:
        for i in range(steps + 1):
            for j in range(steps + 1 - i):
                x = np.array([i, j, steps - i - j], dtype=float) / steps
                if np.min(x) >= margin:
                    nodes.append(x)
    return np.asarray(nodes)


def tabulated_welfare(model: WelfareModel, spacing: float = 0.02,
                      grad_tol: float = 1e-8):
    """Round-trip welfare: conjugate values on a simplex grid, then
    w_tab(mu) = max over nodes of mu.x - V(x).

    With a piecewise-linear V on a triangulated grid the continuous argmax
    lands on a node, so the node maximum IS the interpolated round trip.
    Returns (w_tab, nodes, values).
    """
    nodes = simplex_grid(model.n, spacing)
    values = np.array([conjugate_V(model, x, grad_tol=grad_tol) for x in nodes])

    def w_tab(mu):
        mu = np.asarray(mu, dtype=float)
        return float(np.max(nodes @ mu - values))

    return w_tab, nodes, values
