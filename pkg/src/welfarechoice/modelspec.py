"""Model specification files: JSON documents describing a choice model.

A spec is a tree with a `kind` discriminator and kind-specific parameters.
Alternative indices inside spec files are 1-based to match the mu_1..mu_n
column convention of the CSV outputs; they are converted on load.

Kinds: mnl, nested_logit, gev_custom, ram_entropy, ram_quadratic,
ram_logbarrier, ram_mdm, ram_mmm, ram_cmm, transform_scale, transform_mix,
transform_cross.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ram, transforms
from .welfare import GEVGenerator, WelfareModel, gev_welfare, log_sum_welfare, \
    mnl_welfare, nested_logit_welfare

KINDS = ("mnl", "nested_logit", "gev_custom", "ram_entropy", "ram_quadratic",
         "ram_logbarrier", "ram_mdm", "ram_mmm", "ram_cmm",
         "transform_scale", "transform_mix", "transform_cross")


class SpecError(ValueError):
    """A spec failed validation; the message names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ModelBundle:
    """A built welfare model plus its regularizer when one defines it."""

    model: WelfareModel
    regularizer: Optional[ram.Regularizer]
    spec: dict


def _require(spec: dict, field: str, path: str):
    if field not in spec:
        raise SpecError(f"{path}{field}", "missing required field")
    return spec[field]


def _number(spec: dict, field: str, path: str, positive: bool = False) -> float:
    val = _require(spec, field, path)
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise SpecError(f"{path}{field}", f"expected a number, got {val!r}")
    if positive and not val > 0:
        raise SpecError(f"{path}{field}", "must be positive")
    return float(val)


def _int(spec: dict, field: str, path: str, minimum: int) -> int:
    val = _require(spec, field, path)
    if not isinstance(val, int) or isinstance(val, bool) or val < minimum:
        raise SpecError(f"{path}{field}", f"expected an integer >= {minimum}")
    return val


def _matrix(spec: dict, field: str, path: str) -> np.ndarray:
    val = _require(spec, field, path)
    try:
        arr = np.asarray(val, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{path}{field}", f"not a numeric matrix: {exc}") from exc
    if arr.ndim != 2:
        raise SpecError(f"{path}{field}", "expected a matrix (list of rows)")
    return arr


def _marginal(entry: dict, path: str) -> ram.Marginal:
    family = _require(entry, "family", path)
    try:
        if family == "uniform":
            return ram.uniform_marginal()
        if family == "exponential":
            return ram.exponential_marginal(_number(entry, "rate", path, positive=True))
        if family == "logistic":
            return ram.logistic_marginal(_number(entry, "scale", path, positive=True))
        if family == "normal":
            return ram.normal_marginal(_number(entry, "sd", path, positive=True))
    except ValueError as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(path, str(exc)) from exc
    raise SpecError(f"{path}family", f"unknown marginal family {family!r}")


def build_model(spec: dict, path: str = "") -> ModelBundle:
    """Construct the model a spec describes, validating as we go."""
    if not isinstance(spec, dict):
        raise SpecError(path or "spec", "expected an object")
    kind = _require(spec, "kind", path)
    if kind not in KINDS:
        raise SpecError(f"{path}kind", f"unknown kind {kind!r}")
    try:
        return _build(kind, spec, path)
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(f"{path}{kind}", str(exc)) from exc


def _build(kind: str, spec: dict, path: str) -> ModelBundle:
    if kind == "mnl":
        n = _int(spec, "n", path, 2)
        eta = _number(spec, "eta", path, positive=True)
        return ModelBundle(mnl_welfare(eta, n), None, spec)

    if kind == "nested_logit":
        n = _int(spec, "n", path, 2)
        nests_raw = _require(spec, "nests", path)
        lambdas = _require(spec, "lambdas", path)
        nests = [[i - 1 for i in block] for block in nests_raw]
        return ModelBundle(nested_logit_welfare(nests, lambdas, n), None, spec)

    if kind == "gev_custom":
        eta = _number(spec, "eta", path, positive=True)
        expo = _matrix(spec, "exponents", path)
        if np.any(expo < 0):
            raise SpecError(f"{path}exponents", "entries must be nonnegative")
        row_sums = expo.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0 / eta)) > 1e-10:
            raise SpecError(f"{path}exponents",
                            f"row sums must equal 1/eta = {1.0 / eta:g}")
        n = expo.shape[1]

        def H(y):
            return float(np.sum(np.prod(np.power(y[None, :], expo), axis=1)))

        def partials(y):
            terms = np.prod(np.power(y[None, :], expo), axis=1)
            return (terms[:, None] * expo / np.maximum(y, 1e-300)[None, :]).sum(axis=0)

        gen = GEVGenerator(eta=eta, H=H, partials=partials)
        return ModelBundle(gev_welfare(gen, n), None, spec)

    if kind == "ram_entropy":
        n = _int(spec, "n", path, 2)
        eta = _number(spec, "eta", path, positive=True)
        reg = ram.entropy_regularizer(eta, n)
        return ModelBundle(ram.ram_welfare(reg), reg, spec)

    if kind == "ram_quadratic":
        matrix = _matrix(spec, "matrix", path)
        reg = ram.quadratic_regularizer(matrix)
        return ModelBundle(ram.ram_welfare(reg), reg, spec)

    if kind == "ram_logbarrier":
        n = _int(spec, "n", path, 2)
        reg = ram.log_barrier_regularizer(n)
        return ModelBundle(ram.ram_welfare(reg), reg, spec)

    if kind == "ram_mdm":
        entries = _require(spec, "marginals", path)
        if not isinstance(entries, list) or len(entries) < 2:
            raise SpecError(f"{path}marginals", "expected a list of >= 2 marginals")
        marginals = [_marginal(e, f"{path}marginals[{k}].")
                     for k, e in enumerate(entries)]
        reg = ram.mdm_regularizer(marginals)
        return ModelBundle(ram.ram_welfare(reg), reg, spec)

    if kind == "ram_mmm":
        sigma = _require(spec, "sigma", path)
        reg = ram.mmm_regularizer(sigma)
        return ModelBundle(ram.ram_welfare(reg), reg, spec)

    if kind == "ram_cmm":
        cov = _matrix(spec, "covariance", path)
        reg = ram.cmm_regularizer(cov)
        return ModelBundle(ram.ram_welfare(reg), reg, spec)

    if kind == "transform_scale":
        eta = _number(spec, "eta", path, positive=True)
        inner = build_model(_require(spec, "inner", path), f"{path}inner.")
        return ModelBundle(transforms.scale(inner.model, eta), None, spec)

    if kind == "transform_mix":
        n = _int(spec, "n", path, 2)
        entries = _require(spec, "components", path)
        if not isinstance(entries, list) or not entries:
            raise SpecError(f"{path}components", "expected a nonempty list")
        comps = []
        for k, entry in enumerate(entries):
            sub_path = f"{path}components[{k}]."
            weight = _number(entry, "weight", sub_path)
            indices = _require(entry, "indices", sub_path)
            inner = build_model(_require(entry, "inner", sub_path),
                                f"{sub_path}inner.")
            comps.append(transforms.MixtureComponent(
                model=inner.model,
                indices=tuple(i - 1 for i in indices),
                weight=weight))
        return ModelBundle(transforms.mix(comps, n), None, spec)

    if kind == "transform_cross":
        matrix = _matrix(spec, "matrix", path)
        inner = build_model(_require(spec, "inner", path), f"{path}inner.")
        return ModelBundle(transforms.cross(inner.model, matrix), None, spec)

    raise SpecError(f"{path}kind", f"unhandled kind {kind!r}")


def load_spec(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise SpecError("spec", f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError("spec", f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def load_model(path: str) -> ModelBundle:
    return build_model(load_spec(path))


# Built-in demonstration models used by the figure command: a three-product
# quadratic representative agent whose middle alternative couples the other
# two, and a four-term log-sum model where two alternatives share a brand
# component.

DEMO_QUADRATIC_COUPLING = np.array([[3.0, 2.0, 0.0],
                                    [2.0, 3.0, 2.0],
                                    [0.0, 2.0, 3.0]])

DEMO_BRAND_WEIGHTS = np.array([[1.0, 0.0, 0.0],
                               [0.0, 1.0, 0.0],
                               [0.0, 0.0, 1.0],
                               [0.5, 0.5, 0.0]])


def demo_quadratic_model() -> ModelBundle:
    """Quadratic RAM demo; the solver sees half the coupling matrix so the
    choice probabilities match the published trajectories on [-2, 2]."""
    reg = ram.quadratic_regularizer(0.5 * DEMO_QUADRATIC_COUPLING)
    return ModelBundle(ram.ram_welfare(reg), reg,
                       {"kind": "ram_quadratic",
                        "matrix": (0.5 * DEMO_QUADRATIC_COUPLING).tolist()})


def demo_brand_model() -> ModelBundle:
    """Log-sum demo with a shared-brand term over alternatives 1 and 2."""
    model = log_sum_welfare(DEMO_BRAND_WEIGHTS, name="brand_overlap")
    return ModelBundle(model, None,
                       {"kind": "transform_cross",
                        "matrix": DEMO_BRAND_WEIGHTS.tolist(),
                        "inner": {"kind": "mnl", "n": 4, "eta": 1.0}})
