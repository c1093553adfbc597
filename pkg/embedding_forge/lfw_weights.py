"""
Learnable Formulated Weights: distance-dependent context weights for CBOW.

    eq3  PowerShared  lambda_i = |i|^-a + b
    eq4  PowerSplit   same, with (a0, b0) for i < 0 and (a1, b1) for i > 0
    eq5  ExpShared    lambda_i = exp(-a|i|) + b
    eq6  ExpSplit     same split as eq4

Parameters start at 0, where every weight is 1 and the weighted average
reduces to the plain CBOW mean. Scalars are kept in float64.
"""
import csv
import os
import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, List, NamedTuple, Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import ContractViolation

logger = logging.getLogger(__name__)


class LfwFormula(IntEnum):
    POWER_SHARED = kernels.POWER_SHARED
    POWER_SPLIT = kernels.POWER_SPLIT
    EXP_SHARED = kernels.EXP_SHARED
    EXP_SPLIT = kernels.EXP_SPLIT

    @property
    def cli_name(self) -> str:
        return _CLI_NAMES[self]

    @property
    def is_split(self) -> bool:
        return self in (LfwFormula.POWER_SPLIT, LfwFormula.EXP_SPLIT)

    @property
    def param_names(self) -> tuple:
        if self.is_split:
            return ("alpha0", "beta0", "alpha1", "beta1")
        return ("alpha", "beta")

    @property
    def param_count(self) -> int:
        return len(self.param_names)

    @classmethod
    def from_name(cls, name: str) -> "LfwFormula":
        """Accepts CLI names (eq3..eq6) or member names (power_shared, ...)."""
        key = name.strip().lower()
        for formula, cli in _CLI_NAMES.items():
            if key in (cli, formula.name.lower()):
                return formula
        raise ValueError(f"Unknown LFW formula {name!r}; expected one of {sorted(_CLI_NAMES.values())}")


_CLI_NAMES = {
    LfwFormula.POWER_SHARED: "eq3",
    LfwFormula.POWER_SPLIT: "eq4",
    LfwFormula.EXP_SHARED: "eq5",
    LfwFormula.EXP_SPLIT: "eq6",
}


@dataclass
class LfwParams:
    formula: LfwFormula
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).copy()
        if self.values.shape != (self.formula.param_count,):
            raise ContractViolation(
                f"{self.formula.cli_name} takes {self.formula.param_count} parameters, got {self.values.shape}"
            )

    @classmethod
    def zeros(cls, formula: LfwFormula) -> "LfwParams":
        return cls(formula, np.zeros(formula.param_count))

    def as_dict(self) -> Dict[str, float]:
        return {name: float(v) for name, v in zip(self.formula.param_names, self.values)}

    @classmethod
    def from_dict(cls, formula: LfwFormula, values: Dict[str, float]) -> "LfwParams":
        return cls(formula, np.array([float(values[name]) for name in formula.param_names]))

    def copy(self) -> "LfwParams":
        return LfwParams(self.formula, self.values)


@dataclass
class WeightVector:
    offsets: np.ndarray
    weights: np.ndarray
    gradients: np.ndarray
    clamped: np.ndarray

    @property
    def z(self) -> float:
        return float(self.weights.sum())


class CurvePoint(NamedTuple):
    distance: int
    weight: float
    side: Optional[str] = None


def _check_offset(offset: int, r: int):
    if offset == 0 or abs(offset) > r:
        raise ContractViolation(f"offset must satisfy 0 < |i| <= {r}, got {offset}")


def weight(formula: LfwFormula, params: LfwParams, offset: int, r: int) -> float:
    """Raw formula value for one offset (no clamping)."""
    _check_offset(offset, r)
    return float(kernels.lfw_lambda(int(formula), params.values, int(offset)))


def weight_gradients(formula: LfwFormula, params: LfwParams, offset: int, r: int) -> np.ndarray:
    """
    Analytic d(lambda_i)/d(param), ordered as `formula.param_names`.
    Split variants give zeros for the inactive side.
    """
    _check_offset(offset, r)
    out = np.zeros(formula.param_count)
    kernels.lfw_lambda_grad(int(formula), params.values, int(offset), out)
    return out


def keeps_nearest_weights(params: LfwParams) -> bool:
    """True when the distance-1 weights on both sides stay at or above the floor."""
    return all(
        kernels.lfw_lambda(int(params.formula), params.values, offset) >= kernels.LAMBDA_FLOOR
        for offset in (-1, 1)
    )


def weight_vector(formula: LfwFormula, params: LfwParams, offsets: Sequence[int], r: int) -> WeightVector:
    """
    Weights for the present offsets, floored at LAMBDA_FLOOR. Floored entries
    carry zero parameter gradient.
    """
    offsets = np.asarray(offsets, dtype=np.int64)
    for offset in offsets:
        _check_offset(int(offset), r)
    lam = np.empty(len(offsets))
    dlam = np.zeros((len(offsets), formula.param_count))
    kernels.fill_weights(int(formula), params.values, offsets, len(offsets), lam, dlam)
    raw = np.array([kernels.lfw_lambda(int(formula), params.values, int(o)) for o in offsets])
    return WeightVector(offsets, lam, dlam, raw < kernels.LAMBDA_FLOOR)


def weighted_context(embeddings: np.ndarray, weights: WeightVector) -> np.ndarray:
    """u_C = (1/Z) sum_i lambda_i u_{t+i} over the present context rows."""
    embeddings = np.asarray(embeddings)
    if embeddings.shape[0] == 0:
        raise ContractViolation("weighted_context needs at least one context word")
    z = weights.z
    if not z > 0:
        raise ContractViolation(f"normalization factor must be positive, got {z}")
    return np.sum(weights.weights[:, None] * embeddings, axis=0) / z


def context_gradient_wrt_params(g: np.ndarray, embeddings: np.ndarray, weights: WeightVector,
                                weight_grads: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Chain rule through the normalized average:
        dL/dp = g . (1/Z) sum_j (dlambda_j/dp) (u_j - u_C)
    `weight_grads` defaults to the gradients stored on the weight vector.
    """
    if weight_grads is None:
        weight_grads = weights.gradients
    embeddings = np.asarray(embeddings, dtype=np.float64)
    u_c = weighted_context(embeddings, weights)
    projections = (embeddings - u_c) @ np.asarray(g, dtype=np.float64)
    return np.asarray(weight_grads).T @ projections / weights.z


def export_weight_curve(formula: LfwFormula, params: LfwParams, r: int) -> List[CurvePoint]:
    """
    Weights at integer distances 1..r normalized to sum to 1 per curve.
    Split variants emit a left and a right curve.
    """
    if r < 1:
        raise ContractViolation(f"r must be >= 1, got {r}")
    sides = [("left", -1), ("right", 1)] if formula.is_split else [(None, 1)]
    points: List[CurvePoint] = []
    for side, sign in sides:
        offsets = [sign * distance for distance in range(1, r + 1)]
        vector = weight_vector(formula, params, offsets, r)
        normalized = vector.weights / vector.weights.sum()
        points.extend(CurvePoint(d, float(w), side) for d, w in zip(range(1, r + 1), normalized))
    return points


def write_weight_curve_csv(points: Sequence[CurvePoint], path: Union[str, os.PathLike]):
    with_side = any(p.side is not None for p in points)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["distance", "weight", "side"] if with_side else ["distance", "weight"])
        for p in points:
            row = [p.distance, repr(p.weight)]
            if with_side:
                row.append(p.side)
            writer.writerow(row)
    logger.info(f"Weight curve written to {path}")
