"""Privacy-noise primitives and the deterministic numeric transforms the
samplers compose: Laplace/Gaussian noise, exponential-mechanism selection,
L1 projection onto the probability simplex, interval clipping, and the
truncated mean."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import (
    BinaryDataset,
    DimensionError,
    KAryDistribution,
    ParameterError,
    RandomStream,
)

__all__ = [
    "TruncationCeiling",
    "laplace_noise",
    "gaussian_noise",
    "l1_project_simplex",
    "truncated_mean",
    "exponential_select",
    "clip_interval",
]


@dataclass(frozen=True)
class TruncationCeiling:
    """L2-norm ceiling applied to binary row vectors before averaging."""

    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ParameterError("truncation ceiling must be positive")


def laplace_noise(scale: float, rng: RandomStream) -> float:
    """Zero-mean Laplace draw with density exp(-|x|/scale) / (2*scale)."""
    if not scale > 0:
        raise ParameterError("Laplace scale must be positive")
    return rng.laplace(scale)


def gaussian_noise(sigma: float, rng: RandomStream) -> float:
    """Zero-mean normal draw with standard deviation sigma."""
    if not sigma > 0:
        raise ParameterError("Gaussian sigma must be positive")
    return sigma * rng.gaussian()


def l1_project_simplex(v) -> KAryDistribution:
    """L1-optimal projection of a real vector onto the probability simplex.

    Rule: clamp negative entries to zero, then divide by the positive-entry
    sum; if every entry is nonpositive, return uniform. Clamping costs
    exactly the unavoidable lower bound, and rescaling a nonnegative vector
    with mass s moves |1 - s|, also the lower bound, so the output is an
    L1 cost minimizer. Deterministic.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise DimensionError("need a 1-d vector of length k >= 2")
    return KAryDistribution(K.project_simplex(arr))


def truncated_mean(rows, ceiling: TruncationCeiling) -> np.ndarray:
    """Mean of rows after rescaling rows with L2 norm above the ceiling
    down to exactly the ceiling. Entries of the result lie in [0, 1]."""
    if isinstance(rows, BinaryDataset):
        m = rows.rows
    else:
        m = np.asarray(rows)
    if m.ndim != 2:
        raise DimensionError("rows must form a 2-d matrix")
    if m.shape[0] == 0:
        raise ParameterError("truncated mean of an empty dataset")
    m = m.astype(np.float64, copy=False)
    norms = np.sqrt((m * m).sum(axis=1))
    scale = np.ones(m.shape[0])
    over = norms > ceiling.value
    scale[over] = ceiling.value / norms[over]
    return (m * scale[:, None]).mean(axis=0)


def exponential_select(counts, epsilon: float, rng: RandomStream) -> int:
    """Index selected with probability proportional to exp(eps*count/2).

    Gumbel-trick implementation (argmax of eps*count/2 plus i.i.d. standard
    Gumbel noise), equivalent in law and immune to exp overflow. With
    counts of sensitivity 1 this is (epsilon, 0)-DP.
    """
    c = np.asarray(counts, dtype=np.int64).reshape(-1)
    if c.size < 1:
        raise ParameterError("need at least one candidate")
    if np.any(c < 0):
        raise ParameterError("counts must be nonnegative")
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    best = -np.inf
    arg = 0
    half_eps = 0.5 * epsilon
    for j in range(c.size):
        g = half_eps * float(c[j]) + rng.gumbel()
        if g > best:
            best = g
            arg = j
    return arg


def clip_interval(x: float, lo: float, hi: float) -> float:
    """Nearest point of [lo, hi] to x."""
    if lo > hi:
        raise ParameterError(f"empty interval [{lo}, {hi}]")
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x
