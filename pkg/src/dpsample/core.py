"""Domain types, exact distances, frequency counts, and variate generation.

All types are immutable value objects after construction; operations are
pure given an explicit RandomStream. Concurrent callers must each own a
distinct stream (see RandomStream.substream).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _kernels as K

__all__ = [
    "DimensionError",
    "ParameterError",
    "KAryDistribution",
    "ProductBernoulli",
    "KAryDataset",
    "BinaryDataset",
    "ApproxDP",
    "Zcdp",
    "PrivacyBudget",
    "zcdp_to_approx_dp_epsilon",
    "pure_dp_to_zcdp_rho",
    "FrequencyCounts",
    "RandomStream",
    "tv_distance",
    "tv_product_upper_bound",
    "frequency_counts",
    "draw_kary",
    "draw_product",
    "draw_poisson",
    "draw_binomial",
    "draw_multinomial",
]

# Probability vectors must sum to 1 within this tolerance after
# renormalization; inputs whose sum deviates by more than RENORM_TOL are
# rejected outright.
SUM_TOL = 1e-12
RENORM_TOL = 1e-9


class ParameterError(ValueError):
    """A scalar argument is outside its valid range."""


class DimensionError(ValueError):
    """Operands have incompatible dimensions."""


def _as_prob_vector(values, what):
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{what} must be a 1-d vector")
    if np.any(v < 0.0) or np.any(np.isnan(v)):
        raise ParameterError(f"{what} entries must be nonnegative")
    return v


@dataclass(frozen=True)
class KAryDistribution:
    """Probability vector over the universe {1..k}."""

    probs: np.ndarray

    def __init__(self, probs):
        v = _as_prob_vector(probs, "probs")
        if v.shape[0] < 2:
            raise DimensionError("k-ary distribution needs k >= 2")
        total = float(v.sum())
        if abs(total - 1.0) > RENORM_TOL:
            raise ParameterError(
                f"probabilities sum to {total!r}, beyond renormalization "
                f"tolerance {RENORM_TOL}"
            )
        if total != 1.0:
            v = v / total
        v.setflags(write=False)
        object.__setattr__(self, "probs", v)

    @property
    def k(self):
        return self.probs.shape[0]

    @staticmethod
    def uniform(k):
        return KAryDistribution(np.full(k, 1.0 / k))

    def mass(self, element):
        """Probability of a 1-based universe element."""
        if not 1 <= element <= self.k:
            raise ParameterError(f"element {element} outside 1..{self.k}")
        return float(self.probs[element - 1])


@dataclass(frozen=True)
class ProductBernoulli:
    """Vector of d per-coordinate biases in [0, 1]."""

    biases: np.ndarray

    def __init__(self, biases):
        v = _as_prob_vector(biases, "biases")
        if v.shape[0] < 1:
            raise DimensionError("product distribution needs d >= 1")
        if np.any(v > 1.0):
            raise ParameterError("biases must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "biases", v)

    @property
    def d(self):
        return self.biases.shape[0]


@dataclass(frozen=True)
class KAryDataset:
    """Records over the universe {1..k}; may be empty (Poissonized inputs)."""

    records: np.ndarray
    k: int

    def __init__(self, records, k):
        r = np.asarray(records, dtype=np.int64).reshape(-1)
        if k < 1:
            raise ParameterError("universe size k must be >= 1")
        if r.size and (r.min() < 1 or r.max() > k):
            raise ParameterError(f"records must lie in 1..{k}")
        r.setflags(write=False)
        object.__setattr__(self, "records", r)
        object.__setattr__(self, "k", int(k))

    @property
    def n(self):
        return self.records.shape[0]

    def counts(self):
        """Occurrence count of each universe element (length k)."""
        return np.bincount(self.records, minlength=self.k + 1)[1:]

    def empirical_pmf(self):
        if self.n == 0:
            raise ParameterError("empirical pmf of an empty dataset")
        return self.counts() / self.n


@dataclass(frozen=True)
class BinaryDataset:
    """n x d bit matrix; row i is record i."""

    rows: np.ndarray

    def __init__(self, rows):
        m = np.asarray(rows, dtype=np.uint8)
        if m.ndim != 2:
            raise DimensionError("binary dataset must be a 2-d matrix")
        if m.size and m.max() > 1:
            raise ParameterError("entries must be bits")
        m.setflags(write=False)
        object.__setattr__(self, "rows", m)

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]

    def column(self, j):
        return self.rows[:, j]

    def column_means(self):
        if self.n == 0:
            raise ParameterError("column means of an empty dataset")
        return self.rows.mean(axis=0)


@dataclass(frozen=True)
class ApproxDP:
    """(epsilon, delta) privacy budget."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise ParameterError("delta must lie in [0, 1)")


@dataclass(frozen=True)
class Zcdp:
    """rho zero-concentrated privacy budget."""

    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ParameterError("rho must be positive")


PrivacyBudget = Union[ApproxDP, Zcdp]


def zcdp_to_approx_dp_epsilon(rho, delta):
    """epsilon such that a rho-zCDP algorithm is (epsilon, delta)-DP."""
    if not rho > 0:
        raise ParameterError("rho must be positive")
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))


def pure_dp_to_zcdp_rho(epsilon):
    """rho such that an (epsilon, 0)-DP algorithm is rho-zCDP."""
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    return 0.5 * epsilon * epsilon


@dataclass(frozen=True)
class FrequencyCounts:
    """counts[j] = number of universe elements occurring exactly j times."""

    counts: np.ndarray

    def __init__(self, counts):
        c = np.asarray(counts, dtype=np.int64).reshape(-1)
        if c.size < 1 or np.any(c < 0):
            raise ParameterError("counts must be a nonempty nonnegative vector")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def universe_size(self):
        return int(self.counts.sum())

    @property
    def record_count(self):
        j = np.arange(self.counts.shape[0], dtype=np.int64)
        return int((j * self.counts).sum())


class RandomStream:
    """Deterministic variate stream identified by (seed, stream-id).

    Identical (seed, stream-id) reproduces the identical sequence
    bit-for-bit; distinct pairs give statistically independent sequences.
    Instances are stateful (draws advance the position) but the identifying
    fields are immutable; use substream() to hand independent streams to
    concurrent workers.
    """

    __slots__ = ("seed", "stream", "_st")

    def __init__(self, seed, stream=0):
        seed = int(seed)
        stream = int(stream)
        if stream < 0:
            raise ParameterError("stream id must be nonnegative")
        self.seed = seed
        self.stream = stream
        self._st = K.make_state(seed, stream)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream={self.stream})"

    def substream(self, index):
        """Independent child stream; deterministic in (stream, index)."""
        if index < 0:
            raise ParameterError("substream index must be nonnegative")
        return RandomStream(self.seed, K.substream_id(self.stream, index))

    def spawn(self, count):
        return [self.substream(i) for i in range(count)]

    # low-level draws used across the package
    def uniform(self):
        return K.uniform(self._st)

    def uniforms(self, n):
        return K.uniforms(self._st, n)

    def gaussian(self):
        return K.gaussian(self._st)

    def gaussians(self, n):
        return K.gaussians(self._st, n)

    def laplace(self, scale):
        return K.laplace(self._st, scale)

    def laplaces(self, scale, n):
        return K.laplaces(self._st, scale, n)

    def gumbel(self):
        return K.gumbel(self._st)

    def poisson(self, lam):
        return K.poisson(self._st, lam)

    def binomial(self, n, p):
        return K.binomial(self._st, n, p)

    def bernoulli(self, p):
        return K.bernoulli(self._st, p)

    def bernoulli_vec(self, probs):
        return K.bernoulli_vec(self._st, probs)

    def categorical(self, pmf):
        return K.categorical(self._st, pmf)

    def categoricals(self, pmf, n):
        return K.categoricals(self._st, pmf, n)

    def multinomial(self, trials, probs):
        return K.multinomial(self._st, trials, probs)

    def randint(self, bound):
        return K.randint(self._st, bound)

    def permutation(self, k):
        return K.permutation(self._st, k)


def tv_distance(p: KAryDistribution, q: KAryDistribution) -> float:
    """Total variation distance (half the L1 distance) between two pmfs."""
    if p.k != q.k:
        raise DimensionError(f"mismatched k: {p.k} vs {q.k}")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def tv_product_upper_bound(p: ProductBernoulli, q: ProductBernoulli) -> float:
    """Sum of per-coordinate Bernoulli TV distances.

    Upper-bounds the true product TV by subadditivity; may exceed 1, in
    which case callers clamp for reporting.
    """
    if p.d != q.d:
        raise DimensionError(f"mismatched d: {p.d} vs {q.d}")
    return float(np.abs(p.biases - q.biases).sum())


def frequency_counts(x: KAryDataset) -> FrequencyCounts:
    """counts[j] = number of universe elements occurring exactly j times."""
    occ = x.counts()
    return FrequencyCounts(np.bincount(occ, minlength=x.n + 1))


def draw_kary(p: KAryDistribution, rng: RandomStream) -> int:
    """One draw from a k-ary distribution, as a 1-based element."""
    return int(rng.categorical(p.probs)) + 1


def draw_product(p: ProductBernoulli, rng: RandomStream) -> np.ndarray:
    """One bit-vector draw from a product Bernoulli distribution."""
    return rng.bernoulli_vec(p.biases)


def draw_poisson(lam: float, rng: RandomStream) -> int:
    if lam < 0:
        raise ParameterError("Poisson mean must be nonnegative")
    return int(rng.poisson(lam))


def draw_binomial(n: int, q: float, rng: RandomStream) -> int:
    if n < 0:
        raise ParameterError("trial count must be nonnegative")
    if not 0.0 <= q <= 1.0:
        raise ParameterError("success probability must lie in [0, 1]")
    return int(rng.binomial(n, q))


def draw_multinomial(
    trials: int, cell_probs: Sequence[float], rng: RandomStream
) -> np.ndarray:
    """Multinomial counts via sequential conditional binomials.

    cell_probs may sum to less than 1; the residual mass goes to an
    implicit discard cell, so the counts sum to the number of
    non-discarded trials.
    """
    if trials < 0:
        raise ParameterError("trial count must be nonnegative")
    p = _as_prob_vector(cell_probs, "cell_probs")
    if p.size < 1:
        raise ParameterError("need at least one cell")
    total = float(p.sum())
    if total > 1.0 + SUM_TOL:
        raise ParameterError(f"cell probabilities sum to {total!r} > 1")
    return rng.multinomial(trials, p)
