"""The private samplers.

* kary_sample: empirical pmf + per-coordinate Laplace(2/(eps*n)) noise,
  L1-projected back onto the simplex, then sampled. (eps, 0)-DP.
* clip_bernoulli_sample / clip_product_sample: bounded-bias samplers that
  draw a bit from the sample proportion clipped to [1/4, 3/4]; (4/n, 0)-DP
  per coordinate, (8d/n^2)-zCDP for the d-fold composition.
* prod_sample: recursive-preconditioning sampler for arbitrary product
  Bernoulli distributions under a rho-zCDP budget. Coordinates are sorted
  into geometric bias buckets on one half of the data, then sampled from
  noisy truncated means on fresh slices. Small d bypasses the recursion
  with a single-round variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BinaryDataset,
    KAryDataset,
    ParameterError,
    RandomStream,
)
from .mechanisms import TruncationCeiling, l1_project_simplex, truncated_mean

__all__ = [
    "kary_sample",
    "kary_required_n",
    "clip_bias",
    "clip_bernoulli_sample",
    "clip_product_sample",
    "clip_accuracy_n",
    "clip_required_n",
    "clip_product_accuracy_n",
    "clip_product_required_n",
    "clip_product_rho",
    "ProdSamplerConfig",
    "BucketingState",
    "rounds",
    "records_per_round",
    "records_needed",
    "prod_bucketing_phase",
    "bucketing_phase_product_law",
    "SingleRoundPlan",
    "single_round_plan",
    "single_round_draw",
    "prod_sample",
]


# ---------------------------------------------------------------------------
# k-ary sampler
# ---------------------------------------------------------------------------


def kary_sample(x: KAryDataset, epsilon: float, rng: RandomStream) -> int:
    """One private draw from the projected noisy empirical distribution.

    (epsilon, 0)-DP in the records (Laplace mechanism at sensitivity 2/n
    plus post-processing). For i.i.d. data from P and n >= 2k/(alpha*eps),
    the output law is within TV distance alpha of P.
    """
    if x.n < 1:
        raise ParameterError("k-ary sampler needs at least one record")
    if x.k < 2:
        raise ParameterError("k-ary sampler needs a universe of size >= 2")
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    scale = 2.0 / (epsilon * x.n)
    noisy = x.empirical_pmf() + rng.laplaces(scale, x.k)
    projected = l1_project_simplex(noisy)
    return int(rng.categorical(projected.probs)) + 1


def kary_required_n(k: int, alpha: float, epsilon: float) -> int:
    """Records sufficient for alpha-accuracy of the k-ary sampler."""
    if k < 2 or not 0 < alpha or not epsilon > 0:
        raise ParameterError("need k >= 2, alpha > 0, epsilon > 0")
    return math.ceil(2.0 * k / (alpha * epsilon))


# ---------------------------------------------------------------------------
# bounded-bias Bernoulli samplers
# ---------------------------------------------------------------------------


def clip_bias(bits) -> float:
    """Sample proportion clipped to [1/4, 3/4].

    This is exactly the output bias of the clipped sampler on a fixed
    dataset, exposed for exact privacy/accuracy computations.
    """
    b = np.asarray(bits).reshape(-1)
    if b.size < 1:
        raise ParameterError("need at least one bit")
    mean = float(b.mean())
    if mean < 0.25:
        return 0.25
    if mean > 0.75:
        return 0.75
    return mean


def clip_bernoulli_sample(bits, rng: RandomStream) -> int:
    """Bernoulli draw with bias clip_bias(bits); (4/n, 0)-DP."""
    return rng.bernoulli(clip_bias(bits))


def clip_product_sample(x: BinaryDataset, rng: RandomStream) -> np.ndarray:
    """Independent clipped-Bernoulli draw per column; (8d/n^2)-zCDP."""
    if x.n < 1:
        raise ParameterError("need at least one record")
    biases = np.clip(x.column_means(), 0.25, 0.75)
    return rng.bernoulli_vec(biases)


def clip_accuracy_n(alpha: float) -> int:
    """Records sufficient for alpha-accuracy on biases in [1/3, 2/3]."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    return math.ceil(72.0 * math.log(6.0 / alpha))


def clip_required_n(alpha: float, epsilon: float) -> int:
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    return max(clip_accuracy_n(alpha), math.ceil(4.0 / epsilon))


def clip_product_accuracy_n(d: int, alpha: float) -> int:
    if d < 1:
        raise ParameterError("d must be >= 1")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    return math.ceil(72.0 * math.log(6.0 * d / alpha))


def clip_product_required_n(d: int, alpha: float, rho: float) -> int:
    if not rho > 0:
        raise ParameterError("rho must be positive")
    return max(clip_product_accuracy_n(d, alpha), math.ceil(math.sqrt(8.0 * d / rho)))


def clip_product_rho(d: int, n: int) -> float:
    """zCDP budget spent by clip_product_sample on an n x d input."""
    if d < 1 or n < 1:
        raise ParameterError("need d >= 1 and n >= 1")
    return 8.0 * d / (n * n)


# ---------------------------------------------------------------------------
# recursive-preconditioning product sampler
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProdSamplerConfig:
    """Configuration of the product sampler.

    beta is the per-event failure mass; the record-count formula recovers
    the accuracy target as alpha = 12*d*beta (the harness sets
    beta = alpha/(12d) when it targets accuracy alpha). constant_scale
    multiplies the record-count constant; values below 1 are for
    property tests only and void the accuracy contract.
    """

    rho: float
    beta: float
    constant_scale: float = 1.0
    d_min_recursive: int = 64

    def __post_init__(self):
        if not self.rho > 0:
            raise ParameterError("rho must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ParameterError("beta must lie in (0, 1)")
        if not self.constant_scale > 0:
            raise ParameterError("constant_scale must be positive")
        if self.d_min_recursive < 1:
            raise ParameterError("d_min_recursive must be >= 1")


def rounds(d: int) -> int:
    """Number of bucketing rounds for dimension d."""
    if d < 1:
        raise ParameterError("d must be >= 1")
    return max(1, math.ceil(math.log2(d / 40.0)))


def records_per_round(d: int, cfg: ProdSamplerConfig) -> int:
    """Per-slice record count required by the accuracy contract."""
    R = rounds(d)
    alpha = 12.0 * d * cfg.beta
    arg = d * R / (alpha * cfg.beta * math.sqrt(2.0 * cfg.rho))
    if arg <= 1.0:
        raise ParameterError("degenerate config: record-count log term <= 0")
    base = (
        1200.0
        * d
        / (alpha * math.sqrt(2.0 * cfg.rho))
        * math.log(arg) ** 1.25
    )
    return max(1, math.ceil(cfg.constant_scale * base))


def records_needed(d: int, cfg: ProdSamplerConfig) -> int:
    """Total rows required: (2R+2) slices, or one slice below the
    recursion cutoff."""
    if d < cfg.d_min_recursive:
        return records_per_round(d, cfg)
    return (2 * rounds(d) + 2) * records_per_round(d, cfg)


@dataclass(frozen=True)
class BucketingState:
    """Outcome of the bucketing phase.

    buckets[r-1] holds the coordinates classified in bucketing round r
    (bias range [u_r/4, u_r] on the good event); smallest holds the
    coordinates that survived every round (bias <= 20/d). ceilings[r-1]
    is the truncation ceiling of round r for r in 1..2R+1, where the
    sampling round R+r reuses round r's ceiling.
    """

    d: int
    R: int
    m: int
    buckets: tuple
    smallest: np.ndarray
    u: np.ndarray
    tau: np.ndarray
    ceilings: np.ndarray
    flips: np.ndarray

    def __post_init__(self):
        merged = np.concatenate([b for b in self.buckets] + [self.smallest])
        if sorted(merged.tolist()) != list(range(self.d)):
            raise ParameterError("bucket assignments do not partition the coordinates")

    def assignments(self) -> np.ndarray:
        """Sampling round (R+1 .. 2R+1) per coordinate."""
        out = np.empty(self.d, dtype=np.int64)
        for r, cols in enumerate(self.buckets, start=1):
            out[cols] = self.R + r
        out[self.smallest] = 2 * self.R + 1
        return out

    def oriented(self, biases) -> np.ndarray:
        b = np.asarray(biases, dtype=np.float64)
        out = b.copy()
        out[self.flips] = 1.0 - b[self.flips]
        return out

    def consistent_with(self, biases) -> bool:
        """Whether the assignment satisfies the bucket bias ranges for the
        given true biases (after orientation)."""
        ob = self.oriented(biases)
        for r, cols in enumerate(self.buckets, start=1):
            u_r = self.u[r - 1]
            if cols.size and (
                np.any(ob[cols] < u_r / 4.0) or np.any(ob[cols] > u_r)
            ):
                return False
        if self.smallest.size and np.any(ob[self.smallest] > self.u[2 * self.R]):
            return False
        return True


class _MatrixSource:
    """Column-restricted truncated means over consecutive m-row slices of a
    bit matrix."""

    def __init__(self, rows: np.ndarray, m: int):
        self.rows = rows
        self.m = m

    def tmean(self, slice_idx, cols, ceiling, flips_sub):
        lo = slice_idx * self.m
        sub = self.rows[lo : lo + self.m][:, cols].astype(np.float64)
        if flips_sub is not None and flips_sub.any():
            sub[:, flips_sub] = 1.0 - sub[:, flips_sub]
        if ceiling is None:
            return sub.mean(axis=0)
        return truncated_mean(sub, TruncationCeiling(ceiling))


class _ProductLawSource:
    """Law-exact synthetic source for i.i.d. product data.

    Column means of an m-row restricted slice are Bin(m, q_j)/m when
    truncation cannot occur; that is guaranteed whenever the ceiling is at
    least the largest possible restricted row norm, sqrt(#{j: q_j > 0}).
    Raises if a requested ceiling could truncate, since then the shortcut
    would no longer be exact.
    """

    def __init__(self, biases: np.ndarray, m: int, rng: RandomStream):
        self.biases = np.asarray(biases, dtype=np.float64)
        self.m = m
        self.rng = rng

    def tmean(self, slice_idx, cols, ceiling, flips_sub):
        q = self.biases[cols].copy()
        if flips_sub is not None:
            q[flips_sub] = 1.0 - q[flips_sub]
        if ceiling is not None:
            max_norm = math.sqrt(float(np.count_nonzero(q > 0.0)))
            if ceiling < max_norm:
                raise ParameterError(
                    "synthetic source invalid: ceiling below max row norm"
                )
        out = np.empty(q.shape[0], dtype=np.float64)
        for i in range(q.shape[0]):
            out[i] = self.rng.binomial(self.m, q[i]) / self.m
        return out


def _run_bucketing(source, d, m, R, cfg, rng) -> BucketingState:
    rho = cfg.rho
    beta = cfg.beta
    all_cols = np.arange(d, dtype=np.int64)

    # orientation round (slice 0): untruncated noisy means decide which
    # columns are complemented for every subsequent round
    sigma0 = math.sqrt(d) / (m * math.sqrt(2.0 * rho))
    est0 = source.tmean(0, all_cols, None, None) + sigma0 * rng.gaussians(d)
    flips = est0 > 0.5

    active = all_cols
    u_list = []
    tau_list = []
    ceilings = []
    buckets = []
    u = 0.5
    tau = 3.0 / 16.0
    for r in range(1, R + 1):
        size = active.shape[0]
        ceiling = math.sqrt(6.0 * u * size * math.log(m * R / beta)) if size else 0.0
        if size:
            sigma = ceiling / (m * math.sqrt(2.0 * rho))
            est = (
                source.tmean(r, active, ceiling, flips[active])
                + sigma * rng.gaussians(size)
            )
            passed = est < tau
        else:
            passed = np.zeros(0, dtype=bool)
        buckets.append(active[~passed])
        active = active[passed]
        u_list.append(u)
        tau_list.append(tau)
        ceilings.append(ceiling)
        tau /= 2.0
        u /= 2.0

    # u is reused for sampling rounds; the smallest bucket gets 20/d and
    # its own (larger) ceiling
    u_all = np.array(u_list + u_list + [20.0 / d])
    ceil_all = np.array(
        ceilings + ceilings + [math.sqrt(200.0 * math.log(m / beta))]
    )
    return BucketingState(
        d=d,
        R=R,
        m=m,
        buckets=tuple(buckets),
        smallest=active,
        u=u_all,
        tau=np.array(tau_list),
        ceilings=ceil_all,
        flips=flips,
    )


def prod_bucketing_phase(
    x_half: BinaryDataset, cfg: ProdSamplerConfig, rng: RandomStream
) -> BucketingState:
    """Run orientation plus R bucketing rounds on the bucketing half of the
    data ((R+1) slices of m records)."""
    d = x_half.d
    if d < 1:
        raise ParameterError("need d >= 1")
    R = rounds(d)
    m = x_half.n // (R + 1)
    if m < 1:
        raise ParameterError(
            f"insufficient rows: need at least {R + 1} for {R} rounds plus orientation"
        )
    return _run_bucketing(_MatrixSource(x_half.rows, m), d, m, R, cfg, rng)


def bucketing_phase_product_law(
    biases, m: int, cfg: ProdSamplerConfig, rng: RandomStream
) -> BucketingState:
    """Bucketing phase against i.i.d. product data of the given biases,
    simulated at the law level (see _ProductLawSource). Lets property
    tests exercise faithful record counts without materializing the data;
    raises rather than ever deviating from the exact law."""
    b = np.asarray(biases, dtype=np.float64)
    if m < 1:
        raise ParameterError("need m >= 1")
    d = b.shape[0]
    return _run_bucketing(_ProductLawSource(b, m, rng), d, m, rounds(d), cfg, rng)


@dataclass(frozen=True)
class SingleRoundPlan:
    """Deterministic part of the single-round (small d) sampler."""

    estimate: np.ndarray
    sigma: float
    ceiling: float

    @property
    def d(self):
        return self.estimate.shape[0]


def single_round_plan(x: BinaryDataset, cfg: ProdSamplerConfig) -> SingleRoundPlan:
    if x.n < 1:
        raise ParameterError("need at least one record")
    if x.d < 1:
        raise ParameterError("need d >= 1")
    m = x.n
    ceiling = math.sqrt(6.0 * 0.5 * x.d * math.log(m / cfg.beta))
    est = truncated_mean(x.rows, TruncationCeiling(ceiling))
    sigma = ceiling / (m * math.sqrt(2.0 * cfg.rho))
    return SingleRoundPlan(estimate=est, sigma=sigma, ceiling=ceiling)


def single_round_draw(plan: SingleRoundPlan, rng: RandomStream):
    """Noisy estimates clipped to [0,1] and the resulting bit draw.

    Returns (bits, noisy_estimates); the unclipped noisy estimates are
    exposed so harnesses can condition on the no-clipping event.
    """
    noisy = plan.estimate + plan.sigma * rng.gaussians(plan.d)
    q = np.clip(noisy, 0.0, 1.0)
    return rng.bernoulli_vec(q), noisy


def _sampling_phase(source, state: BucketingState, cfg, rng) -> np.ndarray:
    out = np.zeros(state.d, dtype=np.uint8)
    rho = cfg.rho
    m = state.m
    R = state.R
    groups = list(state.buckets) + [state.smallest]
    for i, cols in enumerate(groups):
        if cols.size == 0:
            continue
        slice_idx = R + 1 + i
        ceiling = state.ceilings[R + i] if i < R else state.ceilings[2 * R]
        sigma = ceiling / (m * math.sqrt(2.0 * rho))
        est = (
            source.tmean(slice_idx, cols, ceiling, state.flips[cols])
            + sigma * rng.gaussians(cols.shape[0])
        )
        q = np.clip(est, 0.0, 1.0)
        out[cols] = rng.bernoulli_vec(q)
    bits = out.copy()
    bits[state.flips] ^= 1
    return bits


def prod_sample(
    x: BinaryDataset, cfg: ProdSamplerConfig, rng: RandomStream
) -> np.ndarray:
    """One private draw from the product sampler; rho-zCDP overall.

    Every record is used in exactly one round (orientation, one bucketing
    round, or one sampling round), and each round is a rho-zCDP Gaussian
    release of a truncated mean, so parallel composition gives rho-zCDP
    for the whole algorithm.
    """
    d = x.d
    if d < 1:
        raise ParameterError("need d >= 1")
    need = records_needed(d, cfg)
    if x.n < need:
        raise ParameterError(
            f"insufficient rows: need {need} for d={d} at "
            f"constant_scale={cfg.constant_scale}, got {x.n}"
        )
    if d < cfg.d_min_recursive:
        bits, _ = single_round_draw(single_round_plan(x, cfg), rng)
        return bits
    R = rounds(d)
    m = x.n // (2 * R + 2)
    source = _MatrixSource(x.rows, m)
    state = _run_bucketing(source, d, m, R, cfg, rng)
    return _sampling_phase(source, state, cfg, rng)
