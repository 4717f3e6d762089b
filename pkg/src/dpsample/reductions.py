"""Lower-bound reduction machinery, implemented as testable forward
algorithms: the star distribution class, the special-element picker, the
Poisson-coupling dataset transform, the universe transform, the composite
reduced sampler, and the two marginal-estimation reductions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BinaryDataset,
    KAryDataset,
    KAryDistribution,
    ParameterError,
    ProductBernoulli,
    RandomStream,
)
from .mechanisms import exponential_select

__all__ = [
    "InternalError",
    "StarDistribution",
    "star_to_product",
    "pick_special_element",
    "dataset_transform",
    "universe_transform",
    "reduced_kary_sampler",
    "marginal_estimate_via_sampler",
    "marginal_estimate_general",
    "marginal_parts_needed",
]


class InternalError(RuntimeError):
    """An invariant that should be unreachable was violated."""


@dataclass(frozen=True)
class StarDistribution:
    """Distribution over {1..2k+1} with mass 1 - alpha_star on one special
    element and alpha_star/k on each element of a k-element support."""

    k: int
    special: int
    support: tuple
    alpha_star: float

    def __init__(self, k, special, support, alpha_star):
        if k < 1:
            raise ParameterError("k must be >= 1")
        size = 2 * k + 1
        if not 1 <= special <= size:
            raise ParameterError(f"special element must lie in 1..{size}")
        sup = tuple(sorted(int(s) for s in support))
        if len(sup) != k or len(set(sup)) != k:
            raise ParameterError(f"support must have exactly {k} distinct elements")
        if any(not 1 <= s <= size for s in sup) or special in sup:
            raise ParameterError("support must avoid the special element and fit the universe")
        if not 0.0 < alpha_star < 1.0:
            raise ParameterError("alpha_star must lie in (0, 1)")
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "special", int(special))
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "alpha_star", float(alpha_star))

    @property
    def universe_size(self):
        return 2 * self.k + 1

    def pmf(self) -> KAryDistribution:
        probs = np.zeros(self.universe_size)
        probs[self.special - 1] = 1.0 - self.alpha_star
        for s in self.support:
            probs[s - 1] = self.alpha_star / self.k
        return KAryDistribution(probs)


def star_to_product(p: StarDistribution) -> ProductBernoulli:
    """The 2k-coordinate product whose biases mirror the non-special
    masses: coordinate j holds mass of element j below the special element
    and of element j+1 at or above it."""
    biases = np.zeros(2 * p.k)
    per = p.alpha_star / p.k
    for s in p.support:
        col = s - 1 if s < p.special else s - 2
        biases[col] = per
    return ProductBernoulli(biases)


def pick_special_element(x: KAryDataset, epsilon: float, rng: RandomStream) -> int:
    """Exponential-mechanism selection over per-element occurrence counts;
    (epsilon, 0)-DP."""
    if x.n < 1:
        raise ParameterError("need at least one record")
    return exponential_select(x.counts(), epsilon, rng) + 1


def dataset_transform(
    x: KAryDataset,
    k: int,
    n: float,
    alpha_star: float,
    s: int,
    rng: RandomStream,
) -> BinaryDataset:
    """Histogram-coupling transform from star-distributed records to rows of
    the corresponding product distribution.

    Consumes only the histogram of x (record order never matters). Each
    element's count is split over floor(n/2) cells of probability 2/n each
    (residual mass on the discard cell when n is odd), thresholded at 1,
    then thinned so a cell is 1 with probability exactly alpha_star/k when
    the input size is Po(n). Column s is omitted.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if x.k != 2 * k + 1:
        raise ParameterError(f"dataset universe must be {2 * k + 1}")
    if n < 2:
        raise ParameterError("n must be at least 2")
    if not 0.0 < alpha_star < 1.0:
        raise ParameterError("alpha_star must lie in (0, 1)")
    if not 1 <= s <= 2 * k + 1:
        raise ParameterError("special element outside the universe")
    p = alpha_star / k
    denom = 1.0 - math.exp(-2.0 * p)
    if 1.0 - p - math.exp(-2.0 * p) < 0.0:
        raise InternalError("thinning probability out of range")
    keep = p / denom
    cells = int(n // 2)
    if cells < 1:
        raise ParameterError("n too small: no output rows")
    cell_probs = np.full(cells, 2.0 / n)
    h = x.counts()
    out = np.zeros((cells, 2 * k), dtype=np.uint8)
    for elem in range(1, 2 * k + 2):
        if elem == s:
            continue
        col = elem - 1 if elem < s else elem - 2
        cnt = int(h[elem - 1])
        if cnt == 0:
            continue
        a = rng.multinomial(cnt, cell_probs)
        bits = (a >= 1).astype(np.uint8)
        set_idx = np.flatnonzero(bits)
        if set_idx.size:
            u = rng.uniforms(set_idx.size)
            bits[set_idx[u >= keep]] = 0
        out[:, col] = bits
    return BinaryDataset(out)


def universe_transform(b, s: int, rng: RandomStream) -> int:
    """Map a 2k-bit vector back to {1..2k+1}: all-zeros yields the special
    element, otherwise a uniform choice among the elements whose
    (special-element-skipping) coordinate is set."""
    bits = np.asarray(b).reshape(-1)
    width = bits.shape[0]
    if width < 1 or width % 2 != 0:
        raise ParameterError("bit vector length must be a positive even number")
    if not 1 <= s <= width + 1:
        raise ParameterError("special element outside the universe")
    set_idx = np.flatnonzero(bits)
    if set_idx.size == 0:
        return s
    candidates = [int(j) + 1 if int(j) + 1 < s else int(j) + 2 for j in set_idx]
    return candidates[rng.randint(len(candidates))]


def reduced_kary_sampler(
    x: KAryDataset,
    epsilon: float,
    delta: float,
    k: int,
    n: float,
    alpha: float,
    inner_product_sampler,
    rng: RandomStream,
    C: float = 10.0,
) -> int:
    """Composite sampler for star distributions over {1..2k+1} built from a
    product-distribution sampler.

    Splits off a Bin(N, 2C log(k)/(alpha eps n)) prefix for special-element
    selection at budget eps/2, transforms the remainder into product rows
    at alpha_star = 60 alpha, samples one bit vector with the inner sampler
    (declared (eps/4, delta/2)-DP and alpha/25-accurate by the caller), and
    maps it back to the universe. (eps, delta)-DP overall.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    if delta < 0:
        raise ParameterError("delta must be nonnegative")
    if not 0.0 < alpha < 1.0 / 60.0:
        raise ParameterError(
            "alpha must lie in (0, 1/60): the transform thins at 60*alpha/k"
        )
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not C > 0:
        raise ParameterError("C must be positive")
    if x.k != 2 * k + 1:
        raise ParameterError(f"dataset universe must be {2 * k + 1}")
    size = x.n
    logk = math.log(k) if k > 1 else 0.0
    split_mean = 2.0 * C * logk / (alpha * epsilon)
    p_split = min(1.0, split_mean / n)
    L = rng.binomial(size, p_split)
    threshold = C * logk / (alpha * epsilon)
    if L < threshold:
        return 2 * k + 1
    xl = KAryDataset(x.records[:L], x.k)
    xr = KAryDataset(x.records[L:], x.k)
    s_hat = pick_special_element(xl, epsilon / 2.0, rng)
    n_eff = n - split_mean
    if n_eff < 2:
        raise ParameterError("n too small relative to the selection split")
    y = dataset_transform(xr, k, n_eff, 60.0 * alpha, s_hat, rng)
    b = inner_product_sampler(y, rng)
    return universe_transform(b, s_hat, rng)


def marginal_parts_needed(alpha: float, beta0: float, gamma0: float) -> int:
    """Independent samples needed to turn an alpha-accurate sampler into a
    (2 alpha, beta0, gamma0) marginal estimator."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha must lie in (0, 1)")
    if not 0.0 < beta0 * gamma0:
        raise ParameterError("beta0 and gamma0 must be positive")
    return math.ceil(math.log(2.0 / (beta0 * gamma0)) / (2.0 * alpha * alpha))


def marginal_estimate_via_sampler(
    x: BinaryDataset, c: int, sampler, rng: RandomStream
) -> np.ndarray:
    """Average of c independent sampler outputs on c equal row parts.

    Privacy is inherited (each record feeds exactly one call)."""
    if c < 1:
        raise ParameterError("c must be >= 1")
    part = x.n // c
    if part < 1:
        raise ParameterError(f"c={c} exceeds the row count {x.n}")
    total = np.zeros(x.d, dtype=np.float64)
    for i in range(c):
        rows = x.rows[i * part : (i + 1) * part]
        total += sampler(BinaryDataset(rows), rng)
    return total / c


def marginal_estimate_general(
    x: BinaryDataset, bounded_estimator, rng: RandomStream
) -> np.ndarray:
    """Marginal estimates for arbitrary biases from an estimator that only
    handles biases in [1/3, 2/3].

    Each bit is flipped independently with probability exactly 1/3, moving
    bias p to p/3 + 1/3; the estimate is mapped back by 3 p* - 1, without
    clipping (callers clip if they need [0, 1])."""
    if x.n and x.d:
        u = rng.uniforms(x.n * x.d).reshape(x.n, x.d)
        flipped = x.rows ^ (u < (1.0 / 3.0)).astype(np.uint8)
        star = BinaryDataset(flipped)
    else:
        star = x
    estimates = np.asarray(bounded_estimator(star, rng), dtype=np.float64)
    return 3.0 * estimates - 1.0
