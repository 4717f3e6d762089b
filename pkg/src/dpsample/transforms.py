"""Sampler-to-sampler wrappers: Poissonization, privacy amplification by
subsampling, and frequency-count symmetrization.

Wrappers accept and produce the same SamplerHandle interface, so they
compose in any order. Declared metadata on a handle is descriptive;
wrappers recompute the derived privacy/accuracy metadata they can."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ApproxDP, KAryDataset, ParameterError, RandomStream

__all__ = [
    "SamplerHandle",
    "ProductSamplerHandle",
    "poissonized",
    "poissonized_slack",
    "subsample_amplified",
    "amplified_epsilon",
    "amplified_delta",
    "permutation_symmetrized",
]


@dataclass(frozen=True)
class SamplerHandle:
    """A k-ary sampler: callable on (dataset, stream), returning an element
    of {1..k}, with declared metadata.

    poisson_input marks samplers whose contract expects dataset sizes
    distributed as Po(expected_size); harnesses draw inputs accordingly.
    """

    fn: Callable[[KAryDataset, RandomStream], int]
    k: int
    expected_size: Optional[float] = None
    budget: Optional[ApproxDP] = None
    alpha: Optional[float] = None
    name: str = "sampler"
    poisson_input: bool = False
    mc_kernel: Optional[object] = None  # fused Monte Carlo shortcut, if any

    def __call__(self, x: KAryDataset, rng: RandomStream) -> int:
        return self.fn(x, rng)


@dataclass(frozen=True)
class ProductSamplerHandle:
    """A product-distribution sampler: callable on (BinaryDataset, stream),
    returning a d-bit vector."""

    fn: Callable
    d: int
    expected_size: Optional[float] = None
    budget: Optional[ApproxDP] = None
    alpha: Optional[float] = None
    name: str = "product-sampler"
    mc_kernel: Optional[object] = None

    def __call__(self, x, rng: RandomStream):
        return self.fn(x, rng)


def poissonized_slack(n: int) -> float:
    """Accuracy slack added by the Poisson wrapper: exp(-n/6)."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    return math.exp(-n / 6.0)


def poissonized(inner: SamplerHandle, n: int, fallback: int) -> SamplerHandle:
    """Wrapper for variable-size datasets: inputs smaller than n yield the
    fixed fallback element, larger ones are delegated.

    Privacy is inherited. On Po(2n)-sized i.i.d. data the wrapped law is
    within alpha + exp(-n/6) of the source when the inner sampler is
    alpha-accurate at every size >= n.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not 1 <= fallback <= inner.k:
        raise ParameterError(f"fallback element must lie in 1..{inner.k}")

    def fn(x: KAryDataset, rng: RandomStream) -> int:
        if x.n < n:
            return fallback
        return inner(x, rng)

    alpha = None if inner.alpha is None else inner.alpha + poissonized_slack(n)
    return SamplerHandle(
        fn=fn,
        k=inner.k,
        expected_size=2.0 * n,
        budget=inner.budget,
        alpha=alpha,
        name=f"poissonized({inner.name}, n={n})",
        poisson_input=True,
    )


def amplified_epsilon(epsilon: float, rate: float) -> float:
    """Privacy parameter after Bernoulli subsampling at the given rate."""
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    if not 0.0 < rate <= 1.0:
        raise ParameterError("rate must lie in (0, 1]")
    return math.log(1.0 + rate * (math.exp(epsilon) - 1.0))


def amplified_delta(delta: float, rate: float) -> float:
    if not 0.0 <= delta < 1.0:
        raise ParameterError("delta must lie in [0, 1)")
    if not 0.0 < rate <= 1.0:
        raise ParameterError("rate must lie in (0, 1]")
    return rate * delta


def subsample_amplified(inner: SamplerHandle, rate: float) -> SamplerHandle:
    """Keeps each record independently with probability rate, then
    delegates. Amplifies (eps, delta)-DP to
    (ln(1 + rate*(e^eps - 1)), rate*delta)-DP; accuracy on Po(n)-sized
    i.i.d. inputs carries over to Po(n/rate)-sized inputs because
    Bernoulli thinning of Poisson i.i.d. data is Poisson i.i.d."""
    if not 0.0 < rate <= 1.0:
        raise ParameterError("rate must lie in (0, 1]")

    def fn(x: KAryDataset, rng: RandomStream) -> int:
        if x.n:
            keep = rng.uniforms(x.n) < rate
            sub = KAryDataset(x.records[keep], x.k)
        else:
            sub = x
        return inner(sub, rng)

    budget = None
    if inner.budget is not None:
        budget = ApproxDP(
            amplified_epsilon(inner.budget.epsilon, rate),
            amplified_delta(inner.budget.delta, rate),
        )
    expected = (
        None if inner.expected_size is None else inner.expected_size / rate
    )
    return SamplerHandle(
        fn=fn,
        k=inner.k,
        expected_size=expected,
        budget=budget,
        alpha=inner.alpha,
        name=f"subsampled({inner.name}, rate={rate})",
        poisson_input=inner.poisson_input,
    )


def permutation_symmetrized(inner: SamplerHandle) -> SamplerHandle:
    """Applies a fresh uniform relabeling of the universe before the inner
    sampler and its inverse after, making the wrapped sampler
    frequency-count-based. Privacy and accuracy on label-invariant classes
    are inherited."""
    k = inner.k
    if k < 1:
        raise ParameterError("universe size must be >= 1")

    def fn(x: KAryDataset, rng: RandomStream) -> int:
        if k == 1:
            return inner(x, rng)
        # pi maps element e to pi[e-1]+1
        pi = rng.permutation(k)
        relabeled = KAryDataset(pi[x.records - 1] + 1, k)
        out = inner(relabeled, rng)
        inverse = np.empty(k, dtype=np.int64)
        inverse[pi] = np.arange(k, dtype=np.int64)
        return int(inverse[out - 1]) + 1

    return SamplerHandle(
        fn=fn,
        k=k,
        expected_size=inner.expected_size,
        budget=inner.budget,
        alpha=inner.alpha,
        name=f"symmetrized({inner.name})",
        poisson_input=inner.poisson_input,
    )
