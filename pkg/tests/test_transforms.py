import math

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from dpsample.core import (
    KAryDataset,
    KAryDistribution,
    ParameterError,
    RandomStream,
    draw_kary,
)
from dpsample.samplers import clip_bernoulli_sample
from dpsample.transforms import (
    SamplerHandle,
    amplified_delta,
    amplified_epsilon,
    permutation_symmetrized,
    poissonized,
    poissonized_slack,
    subsample_amplified,
)


def _perfect(p):
    return SamplerHandle(
        fn=lambda x, rng: draw_kary(p, rng), k=p.k, alpha=0.0, name="perfect"
    )


# --- poissonized ------------------------------------------------------------


def test_poissonized_small_inputs_hit_fallback():
    inner = _perfect(KAryDistribution([0.5, 0.5]))
    wrapped = poissonized(inner, n=5, fallback=2)
    rng = RandomStream(60, 0)
    empty = KAryDataset([], 2)
    assert all(wrapped(empty, rng) == 2 for _ in range(20))
    small = KAryDataset([1, 1, 1], 2)
    assert all(wrapped(small, rng) == 2 for _ in range(20))


def test_poissonized_never_calls_inner_below_n():
    seen = []

    def spy(x, rng):
        seen.append(x.n)
        return 1

    inner = SamplerHandle(fn=spy, k=3, name="spy")
    wrapped = poissonized(inner, n=7, fallback=3)
    rng = RandomStream(61, 0)
    p = KAryDistribution.uniform(3)
    for t in range(300):
        st = rng.substream(t)
        size = st.poisson(14.0)
        x = KAryDataset(st.categoricals(p.probs, size) + 1, 3)
        wrapped(x, st)
    assert seen and min(seen) >= 7


def test_poissonized_slack_value():
    assert poissonized_slack(60) == pytest.approx(math.exp(-10.0))
    with pytest.raises(ParameterError):
        poissonized_slack(0)


def test_poissonized_metadata():
    inner = _perfect(KAryDistribution([0.25, 0.75]))
    wrapped = poissonized(inner, n=60, fallback=1)
    assert wrapped.expected_size == 120.0
    assert wrapped.poisson_input
    assert wrapped.alpha == pytest.approx(math.exp(-10.0))
    with pytest.raises(ParameterError):
        poissonized(inner, n=60, fallback=3)


def test_poissonized_perfect_inner_stays_accurate():
    p = KAryDistribution([0.2, 0.5, 0.3])
    wrapped = poissonized(_perfect(p), n=60, fallback=1)
    trials = 30_000
    rng = RandomStream(62, 0)
    tallies = np.zeros(3)
    for t in range(trials):
        st = rng.substream(t)
        size = st.poisson(120.0)
        x = KAryDataset(st.categoricals(p.probs, size) + 1, 3)
        tallies[wrapped(x, st) - 1] += 1
    tv = 0.5 * np.abs(tallies / trials - p.probs).sum()
    assert tv <= math.exp(-10.0) + math.sqrt(3.0 / trials)


# --- subsampling amplification -------------------------------------------------


def test_amplification_formulas():
    assert amplified_epsilon(1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert amplified_epsilon(1.0, 0.5) == pytest.approx(
        math.log(1.0 + 0.5 * (math.e - 1.0)), abs=1e-12
    )
    assert amplified_delta(0.1, 0.25) == pytest.approx(0.025)
    with pytest.raises(ParameterError):
        amplified_epsilon(1.0, 0.0)
    with pytest.raises(ParameterError):
        amplified_epsilon(1.0, 1.5)


def test_subsample_metadata_and_budget():
    from dpsample.core import ApproxDP

    inner = SamplerHandle(
        fn=lambda x, rng: 1,
        k=2,
        expected_size=100.0,
        budget=ApproxDP(1.0, 0.01),
        alpha=0.1,
    )
    wrapped = subsample_amplified(inner, 0.5)
    assert wrapped.budget.epsilon == pytest.approx(amplified_epsilon(1.0, 0.5))
    assert wrapped.budget.delta == pytest.approx(0.005)
    assert wrapped.expected_size == pytest.approx(200.0)
    assert wrapped.alpha == 0.1


def test_subsample_preserves_iidness():
    # two-sample test: subsampled-then-collected records vs fresh draws
    p = KAryDistribution([0.2, 0.3, 0.5])
    rng = RandomStream(63, 0)
    collected = []

    def collector(x, rng_):
        collected.extend(x.records.tolist())
        return 1

    wrapped = subsample_amplified(SamplerHandle(fn=collector, k=3), 0.4)
    for t in range(400):
        st = rng.substream(t)
        x = KAryDataset(st.categoricals(p.probs, 100) + 1, 3)
        wrapped(x, st)
    fresh = RandomStream(64, 0).categoricals(p.probs, len(collected)) + 1
    table = np.vstack(
        [
            np.bincount(np.array(collected), minlength=4)[1:],
            np.bincount(np.asarray(fresh), minlength=4)[1:],
        ]
    )
    _, pvalue, _, _ = chi2_contingency(table)
    assert pvalue > 1e-4
    # ~40% of records survive
    assert abs(len(collected) / (400 * 100) - 0.4) < 0.02


def test_subsample_end_to_end_clip_accuracy():
    # clip sampler at n = 345 behind rate-0.5 subsampling and a Poisson
    # wrapper, fed Po(2 * 345 / 0.5) data at p = 0.5 (element 2 = bit 1)
    def clip_fn(x, rng):
        return 2 if clip_bernoulli_sample((x.records == 2).astype(np.uint8), rng) else 1

    inner = SamplerHandle(fn=clip_fn, k=2, alpha=0.05, name="clip")
    wrapped = subsample_amplified(poissonized(inner, n=345, fallback=1), 0.5)
    trials = 20_000
    rng = RandomStream(65, 0)
    ones = 0
    lam = 2.0 * 345 / 0.5
    half = KAryDistribution([0.5, 0.5])
    for t in range(trials):
        st = rng.substream(t)
        size = st.poisson(lam)
        x = KAryDataset(st.categoricals(half.probs, size) + 1, 2)
        ones += wrapped(x, st) == 2
    sigma = math.sqrt(0.25 / trials)
    assert abs(ones / trials - 0.5) <= 0.05 + 3 * sigma


# --- permutation symmetrizer ----------------------------------------------------


def test_symmetrizer_conjugation_identity():
    inner = SamplerHandle(fn=lambda x, rng: int(x.records[0]), k=4, name="first")
    wrapped = permutation_symmetrized(inner)
    rng = RandomStream(66, 0)
    x = KAryDataset([3, 1, 4, 2], 4)
    assert all(wrapped(x, rng) == 3 for _ in range(50))


def test_symmetrizer_singleton_universe_identity():
    inner = SamplerHandle(fn=lambda x, rng: 1, k=1)
    wrapped = permutation_symmetrized(inner)
    assert wrapped(KAryDataset([1, 1], 1), RandomStream(67, 0)) == 1


def _biased_inner():
    # label-asymmetric: mostly element 3, otherwise the first record
    def fn(x, rng):
        if rng.uniform() < 0.7:
            return 3
        return int(x.records[0])

    return SamplerHandle(fn=fn, k=3, name="biased")


def test_symmetrizer_relabel_equivariance_smoke():
    wrapped = permutation_symmetrized(_biased_inner())
    x = np.array([1, 1, 2])
    trials = 100_000

    def dist(records, seed):
        tallies = np.zeros(3)
        rng = RandomStream(seed, 0)
        ds = KAryDataset(records, 3)
        for t in range(trials):
            tallies[wrapped(ds, rng.substream(t)) - 1] += 1
        return tallies / trials

    base = dist(x, 68)
    for pid, perm in enumerate([(2, 3, 1), (3, 2, 1)]):
        mapping = np.array(perm)
        relabeled = mapping[x - 1]
        moved = dist(relabeled, 100 + pid)
        for i in range(3):
            a = base[i]
            b = moved[mapping[i] - 1]
            sigma = math.sqrt(
                a * (1 - a) / trials + b * (1 - b) / trials
            )
            assert abs(a - b) <= 4 * sigma + 1e-9
