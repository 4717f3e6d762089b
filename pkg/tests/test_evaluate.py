import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsample import evaluate
from dpsample.core import (
    KAryDataset,
    KAryDistribution,
    ParameterError,
    ProductBernoulli,
    RandomStream,
)
from dpsample.transforms import SamplerHandle


# --- estimate_tv -----------------------------------------------------------


def test_estimate_tv_perfect_sampler_within_slack():
    p = KAryDistribution([0.1, 0.2, 0.3, 0.4])
    handle = evaluate.perfect_kary_handle(p)
    hits = 0
    reps = 20
    for rep in range(reps):
        tv, slack = evaluate.estimate_tv(handle, p, 50, 4000, RandomStream(301, rep))
        hits += tv <= slack
    assert hits >= int(0.95 * reps)


def test_estimate_tv_constant_sampler():
    p = KAryDistribution.uniform(4)
    handle = SamplerHandle(fn=lambda x, rng: 1, k=4, name="constant")
    tv, slack = evaluate.estimate_tv(handle, p, 10, 4000, RandomStream(302, 0))
    assert abs(tv - 0.75) <= slack


def test_estimate_tv_requires_trials():
    p = KAryDistribution.uniform(3)
    handle = evaluate.perfect_kary_handle(p)
    with pytest.raises(ParameterError):
        evaluate.estimate_tv(handle, p, 10, 0, RandomStream(303, 0))


def test_estimate_tv_kary_fast_path_agrees_with_generic():
    p = KAryDistribution([0.15, 0.25, 0.6])
    eps, n, trials = 1.0, 60, 30_000
    fast = evaluate.kary_handle(3, eps)
    slow = SamplerHandle(fn=fast.fn, k=3, name="kary-generic")  # no mc_kernel
    tv_fast, slack = evaluate.estimate_tv(fast, p, n, trials, RandomStream(304, 0))
    tv_slow, _ = evaluate.estimate_tv(slow, p, n, trials, RandomStream(304, 1))
    assert abs(tv_fast - tv_slow) < 2 * slack


def test_estimate_tv_product_perfect_and_fast_path():
    src = ProductBernoulli([0.2, 0.5, 0.7])
    perfect = evaluate.perfect_product_handle(src)
    tv, slack = evaluate.estimate_tv(perfect, src, 5, 20_000, RandomStream(305, 0))
    assert tv <= slack
    fast = evaluate.clip_product_handle(3)
    slow_fn = fast.fn
    from dpsample.transforms import ProductSamplerHandle

    slow = ProductSamplerHandle(fn=slow_fn, d=3, name="clip-generic")
    bounded = ProductBernoulli([0.4, 0.5, 0.6])
    tv_fast, slack2 = evaluate.estimate_tv(
        fast, bounded, 400, 20_000, RandomStream(306, 0)
    )
    tv_slow, _ = evaluate.estimate_tv(slow, bounded, 400, 20_000, RandomStream(306, 1))
    assert abs(tv_fast - tv_slow) < slack2


# --- exact clip oracles ------------------------------------------------------


def test_exact_clip_expectation_examples():
    assert evaluate.exact_clip_expectation(0.5, 4) == pytest.approx(0.5, abs=1e-15)
    assert evaluate.exact_clip_expectation(0.0, 7) == 0.25
    assert evaluate.exact_clip_expectation(1.0, 7) == 0.75
    assert abs(evaluate.exact_clip_expectation(1.0 / 3.0, 345) - 1.0 / 3.0) <= 0.05
    with pytest.raises(ParameterError):
        evaluate.exact_clip_expectation(1.2, 10)
    with pytest.raises(ParameterError):
        evaluate.exact_clip_expectation(0.5, 0)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(min_value=0.0, max_value=1.0),
    st.integers(min_value=1, max_value=400),
)
def test_exact_clip_expectation_complement_symmetry(p, n):
    e1 = evaluate.exact_clip_expectation(p, n)
    e2 = evaluate.exact_clip_expectation(1.0 - p, n)
    assert e1 + e2 == pytest.approx(1.0, abs=1e-9)
    assert 0.25 - 1e-9 <= e1 <= 0.75 + 1e-9


def test_exact_clip_expectation_matches_direct_sum():
    # independent oracle: direct enumeration with exact binomial pmf
    for p, n in [(0.3, 17), (0.52, 40)]:
        direct = sum(
            math.comb(n, t) * p**t * (1 - p) ** (n - t) * min(max(t / n, 0.25), 0.75)
            for t in range(n + 1)
        )
        assert evaluate.exact_clip_expectation(p, n) == pytest.approx(direct, abs=1e-12)


def test_privacy_audit_clip_examples():
    assert evaluate.privacy_audit_clip(4) == pytest.approx(2.0)
    assert evaluate.privacy_audit_clip(1) == pytest.approx(3.0)
    assert evaluate.privacy_audit_clip(10_000) <= 1.0017
    for n in (1, 2, 3, 10, 100):
        assert evaluate.privacy_audit_clip(n) <= math.exp(4.0 / n) + 1e-12


# --- Monte Carlo audit --------------------------------------------------------


def test_audit_mc_rejects_non_neighbors():
    handle = evaluate.kary_handle(2, 1.0)
    rng = RandomStream(310, 0)
    x = KAryDataset([1, 1, 2], 2)
    with pytest.raises(ParameterError):
        evaluate.privacy_audit_mc(handle, x, x, 100, rng, 1.0)
    y = KAryDataset([2, 2, 1], 2)
    with pytest.raises(ParameterError):
        evaluate.privacy_audit_mc(handle, x, y, 100, rng, 1.0)


def test_audit_mc_flags_broken_sampler():
    broken = SamplerHandle(fn=lambda x, rng: int(x.records[0]), k=3, name="leak")
    x = KAryDataset([1, 3, 3, 3], 3)
    y = KAryDataset([2, 3, 3, 3], 3)
    res = evaluate.privacy_audit_mc(broken, x, y, 20_000, RandomStream(311, 0), 1.0)
    assert res.flagged
    assert res.max_adjusted_ratio > math.e


def test_audit_mc_constant_sampler_intervals_cover_ratio_one():
    constant = SamplerHandle(fn=lambda x, rng: 2, k=2, name="constant")
    x = KAryDataset([1, 1, 1, 2], 2)
    y = KAryDataset([1, 1, 2, 2], 2)
    res = evaluate.privacy_audit_mc(constant, x, y, 50_000, RandomStream(312, 0), 0.5)
    assert not res.flagged
    sym2 = res.rows[1]
    assert sym2.lo_first <= 1.0 <= sym2.hi_first + 1e-12
    assert sym2.lo_second <= 1.0 <= sym2.hi_second + 1e-12


def test_audit_mc_kary_sampler_clean_smoke():
    handle = evaluate.kary_handle(2, 1.0)
    base = np.array([1, 1, 1, 1, 1, 2, 2, 2, 2, 2])
    alt = base.copy()
    alt[0] = 2
    res = evaluate.privacy_audit_mc(
        handle,
        KAryDataset(base, 2),
        KAryDataset(alt, 2),
        100_000,
        RandomStream(313, 0),
        1.0,
    )
    assert not res.flagged
    assert res.max_adjusted_ratio <= math.e


# --- sweeps ----------------------------------------------------------------------


def _config(**overrides):
    base = dict(
        class_tag="kary",
        dimensions=[4],
        privacy=[("approx", 1.0)],
        alphas=[0.2],
        n_rule={"explicit": [40]},
        trials=3000,
        seed=5,
    )
    base.update(overrides)
    return evaluate.SweepConfig(**base)


def test_sweep_empty_n_list_gives_empty_report():
    report = evaluate.sweep(_config(n_rule={"explicit": []}))
    assert len(report) == 0


def _strip_timing(rows):
    from dataclasses import replace

    return [replace(r, wall_time_s=0.0) for r in rows]


def test_sweep_single_point_passes_and_is_deterministic():
    cfg = _config()
    r1 = evaluate.sweep(cfg)
    r2 = evaluate.sweep(cfg)
    assert len(r1) == 1
    assert _strip_timing(r1.rows) == _strip_timing(r2.rows)
    row = r1.rows[0]
    assert row.passes()
    assert row.class_tag == "kary" and row.n == 40
    assert row.wall_time_s >= 0.0


def test_sweep_threads_match_serial():
    cfg = _config(dimensions=[3, 4], alphas=[0.2, 0.3], trials=1500)
    serial = evaluate.sweep(cfg, threads=1)
    threaded = evaluate.sweep(cfg, threads=4)
    assert _strip_timing(serial.rows) == _strip_timing(threaded.rows)
    assert len(serial) == 4


def test_sweep_formula_rule_and_audits():
    cfg = _config(
        n_rule={"formula_scale": 1.0},
        alphas=[0.25],
        trials=2000,
        audits=True,
    )
    report = evaluate.sweep(cfg)
    row = report.rows[0]
    assert row.n == math.ceil(2 * 4 / (0.25 * 1.0))
    assert row.audit_max_ratio is not None
    assert row.audit_max_ratio <= math.e


def test_sweep_bounded_product_class():
    cfg = _config(
        class_tag="bounded-product",
        dimensions=[6],
        privacy=[("zcdp", 1.0)],
        alphas=[0.3],
        n_rule={"formula_scale": 1.0},
        trials=4000,
        audits=True,
    )
    report = evaluate.sweep(cfg)
    row = report.rows[0]
    assert row.rho == 1.0 and row.eps is None
    assert row.passes()
    assert row.audit_max_ratio <= math.exp(4.0 / row.n)


def test_sweep_star_class_smoke():
    cfg = _config(
        class_tag="star",
        dimensions=[3],
        privacy=[("approx", 1.0)],
        alphas=[0.01],
        n_rule={"formula_scale": 1.0},
        trials=1500,
    )
    report = evaluate.sweep(cfg)
    row = report.rows[0]
    # bound from the chained analysis, not the headline alpha
    assert row.tv_estimate <= (60 * 0.01) ** 2 + row.tv_slack


def test_sweep_config_validation():
    with pytest.raises(ParameterError):
        _config(class_tag="nope")
    with pytest.raises(ParameterError):
        _config(dimensions=[])
    with pytest.raises(ParameterError):
        _config(n_rule={})
    with pytest.raises(ParameterError):
        _config(n_rule={"explicit": [1], "formula_scale": 2.0})
    with pytest.raises(ParameterError):
        evaluate.sweep(_config(privacy=[("zcdp", 1.0)]))  # kary needs approx


def test_eval_row_invariants():
    with pytest.raises(ParameterError):
        evaluate.EvalRow(
            class_tag="kary",
            dim=2,
            eps=1.0,
            delta=0.0,
            rho=None,
            alpha=0.1,
            n=10,
            trials=10,
            tv_estimate=1.5,
            tv_slack=0.1,
            audit_max_ratio=None,
            seed=0,
            wall_time_s=0.0,
        )


def test_estimate_tv_upward_bias_matches_slack_scale():
    # plug-in bias: a perfect sampler still reports a positive tv of the
    # same scale as the slack formula (and never beyond it)
    p = KAryDistribution.uniform(4)
    handle = evaluate.perfect_kary_handle(p)
    trials = 4000
    tvs = []
    for rep in range(30):
        tv, slack = evaluate.estimate_tv(handle, p, 20, trials, RandomStream(401, rep))
        tvs.append(tv)
        assert tv <= slack
    mean_tv = float(np.mean(tvs))
    slack = math.sqrt(4 / trials)
    assert 0.2 * slack <= mean_tv <= slack
