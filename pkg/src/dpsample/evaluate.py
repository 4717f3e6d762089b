"""Verification harness: exact oracles where closed-form computation
exists, Monte Carlo TV estimation elsewhere, privacy audits, and parameter
sweeps producing EvalReport rows.

Per-trial randomness always comes from substreams indexed by the trial
number, so results are independent of execution order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from . import _kernels as K
from . import reductions, samplers
from .core import (
    ApproxDP,
    BinaryDataset,
    KAryDataset,
    KAryDistribution,
    ParameterError,
    ProductBernoulli,
    RandomStream,
    Zcdp,
    draw_kary,
    draw_product,
    tv_distance,
)
from .transforms import ProductSamplerHandle, SamplerHandle

__all__ = [
    "EvalRow",
    "EvalReport",
    "KaryLaplaceMC",
    "ClipProductMC",
    "kary_handle",
    "perfect_kary_handle",
    "clip_product_handle",
    "perfect_product_handle",
    "star_reduction_handle",
    "estimate_tv",
    "exact_clip_expectation",
    "privacy_audit_clip",
    "privacy_audit_mc",
    "AuditRow",
    "AuditResult",
    "SweepConfig",
    "sweep",
]


# ---------------------------------------------------------------------------
# handles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KaryLaplaceMC:
    """Marker: the handle is the k-ary Laplace sampler, eligible for the
    fused Monte Carlo kernels."""

    epsilon: float


@dataclass(frozen=True)
class ClipProductMC:
    """Marker: the handle is the clipped product sampler, eligible for the
    fused column-sum Monte Carlo kernel."""


def kary_handle(k: int, epsilon: float) -> SamplerHandle:
    return SamplerHandle(
        fn=lambda x, rng: samplers.kary_sample(x, epsilon, rng),
        k=k,
        budget=ApproxDP(epsilon, 0.0),
        name=f"kary-laplace(eps={epsilon:g})",
        mc_kernel=KaryLaplaceMC(epsilon),
    )


def perfect_kary_handle(p: KAryDistribution) -> SamplerHandle:
    """Oracle sampler: ignores the dataset and draws fresh from p."""
    return SamplerHandle(
        fn=lambda x, rng: draw_kary(p, rng),
        k=p.k,
        alpha=0.0,
        name="perfect-kary",
    )


def clip_product_handle(d: int) -> ProductSamplerHandle:
    return ProductSamplerHandle(
        fn=lambda x, rng: samplers.clip_product_sample(x, rng),
        d=d,
        name="clip-product",
        mc_kernel=ClipProductMC(),
    )


def perfect_product_handle(p: ProductBernoulli) -> ProductSamplerHandle:
    return ProductSamplerHandle(
        fn=lambda x, rng: draw_product(p, rng),
        d=p.d,
        alpha=0.0,
        name="perfect-product",
    )


def star_reduction_handle(
    star: reductions.StarDistribution,
    epsilon: float,
    delta: float,
    alpha: float,
    n: float,
    inner,
    C: float = 10.0,
) -> SamplerHandle:
    """The composite reduced sampler as a handle expecting Po(n)-sized
    inputs. inner is the product-distribution sampler it delegates to."""

    def fn(x, rng):
        return reductions.reduced_kary_sampler(
            x, epsilon, delta, star.k, n, alpha, inner, rng, C=C
        )

    return SamplerHandle(
        fn=fn,
        k=star.universe_size,
        expected_size=n,
        budget=ApproxDP(epsilon, delta) if delta >= 0 else None,
        name=f"reduced-star(k={star.k})",
        poisson_input=True,
    )


# ---------------------------------------------------------------------------
# TV estimation
# ---------------------------------------------------------------------------


def _estimate_tv_kary(handle, source: KAryDistribution, n, trials, rng):
    k = source.k
    fast = getattr(handle, "mc_kernel", None)
    poisson_input = getattr(handle, "poisson_input", False)
    if isinstance(fast, KaryLaplaceMC) and not poisson_input:
        counts = K.kary_mc_fresh(
            rng.seed, rng.stream, source.probs, n, fast.epsilon, trials
        )
    else:
        counts = np.zeros(k, dtype=np.int64)
        for t in range(trials):
            st = rng.substream(t)
            size = st.poisson(n) if poisson_input else n
            x = KAryDataset(st.categoricals(source.probs, size) + 1, k)
            counts[handle(x, st) - 1] += 1
    tv = tv_distance(KAryDistribution(counts / trials), source)
    slack = math.sqrt(k / trials)
    return tv, slack


def _estimate_tv_product(handle, source: ProductBernoulli, n, trials, rng):
    d = source.d
    fast = getattr(handle, "mc_kernel", None)
    if isinstance(fast, ClipProductMC):
        ones = K.clip_product_mc(rng.seed, rng.stream, source.biases, n, trials)
    else:
        ones = np.zeros(d, dtype=np.int64)
        for t in range(trials):
            st = rng.substream(t)
            u = st.uniforms(n * d).reshape(n, d)
            x = BinaryDataset((u < source.biases).astype(np.uint8))
            ones += handle(x, st)
    emp = ones / trials
    tv = float(np.abs(emp - source.biases).sum())
    slack = 3.0 * d * math.sqrt(1.0 / (4.0 * trials))
    return tv, slack


def estimate_tv(handle, source, n: int, trials: int, rng: RandomStream):
    """Plug-in TV estimate between the sampler's output law and the source.

    k-ary sources: draws `trials` fresh size-n i.i.d. datasets (size Po(n)
    for handles that declare poisson_input), collects one output each, and
    returns (tv_distance(empirical pmf, source), sqrt(k/trials)).

    Product sources: per-coordinate marginal route; returns
    (sum_j |empirical bias_j - p_j|, 3*d*sqrt(1/(4*trials))).
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if n < 1:
        raise ParameterError("n must be >= 1")
    if isinstance(source, KAryDistribution):
        return _estimate_tv_kary(handle, source, n, trials, rng)
    if isinstance(source, ProductBernoulli):
        return _estimate_tv_product(handle, source, n, trials, rng)
    raise ParameterError(f"unsupported source type {type(source).__name__}")


# ---------------------------------------------------------------------------
# exact clipped-Bernoulli oracles
# ---------------------------------------------------------------------------


def _clip_quarters(v):
    return np.clip(v, 0.25, 0.75)


def exact_clip_expectation(p: float, n: int) -> float:
    """Exact output bias of the clipped sampler on Bin(n, p) data:
    sum_t C(n,t) p^t (1-p)^(n-t) clip(t/n), via log-domain binomial terms."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    if n < 1:
        raise ParameterError("n must be >= 1")
    t = np.arange(n + 1, dtype=np.float64)
    clipped = _clip_quarters(t / n)
    if p == 0.0:
        return float(clipped[0])
    if p == 1.0:
        return float(clipped[-1])
    logpmf = (
        gammaln(n + 1.0)
        - gammaln(t + 1.0)
        - gammaln(n - t + 1.0)
        + t * math.log(p)
        + (n - t) * math.log1p(-p)
    )
    return float(np.exp(logpmf) @ clipped)


def privacy_audit_clip(n: int) -> float:
    """Exact worst output-probability ratio of the clipped sampler over all
    adjacent count pairs and both output symbols; always <= exp(4/n)."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    t = np.arange(n + 1, dtype=np.float64)
    c = _clip_quarters(t / n)
    ratio_one = c[1:] / c[:-1]
    ratio_zero = (1.0 - c[:-1]) / (1.0 - c[1:])
    return float(max(ratio_one.max(), ratio_zero.max()))


# ---------------------------------------------------------------------------
# Monte Carlo privacy audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditRow:
    symbol: int
    p_first: float
    p_second: float
    lo_first: float
    hi_first: float
    lo_second: float
    hi_second: float
    adjusted_ratio: float
    flagged: bool


@dataclass(frozen=True)
class AuditResult:
    rows: List[AuditRow]
    bound: float
    trials: int

    @property
    def max_adjusted_ratio(self):
        return max((r.adjusted_ratio for r in self.rows), default=0.0)

    @property
    def flagged(self):
        return any(r.flagged for r in self.rows)


def _wilson(successes, trials, z):
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _audit_tallies(handle, x, trials, rng):
    fast = getattr(handle, "mc_kernel", None)
    if isinstance(fast, KaryLaplaceMC):
        return K.kary_mc_fixed(
            rng.seed, rng.stream, x.empirical_pmf(), x.n, fast.epsilon, trials
        )
    counts = np.zeros(x.k, dtype=np.int64)
    for t in range(trials):
        st = rng.substream(t)
        counts[handle(x, st) - 1] += 1
    return counts


def privacy_audit_mc(
    handle,
    x: KAryDataset,
    x_prime: KAryDataset,
    trials: int,
    rng: RandomStream,
    epsilon: float,
    delta: float = 0.0,
    z: float = 4.0,
) -> AuditResult:
    """Falsification harness for (epsilon, delta)-indistinguishability on
    one neighboring pair: per output symbol, empirical probabilities under
    both inputs with Wilson(z) intervals; a symbol is flagged when its
    interval-adjusted ratio (lower bound of one side over upper bound plus
    delta of the other) exceeds exp(epsilon)."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if x.k != x_prime.k or x.n != x_prime.n:
        raise ParameterError("inputs must share universe and size")
    if int(np.sum(x.records != x_prime.records)) != 1:
        raise ParameterError("inputs must differ in exactly one record")
    bound = math.exp(epsilon)
    c1 = _audit_tallies(handle, x, trials, rng.substream(0))
    c2 = _audit_tallies(handle, x_prime, trials, rng.substream(1))
    rows = []
    for sym in range(x.k):
        lo1, hi1 = _wilson(int(c1[sym]), trials, z)
        lo2, hi2 = _wilson(int(c2[sym]), trials, z)
        r12 = lo1 / (hi2 + delta) if lo1 > 0 else 0.0
        r21 = lo2 / (hi1 + delta) if lo2 > 0 else 0.0
        adjusted = max(r12, r21)
        rows.append(
            AuditRow(
                symbol=sym + 1,
                p_first=float(c1[sym]) / trials,
                p_second=float(c2[sym]) / trials,
                lo_first=lo1,
                hi_first=hi1,
                lo_second=lo2,
                hi_second=hi2,
                adjusted_ratio=adjusted,
                flagged=adjusted > bound,
            )
        )
    return AuditResult(rows=rows, bound=bound, trials=trials)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalRow:
    class_tag: str
    dim: int
    eps: Optional[float]
    delta: Optional[float]
    rho: Optional[float]
    alpha: float
    n: int
    trials: int
    tv_estimate: float
    tv_slack: float
    audit_max_ratio: Optional[float]
    seed: int
    wall_time_s: float

    def __post_init__(self):
        if not 0.0 <= self.tv_estimate <= 1.0:
            raise ParameterError("tv_estimate must lie in [0, 1]")
        if self.tv_slack < 0.0:
            raise ParameterError("tv_slack must be nonnegative")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if not math.isfinite(self.tv_estimate) or not math.isfinite(self.tv_slack):
            raise ParameterError("report values must be finite")

    def passes(self) -> bool:
        """Row-level acceptance threshold.

        For the star reduction the attainable end-to-end bound is the
        chained (60*alpha)^2, not alpha itself (the headline Theta(alpha)
        guarantee needs asymptotically small alpha); other classes gate
        at their alpha target."""
        target = (60.0 * self.alpha) ** 2 if self.class_tag == "star" else self.alpha
        return self.tv_estimate <= target + self.tv_slack


@dataclass
class EvalReport:
    rows: List[EvalRow] = field(default_factory=list)

    def append(self, row: EvalRow):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def violations(self) -> List[EvalRow]:
        return [r for r in self.rows if not r.passes()]


_CLASSES = ("kary", "product", "bounded-product", "star")


@dataclass(frozen=True)
class SweepConfig:
    """Grid definition for sweep(); see the CLI JSON schema."""

    class_tag: str
    dimensions: Sequence[int]
    privacy: Sequence[tuple]  # ("approx", eps[, delta]) or ("zcdp", rho)
    alphas: Sequence[float]
    n_rule: dict  # {"explicit": [...]} or {"formula_scale": s}
    trials: int
    seed: int
    constant_scale: float = 1.0
    audits: bool = False
    reduction_constant: float = 10.0

    def __post_init__(self):
        if self.class_tag not in _CLASSES:
            raise ParameterError(f"class must be one of {_CLASSES}")
        if not self.dimensions or not self.privacy or not self.alphas:
            raise ParameterError("all grids must be nonempty")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if ("explicit" in self.n_rule) == ("formula_scale" in self.n_rule):
            raise ParameterError(
                "n_rule needs exactly one of 'explicit' or 'formula_scale'"
            )


def _parse_privacy(entry):
    kind = entry[0]
    if kind == "approx":
        eps = float(entry[1])
        delta = float(entry[2]) if len(entry) > 2 else 0.0
        return ApproxDP(eps, delta)
    if kind == "zcdp":
        return Zcdp(float(entry[1]))
    raise ParameterError(f"unknown privacy kind {kind!r}")


def _formula_n(class_tag, dim, budget, alpha, scale, constant_scale, red_c):
    if class_tag == "kary":
        base = samplers.kary_required_n(dim, alpha, budget.epsilon)
    elif class_tag == "bounded-product":
        base = samplers.clip_product_required_n(dim, alpha, budget.rho)
    elif class_tag == "product":
        cfg = samplers.ProdSamplerConfig(
            rho=budget.rho,
            beta=alpha / (12.0 * dim),
            constant_scale=constant_scale,
        )
        base = samplers.records_needed(dim, cfg)
    else:  # star
        logk = math.log(max(dim, 2))
        base = math.ceil(4.0 * red_c * logk / (alpha * budget.epsilon))
    return max(1, math.ceil(scale * base))


def _star_target(dim, alpha):
    if not alpha < 1.0 / 60.0:
        raise ParameterError("star sweeps need alpha < 1/60 (alpha_star = 60*alpha)")
    support = tuple(range(1, dim + 1))
    return reductions.StarDistribution(
        k=dim, special=2 * dim + 1, support=support, alpha_star=60.0 * alpha
    )


def _grid_point(config: SweepConfig, index, dim, budget, alpha, n):
    """One sweep cell; pure function of its arguments (thread-safe)."""
    rng = RandomStream(config.seed, index)
    started = time.perf_counter()
    audit_ratio = None
    if config.class_tag == "kary":
        if not isinstance(budget, ApproxDP):
            raise ParameterError("kary sweeps need an approx-DP budget")
        source = KAryDistribution.uniform(dim)
        handle = kary_handle(dim, budget.epsilon)
        tv, slack = estimate_tv(handle, source, n, config.trials, rng)
        if config.audits:
            base = np.ones(n, dtype=np.int64)
            base[: n // 2] = 2
            x = KAryDataset(base, dim)
            flipped = base.copy()
            flipped[0] = 2 if base[0] == 1 else 1
            res = privacy_audit_mc(
                handle,
                x,
                KAryDataset(flipped, dim),
                min(config.trials, 200_000),
                rng.substream(1 << 20),
                budget.epsilon,
                budget.delta,
            )
            audit_ratio = res.max_adjusted_ratio
    elif config.class_tag == "bounded-product":
        if not isinstance(budget, Zcdp):
            raise ParameterError("bounded-product sweeps need a zCDP budget")
        bias_rng = RandomStream(config.seed, K.substream_id(index, 1))
        biases = 1.0 / 3.0 + bias_rng.uniforms(dim) / 3.0
        source = ProductBernoulli(biases)
        handle = clip_product_handle(dim)
        tv, slack = estimate_tv(handle, source, n, config.trials, rng)
        if config.audits:
            audit_ratio = privacy_audit_clip(n)
    elif config.class_tag == "product":
        if not isinstance(budget, Zcdp):
            raise ParameterError("product sweeps need a zCDP budget")
        bias_rng = RandomStream(config.seed, K.substream_id(index, 1))
        source = ProductBernoulli(bias_rng.uniforms(dim))
        cfg = samplers.ProdSamplerConfig(
            rho=budget.rho,
            beta=alpha / (12.0 * dim),
            constant_scale=config.constant_scale,
        )
        handle = ProductSamplerHandle(
            fn=lambda x, r: samplers.prod_sample(x, cfg, r),
            d=dim,
            name="prod-recursive",
        )
        tv, slack = estimate_tv(handle, source, n, config.trials, rng)
    else:  # star
        if not isinstance(budget, ApproxDP):
            raise ParameterError("star sweeps need an approx-DP budget")
        star = _star_target(dim, alpha)
        inner = perfect_product_handle(reductions.star_to_product(star))
        handle = star_reduction_handle(
            star,
            budget.epsilon,
            budget.delta,
            alpha,
            n,
            inner,
            C=config.reduction_constant,
        )
        tv, slack = estimate_tv(handle, star.pmf(), n, config.trials, rng)
    elapsed = time.perf_counter() - started
    eps = budget.epsilon if isinstance(budget, ApproxDP) else None
    delta = budget.delta if isinstance(budget, ApproxDP) else None
    rho = budget.rho if isinstance(budget, Zcdp) else None
    return EvalRow(
        class_tag=config.class_tag,
        dim=dim,
        eps=eps,
        delta=delta,
        rho=rho,
        alpha=alpha,
        n=n,
        trials=config.trials,
        tv_estimate=min(tv, 1.0),
        tv_slack=slack,
        audit_max_ratio=audit_ratio,
        seed=config.seed,
        wall_time_s=elapsed,
    )


def sweep(config: SweepConfig, threads: int = 1) -> EvalReport:
    """Run estimate_tv (and optional audits) over the config grid.

    Deterministic given the seed: cell i uses RandomStream(seed, i), and
    rows are assembled in grid order regardless of execution order."""
    points = []
    index = 0
    for dim in config.dimensions:
        for entry in config.privacy:
            budget = _parse_privacy(entry)
            for alpha in config.alphas:
                if "explicit" in config.n_rule:
                    ns = [int(v) for v in config.n_rule["explicit"]]
                else:
                    scale = float(config.n_rule["formula_scale"])
                    ns = [
                        _formula_n(
                            config.class_tag,
                            dim,
                            budget,
                            alpha,
                            scale,
                            config.constant_scale,
                            config.reduction_constant,
                        )
                    ]
                for n in ns:
                    points.append((index, dim, budget, alpha, n))
                    index += 1
    report = EvalReport()
    if threads > 1 and len(points) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(
                pool.map(lambda args: _grid_point(config, *args), points)
            )
    else:
        rows = [_grid_point(config, *args) for args in points]
    for row in rows:
        report.append(row)
    return report
