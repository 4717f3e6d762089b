"""Differentially private single-observation sampling.

Given n i.i.d. records from an unknown distribution in a declared class,
produce one observation whose law is within total-variation distance alpha
of the source, under (eps, delta)-DP or rho-zCDP; plus the wrapper and
reduction machinery around such samplers and a Monte Carlo evaluation
harness that checks the accuracy and privacy contracts at desk scale.
"""

from ._kernels import backend as kernel_backend
from .core import (
    ApproxDP,
    BinaryDataset,
    DimensionError,
    FrequencyCounts,
    KAryDataset,
    KAryDistribution,
    ParameterError,
    ProductBernoulli,
    RandomStream,
    Zcdp,
    draw_binomial,
    draw_kary,
    draw_multinomial,
    draw_poisson,
    draw_product,
    frequency_counts,
    pure_dp_to_zcdp_rho,
    tv_distance,
    tv_product_upper_bound,
    zcdp_to_approx_dp_epsilon,
)
from .mechanisms import (
    TruncationCeiling,
    clip_interval,
    exponential_select,
    gaussian_noise,
    l1_project_simplex,
    laplace_noise,
    truncated_mean,
)
from .samplers import (
    BucketingState,
    ProdSamplerConfig,
    clip_bernoulli_sample,
    clip_bias,
    clip_product_sample,
    kary_sample,
    prod_bucketing_phase,
    prod_sample,
)
from .transforms import (
    ProductSamplerHandle,
    SamplerHandle,
    permutation_symmetrized,
    poissonized,
    subsample_amplified,
)
from .reductions import (
    StarDistribution,
    dataset_transform,
    marginal_estimate_general,
    marginal_estimate_via_sampler,
    pick_special_element,
    reduced_kary_sampler,
    star_to_product,
    universe_transform,
)

__version__ = "0.1.0"
