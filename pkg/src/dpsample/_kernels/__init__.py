"""Kernel lane selection.

The compiled lane (`_ext`, Cython) is used when importable; the pure-Python
twin (`_py`) otherwise. Set DPSAMPLE_PURE=1 to force the pure lane. Both
lanes implement identical algorithms and produce bit-identical streams, so
the selection never changes results, only speed.
"""

import os

_FORCE_PURE = os.environ.get("DPSAMPLE_PURE", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

if _FORCE_PURE:
    from . import _py as impl

    BACKEND = "pure"
else:
    try:
        from . import _ext as impl  # type: ignore[attr-defined]

        BACKEND = "ext"
    except ImportError:
        from . import _py as impl

        BACKEND = "pure"


def backend():
    """Name of the active kernel lane: 'ext' or 'pure'."""
    return BACKEND


def lanes():
    """All importable lanes, keyed by name (for tests and benchmarks)."""
    from . import _py

    out = {"pure": _py}
    try:
        from . import _ext  # type: ignore[attr-defined]

        out["ext"] = _ext
    except ImportError:
        pass
    return out


substream_id = impl.substream_id
make_state = impl.make_state
copy_state = impl.copy_state
state_words = impl.state_words
next_u64 = impl.next_u64
uniform = impl.uniform
uniforms = impl.uniforms
gaussian = impl.gaussian
gaussians = impl.gaussians
exponential = impl.exponential
laplace = impl.laplace
laplaces = impl.laplaces
gumbel = impl.gumbel
log_factorial = impl.log_factorial
poisson = impl.poisson
binomial = impl.binomial
bernoulli = impl.bernoulli
bernoulli_vec = impl.bernoulli_vec
categorical = impl.categorical
categoricals = impl.categoricals
multinomial = impl.multinomial
randint = impl.randint
permutation = impl.permutation
project_simplex = impl.project_simplex
kary_mc_fixed = impl.kary_mc_fixed
kary_mc_fresh = impl.kary_mc_fresh
clip_product_mc = impl.clip_product_mc
universe_mc = impl.universe_mc
expselect_mc = impl.expselect_mc
