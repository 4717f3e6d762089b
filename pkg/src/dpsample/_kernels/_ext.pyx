# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel lane.

Mirror of the pure-Python lane (same base generator, same variate
algorithms, same floating-point operation order) so that both lanes
produce bit-identical streams on one platform.
"""

from libc.math cimport INFINITY, exp, fabs, floor, log, log1p, sqrt
from libc.stdint cimport int64_t, uint64_t

import numpy as np

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV53 = 1.0 / 9007199254740992.0
cdef double HALF_LOG_2PI = 0.9189385332046727
cdef double POISSON_PIVOT = 30.0
cdef double BINOMIAL_PIVOT = 30.0


cdef struct Rng:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _substream(uint64_t stream, uint64_t index) nogil:
    return _mix64(stream + GOLDEN * (index + 1ULL))


cdef inline void _seed(Rng* r, uint64_t seed_val, uint64_t stream) nogil:
    cdef uint64_t z = seed_val ^ _mix64(stream ^ GOLDEN)
    z = z + GOLDEN
    r.s0 = _mix64(z)
    z = z + GOLDEN
    r.s1 = _mix64(z)
    z = z + GOLDEN
    r.s2 = _mix64(z)
    z = z + GOLDEN
    r.s3 = _mix64(z)
    if r.s0 == 0 and r.s1 == 0 and r.s2 == 0 and r.s3 == 0:
        r.s0 = GOLDEN


cdef inline uint64_t _next(Rng* r) nogil:
    cdef uint64_t s0 = r.s0
    cdef uint64_t s1 = r.s1
    cdef uint64_t s2 = r.s2
    cdef uint64_t s3 = r.s3
    cdef uint64_t result = _rotl(s0 + s3, 23) + s0
    cdef uint64_t t = s1 << 17
    s2 = s2 ^ s0
    s3 = s3 ^ s1
    s1 = s1 ^ s2
    s0 = s0 ^ s3
    s2 = s2 ^ t
    s3 = _rotl(s3, 45)
    r.s0 = s0
    r.s1 = s1
    r.s2 = s2
    r.s3 = s3
    return result


cdef inline double _uniform(Rng* r) nogil:
    return (_next(r) >> 11) * INV53


cdef inline double _gaussian(Rng* r) nogil:
    cdef double u, v, w
    while True:
        u = 2.0 * _uniform(r) - 1.0
        v = 2.0 * _uniform(r) - 1.0
        w = u * u + v * v
        if 0.0 < w < 1.0:
            return u * sqrt(-2.0 * log(w) / w)


cdef inline double _exponential(Rng* r) nogil:
    return -log1p(-_uniform(r))


cdef inline double _laplace(Rng* r, double scale) nogil:
    cdef double e1 = _exponential(r)
    cdef double e2 = _exponential(r)
    return scale * (e1 - e2)


cdef inline double _gumbel(Rng* r) nogil:
    cdef double e
    while True:
        e = _exponential(r)
        if e > 0.0:
            return -log(e)


cdef double _LOGFACT[1024]


cdef void _build_logfact() nogil:
    cdef int i
    cdef double acc = 0.0
    _LOGFACT[0] = 0.0
    for i in range(1, 1024):
        acc += log(<double> i)
        _LOGFACT[i] = acc


_build_logfact()


cdef inline double _logfact(int64_t n) nogil:
    cdef double x
    if n < 1024:
        return _LOGFACT[n]
    x = n + 1.0
    return (x - 0.5) * log(x) - x + HALF_LOG_2PI + 1.0 / (12.0 * x) \
        - 1.0 / (360.0 * x * x * x)


cdef int64_t _poisson_inversion(Rng* r, double lam) nogil:
    cdef double enlam = exp(-lam)
    cdef int64_t x = 0
    cdef double prod = 1.0
    while True:
        prod *= _uniform(r)
        if prod > enlam:
            x += 1
        else:
            return x


cdef int64_t _poisson_ptrs(Rng* r, double lam) nogil:
    cdef double slam = sqrt(lam)
    cdef double loglam = log(lam)
    cdef double b = 0.931 + 2.53 * slam
    cdef double a = -0.059 + 0.02483 * b
    cdef double invalpha = 1.1239 + 1.1328 / (b - 3.4)
    cdef double vr = 0.9277 - 3.6224 / (b - 2.0)
    cdef double u, v, us, kf, lhs
    cdef int64_t k
    while True:
        u = _uniform(r) - 0.5
        v = _uniform(r)
        us = 0.5 - fabs(u)
        kf = floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return <int64_t> kf
        if kf < 0.0 or (us < 0.013 and v > us):
            continue
        k = <int64_t> kf
        lhs = log(v) + log(invalpha) - log(a / (us * us) + b)
        if lhs <= kf * loglam - lam - _logfact(k):
            return k


cdef inline int64_t _poisson(Rng* r, double lam) nogil:
    if lam <= 0.0:
        return 0
    if lam < POISSON_PIVOT:
        return _poisson_inversion(r, lam)
    return _poisson_ptrs(r, lam)


cdef int64_t _binomial_inversion(Rng* r, int64_t n, double q) nogil:
    cdef double qn = exp(n * log1p(-q))
    cdef double npq = n * q
    cdef int64_t bound = <int64_t> (npq + 10.0 * sqrt(npq * (1.0 - q) + 1.0))
    if bound > n:
        bound = n
    cdef int64_t x
    cdef double px, u
    cdef bint restart
    while True:
        x = 0
        px = qn
        u = _uniform(r)
        restart = False
        while u > px:
            x += 1
            if x > bound:
                restart = True
                break
            u -= px
            px = ((n - x + 1) * q * px) / (x * (1.0 - q))
        if not restart:
            return x


cdef int64_t _binomial_btrs(Rng* r, int64_t n, double q) nogil:
    cdef double spq = sqrt(n * q * (1.0 - q))
    cdef double b = 1.15 + 2.53 * spq
    cdef double a = -0.0873 + 0.0248 * b + 0.01 * q
    cdef double c = n * q + 0.5
    cdef double vr = 0.92 - 4.2 / b
    cdef double alpha = (2.83 + 5.1 / b) * spq
    cdef double lpq = log(q / (1.0 - q))
    cdef int64_t m = <int64_t> floor((n + 1) * q)
    cdef double h = _logfact(m) + _logfact(n - m)
    cdef double u, v, us, kf, lhs
    cdef int64_t k
    while True:
        u = _uniform(r) - 0.5
        v = _uniform(r)
        us = 0.5 - fabs(u)
        kf = floor((2.0 * a / us + b) * u + c)
        if kf < 0.0 or kf > n:
            continue
        k = <int64_t> kf
        if us >= 0.07 and v <= vr:
            return k
        lhs = log(v * alpha / (a / (us * us) + b))
        if lhs <= h - _logfact(k) - _logfact(n - k) + (k - m) * lpq:
            return k


cdef inline int64_t _binomial(Rng* r, int64_t n, double p) nogil:
    cdef double q
    cdef bint flipped
    cdef int64_t res
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    if p <= 0.5:
        q = p
        flipped = False
    else:
        q = 1.0 - p
        flipped = True
    if n * q <= BINOMIAL_PIVOT:
        res = _binomial_inversion(r, n, q)
    else:
        res = _binomial_btrs(r, n, q)
    if flipped:
        return n - res
    return res


cdef inline int64_t _categorical(Rng* r, const double* pmf, int64_t k) nogil:
    cdef double u = _uniform(r)
    cdef double cum = 0.0
    cdef int64_t j
    for j in range(k - 1):
        cum += pmf[j]
        if u < cum:
            return j
    return k - 1


cdef void _multinomial(Rng* r, int64_t trials, const double* probs, int64_t ncell,
                       int64_t* counts) nogil:
    cdef int64_t remaining = trials
    cdef double mass = 1.0
    cdef double pi, pcond
    cdef int64_t i, c
    for i in range(ncell):
        counts[i] = 0
    for i in range(ncell):
        if remaining <= 0:
            break
        pi = probs[i]
        if pi <= 0.0:
            continue
        if pi >= mass:
            pcond = 1.0
        else:
            pcond = pi / mass
        c = _binomial(r, remaining, pcond)
        counts[i] = c
        remaining -= c
        mass -= pi


cdef inline uint64_t _randint(Rng* r, uint64_t bound) nogil:
    cdef uint64_t rem, limit, x
    if bound <= 1:
        return 0
    rem = ((<uint64_t> 0xFFFFFFFFFFFFFFFFULL) % bound + 1ULL) % bound
    limit = (<uint64_t> 0xFFFFFFFFFFFFFFFFULL) - rem
    while True:
        x = _next(r)
        if x <= limit:
            return x % bound


cdef void _project_inplace(double* buf, int64_t k) nogil:
    cdef double total = 0.0
    cdef double w
    cdef int64_t j
    for j in range(k):
        w = buf[j]
        if w < 0.0:
            w = 0.0
        buf[j] = w
        total += w
    if total <= 0.0:
        for j in range(k):
            buf[j] = 1.0 / k
    else:
        for j in range(k):
            buf[j] = buf[j] / total


# ---------------------------------------------------------------------------
# Python-facing API (matches the pure lane exactly)
# ---------------------------------------------------------------------------


cdef class State:
    cdef Rng rng


def substream_id(stream, index):
    """Derive a child stream id; injective in index for a fixed parent."""
    return _substream(<uint64_t> (stream & 0xFFFFFFFFFFFFFFFF),
                      <uint64_t> (index & 0xFFFFFFFFFFFFFFFF))


def make_state(seed, stream=0):
    """Initialize generator state for the (seed, stream) pair."""
    cdef State st = State()
    _seed(&st.rng, <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF),
          <uint64_t> (stream & 0xFFFFFFFFFFFFFFFF))
    return st


def copy_state(State state):
    cdef State st = State()
    st.rng = state.rng
    return st


def state_words(State state):
    return (state.rng.s0, state.rng.s1, state.rng.s2, state.rng.s3)


def next_u64(State state):
    return _next(&state.rng)


def uniform(State state):
    """Uniform double in [0, 1)."""
    return _uniform(&state.rng)


def uniforms(State state, Py_ssize_t n):
    cdef object arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = arr
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = _uniform(&state.rng)
    return arr


def gaussian(State state):
    """Standard normal via the Marsaglia polar method (pair discarded)."""
    return _gaussian(&state.rng)


def gaussians(State state, Py_ssize_t n):
    cdef object arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = arr
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = _gaussian(&state.rng)
    return arr


def exponential(State state):
    """Standard exponential via inverse CDF."""
    return _exponential(&state.rng)


def laplace(State state, double scale):
    """Zero-mean Laplace with the given scale (difference of exponentials)."""
    return _laplace(&state.rng, scale)


def laplaces(State state, double scale, Py_ssize_t n):
    cdef object arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = arr
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = _laplace(&state.rng, scale)
    return arr


def gumbel(State state):
    """Standard Gumbel; resamples the measure-zero exponential underflow."""
    return _gumbel(&state.rng)


def log_factorial(n):
    return _logfact(<int64_t> n)


def poisson(State state, double lam):
    return _poisson(&state.rng, lam)


def binomial(State state, n, double p):
    return _binomial(&state.rng, <int64_t> n, p)


def bernoulli(State state, double p):
    return 1 if _uniform(&state.rng) < p else 0


def bernoulli_vec(State state, probs):
    cdef const double[::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t d = p.shape[0]
    cdef object arr = np.empty(d, dtype=np.uint8)
    cdef unsigned char[::1] out = arr
    cdef Py_ssize_t j
    for j in range(d):
        out[j] = 1 if _uniform(&state.rng) < p[j] else 0
    return arr


def categorical(State state, pmf):
    """Index in [0, len(pmf)) with probabilities proportional to pmf."""
    cdef const double[::1] p = np.ascontiguousarray(pmf, dtype=np.float64)
    return _categorical(&state.rng, &p[0], p.shape[0])


def categoricals(State state, pmf, Py_ssize_t n):
    cdef const double[::1] p = np.ascontiguousarray(pmf, dtype=np.float64)
    cdef object arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = arr
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = _categorical(&state.rng, &p[0], p.shape[0])
    return arr


def multinomial(State state, trials, probs):
    """Counts via sequential conditional binomials.

    Accepts cell probabilities summing to anything <= 1; residual mass goes
    to an implicit discard cell, so sum(counts) <= trials.
    """
    cdef const double[::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef object arr = np.zeros(p.shape[0], dtype=np.int64)
    cdef int64_t[::1] out = arr
    _multinomial(&state.rng, <int64_t> trials, &p[0], p.shape[0], &out[0])
    return arr


def randint(State state, bound):
    """Uniform integer in [0, bound), rejection-exact."""
    return _randint(&state.rng, <uint64_t> bound)


def permutation(State state, Py_ssize_t k):
    cdef object arr = np.arange(k, dtype=np.int64)
    cdef int64_t[::1] a = arr
    cdef Py_ssize_t i
    cdef uint64_t j
    cdef int64_t tmp
    for i in range(k - 1, 0, -1):
        j = _randint(&state.rng, <uint64_t> (i + 1))
        tmp = a[i]
        a[i] = a[<Py_ssize_t> j]
        a[<Py_ssize_t> j] = tmp
    return arr


def project_simplex(v):
    """Clamp negatives to zero, renormalize; uniform if nothing is positive."""
    cdef object arr = np.array(np.ascontiguousarray(v, dtype=np.float64),
                               dtype=np.float64, copy=True)
    cdef double[::1] out = arr
    _project_inplace(&out[0], out.shape[0])
    return arr


# ---------------------------------------------------------------------------
# Fused Monte Carlo kernels (per-trial substreams; trial order irrelevant)
# ---------------------------------------------------------------------------


def kary_mc_fixed(seed, stream, emp, n, double eps, trials):
    """Output tallies of the k-ary Laplace sampler on one fixed dataset.

    emp is the dataset's empirical pmf; returns int64 counts per element.
    """
    cdef const double[::1] e = np.ascontiguousarray(emp, dtype=np.float64)
    cdef int64_t k = e.shape[0]
    cdef object arr = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] out = arr
    cdef object bufarr = np.empty(k, dtype=np.float64)
    cdef double[::1] buf = bufarr
    cdef uint64_t sd = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t sid = <uint64_t> (stream & 0xFFFFFFFFFFFFFFFF)
    cdef int64_t nn = <int64_t> n
    cdef int64_t T = <int64_t> trials
    cdef double scale = 2.0 / (eps * nn)
    cdef Rng rng
    cdef int64_t t, j
    with nogil:
        for t in range(T):
            _seed(&rng, sd, _substream(sid, <uint64_t> t))
            for j in range(k):
                buf[j] = e[j] + _laplace(&rng, scale)
            _project_inplace(&buf[0], k)
            out[_categorical(&rng, &buf[0], k)] += 1
    return arr


def kary_mc_fresh(seed, stream, pvec, n, double eps, trials):
    """Output tallies of the k-ary Laplace sampler on fresh i.i.d. datasets.

    Datasets are drawn at the law level as multinomial counts, which is
    exact because the sampler depends on its input only through counts.
    """
    cdef const double[::1] p = np.ascontiguousarray(pvec, dtype=np.float64)
    cdef int64_t k = p.shape[0]
    cdef object arr = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] out = arr
    cdef object bufarr = np.empty(k, dtype=np.float64)
    cdef double[::1] buf = bufarr
    cdef object cntarr = np.empty(k, dtype=np.int64)
    cdef int64_t[::1] cnt = cntarr
    cdef uint64_t sd = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t sid = <uint64_t> (stream & 0xFFFFFFFFFFFFFFFF)
    cdef int64_t nn = <int64_t> n
    cdef int64_t T = <int64_t> trials
    cdef double scale = 2.0 / (eps * nn)
    cdef double inv_n = 1.0 / nn
    cdef Rng rng
    cdef int64_t t, j
    with nogil:
        for t in range(T):
            _seed(&rng, sd, _substream(sid, <uint64_t> t))
            _multinomial(&rng, nn, &p[0], k, &cnt[0])
            for j in range(k):
                buf[j] = cnt[j] * inv_n + _laplace(&rng, scale)
            _project_inplace(&buf[0], k)
            out[_categorical(&rng, &buf[0], k)] += 1
    return arr


def clip_product_mc(seed, stream, probs, n, trials):
    """Per-coordinate one-tallies of the bounded-bias product sampler.

    Fresh data per trial, drawn as column sums ~ Bin(n, p_j); exact in law
    because the sampler is a function of column sums.
    """
    cdef const double[::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef int64_t d = p.shape[0]
    cdef object arr = np.zeros(d, dtype=np.int64)
    cdef int64_t[::1] out = arr
    cdef uint64_t sd = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t sid = <uint64_t> (stream & 0xFFFFFFFFFFFFFFFF)
    cdef int64_t nn = <int64_t> n
    cdef int64_t T = <int64_t> trials
    cdef double inv_n = 1.0 / nn
    cdef Rng rng
    cdef int64_t t, j, c
    cdef double b
    with nogil:
        for t in range(T):
            _seed(&rng, sd, _substream(sid, <uint64_t> t))
            for j in range(d):
                c = _binomial(&rng, nn, p[j])
                b = c * inv_n
                if b < 0.25:
                    b = 0.25
                elif b > 0.75:
                    b = 0.75
                if _uniform(&rng) < b:
                    out[j] += 1
    return arr


def universe_mc(seed, stream, biases, special, trials):
    """Output tallies (1-based universe of size 2k+1) of the bit-vector to
    element map applied to fresh product draws with the given biases."""
    cdef const double[::1] p = np.ascontiguousarray(biases, dtype=np.float64)
    cdef int64_t width = p.shape[0]
    cdef object arr = np.zeros(width + 1, dtype=np.int64)
    cdef int64_t[::1] out = arr
    cdef object candarr = np.empty(width, dtype=np.int64)
    cdef int64_t[::1] cand = candarr
    cdef uint64_t sd = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t sid = <uint64_t> (stream & 0xFFFFFFFFFFFFFFFF)
    cdef int64_t spec = <int64_t> special
    cdef int64_t T = <int64_t> trials
    cdef Rng rng
    cdef int64_t t, j, w, z
    with nogil:
        for t in range(T):
            _seed(&rng, sd, _substream(sid, <uint64_t> t))
            w = 0
            for j in range(width):
                if _uniform(&rng) < p[j]:
                    if j + 1 < spec:
                        z = j + 1
                    else:
                        z = j + 2
                    cand[w] = z
                    w += 1
            if w == 0:
                out[spec - 1] += 1
            else:
                out[cand[<int64_t> _randint(&rng, <uint64_t> w)] - 1] += 1
    return arr


def expselect_mc(seed, stream, counts, double eps, trials):
    """Selection tallies of Gumbel-argmax exponential selection."""
    cdef const int64_t[::1] c = np.ascontiguousarray(counts, dtype=np.int64)
    cdef int64_t m = c.shape[0]
    cdef object arr = np.zeros(m, dtype=np.int64)
    cdef int64_t[::1] out = arr
    cdef uint64_t sd = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t sid = <uint64_t> (stream & 0xFFFFFFFFFFFFFFFF)
    cdef int64_t T = <int64_t> trials
    cdef double half_eps = 0.5 * eps
    cdef Rng rng
    cdef int64_t t, j, arg
    cdef double best, g
    with nogil:
        for t in range(T):
            _seed(&rng, sd, _substream(sid, <uint64_t> t))
            best = -INFINITY
            arg = 0
            for j in range(m):
                g = half_eps * c[j] + _gumbel(&rng)
                if g > best:
                    best = g
                    arg = j
            out[arg] += 1
    return arr
