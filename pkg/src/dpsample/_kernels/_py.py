"""Pure-Python kernel lane.

Implements the same base generator (xoshiro256++) and variate algorithms as
the compiled lane, with the same floating-point operation order, so both
lanes produce bit-identical streams on one platform. Everything here is
scalar Python by design; speed comes from the compiled twin.
"""

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV53 = 1.0 / 9007199254740992.0  # 2**-53
_HALF_LOG_2PI = 0.9189385332046727

_POISSON_PIVOT = 30.0  # inversion below, transformed rejection at or above
_BINOMIAL_PIVOT = 30.0  # inversion when n*min(p,1-p) <= pivot, BTRS otherwise


def _mix64(z):
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def substream_id(stream, index):
    """Derive a child stream id; injective in index for a fixed parent."""
    return _mix64((stream + _GOLDEN * ((index & _MASK) + 1)) & _MASK)


def make_state(seed, stream=0):
    """Initialize generator state for the (seed, stream) pair."""
    z = (seed & _MASK) ^ _mix64((stream & _MASK) ^ _GOLDEN)
    s = [0, 0, 0, 0]
    for i in range(4):
        z = (z + _GOLDEN) & _MASK
        s[i] = _mix64(z)
    if s[0] == 0 and s[1] == 0 and s[2] == 0 and s[3] == 0:
        s[0] = _GOLDEN
    return s


def copy_state(state):
    return list(state)


def state_words(state):
    return tuple(state)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


def next_u64(state):
    s0, s1, s2, s3 = state
    result = (_rotl((s0 + s3) & _MASK, 23) + s0) & _MASK
    t = (s1 << 17) & _MASK
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


def uniform(state):
    """Uniform double in [0, 1)."""
    return (next_u64(state) >> 11) * _INV53


def uniforms(state, n):
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = uniform(state)
    return out


def gaussian(state):
    """Standard normal via the Marsaglia polar method (pair discarded)."""
    while True:
        u = 2.0 * uniform(state) - 1.0
        v = 2.0 * uniform(state) - 1.0
        w = u * u + v * v
        if 0.0 < w < 1.0:
            return u * math.sqrt(-2.0 * math.log(w) / w)


def gaussians(state, n):
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = gaussian(state)
    return out


def exponential(state):
    """Standard exponential via inverse CDF."""
    return -math.log1p(-uniform(state))


def laplace(state, scale):
    """Zero-mean Laplace with the given scale (difference of exponentials)."""
    e1 = exponential(state)
    e2 = exponential(state)
    return scale * (e1 - e2)


def laplaces(state, scale, n):
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = laplace(state, scale)
    return out


def gumbel(state):
    """Standard Gumbel; resamples the measure-zero exponential underflow."""
    while True:
        e = exponential(state)
        if e > 0.0:
            return -math.log(e)


# log(n!) with an identical float op sequence in both lanes. CPython's
# math.lgamma is not libm's lgamma, so lgamma is off limits here.
_LOGFACT_TABLE_SIZE = 1024


def _build_logfact_table():
    table = np.empty(_LOGFACT_TABLE_SIZE, dtype=np.float64)
    acc = 0.0
    table[0] = 0.0
    for i in range(1, _LOGFACT_TABLE_SIZE):
        acc += math.log(i)
        table[i] = acc
    return table


_LOGFACT = _build_logfact_table()


def log_factorial(n):
    if n < _LOGFACT_TABLE_SIZE:
        return float(_LOGFACT[n])
    x = n + 1.0
    return (
        (x - 0.5) * math.log(x)
        - x
        + _HALF_LOG_2PI
        + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x * x)
    )


def poisson(state, lam):
    if lam <= 0.0:
        return 0
    if lam < _POISSON_PIVOT:
        return _poisson_inversion(state, lam)
    return _poisson_ptrs(state, lam)


def _poisson_inversion(state, lam):
    enlam = math.exp(-lam)
    x = 0
    prod = 1.0
    while True:
        prod *= uniform(state)
        if prod > enlam:
            x += 1
        else:
            return x


def _poisson_ptrs(state, lam):
    # Hoermann's transformed rejection with squeeze.
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = uniform(state) - 0.5
        v = uniform(state)
        us = 0.5 - abs(u)
        kf = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return int(kf)
        if kf < 0.0 or (us < 0.013 and v > us):
            continue
        k = int(kf)
        lhs = math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
        if lhs <= kf * loglam - lam - log_factorial(k):
            return k


def binomial(state, n, p):
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
    if n * q <= _BINOMIAL_PIVOT:
        res = _binomial_inversion(state, n, q)
    else:
        res = _binomial_btrs(state, n, q)
    return n - res if flipped else res


def _binomial_inversion(state, n, q):
    qn = math.exp(n * math.log1p(-q))
    npq = n * q
    bound = min(n, int(npq + 10.0 * math.sqrt(npq * (1.0 - q) + 1.0)))
    while True:
        x = 0
        px = qn
        u = uniform(state)
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


def _binomial_btrs(state, n, q):
    # Hoermann's BTRS transformed rejection; valid for n*q above ~10.
    spq = math.sqrt(n * q * (1.0 - q))
    b = 1.15 + 2.53 * spq
    a = -0.0873 + 0.0248 * b + 0.01 * q
    c = n * q + 0.5
    vr = 0.92 - 4.2 / b
    alpha = (2.83 + 5.1 / b) * spq
    lpq = math.log(q / (1.0 - q))
    m = int(math.floor((n + 1) * q))
    h = log_factorial(m) + log_factorial(n - m)
    while True:
        u = uniform(state) - 0.5
        v = uniform(state)
        us = 0.5 - abs(u)
        kf = math.floor((2.0 * a / us + b) * u + c)
        if kf < 0.0 or kf > n:
            continue
        k = int(kf)
        if us >= 0.07 and v <= vr:
            return k
        lhs = math.log(v * alpha / (a / (us * us) + b))
        if lhs <= h - log_factorial(k) - log_factorial(n - k) + (k - m) * lpq:
            return k


def bernoulli(state, p):
    return 1 if uniform(state) < p else 0


def bernoulli_vec(state, probs):
    d = len(probs)
    out = np.empty(d, dtype=np.uint8)
    for j in range(d):
        out[j] = 1 if uniform(state) < probs[j] else 0
    return out


def categorical(state, pmf):
    """Index in [0, len(pmf)) with probabilities proportional to pmf."""
    u = uniform(state)
    cum = 0.0
    last = len(pmf) - 1
    for j in range(last):
        cum += pmf[j]
        if u < cum:
            return j
    return last


def categoricals(state, pmf, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = categorical(state, pmf)
    return out


def multinomial(state, trials, probs):
    """Counts via sequential conditional binomials.

    Accepts cell probabilities summing to anything <= 1; residual mass goes
    to an implicit discard cell, so sum(counts) <= trials.
    """
    ncell = len(probs)
    counts = np.zeros(ncell, dtype=np.int64)
    remaining = trials
    mass = 1.0
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
        c = binomial(state, remaining, pcond)
        counts[i] = c
        remaining -= c
        mass -= pi
    return counts


def randint(state, bound):
    """Uniform integer in [0, bound), rejection-exact."""
    if bound <= 1:
        return 0
    rem = (1 << 64) % bound
    limit = _MASK - rem
    while True:
        x = next_u64(state)
        if x <= limit:
            return x % bound


def permutation(state, k):
    arr = np.arange(k, dtype=np.int64)
    for i in range(k - 1, 0, -1):
        j = randint(state, i + 1)
        arr[i], arr[j] = arr[j], arr[i]
    return arr


def project_simplex(v):
    """Clamp negatives to zero, renormalize; uniform if nothing is positive."""
    k = len(v)
    out = np.empty(k, dtype=np.float64)
    total = 0.0
    for j in range(k):
        w = v[j]
        if w < 0.0:
            w = 0.0
        out[j] = w
        total += w
    if total <= 0.0:
        out[:] = 1.0 / k
        return out
    for j in range(k):
        out[j] = out[j] / total
    return out


# ---------------------------------------------------------------------------
# Fused Monte Carlo kernels. Each trial runs on its own substream derived
# from (seed, substream_id(stream, trial)), so trial order is irrelevant.
# ---------------------------------------------------------------------------


def _project_inplace(buf):
    k = len(buf)
    total = 0.0
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


def kary_mc_fixed(seed, stream, emp, n, eps, trials):
    """Output tallies of the k-ary Laplace sampler on one fixed dataset.

    emp is the dataset's empirical pmf; returns int64 counts per element.
    """
    k = len(emp)
    scale = 2.0 / (eps * n)
    out = np.zeros(k, dtype=np.int64)
    buf = [0.0] * k
    for t in range(trials):
        st = make_state(seed, substream_id(stream, t))
        for j in range(k):
            buf[j] = emp[j] + laplace(st, scale)
        _project_inplace(buf)
        out[categorical(st, buf)] += 1
    return out


def kary_mc_fresh(seed, stream, pvec, n, eps, trials):
    """Output tallies of the k-ary Laplace sampler on fresh i.i.d. datasets.

    Datasets are drawn at the law level as multinomial counts, which is
    exact because the sampler depends on its input only through counts.
    """
    k = len(pvec)
    scale = 2.0 / (eps * n)
    inv_n = 1.0 / n
    out = np.zeros(k, dtype=np.int64)
    buf = [0.0] * k
    for t in range(trials):
        st = make_state(seed, substream_id(stream, t))
        counts = multinomial(st, n, pvec)
        for j in range(k):
            buf[j] = counts[j] * inv_n + laplace(st, scale)
        _project_inplace(buf)
        out[categorical(st, buf)] += 1
    return out


def clip_product_mc(seed, stream, probs, n, trials):
    """Per-coordinate one-tallies of the bounded-bias product sampler.

    Fresh data per trial, drawn as column sums ~ Bin(n, p_j); exact in law
    because the sampler is a function of column sums.
    """
    d = len(probs)
    out = np.zeros(d, dtype=np.int64)
    inv_n = 1.0 / n
    for t in range(trials):
        st = make_state(seed, substream_id(stream, t))
        for j in range(d):
            c = binomial(st, n, probs[j])
            b = c * inv_n
            if b < 0.25:
                b = 0.25
            elif b > 0.75:
                b = 0.75
            if uniform(st) < b:
                out[j] += 1
    return out


def universe_mc(seed, stream, biases, special, trials):
    """Output tallies (1-based universe of size 2k+1) of the bit-vector to
    element map applied to fresh product draws with the given biases."""
    width = len(biases)
    out = np.zeros(width + 1, dtype=np.int64)
    cand = [0] * width
    for t in range(trials):
        st = make_state(seed, substream_id(stream, t))
        w = 0
        for j in range(width):
            if uniform(st) < biases[j]:
                z = j + 1 if (j + 1) < special else j + 2
                cand[w] = z
                w += 1
        if w == 0:
            out[special - 1] += 1
        else:
            out[cand[randint(st, w)] - 1] += 1
    return out


def expselect_mc(seed, stream, counts, eps, trials):
    """Selection tallies of Gumbel-argmax exponential selection."""
    m = len(counts)
    out = np.zeros(m, dtype=np.int64)
    half_eps = 0.5 * eps
    for t in range(trials):
        st = make_state(seed, substream_id(stream, t))
        best = -math.inf
        arg = 0
        for j in range(m):
            g = half_eps * counts[j] + gumbel(st)
            if g > best:
                best = g
                arg = j
        out[arg] += 1
    return out
