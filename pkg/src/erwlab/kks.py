"""Step distribution and crossing chains of the cookie walk.

The number of right crossings of consecutive edges, watched at the
successive failure times of the cookie Bernoulli sequence, is a Markov
chain whose step distribution U(x) counts successes before the x-th
failure when cookies are consumed in pile order.  This module provides

* an exact dynamic-programming oracle for the law of U(x),
* fast exact samplers (success-run decomposition for periodic piles,
  dyadic block composition for large x, prefix plus negative binomial
  for bounded piles),
* single-run and vectorized ensemble simulation of the chain,
* Monte Carlo ladders of drift/diffusion estimates over growing x.

Conventions: U(0) = 1, and the simulated chain treats 0 as absorbing so
that survival means directional transience of the walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .environments import CookieEnvironment, EnvKind
from .periodic import InternalConsistencyError, _cyclic_products, mu_periodic
from .seeding import TAG_ZSIM, default_seed, substream

_MU_ONE_TOL = 1e-12

# Mass below this per-row threshold is trimmed from sampler tables; the
# exact oracle is the precision route and never trims this way.
_ROW_TAIL = 1e-15


def asymptotic_mu(env: CookieEnvironment) -> float:
    """Limiting mean of U(x)/x: pbar/(1-pbar) from the recurring part."""
    if env.kind is EnvKind.PERIODIC:
        return mu_periodic(env)
    t = float(env.tail_value)  # type: ignore[arg-type]
    if t >= 1.0:
        return math.inf
    return t / (1.0 - t)


def _diffusion_scale(env: CookieEnvironment) -> float:
    """8 * mean of p(1-p) over the recurring part of the pile."""
    if env.kind is EnvKind.PERIODIC:
        return 8.0 * math.fsum(p * (1.0 - p) for p in env.params) / env.period
    t = float(env.tail_value)  # type: ignore[arg-type]
    return 8.0 * t * (1.0 - t)


def _require_nondegenerate(env: CookieEnvironment) -> None:
    if not env.predicates().non_degenerate:
        raise ValueError("degenerate environment: U(x) is not finite almost surely")


def _constant_value(env: CookieEnvironment) -> Optional[float]:
    """Cookie value if the pile is a single repeated constant."""
    if env.kind is EnvKind.PERIODIC:
        first = env.params[0]
        return first if all(p == first for p in env.params) else None
    t = float(env.tail_value)  # type: ignore[arg-type]
    return t if all(p == t for p in env.params) else None


# ---------------------------------------------------------------------
# exact oracle
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class UDistribution:
    """Truncated exact law of U(x).

    ``mass[i]`` is the probability of ``support_offset + i`` successes;
    ``tail_bound`` bounds the un-enumerated probability mass.
    """

    x: int
    support_offset: int
    mass: np.ndarray
    tail_bound: float

    def support(self) -> np.ndarray:
        return np.arange(self.support_offset, self.support_offset + len(self.mass))

    def mean(self) -> float:
        return float(self.support() @ self.mass)

    def second_moment_about(self, center: float) -> float:
        d = self.support() - center
        return float((d * d) @ self.mass)

    def total_mass(self) -> float:
        return float(math.fsum(self.mass.tolist()))


class OracleHorizonError(RuntimeError):
    """Requested tail accuracy unreachable within the trial cap."""


def _horizon_cap(env: CookieEnvironment, x: int) -> int:
    mu = asymptotic_mu(env)
    return int(64 * (x + env.period) * (1.0 + min(mu, 64.0)))


def exact_U_distribution(
    env: CookieEnvironment, x: int, tail_eps: float = 1e-12
) -> UDistribution:
    """Exact law of U(x) by forward dynamic programming.

    The state is the number of failures seen so far; trial n consumes
    cookie n of the pile.  Mass absorbing at the x-th failure on trial n
    contributes probability to the success count n - x.  Enumeration
    stops once the live (un-absorbed) mass drops below ``tail_eps``.
    """
    _require_nondegenerate(env)
    if x < 0:
        raise ValueError("x must be nonnegative")
    if tail_eps <= 0.0:
        raise ValueError("tail_eps must be positive")
    if x == 0:
        return UDistribution(0, 1, np.array([1.0]), 0.0)

    cap = _horizon_cap(env, x)
    live = np.zeros(x)
    live[0] = 1.0
    masses: list[float] = []
    n = 0
    # Termination reads the live array directly every few trials; a
    # running "absorbed" total cannot be trusted to cross 1 - tail_eps
    # because its own rounding error is of the same order.
    while True:
        n += 1
        if n > cap:
            raise OracleHorizonError(
                f"tail {tail_eps:g} not reached within {cap} trials"
            )
        c = env.cookie_at(n)
        q = 1.0 - c
        ab = q * live[x - 1]
        if n >= x:
            masses.append(ab)
        if x > 1:
            live[1:] = c * live[1:] + q * live[:-1]
        live[0] *= c
        if n % 32 == 0 and float(live.sum()) < tail_eps:
            break
    mass = np.array(masses)
    tail = max(0.0, 1.0 - math.fsum(masses))
    return UDistribution(x=x, support_offset=0, mass=mass, tail_bound=tail)


class ExactMoments(NamedTuple):
    mean: float
    rho_x: float
    nu_x: float


def exact_moments(env: CookieEnvironment, x: int, tail_eps: float = 1e-14) -> ExactMoments:
    """Mean of U(x), centered drift rho(x) = E U(x) - mu x, and scaled
    second moment nu(x) = E (U(x) - mu x)^2 / x, all from the oracle."""
    dist = exact_U_distribution(env, x, tail_eps)
    mu = asymptotic_mu(env)
    mean = dist.mean()
    center = mu * x
    return ExactMoments(mean, mean - center, dist.second_moment_about(center) / x)


# ---------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------


class _RunSampler:
    """Success-run decomposition for a periodic pile.

    Between consecutive failures the active cookie slot performs a walk
    on Z/M.  A run of g successes splits as g = d + M*t where d < M is
    the slot advance (a per-slot categorical) and t counts whole-period
    wraps, geometric with success 1 - (full period product) and
    independent of everything else.  Summing over x failures, the wrap
    total is a single negative binomial.
    """

    def __init__(self, env: CookieEnvironment):
        params = env.params
        m = len(params)
        p = np.asarray(params, dtype=float)
        q = 1.0 - p
        prods = _cyclic_products(params)
        self.period = m
        self.full_product = float(prods[0, m])
        denom = 1.0 - self.full_product
        if denom <= 0.0:
            raise ValueError("degenerate environment: all-ones pile")
        pmf = np.empty((m, m))
        for d in range(m):
            pmf[:, d] = prods[:, d] * q[(np.arange(m) + d) % m] / denom
        self.cdf = np.cumsum(pmf, axis=1)
        self.cdf[:, -1] = 1.0

    def draw_many(self, x: int, size: int, rng: np.random.Generator) -> np.ndarray:
        m = self.period
        state = np.zeros(size, dtype=np.int64)
        total = np.zeros(size, dtype=np.int64)
        cols = [np.ascontiguousarray(self.cdf[:, c]) for c in range(m - 1)]
        for _ in range(x):
            u = rng.random(size)
            d = np.zeros(size, dtype=np.int64)
            for c in range(m - 1):
                d += cols[c][state] <= u
            total += d
            state = (state + d + 1) % m
        if self.full_product > 0.0:
            wraps = rng.negative_binomial(x, 1.0 - self.full_product, size)
            total += m * wraps.astype(np.int64)
        return total

    def draw_one(self, x: int, rng: np.random.Generator) -> int:
        m = self.period
        state = 0
        total = 0
        for _ in range(x):
            d = int(np.searchsorted(self.cdf[state], rng.random(), side="right"))
            total += d
            state = (state + d + 1) % m
        if self.full_product > 0.0:
            total += m * int(rng.negative_binomial(x, 1.0 - self.full_product))
        return total


class _PeriodSampler:
    """Trial-space sampler for one large draw from a periodic pile.

    Failures per full period are i.i.d.; a batch of period totals is
    drawn until the target failure count is covered and the boundary
    period is resolved through exact conditional position tables.
    """

    def __init__(self, env: CookieEnvironment):
        q = [1.0 - p for p in env.params]
        m = len(q)
        self.period = m
        self.mean_failures = math.fsum(q)
        if self.mean_failures <= 0.0:
            raise ValueError("degenerate environment: all-ones pile")
        # forward[t][f]: P(f failures in trials 1..t)
        forward = [np.array([1.0])]
        for t in range(m):
            prev = forward[-1]
            nxt = np.zeros(t + 2)
            nxt[: t + 1] += prev * (1.0 - q[t])
            nxt[1:] += prev * q[t]
            forward.append(nxt)
        # suffix[t][g]: P(g failures in trials t+1..M)
        suffix = [np.array([1.0])]
        for t in range(m - 1, -1, -1):
            prev = suffix[0]
            nxt = np.zeros(len(prev) + 1)
            nxt[: len(prev)] += prev * (1.0 - q[t])
            nxt[1:] += prev * q[t]
            suffix.insert(0, nxt)
        self.period_pmf = forward[m]
        self.period_cdf = np.cumsum(self.period_pmf)
        self.period_cdf[-1] = 1.0
        # boundary[w][r]: cdf over the trial t carrying the r-th failure,
        # conditioned on w failures in the whole period
        self.boundary: dict[tuple[int, int], tuple[np.ndarray, int]] = {}
        for w in range(1, m + 1):
            pw = self.period_pmf[w]
            if pw <= 0.0:
                continue
            for r in range(1, w + 1):
                ts = np.arange(r, m - (w - r) + 1)
                probs = np.array(
                    [forward[t - 1][r - 1] * q[t - 1] * suffix[t][w - r] for t in ts]
                )
                cdf = np.cumsum(probs / pw)
                cdf[-1] = 1.0
                self.boundary[(w, r)] = (cdf, int(ts[0]))

    def draw_one(self, x: int, rng: np.random.Generator) -> int:
        m = self.period
        collected = 0
        periods_done = 0
        while True:
            need = x - collected
            chunk = int(need / self.mean_failures * 1.2) + 32
            u = rng.random(chunk)
            ws = np.searchsorted(self.period_cdf, u, side="right")
            cum = np.cumsum(ws)
            if cum[-1] < need:
                collected += int(cum[-1])
                periods_done += chunk
                continue
            pos = int(np.searchsorted(cum, need, side="left"))
            before = int(cum[pos - 1]) if pos > 0 else 0
            full_periods = periods_done + pos
            fails_before = collected + before
            r = x - fails_before
            w = int(ws[pos])
            cdf, t0 = self.boundary[(w, r)]
            t = t0 + int(np.searchsorted(cdf, rng.random(), side="right"))
            return full_periods * m - fails_before + (t - r)


def _prefix_tail_draws(
    env: CookieEnvironment,
    x: "int | np.ndarray",
    size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample U(x) for a finite prefix followed by a constant tail.

    ``x`` may be a scalar or one target per draw; the prefix consumes at
    most M shared Bernoulli trials, the rest is a negative binomial.
    """
    params = env.params
    tail = float(env.tail_value)  # type: ignore[arg-type]
    xs = np.asarray(x, dtype=np.int64)
    if xs.ndim == 0:
        xs = np.full(size, int(xs), dtype=np.int64)
    fails = np.zeros(size, dtype=np.int64)
    succ = np.zeros(size, dtype=np.int64)
    for p in params:
        open_ = fails < xs
        u = rng.random(size)
        right = u < p
        succ += (right & open_).astype(np.int64)
        fails += (~right & open_).astype(np.int64)
    rem = np.maximum(xs - fails, 0)
    out = succ.copy()
    needs = rem > 0
    if np.any(needs):
        if tail >= 1.0:
            raise ValueError("degenerate tail: remaining failures never occur")
        draws = rng.negative_binomial(np.maximum(rem, 1), 1.0 - tail, size)
        out += np.where(needs, draws.astype(np.int64), 0)
    return out


def _bisect_rows(
    flat_cdf: np.ndarray,
    base: np.ndarray,
    lengths: "int | np.ndarray",
    u: np.ndarray,
) -> np.ndarray:
    """Inverse-CDF search in stacked cdf rows, one uniform per entry.

    ``base[i]`` is where row i starts inside ``flat_cdf`` and
    ``lengths`` its length (shared scalar or per-entry).  Returns the
    within-row index of the first cdf value exceeding ``u[i]``.
    """
    n = len(u)
    lo = np.zeros(n, dtype=np.int64)
    if np.isscalar(lengths):
        hi = np.full(n, int(lengths), dtype=np.int64)
    else:
        hi = np.asarray(lengths, dtype=np.int64).copy()
    top = int(hi.max()) if n else 1
    for _ in range(max(top, 1).bit_length()):
        done = lo >= hi
        mid = np.where(done, lo, (lo + hi) >> 1)
        v = flat_cdf[np.minimum(base + mid, len(flat_cdf) - 1)]
        go = (v <= u) & ~done
        lo = np.where(go, mid + 1, lo)
        hi = np.where(go | done, hi, mid)
    return lo


class _DyadicLevel(NamedTuple):
    k0: int
    width: int
    joint: np.ndarray
    flat_cdf: np.ndarray


class _DyadicSampler:
    """Exact draws of U(x) for large x by dyadic block composition.

    Consuming a block of 2^k failures from pile slot r yields a success
    count and an end slot; the joint law at level k is the slot-indexed
    convolution square of level k - 1 (computed by FFT).  One draw walks
    the set bits of x from high to low, threading the slot state, with a
    single inverse-CDF lookup per bit, so the cost per draw is
    logarithmic in x.  Levels extend lazily as larger x appear.
    """

    _TAIL = 1e-17

    def __init__(self, env: CookieEnvironment):
        params = env.params
        self.m = len(params)
        p = np.asarray(params, dtype=float)
        q = 1.0 - p
        m = self.m
        rows = []
        for r in range(m):
            probs = []
            acc = 1.0
            u = 0
            while acc > self._TAIL or u < m:
                probs.append(acc * q[(r + u) % m])
                acc *= p[(r + u) % m]
                u += 1
                if u > 128 * (m + 8):
                    raise InternalConsistencyError("success-run tail failed to decay")
            rows.append(np.asarray(probs))
        width = max(len(row) for row in rows)
        joint = np.zeros((m, m, width))
        for r in range(m):
            u = np.arange(len(rows[r]))
            joint[r, (r + u + 1) % m, u] = rows[r]
        self.levels: list[_DyadicLevel] = [self._finish(0, joint)]

    def _finish(self, k0: int, joint: np.ndarray) -> _DyadicLevel:
        m = self.m
        col = joint.sum(axis=(0, 1))
        cs = np.cumsum(col)
        total = cs[-1]
        a = int(np.searchsorted(cs, self._TAIL * total, side="left"))
        b = int(np.searchsorted(cs, (1.0 - self._TAIL) * total, side="left")) + 1
        joint = np.ascontiguousarray(joint[:, :, a:b])
        w = joint.shape[2]
        flat = joint.reshape(m, m * w)
        sums = flat.sum(axis=1)
        joint = joint / sums.reshape(m, 1, 1)
        cdf = np.cumsum(flat / sums.reshape(m, 1), axis=1)
        cdf[:, -1] = 1.0
        return _DyadicLevel(k0 + a, w, joint, cdf)

    def _extend(self) -> None:
        prev = self.levels[-1]
        w = prev.width
        n = 2 * w - 1
        size = 1 << (n - 1).bit_length()
        fa = np.fft.rfft(prev.joint, size, axis=2)
        fc = np.einsum("abf,bcf->acf", fa, fa)
        out = np.fft.irfft(fc, size, axis=2)[:, :, :n]
        np.maximum(out, 0.0, out)
        self.levels.append(self._finish(2 * prev.k0, out))

    def ensure(self, x_max: int) -> None:
        while len(self.levels) < max(int(x_max), 1).bit_length():
            self._extend()

    def draw(self, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        if np.any(xs < 1):
            raise ValueError("dyadic sampler serves x >= 1")
        top = int(xs.max())
        self.ensure(top)
        out = np.zeros(len(xs), dtype=np.int64)
        state = np.zeros(len(xs), dtype=np.int64)
        for k in range(top.bit_length() - 1, -1, -1):
            sel = np.flatnonzero((xs >> k) & 1)
            if len(sel) == 0:
                continue
            lvl = self.levels[k]
            u = rng.random(len(sel))
            st = state[sel]
            for r in range(self.m):
                g = np.flatnonzero(st == r)
                if len(g) == 0:
                    continue
                idx = np.searchsorted(lvl.flat_cdf[r], u[g], side="right")
                tgt = sel[g]
                out[tgt] += lvl.k0 + idx % lvl.width
                state[tgt] = idx // lvl.width
        return out

    def draw_one(self, x: int, rng: np.random.Generator) -> int:
        x = int(x)
        if x < 1:
            raise ValueError("dyadic sampler serves x >= 1")
        self.ensure(x)
        out = 0
        r = 0
        for k in range(x.bit_length() - 1, -1, -1):
            if not (x >> k) & 1:
                continue
            lvl = self.levels[k]
            idx = int(np.searchsorted(lvl.flat_cdf[r], rng.random(), side="right"))
            out += lvl.k0 + idx % lvl.width
            r = idx // lvl.width
        return out


_run_sampler_cache: dict[CookieEnvironment, _RunSampler] = {}
_period_sampler_cache: dict[CookieEnvironment, _PeriodSampler] = {}


def _run_sampler(env: CookieEnvironment) -> _RunSampler:
    s = _run_sampler_cache.get(env)
    if s is None:
        s = _RunSampler(env)
        _run_sampler_cache[env] = s
    return s


def _period_sampler(env: CookieEnvironment) -> _PeriodSampler:
    s = _period_sampler_cache.get(env)
    if s is None:
        s = _PeriodSampler(env)
        _period_sampler_cache[env] = s
    return s


# Above this x the dyadic sampler beats the per-failure run sampler.
_DYADIC_MIN = 512

# Ensemble batches at or below this size fall back to scalar draws.
_FINISH_BATCH = 16

_dyadic_cache: dict[CookieEnvironment, _DyadicSampler] = {}


def _dyadic(env: CookieEnvironment) -> _DyadicSampler:
    s = _dyadic_cache.get(env)
    if s is None:
        if len(_dyadic_cache) >= 4:
            _dyadic_cache.clear()
        s = _DyadicSampler(env)
        _dyadic_cache[env] = s
    return s


def sample_U_many(
    env: CookieEnvironment, x: int, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized exact draws of U(x)."""
    _require_nondegenerate(env)
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return np.ones(size, dtype=np.int64)
    const = _constant_value(env)
    if const is not None:
        return rng.negative_binomial(x, 1.0 - const, size).astype(np.int64)
    if env.kind is EnvKind.PERIODIC:
        if x > _DYADIC_MIN:
            return _dyadic(env).draw(np.full(size, x, dtype=np.int64), rng)
        return _run_sampler(env).draw_many(x, size, rng)
    return _prefix_tail_draws(env, x, size, rng)


def sample_U(env: CookieEnvironment, x: int, rng: np.random.Generator) -> int:
    """One exact draw of U(x)."""
    _require_nondegenerate(env)
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1
    const = _constant_value(env)
    if const is not None:
        return int(rng.negative_binomial(x, 1.0 - const))
    if env.kind is EnvKind.PERIODIC:
        if x > _DYADIC_MIN:
            return _dyadic(env).draw_one(x, rng)
        return _run_sampler(env).draw_one(x, rng)
    return int(_prefix_tail_draws(env, x, 1, rng)[0])


def sample_U_reference(env: CookieEnvironment, x: int, rng: np.random.Generator) -> int:
    """Trial-by-trial Bernoulli reference sampler (slow, for tests)."""
    _require_nondegenerate(env)
    if x == 0:
        return 1
    fails = 0
    succ = 0
    i = 0
    while fails < x:
        i += 1
        if rng.random() < env.cookie_at(i):
            succ += 1
        else:
            fails += 1
    return succ


def step_sampler(
    env: CookieEnvironment,
) -> Callable[[int, int, np.random.Generator], np.ndarray]:
    """Adapter exposing the pile as a generic chain-step sampler."""
    _require_nondegenerate(env)

    def draw(x: int, size: int, rng: np.random.Generator) -> np.ndarray:
        return sample_U_many(env, x, size, rng)

    return draw


# ---------------------------------------------------------------------
# sampler tables (ensemble fast path)
# ---------------------------------------------------------------------


class _UTable:
    """Inverse-CDF rows of U(x) for every x up to a cap.

    Built from one free (absorption-free) failure-count DP: the x-th
    failure lands on trial n exactly when the free process has x - 1
    failures after n - 1 trials and trial n fails, so a single sweep
    serves all rows.  Rows are trimmed to relative mass 1 - 2e-15 and
    renormalized; the table backs samplers only, never the oracle.
    """

    def __init__(self, x_cap: int, row_k0: np.ndarray, offsets: np.ndarray, lengths: np.ndarray, flat_cdf: np.ndarray):
        self.x_cap = x_cap
        self.row_k0 = row_k0
        self.offsets = offsets
        self.lengths = lengths
        self.flat_cdf = flat_cdf

    @staticmethod
    def build(env: CookieEnvironment, x_cap: int) -> "_UTable":
        mu = min(asymptotic_mu(env), 256.0)
        scale = _diffusion_scale(env) + 0.5
        width = int(x_cap * max(1.0, mu) + 40.0 * math.sqrt(scale * x_cap * max(1.0, mu)) + 256)
        dense = np.zeros((x_cap, width))
        # live[f] = P(free failure process sits at f), kept on the
        # significant window [lo, hi); mass crossing f = x_cap is dropped.
        live = np.zeros(x_cap)
        live[0] = 1.0
        lo = 0
        hi = 1
        n = 0
        cap = _horizon_cap(env, x_cap)
        while n < cap:
            c = env.cookie_at(n + 1)
            q = 1.0 - c
            f = np.arange(lo, hi)
            k = n - f
            keep = k < width
            if not np.all(keep):
                f = f[keep]
                k = k[keep]
            dense[f, k] = q * live[f]
            upper = min(hi + 1, x_cap)
            live[lo + 1 : upper] = c * live[lo + 1 : upper] + q * live[lo : upper - 1]
            live[lo] *= c
            hi = upper
            n += 1
            while lo < hi - 1 and live[lo] < 1e-18:
                lo += 1
            if n % 64 == 0 and float(live[lo:hi].sum()) < 1e-16:
                break
        else:
            raise InternalConsistencyError("sampler table build hit the trial cap")
        row_k0 = np.zeros(x_cap + 1, dtype=np.int64)
        offsets = np.zeros(x_cap + 1, dtype=np.int64)
        lengths = np.zeros(x_cap + 1, dtype=np.int64)
        pieces: list[np.ndarray] = []
        pos = 0
        for x in range(1, x_cap + 1):
            row = dense[x - 1]
            total = row.sum()
            if total <= 0.0:
                raise InternalConsistencyError(f"empty sampler row at x={x}")
            cs = np.cumsum(row)
            k_lo = int(np.searchsorted(cs, _ROW_TAIL * total, side="left"))
            k_hi = int(np.searchsorted(cs, (1.0 - _ROW_TAIL) * total, side="left")) + 1
            piece = row[k_lo:k_hi]
            cdf = np.cumsum(piece)
            cdf /= cdf[-1]
            cdf[-1] = 1.0
            row_k0[x] = k_lo
            offsets[x] = pos
            lengths[x] = len(cdf)
            pieces.append(cdf)
            pos += len(cdf)
        return _UTable(x_cap, row_k0, offsets, lengths, np.concatenate(pieces))

    def draw(self, xs: np.ndarray, u: np.ndarray) -> np.ndarray:
        """One inverse-CDF draw per entry; xs must be within the cap."""
        idx = _bisect_rows(self.flat_cdf, self.offsets[xs], self.lengths[xs], u)
        return self.row_k0[xs] + idx

    def draw_one(self, x: int, u: float) -> int:
        o = int(self.offsets[x])
        row = self.flat_cdf[o : o + int(self.lengths[x])]
        return int(self.row_k0[x]) + int(np.searchsorted(row, u, side="right"))


@lru_cache(maxsize=8)
def _cached_table(env: CookieEnvironment, x_cap: int) -> _UTable:
    return _UTable.build(env, x_cap)


# ---------------------------------------------------------------------
# crossing chain simulation
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class ZRunSummary:
    """Outcome of one crossing-chain run."""

    direction: str
    horizon: int
    hit_zero_step: Optional[int]
    survived: bool
    escaped: bool = False


@dataclass(frozen=True)
class ZEnsembleResult:
    """Vectorized ensemble of crossing-chain runs.

    ``death_steps[i]`` is the absorption step of trial i, or -1 when the
    trial survived the horizon (including early escapes upward).
    """

    direction: str
    horizon: int
    trials: int
    death_steps: np.ndarray
    escaped: int

    @property
    def survivors(self) -> int:
        return int(np.sum(self.death_steps < 0))

    @property
    def survival_frequency(self) -> float:
        return self.survivors / self.trials

    @property
    def survival_se(self) -> float:
        f = self.survival_frequency
        return math.sqrt(max(f * (1.0 - f), 0.0) / self.trials)

    def survival_at(self, horizon: int) -> float:
        """Survival frequency at any horizon up to the simulated one."""
        if horizon > self.horizon:
            raise ValueError("horizon exceeds the simulated range")
        d = self.death_steps
        return float(np.sum((d < 0) | (d > horizon))) / self.trials


def _directed(env: CookieEnvironment, direction: str) -> CookieEnvironment:
    if direction == "right":
        return env
    if direction == "left":
        return env.mirror()
    raise ValueError(f"direction must be 'right' or 'left', got {direction!r}")


def _variance_rate(env: CookieEnvironment) -> float:
    """Generous upper bound on Var(U(z)) / z for large z."""
    mu = max(asymptotic_mu(env), 1.0)
    return max(_diffusion_scale(env), 2.0 * mu * (1.0 + mu), 0.5)


def _escape_threshold(env: CookieEnvironment, horizon: int) -> Optional[int]:
    """Size above which a run is declared to survive.

    Supercritical drift (mu > 1): one step from height z stays above
    (1 + (mu-1)/2) z except with probability exp(-z (mu-1)^2 / (8 vr))
    by a Bernstein bound with variance rate vr, so from the returned
    threshold the chance of ever absorbing is below 1e-12 even after a
    union over the horizon.  Without a threshold these runs grow forever.

    Critical drift (mu = 1): falling a height z within H steps has
    quadratic variation at most vr * z * H, giving a bound of roughly
    exp(-z / (2 vr H)).  The returned threshold of about 56 * vr * H
    (plus a term covering any constant downward drift of the size bias)
    makes that below 1e-12.  Typical surviving runs stay an order of
    magnitude lower, so this path is an overflow guard, not a shortcut.
    """
    mu = asymptotic_mu(env)
    if mu < 1.0 - _MU_ONE_TOL:
        return None
    vr = _variance_rate(env)
    down = 0.0
    if env.kind is EnvKind.PERIODIC:
        down = 2.0 * float(env.period)
    else:
        delta = float(sum(2.0 * p - 1.0 for p in env.params))
        down = max(0.0, -delta)
    diffusive = int(math.ceil((56.0 * vr + 2.0 * down) * horizon)) + 64
    if mu > 1.0 + 1e-9:
        chernoff = int(math.ceil(100.0 * vr / ((mu - 1.0) ** 2))) + 64
        return min(chernoff, diffusive)
    return diffusive


def simulate_Z(
    env: CookieEnvironment,
    direction: str,
    horizon: int,
    rng: np.random.Generator,
) -> ZRunSummary:
    """One crossing-chain run from Z_0 = 1 with 0 absorbing."""
    eff = _directed(env, direction)
    _require_nondegenerate(eff)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    esc = _escape_threshold(eff, horizon)
    z = 1
    for step in range(1, horizon + 1):
        z = sample_U(eff, z, rng)
        if z == 0:
            return ZRunSummary(direction, horizon, step, False)
        if esc is not None and z >= esc:
            return ZRunSummary(direction, horizon, None, True, escaped=True)
    return ZRunSummary(direction, horizon, None, True)


def simulate_Z_ensemble(
    env: CookieEnvironment,
    direction: str,
    horizon: int,
    trials: int,
    master_seed: Optional[int] = None,
    x_cap: int = 2048,
) -> ZEnsembleResult:
    """Lockstep ensemble of crossing-chain runs.

    All trials advance one chain step per iteration; draws for sizes
    within the table cap come from precomputed inverse-CDF rows, larger
    sizes fall back to exact per-run sampling.  Results are a pure
    function of (environment, direction, horizon, trials, master_seed).
    """
    eff = _directed(env, direction)
    _require_nondegenerate(eff)
    if horizon < 1 or trials < 1:
        raise ValueError("horizon and trials must be at least 1")
    if master_seed is None:
        master_seed = default_seed()
    rng = substream(master_seed, TAG_ZSIM)
    esc = _escape_threshold(eff, horizon)
    const = _constant_value(eff)
    table: Optional[_UTable] = None
    if const is None:
        cap = x_cap if esc is None else min(x_cap, esc)
        table = _cached_table(eff, max(64, cap))

    z = np.ones(trials, dtype=np.int64)
    death = np.full(trials, -1, dtype=np.int64)
    idx = np.arange(trials)
    escaped = 0
    step = 0
    while step < horizon and len(idx) > _FINISH_BATCH:
        step += 1
        x = z[idx]
        if const is not None:
            k = rng.negative_binomial(x, 1.0 - const, len(idx)).astype(np.int64)
        else:
            assert table is not None
            u = rng.random(len(idx))
            small = x <= table.x_cap
            k = np.empty(len(idx), dtype=np.int64)
            if np.any(small):
                k[small] = table.draw(x[small], u[small])
            if not np.all(small):
                big = ~small
                k[big] = _large_draws(eff, x[big], rng)
        z[idx] = k
        dead = k == 0
        if np.any(dead):
            death[idx[dead]] = step
        if esc is not None:
            esc_hit = (k >= esc) & ~dead
            escaped += int(np.sum(esc_hit))
            keep = ~dead & ~esc_hit
        else:
            keep = ~dead
        idx = idx[keep]
    # The last stragglers run one at a time: scalar draws beat the
    # vectorized machinery once almost every trial has resolved.
    if len(idx) > 0 and step < horizon:
        dy = _dyadic(eff) if eff.kind is EnvKind.PERIODIC and const is None else None
        for j in idx:
            zz = int(z[j])
            s = step
            while s < horizon:
                s += 1
                if const is not None:
                    zz = int(rng.negative_binomial(zz, 1.0 - const))
                elif zz <= table.x_cap:  # type: ignore[union-attr]
                    zz = table.draw_one(zz, rng.random())  # type: ignore[union-attr]
                elif dy is not None:
                    zz = dy.draw_one(zz, rng)
                else:
                    zz = int(_prefix_tail_draws(eff, zz, 1, rng)[0])
                if zz == 0:
                    death[j] = s
                    break
                if esc is not None and zz >= esc:
                    escaped += 1
                    break
            z[j] = zz
    return ZEnsembleResult(direction, horizon, trials, death, escaped)


def _large_draws(
    env: CookieEnvironment, xs: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Exact draws for sizes beyond the table cap, vectorized."""
    if env.kind is EnvKind.PERIODIC:
        return _dyadic(env).draw(xs, rng)
    return _prefix_tail_draws(env, xs, len(xs), rng)


# ---------------------------------------------------------------------
# Monte Carlo ladders
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class LadderEntry:
    x: int
    trials: int
    rho_hat: float
    nu_hat: float
    theta_hat: float
    se_rho: float
    se_nu: float
    se_theta: float


@dataclass(frozen=True)
class LadderStats:
    """Drift/diffusion estimates of the chain step over growing x."""

    entries: tuple[LadderEntry, ...]

    FIELDS = ("x", "trials", "rho_hat", "nu_hat", "theta_hat", "se_rho", "se_nu", "se_theta")

    def to_rows(self) -> list[list[str]]:
        rows = [list(self.FIELDS)]
        for e in self.entries:
            rows.append([repr(getattr(e, f)) for f in self.FIELDS])
        return rows

    @staticmethod
    def from_rows(rows: Sequence[Sequence[str]]) -> "LadderStats":
        header = list(rows[0])
        if header != list(LadderStats.FIELDS):
            raise ValueError(f"unexpected ladder header {header!r}")
        entries = []
        for row in rows[1:]:
            vals = dict(zip(header, row))
            entries.append(
                LadderEntry(
                    x=int(vals["x"]),
                    trials=int(vals["trials"]),
                    rho_hat=float(vals["rho_hat"]),
                    nu_hat=float(vals["nu_hat"]),
                    theta_hat=float(vals["theta_hat"]),
                    se_rho=float(vals["se_rho"]),
                    se_nu=float(vals["se_nu"]),
                    se_theta=float(vals["se_theta"]),
                )
            )
        return LadderStats(tuple(entries))


def empirical_ladder(
    env: CookieEnvironment,
    xs: Sequence[int],
    trials: int,
    rng: np.random.Generator,
    block: int = 1 << 16,
) -> LadderStats:
    """Monte Carlo estimates of rho(x), nu(x) and theta at each x.

    Standard errors are plug-in CLT estimates; the theta error combines
    the drift and diffusion errors through a first-order delta method
    with their sampled covariance.
    """
    _require_nondegenerate(env)
    xs = list(xs)
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("ladder x values must be strictly increasing")
    if any(x < 1 for x in xs):
        raise ValueError("ladder x values must be at least 1")
    if trials < 100:
        raise ValueError("need at least 100 trials for stable ladder errors")
    mu = asymptotic_mu(env)
    entries = []
    for x in xs:
        s1 = s2 = s3 = s4 = 0.0
        done = 0
        while done < trials:
            b = min(block, trials - done)
            v = sample_U_many(env, x, b, rng).astype(float) - mu * x
            v2 = v * v
            s1 += float(v.sum())
            s2 += float(v2.sum())
            s3 += float((v * v2).sum())
            s4 += float((v2 * v2).sum())
            done += b
        n = float(trials)
        m1 = s1 / n
        m2 = s2 / n
        if m2 <= 0.0:
            raise InternalConsistencyError(f"degenerate diffusion estimate at x={x}")
        var_v = max(m2 - m1 * m1, 0.0)
        var_v2 = max(s4 / n - m2 * m2, 0.0)
        cov = s3 / n - m1 * m2
        rho_hat = m1
        nu_hat = m2 / x
        theta_hat = 2.0 * m1 * x / m2
        g1 = 2.0 * x / m2
        g2 = -2.0 * m1 * x / (m2 * m2)
        var_theta = max(g1 * g1 * var_v + g2 * g2 * var_v2 + 2.0 * g1 * g2 * cov, 0.0)
        entries.append(
            LadderEntry(
                x=x,
                trials=trials,
                rho_hat=rho_hat,
                nu_hat=nu_hat,
                theta_hat=theta_hat,
                se_rho=math.sqrt(var_v / n),
                se_nu=math.sqrt(var_v2 / n) / x,
                se_theta=math.sqrt(var_theta / n),
            )
        )
    return LadderStats(tuple(entries))
