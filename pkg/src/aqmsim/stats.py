"""Incremental moments, normal resampling from moments, and two-sample tests.

Tail probabilities come from the regularized incomplete beta function,
evaluated with the modified Lentz continued fraction.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable, Sequence, Union

from .engine import RngStream

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 20_000


class StatsError(ValueError):
    pass


# -- running moments ----------------------------------------------------------

@dataclass
class RunningStats:
    """Welford accumulator: count, mean and sum of squared deviations.

    Observations are shifted by the first one before accumulating, so data
    with a large common offset keeps full precision in the running mean.
    """

    n: int = 0
    shift: float = 0.0
    shifted_mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> RunningStats:
        if self.n == 0:
            self.shift = x
        y = x - self.shift
        self.n += 1
        delta = y - self.shifted_mean
        self.shifted_mean += delta / self.n
        self.m2 += delta * (y - self.shifted_mean)
        return self

    def extend(self, xs: Iterable[float]) -> RunningStats:
        for x in xs:
            self.push(x)
        return self

    def merge(self, other: RunningStats) -> RunningStats:
        """Combined accumulator for the concatenation of both streams (new object)."""
        if other.n == 0:
            return dataclasses.replace(self)
        if self.n == 0:
            return dataclasses.replace(other)
        n = self.n + other.n
        other_mean = other.shifted_mean + (other.shift - self.shift)
        delta = other_mean - self.shifted_mean
        mean = self.shifted_mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return RunningStats(n, self.shift, mean, m2)

    @property
    def mean(self) -> float:
        return self.shift + self.shifted_mean

    @property
    def variance(self) -> float:
        """Population variance (m2 / n)."""
        return self.m2 / self.n if self.n > 0 else math.nan

    @property
    def sample_variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else math.nan

    @property
    def stddev(self) -> float:
        return math.sqrt(self.variance)

    @property
    def sample_stddev(self) -> float:
        return math.sqrt(self.sample_variance)


def stats_push(acc: RunningStats, x: float) -> RunningStats:
    return acc.push(x)


# -- special functions ------------------------------------------------------------

def _beta_cf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise StatsError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise StatsError(f"beta parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise StatsError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, 1.0 - x) / b


def t_sf(x: float, df: float) -> float:
    """Upper tail P(T > x) of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise StatsError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(x):
        return 0.0 if x > 0 else 1.0
    half = 0.5 * betainc_regularized(0.5 * df, 0.5, df / (df + x * x))
    return half if x >= 0 else 1.0 - half


def f_sf(x: float, df_num: float, df_den: float) -> float:
    """Upper tail P(F > x) of the F distribution."""
    if df_num <= 0 or df_den <= 0:
        raise StatsError(f"degrees of freedom must be positive, got {df_num}, {df_den}")
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return betainc_regularized(0.5 * df_den, 0.5 * df_num, df_den / (df_den + df_num * x))


def f_cdf(x: float, df_num: float, df_den: float) -> float:
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return betainc_regularized(0.5 * df_num, 0.5 * df_den, df_num * x / (df_num * x + df_den))


@dataclass(frozen=True)
class StudentT:
    df: float


@dataclass(frozen=True)
class FDist:
    df_num: float
    df_den: float


def tail_probability(dist: Union[StudentT, FDist], x: float) -> float:
    if isinstance(dist, StudentT):
        return t_sf(x, dist.df)
    if isinstance(dist, FDist):
        return f_sf(x, dist.df_num, dist.df_den)
    raise TypeError(f"unsupported distribution {dist!r}")


def _upper_quantile(sf, p: float, lo: float, hi: float) -> float:
    """x with sf(x) == p for a decreasing sf, by bracketing and bisection.

    ``lo`` is pushed toward -inf when negative, toward 0 when positive.
    """
    while sf(hi) > p:
        hi *= 2.0
    while sf(lo) < p:
        lo = lo * 2.0 if lo < 0 else lo / 2.0
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if sf(mid) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def t_ppf_upper(p: float, df: float) -> float:
    """Critical value c with P(T > c) = p."""
    return _upper_quantile(lambda x: t_sf(x, df), p, -1.0, 1.0)


def f_ppf_upper(p: float, df_num: float, df_den: float) -> float:
    """Critical value c with P(F > c) = p."""
    return _upper_quantile(lambda x: f_sf(x, df_num, df_den), p, 0.5, 2.0)


# -- sampling ---------------------------------------------------------------------

def clt_sample(mean: float, stddev: float, n: int, rng: RngStream | int) -> list[float]:
    """``n`` normal draws by inverse-CDF transform of the stream's uniforms."""
    if stddev < 0:
        raise StatsError(f"stddev must be nonnegative, got {stddev}")
    if n < 1:
        raise StatsError(f"need n >= 1, got {n}")
    if isinstance(rng, int):
        rng = RngStream(rng, "clt")
    if stddev == 0:
        return [mean] * n
    dist = NormalDist(mean, stddev)
    return [dist.inv_cdf(rng.random()) for _ in range(n)]


# -- hypothesis tests ---------------------------------------------------------------

@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    df: float
    p_value: float
    ci_lower: float
    ci_upper: float
    mean_a: float
    mean_b: float
    alternative: str
    confidence: float


@dataclass(frozen=True)
class FTestResult:
    f_stat: float
    df_num: int
    df_den: int
    p_value: float
    ci: tuple[float, float]
    confidence: float


def _moments(sample: Sequence[float], label: str) -> RunningStats:
    acc = RunningStats().extend(sample)
    if acc.n < 2:
        raise StatsError(f"sample {label} needs at least 2 observations, got {acc.n}")
    return acc


def welch_t_test(a: Sequence[float], b: Sequence[float], alternative: str = "greater",
                 confidence: float = 0.95) -> TTestResult:
    """Unequal-variance two-sample t-test of mean(a) - mean(b).

    ``alternative`` is "greater", "less" or "two-sided"; the confidence
    interval is one-sided for the one-sided alternatives.
    """
    if alternative not in ("greater", "less", "two-sided"):
        raise StatsError(f"unknown alternative {alternative!r}")
    sa, sb = _moments(a, "a"), _moments(b, "b")
    va, vb = sa.sample_variance / sa.n, sb.sample_variance / sb.n
    if va == 0 and vb == 0:
        raise StatsError("both samples have zero variance; the t statistic is undefined")
    se = math.sqrt(va + vb)
    diff = sa.mean - sb.mean
    t = diff / se
    df = (va + vb) ** 2 / (va * va / (sa.n - 1) + vb * vb / (sb.n - 1))
    level = 1.0 - confidence
    if alternative == "greater":
        p = t_sf(t, df)
        lo, hi = diff - t_ppf_upper(level, df) * se, math.inf
    elif alternative == "less":
        p = 1.0 - t_sf(t, df)
        lo, hi = -math.inf, diff + t_ppf_upper(level, df) * se
    else:
        p = min(1.0, 2.0 * t_sf(abs(t), df))
        crit = t_ppf_upper(level / 2.0, df)
        lo, hi = diff - crit * se, diff + crit * se
    return TTestResult(t, df, p, lo, hi, sa.mean, sb.mean, alternative, confidence)


def f_test(a: Sequence[float], b: Sequence[float], confidence: float = 0.95) -> FTestResult:
    """Two-sided F-test of var(a) / var(b) with a confidence interval on the ratio."""
    sa, sb = _moments(a, "a"), _moments(b, "b")
    if sa.sample_variance == 0 or sb.sample_variance == 0:
        raise StatsError("F-test needs both samples to have positive variance")
    f = sa.sample_variance / sb.sample_variance
    d1, d2 = sa.n - 1, sb.n - 1
    p = min(1.0, 2.0 * min(f_sf(f, d1, d2), f_cdf(f, d1, d2)))
    level = 1.0 - confidence
    hi_q = f_ppf_upper(level / 2.0, d1, d2)
    lo_q = f_ppf_upper(1.0 - level / 2.0, d1, d2)
    return FTestResult(f, d1, d2, p, (f / hi_q, f / lo_q), confidence)
