"""Control-limit calibration and exact run-length theory.

The chart limit is the k-th smallest of m reference scores. Because a new
in-control score is exchangeable with the reference sample, the run length
W of the resulting chart is distribution-free with E[W] = m/(k-1) exactly,
so choosing k = 1 + m/ARL0 hits any integer-compatible in-control ARL
without knowing the score distribution. As m grows at fixed ARL0 the run
length converges to Geometric(1/ARL0); geometric_limit_check measures how
far a finite m is from that limit.

When only m historical profiles exist, the reference scores are
manufactured by a semi-parametric bootstrap (bootstrap_calibrate): refit
moments on synthetic resamples, draw b2*ARL0 profiles from each refit, and
score them all under the monitoring moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Sequence, Union

import numpy as np
from scipy import stats

from ._backend import kernels
from .errors import (
    InfiniteRunLengthError,
    InsufficientSamplesError,
    InvalidOrderIndexError,
)
from .gaussian import GaussianModel, ProfileBatch, estimate_moments, profile_matrix, sample
from .monitor import AggregationRule, _coerce_rule

# Score distributions available to geometric_limit_check. The run-length
# law only depends on ranks, so any continuous choice must give the same
# ARL; the registry spans light to pathological tails.
SCORE_DISTRIBUTIONS: Dict[str, Callable[[np.random.Generator, tuple], np.ndarray]] = {
    "uniform": lambda rng, size: rng.random(size),
    "normal": lambda rng, size: rng.standard_normal(size),
    "t2": lambda rng, size: rng.standard_t(2.0, size=size),
    "cauchy": lambda rng, size: rng.standard_cauchy(size),
    "chisq2": lambda rng, size: rng.chisquare(2.0, size=size),
    "beta_1_10": lambda rng, size: rng.beta(1.0, 10.0, size=size),
}

_QUANTILE_GRID = (0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 0.9, 0.99)


def _validate_m_k(m: int, k: int) -> None:
    if m != int(m) or k != int(k):
        raise InvalidOrderIndexError(f"m and k must be integers, got m={m}, k={k}")
    if k == 1:
        raise InfiniteRunLengthError(f"k=1 gives an infinite in-control ARL (m={m})")
    if not 2 <= k < m:
        raise InvalidOrderIndexError(f"order index must satisfy 2 <= k < m, got k={k}, m={m}")


def order_index(m: int, arl0: Union[int, float]) -> int:
    """Order index k = 1 + m/ARL0 for an m-score reference sample.

    m must be an integer multiple of ARL0 (otherwise k is fractional and
    no order statistic hits the target exactly).
    """
    if m < 1 or arl0 < 1:
        raise InvalidOrderIndexError(f"need m >= 1 and arl0 >= 1, got m={m}, arl0={arl0}")
    ratio = m / arl0
    if abs(ratio - round(ratio)) > 1e-9:
        raise InvalidOrderIndexError(
            f"m={m} is not an integer multiple of arl0={arl0}: k would be {1 + ratio:g}"
        )
    k = int(round(ratio)) + 1
    _validate_m_k(m, k)
    return k


def arl0_exact(m: int, k: int) -> float:
    """Exact in-control ARL of the k-th-smallest limit: m/(k-1)."""
    _validate_m_k(m, k)
    return m / (k - 1)


@dataclass(frozen=True)
class OrderStatChart:
    """Chart limit as the k-th smallest of a reference score sample.

    reference is sorted and strictly increasing (ties are separated by one
    ulp so exactly k-1 reference scores sit strictly below the limit).
    """

    reference: np.ndarray
    k: int
    limit: float

    def __post_init__(self) -> None:
        ref = np.asarray(self.reference, dtype=np.float64)
        if ref.ndim != 1 or ref.size < 3:
            raise ValueError("reference must be a vector of at least 3 scores")
        _validate_m_k(ref.size, self.k)
        if not np.all(np.diff(ref) > 0):
            raise ValueError("reference must be strictly increasing")
        ref.flags.writeable = False
        object.__setattr__(self, "reference", ref)

    @property
    def m(self) -> int:
        return self.reference.size

    @property
    def arl0(self) -> float:
        return arl0_exact(self.m, self.k)

    def alarms(self, scores: ProfileBatch) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64)
        return s < self.limit


def _strictify(sorted_scores: np.ndarray) -> np.ndarray:
    """Separate tied neighbours of a sorted vector by one ulp upward."""
    out = sorted_scores.copy()
    if out.size and np.any(np.diff(out) <= 0):
        for i in range(1, out.size):
            if out[i] <= out[i - 1]:
                out[i] = np.nextafter(out[i - 1], np.inf)
    return out


def order_stat_limit(scores: ProfileBatch, arl0: Union[int, float]) -> OrderStatChart:
    """Build the chart whose in-control ARL is exactly arl0.

    scores are the m reference values (any order); the limit is their
    (1 + m/arl0)-th smallest.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(s)):
        raise ValueError("reference scores must be finite")
    k = order_index(s.size, arl0)
    ref = _strictify(np.sort(s))
    return OrderStatChart(reference=ref, k=k, limit=float(ref[k - 1]))


def _as_step_array(value, minimum: int, name: str) -> np.ndarray:
    arr = np.asarray(value)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    steps = np.floor(arr).astype(np.int64)
    if arr.size and np.any(steps != arr):
        raise ValueError(f"{name} must be integer-valued")
    if arr.size and np.any(steps < minimum):
        raise ValueError(f"{name} must be >= {minimum}")
    return steps


def no_alarm_prob(m: int, k: int, horizon) -> Union[float, np.ndarray]:
    """P(no alarm in the first `horizon` steps) = C(m,k)/C(horizon+m,k).

    Exact for any score distribution (a rank argument: the k smallest of
    all horizon+m scores must all fall in the reference sample). Accepts a
    scalar or array horizon; horizon = 0 gives 1.

    Evaluated with exact integer binomials so the result is the correctly
    rounded probability at any horizon; this keeps the survival/pmf
    identity tight, which log-gamma evaluation cannot (its independent
    rounding is amplified by cancellation in the survival differences).
    """
    if k < 1 or k > m:
        raise InvalidOrderIndexError(f"need 1 <= k <= m, got k={k}, m={m}")
    steps = _as_step_array(horizon, 0, "horizon")
    num = math.comb(m, k)
    flat = [num / math.comb(int(t) + m, k) for t in steps.ravel()]
    if np.ndim(horizon) == 0:
        return flat[0]
    return np.array(flat, dtype=np.float64).reshape(steps.shape)


def first_alarm_pmf(m: int, k: int, t) -> Union[float, np.ndarray]:
    """P(first alarm at step t), t >= 1; scalar or array t.

    Equals C(m,k) * k / ((t+m) * C(t+m-1,k)); consecutive terms satisfy
    pmf(t+1)/pmf(t) = (t+m-k)/(t+m+1), which the series summation uses.
    Exact integer binomials, same rationale as no_alarm_prob.
    """
    if k < 1 or k > m:
        raise InvalidOrderIndexError(f"need 1 <= k <= m, got k={k}, m={m}")
    steps = _as_step_array(t, 1, "t")
    num = math.comb(m, k) * k
    flat = [num / ((int(s) + m) * math.comb(int(s) + m - 1, k)) for s in steps.ravel()]
    if np.ndim(t) == 0:
        return flat[0]
    return np.array(flat, dtype=np.float64).reshape(steps.shape)


def arl0_series(m: int, k: int, truncation: int, block: int = 1_000_000) -> float:
    """Partial sum sum_{t=1}^{truncation} t * P(first alarm at t).

    Converges to arl0_exact(m, k) as the truncation grows; evaluated with
    the one-term recurrence so ten-million-term sums stay cheap.
    """
    _validate_m_k(m, k)
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    total = 0.0
    lead = k / (m + 1.0)  # pmf at the current block's first step
    start = 1
    while start <= truncation:
        stop = min(start + block, truncation + 1)
        t = np.arange(start, stop, dtype=np.float64)
        ratios = (t + (m - k)) / (t + (m + 1.0))
        pmf = np.empty(t.size)
        pmf[0] = 1.0
        if t.size > 1:
            np.cumprod(ratios[:-1], out=pmf[1:])
        pmf *= lead
        total += float(t @ pmf)
        lead = float(pmf[-1] * ratios[-1])
        start = stop
    return total


def _geometric_bin_edges(arl0: float, bins: int) -> np.ndarray:
    """Right-closed integer bin edges splitting Geometric(1/arl0) into
    roughly equal-probability cells; strictly increasing, deduplicated."""
    p = 1.0 / arl0
    qs = np.arange(1, bins) / bins
    edges = np.ceil(np.log1p(-qs) / math.log1p(-p)).astype(np.int64)
    edges = np.unique(edges[edges >= 1])
    return edges


def _geometric_gof(run_lengths: np.ndarray, arl0: float, bins: int) -> tuple[float, float, int]:
    """Chi-square GOF statistic of run lengths against Geometric(1/arl0)."""
    p = 1.0 / arl0
    edges = _geometric_bin_edges(arl0, bins)
    # observed counts in (0, e1], (e1, e2], ..., (e_last, inf)
    counts = np.empty(edges.size + 1, dtype=np.float64)
    sorted_rl = np.sort(run_lengths)
    idx = np.searchsorted(sorted_rl, edges, side="right")
    counts[0] = idx[0]
    counts[1:-1] = np.diff(idx)
    counts[-1] = run_lengths.size - idx[-1]
    # exact cell probabilities: F(t) = 1 - (1-p)^t
    cdf = 1.0 - np.exp(np.log1p(-p) * edges)
    probs = np.empty_like(counts)
    probs[0] = cdf[0]
    probs[1:-1] = np.diff(cdf)
    probs[-1] = 1.0 - cdf[-1]
    expected = probs * run_lengths.size
    stat = float(np.sum((counts - expected) ** 2 / expected))
    df = counts.size - 1
    pvalue = float(stats.chi2.sf(stat, df))
    return stat, pvalue, counts.size


def willemain_sd(m: int, k: int) -> float:
    """Run-length standard deviation of the classical tolerance-limit
    analysis; infinite for k <= 2."""
    _validate_m_k(m, k)
    if k <= 2:
        return math.inf
    q = (m - k + 1) / m  # coverage of the limit
    var = (q / (1.0 - q) ** 2) * ((1.0 - q + 1.0 / m) / (1.0 - q - 1.0 / m))
    return math.sqrt(var)


@dataclass(frozen=True)
class RunLengthSummary:
    """Simulated run-length behaviour of one (distribution, m) setting."""

    distribution: str
    m: int
    k: int
    target_arl0: float
    reps: int
    sample_arl: float
    arl_se: float
    sample_sd: float
    geometric_sd: float
    willemain_sd: float
    chi2_stat: float
    chi2_pvalue: float
    gof_bins: int


def simulate_run_lengths(
    m: int,
    k: int,
    reps: int,
    rng: np.random.Generator,
    distribution: str = "normal",
) -> np.ndarray:
    """Simulate `reps` chart run lengths: draw m reference scores, set the
    limit to their k-th smallest, then count steps until a new score
    falls below it."""
    _validate_m_k(m, k)
    if reps < 1:
        raise ValueError("reps must be >= 1")
    try:
        draw = SCORE_DISTRIBUTIONS[distribution]
    except KeyError:
        names = ", ".join(sorted(SCORE_DISTRIBUTIONS))
        raise ValueError(f"unknown distribution {distribution!r}; expected one of: {names}") from None
    arl = m / (k - 1)
    out = np.empty(reps, dtype=np.int64)
    chunk = max(1, min(reps, 12_500_000 // m))
    wave = max(256, min(int(2.5 * arl), 1_000_000))
    pos = 0
    while pos < reps:
        c = min(chunk, reps - pos)
        refs = draw(rng, (c, m))
        limits = np.partition(refs, k - 1, axis=1)[:, k - 1]
        lengths = np.zeros(c, dtype=np.int64)
        active = np.arange(c)
        offset = 0
        while active.size:
            scores = draw(rng, (active.size, wave))
            hit = scores < limits[active, np.newaxis]
            found = hit.any(axis=1)
            first = np.argmax(hit, axis=1)
            done = active[found]
            lengths[done] = offset + first[found] + 1
            active = active[~found]
            offset += wave
        out[pos : pos + c] = lengths
        pos += c
    return out


def geometric_limit_check(
    m: int,
    arl0: Union[int, float],
    reps: int,
    rng: np.random.Generator,
    distribution: str = "normal",
    gof_bins: int = 10,
) -> RunLengthSummary:
    """Simulate the chart at (m, k = 1 + m/arl0) and compare its run
    lengths to the limiting Geometric(1/arl0) law.

    Reports the sample ARL with its standard error, the sample SD next to
    the geometric SD sqrt(arl0*(arl0-1)) and the tolerance-limit SD, and
    an equal-probability-bin chi-square GOF p-value.
    """
    k = order_index(m, arl0)
    rl = simulate_run_lengths(m, k, reps, rng, distribution)
    target = arl0_exact(m, k)
    sample_arl = float(rl.mean())
    sample_sd = float(rl.std(ddof=1)) if reps > 1 else math.nan
    arl_se = sample_sd / math.sqrt(reps) if reps > 1 else math.nan
    geo_sd = math.sqrt(target * (target - 1.0))
    wr_sd = willemain_sd(m, k)
    stat, pvalue, nbins = _geometric_gof(rl, target, gof_bins)
    return RunLengthSummary(
        distribution=distribution,
        m=m,
        k=k,
        target_arl0=target,
        reps=reps,
        sample_arl=sample_arl,
        arl_se=arl_se,
        sample_sd=sample_sd,
        geometric_sd=geo_sd,
        willemain_sd=wr_sd,
        chi2_stat=stat,
        chi2_pvalue=pvalue,
        gof_bins=nbins,
    )


@dataclass(frozen=True)
class BootstrapPlan:
    """Sizing of the semi-parametric bootstrap reference sample.

    Of the m historical profiles, the last m_star feed the bootstrap
    moments and the first m - m_star the monitoring moments. b1 outer
    resamples of inner_size (defaults to m) profiles each contribute
    b2 * arl0 scored draws, so the reference holds m' = b1*b2*arl0 scores
    and the limit is their (b1*b2 + 1)-th smallest.
    """

    m_star: int
    b1: int
    b2: int
    arl0: int
    inner_size: int | None = None

    def __post_init__(self) -> None:
        for name in ("m_star", "b1", "b2", "arl0"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.inner_size is not None and self.inner_size < 2:
            raise ValueError("inner_size must be >= 2 when given")

    @property
    def b2_arl(self) -> int:
        return self.b2 * self.arl0

    @property
    def m_prime(self) -> int:
        return self.b1 * self.b2 * self.arl0

    @property
    def limit_index(self) -> int:
        return self.b1 * self.b2 + 1


def bootstrap_calibrate(
    historical: ProfileBatch,
    plan: BootstrapPlan,
    rule: Union[AggregationRule, str],
    rng: np.random.Generator,
) -> tuple[GaussianModel, OrderStatChart]:
    """Calibrate the chart from historical profiles alone.

    Returns the monitoring model (fit on the first m - m_star profiles)
    and the chart whose limit is the (b1*b2+1)-th smallest of the m'
    bootstrap scores. Scoring runs in batches, so memory stays flat no
    matter how large b2*arl0 is.
    """
    model, charts = _bootstrap_calibrate_multi(historical, plan, (rule,), rng)
    return model, charts[_coerce_rule(rule)]


def _bootstrap_calibrate_multi(
    historical: ProfileBatch,
    plan: BootstrapPlan,
    rules: Sequence[Union[AggregationRule, str]],
    rng: np.random.Generator,
    batch: int = 10_000,
) -> tuple[GaussianModel, Mapping[AggregationRule, OrderStatChart]]:
    """Shared-draw calibration of several aggregation rules at once."""
    mat = profile_matrix(historical)
    m, n = mat.shape
    if plan.m_star >= m:
        raise InsufficientSamplesError(f"m_star={plan.m_star} must be below the {m} historical profiles")
    n_monitor = m - plan.m_star
    if n_monitor < n + 1 or plan.m_star < n + 1:
        raise InsufficientSamplesError(
            f"both split halves need > {n} profiles: monitor={n_monitor}, bootstrap={plan.m_star}"
        )
    coerced = []
    for r in rules:
        cr = _coerce_rule(r)
        if cr not in coerced:
            coerced.append(cr)
    monitor_model = estimate_moments(mat[:n_monitor])
    boot_model = estimate_moments(mat[n_monitor:])
    inner = plan.inner_size if plan.inner_size is not None else m
    if inner < n + 1:
        raise InsufficientSamplesError(f"inner_size={inner} too small to refit {n}-site moments")
    scores = {r: np.empty(plan.m_prime) for r in coerced}
    pos = 0
    for stream in rng.spawn(plan.b1):
        resample = sample(boot_model, inner, stream)
        inner_model = estimate_moments(resample)
        remaining = plan.b2_arl
        while remaining > 0:
            c = min(batch, remaining)
            profs = sample(inner_model, c, stream)
            z = monitor_model.standardized_residuals(profs)
            for r in coerced:
                scores[r][pos : pos + c] = kernels.aggregate_from_z(z, r.code)
            pos += c
            remaining -= c
    charts = {r: order_stat_limit(scores[r], plan.arl0) for r in coerced}
    return monitor_model, charts


def calibration_report(
    m: int,
    plan: BootstrapPlan,
    rule: Union[AggregationRule, str],
    chart: OrderStatChart,
) -> dict:
    """JSON-ready summary of one calibration run."""
    rule = _coerce_rule(rule)
    quantiles = {str(q): float(np.quantile(chart.reference, q)) for q in _QUANTILE_GRID}
    return {
        "m": int(m),
        "m_star": plan.m_star,
        "b1": plan.b1,
        "b2": plan.b2,
        "arl0": plan.arl0,
        "rule": rule.value,
        "limit": chart.limit,
        "score_quantiles": quantiles,
    }
