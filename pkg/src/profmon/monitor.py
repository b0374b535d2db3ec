"""Conditional p-value scoring and online monitoring.

Each incoming profile is reduced to one aggregated p-value: every site is
standardized against its conditional law given the other sites (so a site
that disagrees with its neighbours stands out even when it is marginally
unremarkable), two-tail p-values are taken, and the sites are combined by
either the minimum or the geometric mean. An alarm fires when the
aggregated value drops below the chart limit.

All p-value work happens in log space and is floored at 1e-300, so deep
tail alarms never underflow to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union

import numpy as np

from ._backend import kernels
from .gaussian import GaussianModel, ProfileBatch, ProfileSample, profile_matrix

P_FLOOR = kernels.P_FLOOR


class AggregationRule(str, Enum):
    """How per-site p-values combine into one monitoring statistic."""

    MINIMUM = "minimum"
    GEOMETRIC_MEAN = "geometric_mean"

    @property
    def code(self) -> int:
        return kernels.RULE_MINIMUM if self is AggregationRule.MINIMUM else kernels.RULE_GEOMETRIC_MEAN


def _coerce_rule(rule: Union[AggregationRule, str]) -> AggregationRule:
    if isinstance(rule, AggregationRule):
        return rule
    try:
        return AggregationRule(rule)
    except ValueError:
        names = ", ".join(r.value for r in AggregationRule)
        raise ValueError(f"unknown aggregation rule {rule!r}; expected one of: {names}") from None


@dataclass(frozen=True)
class StoppingRule:
    """Alarm when the aggregated p-value falls strictly below limit."""

    limit: float
    rule: AggregationRule = AggregationRule.MINIMUM

    def __post_init__(self) -> None:
        if not 0.0 < self.limit < 1.0:
            raise ValueError(f"limit must be in (0, 1), got {self.limit}")
        object.__setattr__(self, "rule", _coerce_rule(self.rule))


@dataclass(frozen=True)
class SiteStatistics:
    """Scored profile: per-site p-values plus their aggregate."""

    time_index: int
    p_values: np.ndarray
    aggregated: float
    rule: AggregationRule


@dataclass(frozen=True)
class RunLengthRecord:
    """Outcome of monitoring one profile stream.

    alarm_time is the 1-based step of the detection (None when the run was
    truncated at the cap or the stream ended first). In multi-alarm mode
    the alarms at or before the changepoint are collected in
    false_alarm_times and monitoring continues past them.
    """

    alarm_time: int | None
    truncated: bool
    false_alarm_times: tuple[int, ...]
    limit: float
    steps: int

    @property
    def run_length(self) -> int | None:
        return self.alarm_time


def site_p_values(model: GaussianModel, profile: ProfileSample | np.ndarray) -> np.ndarray:
    """Two-tail conditional p-values of one profile at every site.

    p_j = min(P(Y_j < y_j | rest), P(Y_j > y_j | rest)); values lie in
    (0, 0.5] and are floored at 1e-300.
    """
    values = profile.values if isinstance(profile, ProfileSample) else np.asarray(profile, dtype=np.float64)
    z = model.standardized_residuals(values[np.newaxis, :])
    lp = kernels.site_log_pvalues(z)
    p = np.exp(lp[0])
    np.maximum(p, P_FLOOR, out=p)
    return p


def aggregate(p_values: ProfileBatch, rule: Union[AggregationRule, str]) -> float:
    """Combine site p-values into one statistic.

    MINIMUM takes the smallest; GEOMETRIC_MEAN averages in log space.
    """
    rule = _coerce_rule(rule)
    p = np.asarray(p_values, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise ValueError("need at least one p-value")
    if not np.all((p > 0.0) & (p <= 1.0)):
        raise ValueError("p-values must lie in (0, 1]")
    if rule is AggregationRule.MINIMUM:
        out = float(p.min())
    else:
        out = float(np.exp(np.mean(np.log(p))))
    return max(out, P_FLOOR)


def profile_statistics(
    model: GaussianModel,
    profile: ProfileSample | np.ndarray,
    rule: Union[AggregationRule, str],
    time_index: int | None = None,
) -> SiteStatistics:
    """Score one profile: per-site p-values and their aggregate."""
    rule = _coerce_rule(rule)
    if time_index is None:
        time_index = profile.time_index if isinstance(profile, ProfileSample) else 0
    p = site_p_values(model, profile)
    agg = aggregate(p, rule)
    return SiteStatistics(time_index=time_index, p_values=p, aggregated=agg, rule=rule)


def score_profiles(model: GaussianModel, profiles: ProfileBatch, rule: Union[AggregationRule, str]) -> np.ndarray:
    """Aggregated monitoring statistic for a batch; shape (m,).

    This is the hot path shared by calibration and simulation; the z-score
    construction is one matrix product and the rest runs in the selected
    kernel backend.
    """
    rule = _coerce_rule(rule)
    z = model.standardized_residuals(profiles)
    return kernels.aggregate_from_z(z, rule.code)


def monitor_stream(
    model: GaussianModel,
    stream: Iterable[ProfileSample | np.ndarray],
    stop: StoppingRule,
    cap: int,
    changepoint: int = 0,
    multi_alarm: bool = False,
) -> RunLengthRecord:
    """Feed profiles through the chart until detection, cap, or exhaustion.

    Steps are numbered 1, 2, ... in arrival order. With multi_alarm=True,
    alarms at steps <= changepoint are recorded as false alarms and the
    run continues; the first alarm after the changepoint is the detection.
    With multi_alarm=False the first alarm of any kind ends the run.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if changepoint < 0:
        raise ValueError("changepoint must be >= 0")
    false_alarms: list[int] = []
    steps = 0
    for t, profile in enumerate(stream, start=1):
        steps = t
        values = profile.values if isinstance(profile, ProfileSample) else np.asarray(profile, dtype=np.float64)
        agg = score_profiles(model, values[np.newaxis, :], stop.rule)[0]
        if agg < stop.limit:
            if multi_alarm and t <= changepoint:
                false_alarms.append(t)
            else:
                return RunLengthRecord(
                    alarm_time=t,
                    truncated=False,
                    false_alarm_times=tuple(false_alarms),
                    limit=stop.limit,
                    steps=t,
                )
        if t >= cap:
            break
    return RunLengthRecord(
        alarm_time=None,
        truncated=True,
        false_alarm_times=tuple(false_alarms),
        limit=stop.limit,
        steps=steps,
    )
