"""Experiment runner: replicated FAR/ARL1 studies, run-length
verification tables, CSV-driven monitoring, and report emission.

run_scenario is the replication engine: per replication it draws fresh
historical profiles, calibrates every requested chart on them, then feeds
one shared profile stream (in-control through the changepoint, the
out-of-control regime afterwards) to all charts at once. Alarms at or
before the changepoint are false alarms and monitoring continues; the
first later alarm is the detection. Each replication owns a child RNG
stream spawned from (seed, replication index), so reports are
byte-identical across runs and across worker counts.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from ._backend import kernels
from .calibration import (
    BootstrapPlan,
    RunLengthSummary,
    _bootstrap_calibrate_multi,
    geometric_limit_check,
)
from .competitors import PcaChart, T2Chart, calibrate_to_far, pca_chart_fit
from .errors import (
    CalibrationError,
    ConfigError,
    CsvFormatError,
    InsufficientSamplesError,
    InvalidOrderIndexError,
    SingularCovarianceError,
)
from .gaussian import estimate_moments
from .monitor import AggregationRule, _coerce_rule
from .processes import (
    MonitorGrid,
    ProcessSpec,
    draw_profiles,
    grid_from_dict,
    grid_to_dict,
    spec_from_dict,
    spec_to_dict,
)

_CALIBRATION_ERRORS = (
    CalibrationError,
    InsufficientSamplesError,
    InvalidOrderIndexError,
    SingularCovarianceError,
)

_BLOCK = 512

CHART_KINDS = ("pvalue", "t2", "pca")


@dataclass(frozen=True)
class Scenario:
    """In-control and out-of-control process pair."""

    in_control: ProcessSpec
    out_of_control: ProcessSpec


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one simulation experiment needs, and nothing runtime.

    cap is the hard stop per replication; changepoint is the step after
    which profiles come from the out-of-control process. charts picks the
    chart families to run ("pvalue" plus optionally "t2" and "pca").
    """

    scenario: Scenario
    grid: MonitorGrid
    m: int
    arl0: int
    plan: BootstrapPlan
    rules: tuple[AggregationRule, ...]
    reps: int
    cap: int = 25_000
    changepoint: int = 0
    seed: int = 0
    charts: tuple[str, ...] = ("pvalue",)
    t2_calib_reps: int = 100_000
    pca_variance_fraction: float = 0.9

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not self.cap > self.changepoint >= 0:
            raise ConfigError(f"need cap > changepoint >= 0, got cap={self.cap}, changepoint={self.changepoint}")
        if self.m < 2:
            raise ConfigError("m must be >= 2")
        if self.arl0 < 2:
            raise ConfigError("arl0 must be >= 2")
        if self.plan.arl0 != self.arl0:
            raise ConfigError(f"plan.arl0={self.plan.arl0} disagrees with config arl0={self.arl0}")
        rules = tuple(_coerce_rule(r) for r in self.rules)
        if not rules:
            raise ConfigError("need at least one aggregation rule")
        object.__setattr__(self, "rules", rules)
        charts = tuple(self.charts)
        for c in charts:
            if c not in CHART_KINDS:
                raise ConfigError(f"unknown chart {c!r}; expected subset of {CHART_KINDS}")
        if "pvalue" not in charts:
            raise ConfigError("the p-value chart is the subject of every experiment; include 'pvalue'")
        object.__setattr__(self, "charts", charts)
        if self.t2_calib_reps * (1.0 / self.arl0) < 10:
            raise ConfigError("t2_calib_reps too small to calibrate at 1/arl0")
        if not 0.0 < self.pca_variance_fraction <= 1.0:
            raise ConfigError("pca_variance_fraction must be in (0, 1]")


@dataclass(frozen=True)
class ChartResult:
    """Pooled outcome of one chart across all replications."""

    chart: str
    rule: str | None
    n_reps: int
    calibration_failures: int
    n_alarmed: int
    truncated_count: int
    arl1_hat: float | None
    arl1_se: float | None
    arl1_lower_bound: bool
    false_alarm_count: int
    pre_change_steps: int
    far_hat: float | None


@dataclass(frozen=True)
class ScenarioReport:
    """Config echo plus one ChartResult per (chart, rule)."""

    config: dict
    results: tuple[ChartResult, ...]

    def result(self, chart: str, rule: Union[AggregationRule, str, None] = None) -> ChartResult:
        want = _coerce_rule(rule).value if rule is not None else None
        for r in self.results:
            if r.chart == chart and (want is None or r.rule == want):
                return r
        raise KeyError(f"no result for chart={chart!r}, rule={rule!r}")


# --------------------------------------------------------------------------
# config (de)serialization


def config_to_dict(config: ExperimentConfig) -> dict:
    plan = {
        "m_star": config.plan.m_star,
        "b1": config.plan.b1,
        "b2": config.plan.b2,
        "arl0": config.plan.arl0,
    }
    if config.plan.inner_size is not None:
        plan["inner_size"] = config.plan.inner_size
    return {
        "scenario": {
            "in_control": spec_to_dict(config.scenario.in_control),
            "out_of_control": spec_to_dict(config.scenario.out_of_control),
        },
        "grid": grid_to_dict(config.grid),
        "m": config.m,
        "arl0": config.arl0,
        "plan": plan,
        "rules": [r.value for r in config.rules],
        "reps": config.reps,
        "cap": config.cap,
        "changepoint": config.changepoint,
        "seed": config.seed,
        "charts": list(config.charts),
        "t2_calib_reps": config.t2_calib_reps,
        "pca_variance_fraction": config.pca_variance_fraction,
    }


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("experiment config must be a mapping")
    try:
        scenario = data["scenario"]
        plan_data = dict(data["plan"])
        plan_data.setdefault("arl0", data["arl0"])
        config = ExperimentConfig(
            scenario=Scenario(
                in_control=spec_from_dict(scenario["in_control"]),
                out_of_control=spec_from_dict(scenario["out_of_control"]),
            ),
            grid=grid_from_dict(data["grid"]),
            m=int(data["m"]),
            arl0=int(data["arl0"]),
            plan=BootstrapPlan(**plan_data),
            rules=tuple(data.get("rules", ["minimum", "geometric_mean"])),
            reps=int(data["reps"]),
            cap=int(data.get("cap", 25_000)),
            changepoint=int(data.get("changepoint", 0)),
            seed=int(data.get("seed", 0)),
            charts=tuple(data.get("charts", ["pvalue"])),
            t2_calib_reps=int(data.get("t2_calib_reps", 100_000)),
            pca_variance_fraction=float(data.get("pca_variance_fraction", 0.9)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment config: {exc}") from exc
    return config


def _load_toml(text: str) -> dict:
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        tomllib = None
    if tomllib is not None:
        return tomllib.loads(text)
    try:
        import tomli

        return tomli.loads(text)
    except ModuleNotFoundError:
        pass
    try:
        import toml

        return toml.loads(text)
    except ModuleNotFoundError:
        raise ConfigError(
            "no TOML parser available (need Python >= 3.11, tomli, or toml); JSON configs always work"
        ) from None


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read an experiment config from a JSON or TOML file."""
    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() == ".toml":
        data = _load_toml(text)
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: not valid JSON ({exc}); use .toml for TOML configs") from exc
    return config_from_dict(data)


# --------------------------------------------------------------------------
# replication engine


class _ChartState:
    """Mutable per-replication monitoring state of one chart."""

    __slots__ = ("key", "alarm_time", "false_alarms", "active")

    def __init__(self, key: tuple[str, str | None]):
        self.key = key
        self.alarm_time: int | None = None
        self.false_alarms = 0
        self.active = True

    def update(self, hits: np.ndarray, start: int, changepoint: int) -> None:
        """Consume alarm flags of the block covering steps start+1 .. start+len."""
        if not self.active:
            return
        (idx,) = np.nonzero(hits)
        for i in idx:
            t = start + int(i) + 1
            if t <= changepoint:
                self.false_alarms += 1
            else:
                self.alarm_time = t
                self.active = False
                break


@dataclass
class _RepOutcome:
    key: tuple[str, str | None]
    failed: bool = False
    alarm_time: int | None = None
    truncated: bool = False
    false_alarms: int = 0
    pre_change_steps: int = 0


def _replicate(config: ExperimentConfig, seed_seq: np.random.SeedSequence) -> list[_RepOutcome]:
    """One full replication: calibrate all charts, monitor one stream."""
    rng = np.random.default_rng(seed_seq)
    grid = config.grid
    in_spec = config.scenario.in_control
    out_spec = config.scenario.out_of_control
    hist = draw_profiles(in_spec, grid, config.m, rng)

    outcomes = [_RepOutcome(key=("pvalue", r.value)) for r in config.rules]
    monitor_model = None
    pvalue_limits: dict[str, float] = {}
    try:
        monitor_model, charts = _bootstrap_calibrate_multi(hist, config.plan, config.rules, rng)
        pvalue_limits = {r.value: charts[r].limit for r in config.rules}
    except _CALIBRATION_ERRORS:
        for o in outcomes:
            o.failed = True
        monitor_model = None

    t2_chart = None
    if "t2" in config.charts:
        out = _RepOutcome(key=("t2", None))
        outcomes.append(out)
        try:
            chart = T2Chart(estimate_moments(hist))
            t2_chart = chart.with_limit(
                calibrate_to_far(chart, in_spec, grid, 1.0 / config.arl0, config.t2_calib_reps, rng)
            )
        except _CALIBRATION_ERRORS:
            out.failed = True

    pca_chart = None
    if "pca" in config.charts:
        out = _RepOutcome(key=("pca", None))
        outcomes.append(out)
        try:
            chart = pca_chart_fit(hist, config.pca_variance_fraction)
            pca_chart = chart.with_limit(
                calibrate_to_far(chart, in_spec, grid, 1.0 / config.arl0, config.t2_calib_reps, rng)
            )
        except _CALIBRATION_ERRORS:
            out.failed = True

    draw_pre = lambda count: draw_profiles(in_spec, grid, count, rng)
    draw_post = lambda count: draw_profiles(out_spec, grid, count, rng)
    _monitor_all(
        outcomes,
        monitor_model,
        pvalue_limits,
        t2_chart,
        pca_chart,
        config.rules,
        draw_pre,
        draw_post,
        config.changepoint,
        config.cap,
    )
    return outcomes


def _monitor_all(
    outcomes: list[_RepOutcome],
    monitor_model,
    pvalue_limits: dict[str, float],
    t2_chart,
    pca_chart,
    rules: Sequence[AggregationRule],
    draw_pre: Callable[[int], np.ndarray],
    draw_post: Callable[[int], np.ndarray],
    changepoint: int,
    cap: int,
    block: int = _BLOCK,
) -> None:
    """Drive every non-failed chart over one shared profile stream."""
    states: dict[tuple[str, str | None], _ChartState] = {}
    for o in outcomes:
        if not o.failed:
            states[o.key] = _ChartState(o.key)
    if not states:
        return
    rule_by_value = {r.value: r for r in rules}
    t = 0
    while t < cap and any(s.active for s in states.values()):
        if t < changepoint:
            count = min(block, changepoint - t)
            profs = draw_pre(count)
        else:
            count = min(block, cap - t)
            profs = draw_post(count)
        z = None
        if monitor_model is not None and any(s.active and s.key[0] == "pvalue" for s in states.values()):
            z = monitor_model.standardized_residuals(profs)
        for state in states.values():
            if not state.active:
                continue
            kind, rule_value = state.key
            if kind == "pvalue":
                agg = kernels.aggregate_from_z(z, rule_by_value[rule_value].code)
                hits = agg < pvalue_limits[rule_value]
            elif kind == "t2":
                hits = t2_chart.statistics(profs) > t2_chart.limit
            else:
                hits = pca_chart.statistics(profs) > pca_chart.limit
            state.update(hits, t, changepoint)
        t += count
    for o in outcomes:
        if o.failed:
            continue
        state = states[o.key]
        o.alarm_time = state.alarm_time
        o.truncated = state.alarm_time is None
        o.false_alarms = state.false_alarms
        o.pre_change_steps = changepoint


def _replicate_worker(args: tuple[ExperimentConfig, np.random.SeedSequence]) -> list[_RepOutcome]:
    return _replicate(*args)


def _pool_results(config: ExperimentConfig, per_rep: list[list[_RepOutcome]]) -> ScenarioReport:
    keys: list[tuple[str, str | None]] = [("pvalue", r.value) for r in config.rules]
    for kind in ("t2", "pca"):
        if kind in config.charts:
            keys.append((kind, None))
    results = []
    for key in keys:
        outcomes = [o for rep in per_rep for o in rep if o.key == key]
        failures = sum(o.failed for o in outcomes)
        live = [o for o in outcomes if not o.failed]
        detect = np.array([o.alarm_time - config.changepoint for o in live if o.alarm_time is not None], dtype=np.float64)
        truncated = sum(o.truncated for o in live)
        false_alarms = sum(o.false_alarms for o in live)
        pre_steps = sum(o.pre_change_steps for o in live)
        n_alarmed = detect.size
        arl1_hat = float(detect.mean()) if n_alarmed else None
        arl1_se = float(detect.std(ddof=1) / math.sqrt(n_alarmed)) if n_alarmed > 1 else None
        total_alarms = false_alarms + n_alarmed
        far_hat = false_alarms / total_alarms if total_alarms else None
        results.append(
            ChartResult(
                chart=key[0],
                rule=key[1],
                n_reps=len(outcomes),
                calibration_failures=failures,
                n_alarmed=int(n_alarmed),
                truncated_count=int(truncated),
                arl1_hat=arl1_hat,
                arl1_se=arl1_se,
                arl1_lower_bound=truncated > 0,
                false_alarm_count=int(false_alarms),
                pre_change_steps=int(pre_steps),
                far_hat=far_hat,
            )
        )
    return ScenarioReport(config=config_to_dict(config), results=tuple(results))


def run_scenario(config: ExperimentConfig, jobs: int = 1) -> ScenarioReport:
    """Run the replicated experiment described by config.

    jobs > 1 spreads replications over a process pool; the report is
    byte-identical either way because replication i always uses the i-th
    child of SeedSequence(config.seed).
    """
    children = np.random.SeedSequence(config.seed).spawn(config.reps)
    if jobs > 1 and config.reps > 1:
        args = [(config, child) for child in children]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, config.reps // (4 * jobs))
            per_rep = list(pool.map(_replicate_worker, args, chunksize=chunk))
    else:
        per_rep = [_replicate(config, child) for child in children]
    return _pool_results(config, per_rep)


# --------------------------------------------------------------------------
# run-length verification table


@dataclass(frozen=True)
class RunLengthTable:
    """Rows of geometric_limit_check across (distribution, m) settings."""

    arl0: float
    reps: int
    rows: tuple[RunLengthSummary, ...]

    _CSV_FIELDS = (
        "distribution",
        "m",
        "k",
        "reps",
        "sample_arl",
        "arl_se",
        "sample_sd",
        "geometric_sd",
        "willemain_sd",
        "chi2_stat",
        "chi2_pvalue",
    )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self._CSV_FIELDS)
        for row in self.rows:
            writer.writerow([_csv_cell(getattr(row, f)) for f in self._CSV_FIELDS])
        return buf.getvalue()


def runlength_verify(
    distributions: Sequence[str],
    m_values: Sequence[int],
    arl0: Union[int, float],
    reps: int,
    seed: int = 0,
) -> RunLengthTable:
    """Simulated ARL and run-length SD per (distribution, m).

    Every m must be an integer multiple of arl0. The CSV emitted by
    RunLengthTable.to_csv is plot-ready: sample ARLs against the target
    and run-length SDs against the geometric reference.
    """
    dists = list(distributions)
    ms = [int(m) for m in m_values]
    if not dists or not ms:
        raise ValueError("need at least one distribution and one m")
    children = np.random.SeedSequence(seed).spawn(len(dists) * len(ms))
    rows = []
    i = 0
    for dist in dists:
        for m in ms:
            rng = np.random.default_rng(children[i])
            i += 1
            rows.append(geometric_limit_check(m, arl0, reps, rng, distribution=dist))
    return RunLengthTable(arl0=float(arl0), reps=reps, rows=tuple(rows))


# --------------------------------------------------------------------------
# CSV-driven monitoring


def load_profiles_csv(path: Union[str, Path]) -> np.ndarray:
    """Read profiles from CSV: one row per profile, n numeric columns,
    optional single header line. Raises CsvFormatError with row/column
    diagnostics on malformed input."""
    p = Path(path)
    rows: list[list[float]] = []
    width = None
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        for lineno, record in enumerate(reader, start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            parsed = []
            bad_col = None
            for col, cell in enumerate(record, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    bad_col = col
                    break
            if bad_col is not None:
                if lineno == 1 and not rows:
                    continue  # header line
                raise CsvFormatError(
                    f"{p}: row {lineno}, column {bad_col}: cannot parse {record[bad_col - 1]!r} as a number"
                )
            if width is None:
                width = len(parsed)
            elif len(parsed) != width:
                raise CsvFormatError(f"{p}: row {lineno}: expected {width} columns, found {len(parsed)}")
            rows.append(parsed)
    if not rows:
        raise CsvFormatError(f"{p}: no data rows")
    mat = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(mat)):
        bad = np.argwhere(~np.isfinite(mat))[0]
        raise CsvFormatError(f"{p}: non-finite value near data row {bad[0] + 1}, column {bad[1] + 1}")
    return mat


@dataclass(frozen=True)
class CsvMonitorConfig:
    """Settings of a CSV-driven monitoring study (no process specs; the
    data pools play that role)."""

    arl0: int
    plan: BootstrapPlan
    rules: tuple[AggregationRule, ...]
    reps: int
    cap: int = 25_000
    changepoint: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not self.cap > self.changepoint >= 0:
            raise ConfigError(f"need cap > changepoint >= 0, got cap={self.cap}, changepoint={self.changepoint}")
        if self.plan.arl0 != self.arl0:
            raise ConfigError(f"plan.arl0={self.plan.arl0} disagrees with arl0={self.arl0}")
        rules = tuple(_coerce_rule(r) for r in self.rules)
        if not rules:
            raise ConfigError("need at least one aggregation rule")
        object.__setattr__(self, "rules", rules)


def _pool_cycler(pool: np.ndarray, rng: np.random.Generator) -> Callable[[int], np.ndarray]:
    """Endless profile source: random permutations of the pool, a fresh
    permutation each time the pool is exhausted."""
    buffer = np.empty((0, pool.shape[1]))
    pos = 0

    def draw(count: int) -> np.ndarray:
        nonlocal buffer, pos
        chunks = []
        need = count
        while need > 0:
            if pos >= buffer.shape[0]:
                buffer = pool[rng.permutation(pool.shape[0])]
                pos = 0
            take = min(need, buffer.shape[0] - pos)
            chunks.append(buffer[pos : pos + take])
            pos += take
            need -= take
        return np.concatenate(chunks, axis=0) if len(chunks) > 1 else chunks[0]

    return draw


def monitor_csv(
    historical_path: Union[str, Path],
    online_path: Union[str, Path],
    config: CsvMonitorConfig,
) -> ScenarioReport:
    """Calibrate on a historical CSV pool, then repeatedly monitor random
    permutations of the online pool until alarm or cap.

    Replication r permutes the online pool afresh (with replacement
    across replications); a changepoint > 0 prefixes the stream with
    permuted historical profiles so false alarms can be studied too.
    """
    hist = load_profiles_csv(historical_path)
    online = load_profiles_csv(online_path)
    if online.shape[1] != hist.shape[1]:
        raise CsvFormatError(
            f"column mismatch: historical has {hist.shape[1]} sites, online has {online.shape[1]}"
        )
    root = np.random.SeedSequence(config.seed)
    calib_rng = np.random.default_rng(root.spawn(1)[0])
    monitor_model, charts = _bootstrap_calibrate_multi(hist, config.plan, config.rules, calib_rng)
    pvalue_limits = {r.value: charts[r].limit for r in config.rules}

    children = np.random.SeedSequence((config.seed, 1)).spawn(config.reps)
    per_rep: list[list[_RepOutcome]] = []
    for child in children:
        rng = np.random.default_rng(child)
        outcomes = [_RepOutcome(key=("pvalue", r.value)) for r in config.rules]
        draw_pre = _pool_cycler(hist, rng)
        draw_post = _pool_cycler(online, rng)
        _monitor_all(
            outcomes,
            monitor_model,
            pvalue_limits,
            None,
            None,
            config.rules,
            draw_pre,
            draw_post,
            config.changepoint,
            config.cap,
        )
        per_rep.append(outcomes)

    keys = [("pvalue", r.value) for r in config.rules]
    results = []
    for key in keys:
        outcomes = [o for rep in per_rep for o in rep if o.key == key]
        live = [o for o in outcomes if not o.failed]
        detect = np.array(
            [o.alarm_time - config.changepoint for o in live if o.alarm_time is not None], dtype=np.float64
        )
        truncated = sum(o.truncated for o in live)
        false_alarms = sum(o.false_alarms for o in live)
        n_alarmed = detect.size
        arl1_hat = float(detect.mean()) if n_alarmed else None
        arl1_se = float(detect.std(ddof=1) / math.sqrt(n_alarmed)) if n_alarmed > 1 else None
        total_alarms = false_alarms + n_alarmed
        results.append(
            ChartResult(
                chart=key[0],
                rule=key[1],
                n_reps=len(outcomes),
                calibration_failures=0,
                n_alarmed=int(n_alarmed),
                truncated_count=int(truncated),
                arl1_hat=arl1_hat,
                arl1_se=arl1_se,
                arl1_lower_bound=truncated > 0,
                false_alarm_count=int(false_alarms),
                pre_change_steps=int(sum(o.pre_change_steps for o in live)),
                far_hat=false_alarms / total_alarms if total_alarms else None,
            )
        )
    config_echo = {
        "historical": str(historical_path),
        "online": str(online_path),
        "m": int(hist.shape[0]),
        "online_pool": int(online.shape[0]),
        "n_sites": int(hist.shape[1]),
        "arl0": config.arl0,
        "plan": {
            "m_star": config.plan.m_star,
            "b1": config.plan.b1,
            "b2": config.plan.b2,
            "arl0": config.plan.arl0,
        },
        "rules": [r.value for r in config.rules],
        "reps": config.reps,
        "cap": config.cap,
        "changepoint": config.changepoint,
        "seed": config.seed,
    }
    return ScenarioReport(config=config_echo, results=tuple(results))


# --------------------------------------------------------------------------
# report emission


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _xi_of_spec_dict(spec: dict) -> float | None:
    if not isinstance(spec, dict):
        return None
    if "xi" in spec:
        return spec["xi"]
    if spec.get("kind") == "trajectory_switch":
        return spec.get("base", {}).get("coef_mean")
    return None


_REPORT_CSV_FIELDS = (
    "chart",
    "rule",
    "xi",
    "n_reps",
    "calibration_failures",
    "n_alarmed",
    "truncated_count",
    "arl1_hat",
    "arl1_se",
    "arl1_lower_bound",
    "false_alarm_count",
    "pre_change_steps",
    "far_hat",
)


def report_to_dict(report: ScenarioReport) -> dict:
    return {
        "config": report.config,
        "results": [dataclasses.asdict(r) for r in report.results],
    }


def emit_report(report: ScenarioReport, format: str = "json") -> bytes:
    """Serialize a report; JSON round-trips through parse_report, CSV is
    one row per (chart, rule) with the scenario's shift size."""
    if format == "json":
        return (json.dumps(report_to_dict(report), indent=2) + "\n").encode()
    if format == "csv":
        xi = _xi_of_spec_dict(report.config.get("scenario", {}).get("out_of_control", {}))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_REPORT_CSV_FIELDS)
        for r in report.results:
            row = dataclasses.asdict(r)
            row["xi"] = xi
            writer.writerow([_csv_cell(row[f]) for f in _REPORT_CSV_FIELDS])
        return buf.getvalue().encode()
    raise ValueError(f"unknown report format {format!r}; expected 'json' or 'csv'")


def parse_report(data: bytes) -> ScenarioReport:
    """Inverse of emit_report for the JSON format."""
    try:
        payload = json.loads(data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"not a JSON report: {exc}") from exc
    if not isinstance(payload, dict) or "results" not in payload or "config" not in payload:
        raise ValueError("not a report payload: missing 'config'/'results'")
    results = tuple(ChartResult(**r) for r in payload["results"])
    return ScenarioReport(config=payload["config"], results=results)
