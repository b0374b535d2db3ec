"""Benchmark charts: Hotelling T-squared and its PCA-reduced variant.

Both reduce a profile to a single quadratic-form statistic and alarm when
it exceeds an upper limit (the opposite direction from the p-value chart,
whose statistic drops when something is wrong). Limits come either from a
known reference distribution or from calibrate_to_far, which matches any
chart's per-step false-alarm rate by Monte Carlo.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import CalibrationError, SingularCovarianceError
from .gaussian import GaussianModel, ProfileBatch, ProfileSample, estimate_moments, profile_matrix
from .processes import MonitorGrid, ProcessSpec, draw_profiles

# Relative eigenvalue threshold below which a principal direction is
# treated as numerically degenerate.
_EIG_RTOL = 1e-12


def t2_statistics(model: GaussianModel, profiles: ProfileBatch) -> np.ndarray:
    """Hotelling statistic d' Sigma^-1 d for each profile; shape (m,)."""
    mat = profile_matrix(profiles)
    if mat.shape[1] != model.n_sites:
        raise ValueError(f"profiles have {mat.shape[1]} sites, model has {model.n_sites}")
    d = mat - model.mean
    w = linalg.solve_triangular(model.chol, d.T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", w, w)


def t2_statistic(model: GaussianModel, profile: ProfileSample | np.ndarray) -> float:
    """Hotelling statistic of a single profile."""
    values = profile.values if isinstance(profile, ProfileSample) else np.asarray(profile, dtype=np.float64)
    return float(t2_statistics(model, values[np.newaxis, :])[0])


@dataclass(frozen=True)
class T2Chart:
    """Hotelling chart: alarm when d' Sigma^-1 d exceeds the limit."""

    model: GaussianModel
    limit: float | None = None

    def __post_init__(self) -> None:
        if self.limit is not None and not self.limit > 0.0:
            raise ValueError(f"limit must be > 0, got {self.limit}")

    def statistics(self, profiles: ProfileBatch) -> np.ndarray:
        return t2_statistics(self.model, profiles)

    def statistic(self, profile: ProfileSample | np.ndarray) -> float:
        return t2_statistic(self.model, profile)

    def alarms(self, profiles: ProfileBatch) -> np.ndarray:
        if self.limit is None:
            raise ValueError("chart has no limit yet; calibrate first")
        return self.statistics(profiles) > self.limit

    def with_limit(self, limit: float) -> "T2Chart":
        return dataclasses.replace(self, limit=float(limit))


@dataclass(frozen=True)
class PcaChart:
    """T-squared on the leading principal-component scores.

    Profiles are centered, projected on q eigenvectors of the covariance,
    and each score is weighted by the reciprocal of its eigenvalue. With
    q = n this reproduces the full Hotelling statistic.
    """

    center: np.ndarray
    loadings: np.ndarray
    score_vars: np.ndarray
    limit: float | None = None

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=np.float64).reshape(-1)
        loadings = np.asarray(self.loadings, dtype=np.float64)
        score_vars = np.asarray(self.score_vars, dtype=np.float64).reshape(-1)
        n = center.size
        if loadings.shape != (n, score_vars.size) or not 1 <= score_vars.size <= n:
            raise ValueError("loadings must be (n_sites, q) with 1 <= q <= n_sites")
        if not np.all(score_vars > 0.0):
            raise ValueError("score variances must be positive")
        if self.limit is not None and not self.limit > 0.0:
            raise ValueError(f"limit must be > 0, got {self.limit}")
        for arr in (center, loadings, score_vars):
            arr.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "loadings", loadings)
        object.__setattr__(self, "score_vars", score_vars)

    @property
    def q(self) -> int:
        return self.score_vars.size

    @classmethod
    def from_model(cls, model: GaussianModel, variance_fraction: float = 0.9) -> "PcaChart":
        """Retain the smallest q leading components whose eigenvalues sum
        to at least variance_fraction of the total variance."""
        if not 0.0 < variance_fraction <= 1.0:
            raise ValueError(f"variance_fraction must be in (0, 1], got {variance_fraction}")
        eigvals, eigvecs = linalg.eigh(model.covariance, check_finite=False)
        eigvals = eigvals[::-1]
        eigvecs = eigvecs[:, ::-1]
        total = float(eigvals.sum())
        cum = np.cumsum(eigvals) / total
        q = int(np.argmax(cum >= variance_fraction * (1.0 - 1e-12))) + 1
        retained = eigvals[:q]
        if retained[-1] <= _EIG_RTOL * max(retained[0], 0.0):
            raise SingularCovarianceError(
                f"component {q} has numerically zero variance; historical data are rank deficient"
            )
        loadings = eigvecs[:, :q].copy()
        # fix the sign of each component for reproducibility
        flips = np.sign(loadings[np.argmax(np.abs(loadings), axis=0), np.arange(q)])
        loadings *= flips
        return cls(center=model.mean.copy(), loadings=loadings, score_vars=retained.copy())

    def statistics(self, profiles: ProfileBatch) -> np.ndarray:
        mat = profile_matrix(profiles)
        if mat.shape[1] != self.center.size:
            raise ValueError(f"profiles have {mat.shape[1]} sites, chart has {self.center.size}")
        scores = (mat - self.center) @ self.loadings
        scores *= scores
        scores /= self.score_vars
        return scores.sum(axis=1)

    def statistic(self, profile: ProfileSample | np.ndarray) -> float:
        values = profile.values if isinstance(profile, ProfileSample) else np.asarray(profile, dtype=np.float64)
        return float(self.statistics(values[np.newaxis, :])[0])

    def alarms(self, profiles: ProfileBatch) -> np.ndarray:
        if self.limit is None:
            raise ValueError("chart has no limit yet; calibrate first")
        return self.statistics(profiles) > self.limit

    def with_limit(self, limit: float) -> "PcaChart":
        return dataclasses.replace(self, limit=float(limit))


def pca_chart_fit(historical: ProfileBatch, variance_fraction: float = 0.9) -> PcaChart:
    """Fit center and components from historical profiles."""
    return PcaChart.from_model(estimate_moments(historical), variance_fraction)


def calibrate_to_far(
    chart: T2Chart | PcaChart,
    in_control_spec: ProcessSpec,
    grid: MonitorGrid,
    target_far: float,
    reps: int,
    rng: np.random.Generator,
    batch: int = 100_000,
) -> float:
    """Upper limit putting the chart's per-step false-alarm rate at
    target_far under the given in-control process.

    Monte Carlo: draw reps in-control profiles, take the (1 - target_far)
    quantile of the statistic. Requires reps * target_far >= 10 so the
    tail is actually resolved; a target of 0 (ARL0 = infinity) is
    unattainable by any finite draw.
    """
    if not 0.0 < target_far < 1.0:
        raise CalibrationError(f"target_far must be in (0, 1), got {target_far}")
    if reps * target_far < 10.0:
        raise CalibrationError(
            f"reps={reps} cannot resolve target_far={target_far:g}; need at least {math.ceil(10.0 / target_far)}"
        )
    stats = np.empty(reps)
    pos = 0
    while pos < reps:
        c = min(batch, reps - pos)
        profs = draw_profiles(in_control_spec, grid, c, rng)
        stats[pos : pos + c] = chart.statistics(profs)
        pos += c
    return float(np.quantile(stats, 1.0 - target_far))
