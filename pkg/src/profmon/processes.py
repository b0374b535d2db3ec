"""Random-function generators observed at fixed monitor sites.

A process turns a monitor grid plus a random generator into profiles:
basis-expansion trajectories with Gaussian coefficients plus i.i.d.
Gaussian observation noise. Besides the two in-control families (sine and
degree-6 monomial) there are three out-of-control regimes: a global mean
shift, a single broken monitor channel that fades into white noise, and a
trajectory that reflects about its value at a pivot site.

Draw order within a batch is fixed (coefficients, then noise, then any
regime-specific variates), so draws are reproducible for a given seed
independent of anything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedProcessError
from .gaussian import GaussianModel, ProfileSample

TWO_PI = 2.0 * math.pi

# Observation window of the sine studies; endpoints stay clear of the
# sine zeros at 0 and 2*pi where profiles carry no signal.
SINE_DOMAIN = (0.1, TWO_PI - 0.1)
UNIT_DOMAIN = (0.0, 1.0)

DEFAULT_N_SITES = 10
DEFAULT_NOISE_SD = 0.1


@dataclass(frozen=True, eq=False)
class MonitorGrid:
    """Fixed sites at which every profile is observed."""

    sites: np.ndarray
    domain: tuple[float, float] = SINE_DOMAIN

    def __eq__(self, other) -> bool:
        if not isinstance(other, MonitorGrid):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self.sites, other.sites)

    def __hash__(self) -> int:
        return hash((self.sites.tobytes(), self.domain))

    def __post_init__(self) -> None:
        sites = np.asarray(self.sites, dtype=np.float64)
        if sites.ndim != 1 or sites.size < 2:
            raise ValueError("grid needs at least 2 sites")
        if not np.all(np.isfinite(sites)):
            raise ValueError("sites must be finite")
        if np.any(np.diff(sites) <= 0):
            raise ValueError("sites must be strictly increasing")
        lo, hi = self.domain
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"invalid domain {self.domain}")
        if sites[0] < lo or sites[-1] > hi:
            raise ValueError("sites must lie inside the domain")
        sites.flags.writeable = False
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "domain", (float(lo), float(hi)))

    @classmethod
    def equispaced(cls, n: int = DEFAULT_N_SITES, domain: tuple[float, float] = SINE_DOMAIN) -> "MonitorGrid":
        if n < 2:
            raise ValueError("need at least 2 sites")
        lo, hi = domain
        return cls(sites=np.linspace(lo, hi, n), domain=domain)

    @property
    def n_sites(self) -> int:
        return self.sites.size


class ProcessSpec:
    """Base class; concrete specs implement draw(grid, count, rng)."""

    def draw(self, grid: MonitorGrid, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


def _check_draw_args(grid: MonitorGrid, count: int) -> None:
    if not isinstance(grid, MonitorGrid):
        raise TypeError("grid must be a MonitorGrid")
    if count < 1:
        raise ValueError("count must be >= 1")


def _check_noise(noise_sd: float) -> None:
    if not noise_sd > 0.0:
        raise ValueError(f"noise_sd must be > 0, got {noise_sd}")


@dataclass(frozen=True)
class SineProcess(ProcessSpec):
    """y(x) = alpha * sin(x) + noise with alpha ~ N(coef_mean, coef_sd^2)."""

    coef_mean: float = 0.0
    coef_sd: float = 1.0
    noise_sd: float = DEFAULT_NOISE_SD

    def __post_init__(self) -> None:
        _check_noise(self.noise_sd)
        if self.coef_sd < 0.0:
            raise ValueError("coef_sd must be >= 0")

    def draw(self, grid: MonitorGrid, count: int, rng: np.random.Generator) -> np.ndarray:
        _check_draw_args(grid, count)
        alphas = rng.normal(self.coef_mean, self.coef_sd, size=count)
        noise = rng.normal(0.0, self.noise_sd, size=(count, grid.n_sites))
        out = alphas[:, np.newaxis] * np.sin(grid.sites)
        out += noise
        return out


@dataclass(frozen=True)
class MonomialProcess(ProcessSpec):
    """y(x) = sum_k alpha_k x^k + noise, alpha_k i.i.d. N(coef_mean, coef_sd^2)."""

    degree: int = 6
    coef_mean: float = 0.0
    coef_sd: float = 1.0
    noise_sd: float = DEFAULT_NOISE_SD

    def __post_init__(self) -> None:
        _check_noise(self.noise_sd)
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if self.coef_sd < 0.0:
            raise ValueError("coef_sd must be >= 0")

    def _basis(self, grid: MonitorGrid) -> np.ndarray:
        return np.vander(grid.sites, N=self.degree + 1, increasing=True)

    def draw(self, grid: MonitorGrid, count: int, rng: np.random.Generator) -> np.ndarray:
        _check_draw_args(grid, count)
        coefs = rng.normal(self.coef_mean, self.coef_sd, size=(count, self.degree + 1))
        noise = rng.normal(0.0, self.noise_sd, size=(count, grid.n_sites))
        out = coefs @ self._basis(grid).T
        out += noise
        return out


@dataclass(frozen=True)
class GlobalShift(ProcessSpec):
    """Base process with a constant xi added at every site."""

    base: ProcessSpec
    xi: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.xi):
            raise ValueError("xi must be finite")

    def draw(self, grid: MonitorGrid, count: int, rng: np.random.Generator) -> np.ndarray:
        out = self.base.draw(grid, count, rng)
        out += self.xi
        return out


@dataclass(frozen=True)
class BrokenMonitor(ProcessSpec):
    """One site's reading fades into independent standard noise.

    At the broken site the observation is (1-xi) * y_base + xi * Z with
    Z ~ N(0,1); xi = 1 severs the site from the profile entirely.
    """

    base: ProcessSpec
    xi: float
    site: int = 2

    def __post_init__(self) -> None:
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must be in [0, 1], got {self.xi}")
        if self.site < 0:
            raise ValueError("site must be >= 0")

    def draw(self, grid: MonitorGrid, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.site >= grid.n_sites:
            raise ValueError(f"broken site {self.site} out of range for {grid.n_sites} sites")
        out = self.base.draw(grid, count, rng)
        z = rng.standard_normal(count)
        out[:, self.site] *= 1.0 - self.xi
        out[:, self.site] += self.xi * z
        return out


@dataclass(frozen=True)
class TrajectorySwitch(ProcessSpec):
    """Trajectory reflected about its value at a pivot site.

    Sites after the pivot observe 2 f(x_pivot) - f(x) plus noise; sites up
    to and including the pivot observe f(x) plus noise.
    """

    base: MonomialProcess
    pivot_site: int = 5

    def __post_init__(self) -> None:
        if not isinstance(self.base, MonomialProcess):
            raise TypeError("trajectory switch is defined for monomial bases")
        if self.pivot_site < 0:
            raise ValueError("pivot_site must be >= 0")

    def draw(self, grid: MonitorGrid, count: int, rng: np.random.Generator) -> np.ndarray:
        _check_draw_args(grid, count)
        if self.pivot_site >= grid.n_sites:
            raise ValueError(f"pivot site {self.pivot_site} out of range for {grid.n_sites} sites")
        coefs = rng.normal(self.base.coef_mean, self.base.coef_sd, size=(count, self.base.degree + 1))
        noise = rng.normal(0.0, self.base.noise_sd, size=(count, grid.n_sites))
        smooth = coefs @ self.base._basis(grid).T
        pivot_vals = smooth[:, self.pivot_site][:, np.newaxis]
        after = np.arange(grid.n_sites) > self.pivot_site
        out = np.where(after, 2.0 * pivot_vals - smooth, smooth)
        out += noise
        return out


def draw_profiles(spec: ProcessSpec, grid: MonitorGrid, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw count profiles as an (count, n_sites) matrix."""
    _check_draw_args(grid, count)
    return spec.draw(grid, count, rng)


def draw_profile(
    spec: ProcessSpec, grid: MonitorGrid, rng: np.random.Generator, time_index: int = 0
) -> ProfileSample:
    """Draw a single profile."""
    return ProfileSample(values=spec.draw(grid, 1, rng)[0], time_index=time_index)


def true_model(spec: ProcessSpec, grid: MonitorGrid) -> GaussianModel:
    """Exact population moments of a process on a grid.

    Available for the basis-expansion families and their global shift;
    the broken-monitor and trajectory-switch regimes are rejected so that
    studies cannot silently score against a law those regimes do not
    follow.
    """
    if isinstance(spec, SineProcess):
        s = np.sin(grid.sites)
        mean = spec.coef_mean * s
        cov = (spec.coef_sd**2) * np.outer(s, s) + (spec.noise_sd**2) * np.eye(grid.n_sites)
        return GaussianModel(mean, cov)
    if isinstance(spec, MonomialProcess):
        basis = spec._basis(grid)
        mean = spec.coef_mean * basis.sum(axis=1)
        cov = (spec.coef_sd**2) * (basis @ basis.T) + (spec.noise_sd**2) * np.eye(grid.n_sites)
        return GaussianModel(mean, cov)
    if isinstance(spec, GlobalShift):
        base = true_model(spec.base, grid)
        return GaussianModel(base.mean + spec.xi, base.covariance)
    raise UnsupportedProcessError(f"no closed-form moments for {type(spec).__name__}")


def snr_table(
    xi_values,
    grid: MonitorGrid | None = None,
    noise_sd: float = DEFAULT_NOISE_SD,
    coef_sd: float = 1.0,
    decimals: int | None = None,
) -> np.ndarray:
    """Signal-to-noise ratio of a global shift on the sine process.

    Entry (i, j) is xi_i / sd(Y at site j) with sd^2 = coef_sd^2 sin^2 x_j
    + noise_sd^2: the shift measured in marginal standard deviations.
    Optionally rounded to a fixed number of decimals for display.
    """
    if grid is None:
        grid = MonitorGrid.equispaced()
    xi = np.asarray(xi_values, dtype=np.float64).reshape(-1)
    if xi.size == 0:
        raise ValueError("need at least one shift size")
    sd = np.sqrt(coef_sd**2 * np.sin(grid.sites) ** 2 + noise_sd**2)
    table = xi[:, np.newaxis] / sd
    if decimals is not None:
        table = np.round(table, decimals)
    return table


_SPEC_KINDS = {
    "sine": SineProcess,
    "monomial": MonomialProcess,
    "global_shift": GlobalShift,
    "broken_monitor": BrokenMonitor,
    "trajectory_switch": TrajectorySwitch,
}


def spec_to_dict(spec: ProcessSpec) -> dict:
    """JSON-ready description of a process; inverse of spec_from_dict."""
    if isinstance(spec, SineProcess):
        return {"kind": "sine", "coef_mean": spec.coef_mean, "coef_sd": spec.coef_sd, "noise_sd": spec.noise_sd}
    if isinstance(spec, MonomialProcess):
        return {
            "kind": "monomial",
            "degree": spec.degree,
            "coef_mean": spec.coef_mean,
            "coef_sd": spec.coef_sd,
            "noise_sd": spec.noise_sd,
        }
    if isinstance(spec, GlobalShift):
        return {"kind": "global_shift", "xi": spec.xi, "base": spec_to_dict(spec.base)}
    if isinstance(spec, BrokenMonitor):
        return {"kind": "broken_monitor", "xi": spec.xi, "site": spec.site, "base": spec_to_dict(spec.base)}
    if isinstance(spec, TrajectorySwitch):
        return {"kind": "trajectory_switch", "pivot_site": spec.pivot_site, "base": spec_to_dict(spec.base)}
    raise UnsupportedProcessError(f"cannot serialize {type(spec).__name__}")


def spec_from_dict(data: dict) -> ProcessSpec:
    """Rebuild a process from its dict form."""
    if not isinstance(data, dict) or "kind" not in data:
        raise ValueError("process spec must be a mapping with a 'kind' key")
    kind = data["kind"]
    if kind not in _SPEC_KINDS:
        names = ", ".join(sorted(_SPEC_KINDS))
        raise ValueError(f"unknown process kind {kind!r}; expected one of: {names}")
    args = {k: v for k, v in data.items() if k != "kind"}
    if "base" in args:
        args["base"] = spec_from_dict(args["base"])
    try:
        return _SPEC_KINDS[kind](**args)
    except TypeError as exc:
        raise ValueError(f"bad fields for process kind {kind!r}: {exc}") from None


def grid_to_dict(grid: MonitorGrid) -> dict:
    return {"sites": [float(x) for x in grid.sites], "domain": [grid.domain[0], grid.domain[1]]}


def grid_from_dict(data: dict) -> MonitorGrid:
    """Rebuild a grid; accepts explicit sites or {n, domain} shorthand."""
    if not isinstance(data, dict):
        raise ValueError("grid must be a mapping")
    if "sites" in data:
        domain = data.get("domain")
        sites = np.asarray(data["sites"], dtype=np.float64)
        if domain is None:
            domain = (float(sites[0]), float(sites[-1]))
        return MonitorGrid(sites=sites, domain=(float(domain[0]), float(domain[1])))
    if "n" in data:
        domain = data.get("domain", SINE_DOMAIN)
        return MonitorGrid.equispaced(int(data["n"]), (float(domain[0]), float(domain[1])))
    raise ValueError("grid needs either 'sites' or 'n'")


def simulation_study(study: int, xi: float, noise_sd: float = DEFAULT_NOISE_SD):
    """In-control spec, out-of-control spec and grid of one canned study.

    Study 1: sine profiles with a global mean shift of size xi.
    Study 2: sine profiles where monitor channel 3 degrades to noise.
    Study 3: monomial profiles with coefficient mean xi; out of control,
    the trajectory reflects about its value at the 6th site.
    """
    if study == 1:
        grid = MonitorGrid.equispaced(DEFAULT_N_SITES, SINE_DOMAIN)
        base = SineProcess(coef_mean=0.0, coef_sd=1.0, noise_sd=noise_sd)
        return base, GlobalShift(base=base, xi=xi), grid
    if study == 2:
        grid = MonitorGrid.equispaced(DEFAULT_N_SITES, SINE_DOMAIN)
        base = SineProcess(coef_mean=0.0, coef_sd=1.0, noise_sd=noise_sd)
        return base, BrokenMonitor(base=base, xi=xi, site=2), grid
    if study == 3:
        # xi moves the coefficient mean of the whole study; the regime
        # change itself is the reflection, present at every xi.
        grid = MonitorGrid.equispaced(DEFAULT_N_SITES, UNIT_DOMAIN)
        base = MonomialProcess(degree=6, coef_mean=xi, coef_sd=1.0, noise_sd=noise_sd)
        return base, TrajectorySwitch(base=base, pivot_site=5), grid
    raise ValueError(f"study must be 1, 2 or 3, got {study}")
