"""Gaussian response model for profiles observed at fixed monitor sites.

A profile observed at n sites is one draw of a multivariate normal vector.
This module covers the three primitives everything else builds on: moment
estimation from historical profiles, exact per-site conditional laws given
the remaining sites, and sampling.

The conditional law of site j given the rest is computed through the
precision matrix L = Sigma^-1: the conditional variance is 1/L_jj (the
reciprocal of the Schur complement) and the conditional mean is
y_j - (L d)_j / L_jj with d = y - mu. One matrix product therefore yields
the laws for all n sites at once, which is what makes batch scoring cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import linalg

from .errors import InsufficientSamplesError, SingularCovarianceError

# Input covariance must be symmetric to this absolute tolerance; it is then
# symmetrized exactly before factorization.
SYMMETRY_ATOL = 1e-10

# Diagonal jitter ladder, as fractions of mean(diag) = trace/n. A failed
# Cholesky retries with each rung before giving up.
JITTER_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)

# Conditional variances are floored at this fraction of the marginal
# variance to keep z-scores finite for near-deterministic sites.
COND_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class ProfileSample:
    """One observed profile: the response at each monitor site.

    time_index is 0 for historical (Phase I) profiles and 1, 2, ... for
    the online sequence.
    """

    values: np.ndarray
    time_index: int = 0

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("profile values must be a non-empty 1-d vector")
        if not np.all(np.isfinite(vals)):
            raise ValueError("profile values must be finite")
        if self.time_index < 0:
            raise ValueError("time_index must be >= 0")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class ConditionalLaw:
    """Normal law of one site's response given the observed rest."""

    site: int
    cond_mean: float
    cond_var: float


ProfileBatch = Union[np.ndarray, Sequence[ProfileSample], Sequence[Sequence[float]]]


def profile_matrix(profiles: ProfileBatch) -> np.ndarray:
    """Stack profiles into an (m, n) float64 matrix.

    Accepts an array of shape (m, n) or (n,), or any sequence of
    ProfileSample / site-value vectors.
    """
    if isinstance(profiles, np.ndarray):
        mat = np.asarray(profiles, dtype=np.float64)
    else:
        seq = list(profiles)
        if len(seq) == 0:
            raise InsufficientSamplesError("no profiles given")
        rows = [p.values if isinstance(p, ProfileSample) else np.asarray(p, dtype=np.float64) for p in seq]
        mat = np.asarray(rows, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat[np.newaxis, :]
    if mat.ndim != 2 or mat.shape[1] == 0:
        raise ValueError("profiles must form an (m, n) matrix")
    if not np.all(np.isfinite(mat)):
        raise ValueError("profile values must be finite")
    return np.ascontiguousarray(mat)


class GaussianModel:
    """Frozen multivariate normal model over n >= 2 monitor sites.

    Construction validates symmetry, symmetrizes, and factors the
    covariance once (climbing the jitter ladder if needed); the Cholesky
    factor, precision matrix and per-site conditional scalings are cached
    for reuse by scoring and sampling.
    """

    __slots__ = ("mean", "covariance", "chol", "precision", "jitter", "_cond_var", "_zdiv")

    def __init__(self, mean: np.ndarray, covariance: np.ndarray) -> None:
        mu = np.asarray(mean, dtype=np.float64).reshape(-1)
        cov = np.array(covariance, dtype=np.float64)
        n = mu.size
        if n < 2:
            raise ValueError("model needs at least 2 monitor sites")
        if cov.shape != (n, n):
            raise ValueError(f"covariance shape {cov.shape} does not match {n} sites")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(cov))):
            raise ValueError("mean and covariance must be finite")
        asym = np.max(np.abs(cov - cov.T))
        if asym > SYMMETRY_ATOL:
            raise ValueError(f"covariance asymmetry {asym:.3e} exceeds tolerance {SYMMETRY_ATOL:.0e}")
        cov = (cov + cov.T) / 2.0

        chol, jitter = _factor_with_jitter(cov)
        eye = np.eye(n)
        prec = linalg.cho_solve((chol, True), eye, check_finite=False)
        prec = np.ascontiguousarray((prec + prec.T) / 2.0)

        diag_prec = np.diag(prec).copy()
        cond_var = 1.0 / diag_prec
        floor = COND_VAR_FLOOR * np.diag(cov)
        np.maximum(cond_var, floor, out=cond_var)
        zdiv = diag_prec * np.sqrt(cond_var)

        for arr in (mu, cov, chol, prec, cond_var, zdiv):
            arr.flags.writeable = False
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "chol", chol)
        object.__setattr__(self, "precision", prec)
        object.__setattr__(self, "jitter", jitter)
        object.__setattr__(self, "_cond_var", cond_var)
        object.__setattr__(self, "_zdiv", zdiv)

    def __setattr__(self, name: str, value) -> None:
        raise AttributeError("GaussianModel is immutable")

    @property
    def n_sites(self) -> int:
        return self.mean.size

    def __repr__(self) -> str:
        return f"GaussianModel(n_sites={self.n_sites}, jitter={self.jitter:g})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, GaussianModel):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.covariance, other.covariance)

    def __hash__(self) -> int:
        return hash((self.mean.tobytes(), self.covariance.tobytes()))

    def standardized_residuals(self, profiles: ProfileBatch) -> np.ndarray:
        """Conditional z-scores, shape (m, n): entry (i, j) standardizes
        profile i at site j against its conditional law given the rest."""
        mat = profile_matrix(profiles)
        if mat.shape[1] != self.n_sites:
            raise ValueError(f"profiles have {mat.shape[1]} sites, model has {self.n_sites}")
        z = (mat - self.mean) @ self.precision
        z /= self._zdiv
        return z


def _factor_with_jitter(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, adding diagonal jitter if needed.

    Returns (L, jitter_added). Raises SingularCovarianceError when even the
    largest rung fails or the matrix has no positive diagonal mass.
    """
    n = cov.shape[0]
    scale = float(np.trace(cov)) / n
    if not scale > 0.0:
        raise SingularCovarianceError("covariance has non-positive trace")
    try:
        return linalg.cholesky(cov, lower=True, check_finite=False), 0.0
    except linalg.LinAlgError:
        pass
    for delta in JITTER_LADDER:
        jitter = delta * scale
        try:
            chol = linalg.cholesky(cov + jitter * np.eye(n), lower=True, check_finite=False)
            return chol, jitter
        except linalg.LinAlgError:
            continue
    raise SingularCovarianceError(
        f"covariance not positive definite after jitter up to {JITTER_LADDER[-1]:g} * trace/n"
    )


def estimate_moments(profiles: ProfileBatch) -> GaussianModel:
    """Fit mean and covariance from m >= n + 1 historical profiles.

    Uses the unbiased (1/(m-1)) covariance estimator. Raises
    InsufficientSamplesError when m <= n and SingularCovarianceError when
    the sample covariance cannot be made positive definite.
    """
    mat = profile_matrix(profiles)
    m, n = mat.shape
    if m < n + 1:
        raise InsufficientSamplesError(f"need at least {n + 1} profiles for {n} sites, got {m}")
    mean = mat.mean(axis=0)
    centered = mat - mean
    cov = centered.T @ centered
    cov /= m - 1
    return GaussianModel(mean, cov)


def sample(model: GaussianModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw count profiles from the model; returns an (count, n) matrix.

    Deterministic given the generator state: count standard-normal vectors
    are pushed through the cached Cholesky factor.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    z = rng.standard_normal((count, model.n_sites))
    out = z @ model.chol.T
    out += model.mean
    return out


def conditional_law(model: GaussianModel, profile: ProfileSample | np.ndarray, site: int) -> ConditionalLaw:
    """Exact normal law of one site given the other observed sites.

    Equivalent to the classical partitioned-covariance formulas
    (mean mu_j + S_{j,-j} S_{-j,-j}^{-1} (y_{-j} - mu_{-j}), variance the
    Schur complement) but read directly off the precision matrix.
    """
    values = profile.values if isinstance(profile, ProfileSample) else np.asarray(profile, dtype=np.float64)
    n = model.n_sites
    if values.shape != (n,):
        raise ValueError(f"profile has shape {values.shape}, expected ({n},)")
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} sites")
    d = values - model.mean
    t = model.precision[site] @ d
    diag = model.precision[site, site]
    cond_mean = values[site] - t / diag
    return ConditionalLaw(site=site, cond_mean=float(cond_mean), cond_var=float(model._cond_var[site]))
