"""NumPy implementation of the scoring kernels.

Mirrors the surface of the compiled module profmon._kernels; the backend
selector picks whichever is importable. Both call the same erfc-based
normal log-CDF, so results agree to the last few ulp.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import log_ndtr

BACKEND = "python"

# Two-tail p-values are floored at 1e-300 so downstream logs stay finite.
P_FLOOR = 1e-300
LOGP_FLOOR = math.log(P_FLOOR)

RULE_MINIMUM = 0
RULE_GEOMETRIC_MEAN = 1


def site_log_pvalues(z: np.ndarray) -> np.ndarray:
    """Per-site log two-tail p-values from standardized residuals.

    z has shape (batch, n_sites); entry (i, j) is the conditional z-score
    of profile i at site j. Returns log p with p = 2-sided tail mass
    min(P(Z < z), P(Z > z)) = ndtr(-|z|), floored at log(1e-300).
    """
    lp = log_ndtr(-np.abs(z))
    np.maximum(lp, LOGP_FLOOR, out=lp)
    return lp


def aggregate_from_z(z: np.ndarray, rule: int) -> np.ndarray:
    """Fused scoring: z matrix -> aggregated p-value per row.

    rule 0 takes the minimum site p-value, rule 1 the geometric mean
    (computed in log space). Output is floored at 1e-300.
    """
    lp = site_log_pvalues(z)
    if rule == RULE_MINIMUM:
        agg = lp.min(axis=1)
    elif rule == RULE_GEOMETRIC_MEAN:
        agg = lp.mean(axis=1)
    else:
        raise ValueError(f"unknown aggregation rule code {rule}")
    out = np.exp(agg)
    np.maximum(out, P_FLOOR, out=out)
    return out


def first_below(values: np.ndarray, limit: float) -> int:
    """Index of the first entry strictly below limit, or -1 if none."""
    hits = values < limit
    if hits.size == 0:
        return -1
    idx = int(np.argmax(hits))
    if not hits[idx]:
        return -1
    return idx
