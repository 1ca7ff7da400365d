"""Two-sample Kolmogorov-Smirnov testing on absorption-time samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.special

from .errors import ValidationError


@dataclass(frozen=True)
class SampleSet:
    """Unordered multiset of real observations (absorption times)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("sample must be a non-empty vector")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("sample contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def size(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n_a: int
    n_b: int


def _as_sample(s) -> SampleSet:
    return s if isinstance(s, SampleSet) else SampleSet(np.asarray(s, dtype=float))


def ecdf(s: SampleSet, t):
    """Right-continuous empirical CDF of ``s`` at ``t``: (#values <= t)/|s|.

    Examples
    --------
    >>> ecdf(SampleSet(np.array([1.0, 2.0, 3.0])), 2.0)
    0.6666666666666666
    """
    s = _as_sample(s)
    sorted_vals = np.sort(s.values)
    out = np.searchsorted(sorted_vals, t, side="right") / s.size
    return float(out) if np.ndim(t) == 0 else out


def ks_two_sample(a: SampleSet, b: SampleSet) -> KsResult:
    """Two-sided two-sample KS test.

    The statistic is the exact supremum of |F_a - F_b| over the pooled
    jump points; the p-value comes from the asymptotic Kolmogorov
    distribution at sqrt(n_a n_b / (n_a + n_b)) * D.
    """
    a, b = _as_sample(a), _as_sample(b)
    sa = np.sort(a.values)
    sb = np.sort(b.values)
    pooled = np.concatenate([sa, sb])
    fa = np.searchsorted(sa, pooled, side="right") / sa.size
    fb = np.searchsorted(sb, pooled, side="right") / sb.size
    d = float(np.abs(fa - fb).max())
    n_eff = sa.size * sb.size / (sa.size + sb.size)
    p = float(scipy.special.kolmogorov(np.sqrt(n_eff) * d))
    return KsResult(
        statistic=d,
        p_value=min(max(p, 0.0), 1.0),
        n_a=sa.size,
        n_b=sb.size,
    )
