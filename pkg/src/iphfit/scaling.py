"""Time-scaling families for inhomogeneous phase-type models.

A family supplies a positive scaling function ``h(t)`` (the generator at
calendar time t is ``h(t) * L``), its accumulated version
``g_inv(t) = int_0^t h(s) ds`` mapping calendar time to operational time,
the inverse map ``g``, and the two beta-derivatives needed by the score of
the absorption-time likelihood.

Families
--------
gompertz   h(t) = exp(beta t)          g_inv(t) = (exp(beta t) - 1) / beta
weibull    h(t) = beta t^(beta-1)      g_inv(t) = t^beta
identity   h(t) = 1                    g_inv(t) = t   (homogeneous model)

All functions accept scalars or arrays of times and are vectorised.
Gompertz values overflow float64 once beta*t exceeds ~709; g_inv then
returns +inf (the downstream likelihood reports the underflow).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

GOMPERTZ = "gompertz"
WEIBULL = "weibull"
IDENTITY = "identity"

_KINDS = (GOMPERTZ, WEIBULL, IDENTITY)


def _check_times(t, allow_zero: bool) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("times must be finite")
    if np.any(arr < 0.0):
        raise ValidationError("times must be non-negative")
    if not allow_zero and np.any(arr == 0.0):
        raise ValidationError("t = 0 is outside this family's domain")
    return arr


def _scalar_like(t, arr: np.ndarray):
    return float(arr) if np.isscalar(t) or np.ndim(t) == 0 else arr


@dataclass(frozen=True)
class ScalingFamily:
    """One member of a time-scaling family: a kind plus its shape parameter.

    ``beta`` must be positive and finite for gompertz and weibull; it is
    ignored by identity.
    """

    kind: str
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(
                f"unknown scaling family {self.kind!r}; expected one of {_KINDS}"
            )
        beta = float(self.beta)
        if self.kind != IDENTITY and not (np.isfinite(beta) and beta > 0.0):
            raise ValidationError(f"beta must be positive and finite, got {beta!r}")
        object.__setattr__(self, "beta", beta)

    @classmethod
    def gompertz(cls, beta: float) -> "ScalingFamily":
        return cls(GOMPERTZ, beta)

    @classmethod
    def weibull(cls, beta: float) -> "ScalingFamily":
        return cls(WEIBULL, beta)

    @classmethod
    def identity(cls) -> "ScalingFamily":
        return cls(IDENTITY)

    def with_beta(self, beta: float) -> "ScalingFamily":
        return ScalingFamily(self.kind, beta)

    # -- scaling function and its accumulated form ---------------------

    def h(self, t):
        """Scaling function h(t) > 0.

        Weibull with beta < 1 diverges at t = 0, so t = 0 is rejected
        there; Weibull with beta > 1 has h(0) = 0 (a boundary zero, the
        density handles it), beta = 1 gives h identically 1.
        """
        if self.kind == IDENTITY:
            arr = _check_times(t, allow_zero=True)
            return _scalar_like(t, np.ones_like(arr))
        if self.kind == GOMPERTZ:
            arr = _check_times(t, allow_zero=True)
            with np.errstate(over="ignore"):
                return _scalar_like(t, np.exp(self.beta * arr))
        arr = _check_times(t, allow_zero=self.beta >= 1.0)
        with np.errstate(divide="ignore"):
            out = np.where(arr > 0.0, self.beta * arr ** (self.beta - 1.0), 0.0)
        if self.beta == 1.0:
            out = np.ones_like(arr)
        return _scalar_like(t, out)

    def g_inv(self, t):
        """Operational time g_inv(t) = int_0^t h(s) ds; increasing, 0 at 0."""
        if self.kind == IDENTITY:
            arr = _check_times(t, allow_zero=True)
            return _scalar_like(t, arr.copy())
        arr = _check_times(t, allow_zero=True)
        with np.errstate(over="ignore"):
            if self.kind == GOMPERTZ:
                out = np.expm1(self.beta * arr) / self.beta
            else:
                out = arr**self.beta
        return _scalar_like(t, out)

    def g(self, s):
        """Calendar time for operational time s; inverse of :meth:`g_inv`."""
        arr = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValidationError("operational times must be finite")
        if np.any(arr < 0.0):
            raise ValidationError("operational times must be non-negative")
        if self.kind == IDENTITY:
            return _scalar_like(s, arr.copy())
        if self.kind == GOMPERTZ:
            return _scalar_like(s, np.log1p(self.beta * arr) / self.beta)
        return _scalar_like(s, arr ** (1.0 / self.beta))

    # -- beta-derivatives for the score ---------------------------------

    def dh_dbeta(self, t):
        """Pointwise derivative of h with respect to beta.

        gompertz: t exp(beta t); weibull: t^(beta-1) (1 + beta log t),
        continuously extended to 0 at t = 0 when beta > 1; identity: 0.
        """
        if self.kind == IDENTITY:
            arr = _check_times(t, allow_zero=True)
            return _scalar_like(t, np.zeros_like(arr))
        if self.kind == GOMPERTZ:
            arr = _check_times(t, allow_zero=True)
            with np.errstate(over="ignore"):
                return _scalar_like(t, arr * np.exp(self.beta * arr))
        arr = _check_times(t, allow_zero=self.beta > 1.0)
        pos = arr > 0.0
        out = np.zeros_like(arr)
        tp = arr[pos]
        out[pos] = tp ** (self.beta - 1.0) * (1.0 + self.beta * np.log(tp))
        return _scalar_like(t, out)

    def int_dh_dbeta(self, t):
        """Accumulated derivative int_0^t dh/dbeta(s) ds.

        gompertz: t exp(beta t)/beta - (exp(beta t) - 1)/beta^2;
        weibull: t^beta log t, which -> 0 as t -> 0 for every beta > 0
        (defined as 0 at t = 0 by continuity); identity: 0.
        """
        arr = _check_times(t, allow_zero=True)
        if self.kind == IDENTITY:
            return _scalar_like(t, np.zeros_like(arr))
        if self.kind == GOMPERTZ:
            b = self.beta
            with np.errstate(over="ignore", invalid="ignore"):
                out = arr * np.exp(b * arr) / b - np.expm1(b * arr) / (b * b)
            return _scalar_like(t, out)
        pos = arr > 0.0
        out = np.zeros_like(arr)
        tp = arr[pos]
        out[pos] = tp**self.beta * np.log(tp)
        return _scalar_like(t, out)
