"""Sufficient statistics, complete-data MLEs, density/CDF evaluation and
the beta objective with its analytic gradient.

For fully observed homogeneous trajectories the complete-data likelihood
factorizes, giving closed-form MLEs: pi_hat from start counts, each rate
as (jump count) / (occupation time of the source state), and diagonals
fixed so full-generator rows sum to zero.

The absorption-time density of the time-scaled model at calendar time t is
``h(t) * pi . exp(g_inv(t) L) . exit``, its CDF ``1 - pi . exp(g_inv(t) L) . 1``.
Both reduce to products ``pi . exp(sL) . v`` evaluated for many s; these go
through an eigendecomposition of L when it is numerically trustworthy
(validated against the matrix exponential at probe points on every
construction) and otherwise fall back to per-point expm calls.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NonConvergenceError,
    NumericalError,
    StarvedStateError,
    ValidationError,
)
from .generator import InitialDistribution, SubIntensityMatrix, matrix_exponential
from .paths import HOMOGENEOUS, ContinuousPath, PathSegment
from .scaling import IDENTITY, ScalingFamily

# ---------------------------------------------------------------------------
# sufficient statistics and MLEs


@dataclass(frozen=True)
class SufficientStatistics:
    """Complete-data counts over n transient states.

    ``start_counts`` (B): paths starting in each state; ``jump_counts``
    (N_xy): transitions between transient states, zero diagonal;
    ``absorption_counts`` (N_x): jumps into the absorbing state;
    ``occupation`` (R_x): total holding time per state, homogeneous units.
    """

    start_counts: np.ndarray
    jump_counts: np.ndarray
    absorption_counts: np.ndarray
    occupation: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.start_counts, dtype=np.int64)
        nt = np.asarray(self.jump_counts, dtype=np.int64)
        na = np.asarray(self.absorption_counts, dtype=np.int64)
        r = np.asarray(self.occupation, dtype=float)
        n = b.size
        if nt.shape != (n, n) or na.shape != (n,) or r.shape != (n,):
            raise ValidationError("statistics arrays have inconsistent shapes")
        if np.any(b < 0) or np.any(nt < 0) or np.any(na < 0):
            raise ValidationError("counts must be non-negative")
        if np.any(np.diag(nt) != 0):
            raise ValidationError("jump counts must have a zero diagonal")
        if not np.all(np.isfinite(r)) or np.any(r < 0.0):
            raise ValidationError("occupation times must be finite and >= 0")
        for name, arr in (
            ("start_counts", b),
            ("jump_counts", nt),
            ("absorption_counts", na),
            ("occupation", r),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.start_counts.size

    @classmethod
    def zeros(cls, n: int) -> "SufficientStatistics":
        return cls(
            np.zeros(n, dtype=np.int64),
            np.zeros((n, n), dtype=np.int64),
            np.zeros(n, dtype=np.int64),
            np.zeros(n),
        )

    def __add__(self, other: "SufficientStatistics") -> "SufficientStatistics":
        if not isinstance(other, SufficientStatistics):
            return NotImplemented
        if other.n != self.n:
            raise ValidationError("cannot merge statistics of different sizes")
        return SufficientStatistics(
            self.start_counts + other.start_counts,
            self.jump_counts + other.jump_counts,
            self.absorption_counts + other.absorption_counts,
            self.occupation + other.occupation,
        )


def accumulate_statistics(paths, n: int | None = None) -> SufficientStatistics:
    """Tally sufficient statistics over homogeneous paths and segments.

    Full :class:`ContinuousPath` inputs contribute start counts; bare
    :class:`PathSegment` inputs contribute only jumps and occupation.  The
    final partial holding of a censored path (last jump to ``end_time``)
    counts toward occupation.

    ``n`` may be omitted when the collection is non-empty.
    """
    paths = list(paths)
    if n is None:
        if not paths:
            raise ValidationError("empty collection needs an explicit n")
        n = paths[0].n
    b = np.zeros(n, dtype=np.int64)
    nt = np.zeros((n, n), dtype=np.int64)
    na = np.zeros(n, dtype=np.int64)
    r = np.zeros(n)
    for p in paths:
        if p.timeline != HOMOGENEOUS:
            raise ValidationError(
                "statistics require homogeneous-timeline paths, got "
                f"{p.timeline!r}"
            )
        if p.n != n:
            raise ValidationError("path over a different state count")
        if isinstance(p, ContinuousPath):
            times, states = p.times, p.states
            b[states[0] - 1] += 1
        elif isinstance(p, PathSegment):
            times = np.concatenate(([p.start_time], p.jump_times))
            states = np.concatenate(([p.start_state], p.jump_states))
        else:
            raise ValidationError(f"unsupported path object {type(p).__name__}")
        src = states[:-1] - 1
        dst = states[1:] - 1
        np.add.at(r, src, np.diff(times))
        absorbed = states[-1] == n + 1
        if not absorbed:
            r[states[-1] - 1] += p.end_time - times[-1]
        trans = dst < n
        np.add.at(nt, (src[trans], dst[trans]), 1)
        np.add.at(na, src[~trans], 1)
    return SufficientStatistics(b, nt, na, r)


def mle_generator(
    stats: SufficientStatistics, K: int
) -> tuple[InitialDistribution, SubIntensityMatrix]:
    """Complete-data maximum likelihood estimates.

    ``pi_hat_x = B_x / K``; off-diagonal rates ``N_xy / R_x``; exit rates
    ``N_x / R_x``; diagonals set so each full-generator row sums to zero.
    Every ``R_x`` must be positive.
    """
    K = int(K)
    if K < 1:
        raise ValidationError("K must be a positive path count")
    if int(stats.start_counts.sum()) != K:
        raise ValidationError(
            f"start counts sum to {int(stats.start_counts.sum())}, expected K={K}"
        )
    zero = np.nonzero(stats.occupation <= 0.0)[0]
    if zero.size:
        raise StarvedStateError(int(zero[0]) + 1)
    n = stats.n
    rates = stats.jump_counts / stats.occupation[:, None]
    exit_hat = stats.absorption_counts / stats.occupation
    lam = rates.copy()
    lam[np.eye(n, dtype=bool)] = -(rates.sum(axis=1) + exit_hat)
    return (
        InitialDistribution(stats.start_counts / K),
        SubIntensityMatrix(lam),
    )


# ---------------------------------------------------------------------------
# density / CDF kernel


class _AbsorptionKernel:
    """Vectorised evaluation of pi.exp(sL).exit, pi.L.exp(sL).exit and
    pi.exp(sL).1 over arrays of homogeneous times s >= 0."""

    def __init__(self, pi: InitialDistribution, lam: SubIntensityMatrix):
        lam.require_valid()
        if pi.n != lam.n:
            raise ValidationError(
                f"initial distribution has {pi.n} states, generator has {lam.n}"
            )
        self._pi = pi.probabilities
        self._arr = lam.entries
        self._exit = lam.exit_rates()
        self._ones = np.ones(lam.n)
        self._eig_ok = False
        try:
            w, v = np.linalg.eig(self._arr)
            vinv = np.linalg.inv(v)
            self._w = w
            left = self._pi @ v
            self._c_exit = left * (vinv @ self._exit.astype(complex))
            self._c_rate = left * w * (vinv @ self._exit.astype(complex))
            self._c_one = left * (vinv @ self._ones.astype(complex))
            self._eig_ok = self._probe()
        except np.linalg.LinAlgError:
            self._eig_ok = False

    def _probe(self) -> bool:
        rate = max(float(-self._arr.diagonal().min()), 1e-12)
        probes = np.array([0.0, 0.1, 1.0, 5.0]) / rate
        for s in probes:
            e = matrix_exponential(self._arr, s)
            ref = np.array(
                [self._pi @ e @ self._exit,
                 self._pi @ self._arr @ e @ self._exit,
                 self._pi @ e @ self._ones]
            )
            got = np.array(
                [self._eig_eval(self._c_exit, s),
                 self._eig_eval(self._c_rate, s),
                 self._eig_eval(self._c_one, s)]
            )
            if np.any(np.abs(got - ref) > 1e-11 * np.maximum(np.abs(ref), 1e-3)):
                return False
        return True

    def _eig_eval(self, coeff: np.ndarray, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            e = np.exp(np.multiply.outer(s, self._w))
            out = (e @ coeff).real
        return out

    def _expm_eval(self, which: str, s: np.ndarray) -> np.ndarray:
        right = {"exit": self._exit, "one": self._ones}[
            "one" if which == "one" else "exit"
        ]
        head = self._pi @ self._arr if which == "rate" else self._pi
        flat = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.array([head @ matrix_exponential(self._arr, si) @ right for si in flat])
        return out.reshape(np.shape(s))

    def _eval(self, which: str, s) -> np.ndarray:
        s_arr = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(s_arr)) or np.any(s_arr < 0.0):
            raise ValidationError("homogeneous times must be finite and >= 0")
        if self._eig_ok:
            coeff = {"exit": self._c_exit, "rate": self._c_rate, "one": self._c_one}
            return self._eig_eval(coeff[which], s_arr)
        return self._expm_eval(which, s_arr)

    def density_factor(self, s):
        """pi . exp(sL) . exit  (the phase-type density at s)."""
        return self._eval("exit", s)

    def rate_factor(self, s):
        """pi . L . exp(sL) . exit  (derivative weight in the score)."""
        return self._eval("rate", s)

    def survival(self, s):
        """pi . exp(sL) . 1."""
        return self._eval("one", s)

    def rate_ratio(self, s):
        """rate_factor / density_factor, stable under density underflow.

        On the eigendecomposition route the common factor exp(s * w_max)
        is cancelled before exponentiating, so the ratio stays finite for
        s far beyond the point where the density itself underflows (it
        tends to the dominant eigenvalue).  The expm route divides
        directly and may return nan once the density underflows.
        """
        s_arr = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(s_arr)) or np.any(s_arr < 0.0):
            raise ValidationError("homogeneous times must be finite and >= 0")
        if self._eig_ok:
            shift = self._w.real.max()
            with np.errstate(over="ignore", invalid="ignore", under="ignore"):
                e = np.exp(np.multiply.outer(s_arr, self._w - shift))
                num = (e @ self._c_rate).real
                den = (e @ self._c_exit).real
                return np.where(den != 0.0, num / np.where(den != 0.0, den, 1.0), np.nan)
        a = self._expm_eval("exit", s_arr)
        b = self._expm_eval("rate", s_arr)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(b / a)


def _wrap_pi(pi) -> InitialDistribution:
    return pi if isinstance(pi, InitialDistribution) else InitialDistribution(pi)


def _wrap_lam(lam) -> SubIntensityMatrix:
    return lam if isinstance(lam, SubIntensityMatrix) else SubIntensityMatrix(lam)


def iph_density(pi, lam, family: ScalingFamily, t):
    """Absorption-time density of the time-scaled model at calendar time t.

    ``h(t) * pi . exp(g_inv(t) L) . exit``; t may be a scalar or array.
    Where the transformed time overflows float64 the density has long
    underflown and 0 is returned.
    """
    kern = _AbsorptionKernel(_wrap_pi(pi), _wrap_lam(lam))
    s = np.asarray(family.g_inv(t), dtype=float)
    finite = np.isfinite(s)
    out = np.zeros(s.shape)
    if np.any(finite):
        vals = family.h(t) * kern.density_factor(np.where(finite, s, 0.0))
        out = np.where(finite, np.maximum(vals, 0.0), 0.0)
    return float(out) if np.ndim(t) == 0 else out


def iph_cdf(pi, lam, family: ScalingFamily, t):
    """Absorption-time distribution function, ``1 - pi . exp(g_inv(t) L) . 1``."""
    kern = _AbsorptionKernel(_wrap_pi(pi), _wrap_lam(lam))
    s = np.asarray(family.g_inv(t), dtype=float)
    finite = np.isfinite(s)
    out = np.ones(s.shape)
    if np.any(finite):
        vals = np.clip(1.0 - kern.survival(np.where(finite, s, 0.0)), 0.0, 1.0)
        out = np.where(finite, vals, 1.0)
    return float(out) if np.ndim(t) == 0 else out


# ---------------------------------------------------------------------------
# beta objective


@dataclass(frozen=True)
class BetaObjective:
    """Log-likelihood data for the scaling parameter.

    Holds the family kind, fixed (pi, L) estimates and the calendar-time
    absorption sample; beta itself is the argument of the evaluation
    functions.
    """

    family: str
    pi: InitialDistribution
    lam: SubIntensityMatrix
    absorption_times: np.ndarray
    _kernel: _AbsorptionKernel = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pi = _wrap_pi(self.pi)
        lam = _wrap_lam(self.lam)
        ScalingFamily(self.family, 1.0)  # validates the kind
        times = np.asarray(self.absorption_times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValidationError("absorption times must be a non-empty vector")
        if not np.all(np.isfinite(times)) or np.any(times <= 0.0):
            raise ValidationError("absorption times must be finite and > 0")
        times.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "absorption_times", times)
        object.__setattr__(self, "_kernel", _AbsorptionKernel(pi, lam))

    def family_at(self, beta: float) -> ScalingFamily:
        return ScalingFamily(self.family, beta)


def _underflow_warning(kind: str, index: int, t: float) -> None:
    warnings.warn(
        f"{kind} underflow at observation {index} (t={t:g})",
        RuntimeWarning,
        stacklevel=3,
    )


def beta_loglik(obj: BetaObjective, beta: float) -> float:
    """Log-likelihood of beta: sum of log h(t_k) + log(pi.exp(g_inv(t_k)L).exit).

    Returns -inf when the density underflows at some observation (a
    warning names the first offending index).
    """
    fam = obj.family_at(beta)
    t = obj.absorption_times
    a = obj._kernel.density_factor(np.atleast_1d(fam.g_inv(t)))
    bad = np.nonzero(~np.isfinite(a) | (a <= 0.0))[0]
    if bad.size:
        _underflow_warning("density", int(bad[0]), float(t[int(bad[0])]))
        return -np.inf
    return float(np.sum(np.log(fam.h(t))) + np.sum(np.log(a)))


def beta_gradient(obj: BetaObjective, beta: float) -> float:
    """Analytic score of :func:`beta_loglik` at beta.

    Per observation: dh/dbeta / h plus the accumulated derivative of h
    times the ratio (pi.L.exp(sL).exit)/(pi.exp(sL).exit).  The ratio is
    evaluated in shifted form, so the score stays finite well past the
    point where the log-likelihood itself underflows to -inf (there it is
    dominated by the generator's slowest decay rate, which is what drives
    the clamped ascent update back toward sane beta).  Returns nan, after
    a warning, only when the ratio itself cannot be evaluated.
    """
    fam = obj.family_at(beta)
    t = obj.absorption_times
    ratio = obj._kernel.rate_ratio(np.atleast_1d(fam.g_inv(t)))
    bad = np.nonzero(~np.isfinite(ratio))[0]
    if bad.size:
        _underflow_warning("score", int(bad[0]), float(t[int(bad[0])]))
        return float("nan")
    term1 = fam.dh_dbeta(t) / fam.h(t)
    term2 = fam.int_dh_dbeta(t) * ratio
    return float(np.sum(term1) + np.sum(term2))


def gd_solve(
    obj: BetaObjective,
    beta0: float,
    eta: float,
    e_ell: float,
    beta_min: float = 1e-5,
    max_steps: int = 100_000,
    trace: list | None = None,
) -> tuple[float, int]:
    """Fixed-step gradient ascent on the beta log-likelihood.

    Updates ``beta <- max(beta_min, beta + eta * grad)`` until the change
    in log-likelihood between consecutive iterates drops below ``e_ell``.
    Returns ``(beta_hat, updates_performed)``.  When ``trace`` is given,
    appends one ``(step, beta, loglik, grad)`` tuple per update.

    Raises
    ------
    NonConvergenceError
        If ``max_steps`` updates pass without meeting the criterion (the
        trace rides on the exception).
    NumericalError
        If a gradient evaluates to a non-finite value.
    """
    beta0, eta, e_ell, beta_min = map(float, (beta0, eta, e_ell, beta_min))
    if eta <= 0.0 or e_ell <= 0.0:
        raise ValidationError("eta and e_ell must be positive")
    if beta_min <= 0.0 or beta0 < beta_min:
        raise ValidationError("need beta0 >= beta_min > 0")
    if int(max_steps) < 1:
        raise ValidationError("max_steps must be at least 1")
    ell_prev = beta_loglik(obj, beta0)
    grad = beta_gradient(obj, beta0)
    beta = beta0
    local_trace = trace if trace is not None else []
    for step in range(1, int(max_steps) + 1):
        if not np.isfinite(grad):
            raise NumericalError(f"non-finite gradient at beta={beta:g}")
        beta = max(beta_min, beta + eta * grad)
        ell = beta_loglik(obj, beta)
        grad = beta_gradient(obj, beta)
        local_trace.append((step, beta, ell, grad))
        if abs(ell - ell_prev) < e_ell:
            return beta, step
        ell_prev = ell
    err = NonConvergenceError(
        f"gradient ascent did not converge within {max_steps} updates"
    )
    err.trace = tuple(local_trace)
    raise err
