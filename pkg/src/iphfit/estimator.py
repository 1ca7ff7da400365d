"""Joint estimation of (pi, Lambda, beta) from panel data by stochastic EM.

One iteration: transform the observation times to the homogeneous scale at
the current beta, reconstruct every trajectory with rejection bridges
(censored paths are simulated onward to absorption), re-estimate Lambda by
the complete-data MLEs, map the imputed absorption epochs back to calendar
time at the beta used for the transform, and refine beta by gradient
ascent.  The loop stops at the first iteration whose ascent converges in a
single update, or at the iteration cap.

Initialization treats the raw panel as if it were a continuously observed
homogeneous path (no time transform) to get Lambda0, samples latent
absorption times for absorbed paths by bridging their final segment, and
refines beta0 on those times.

The homogeneous variant runs the same loop with the identity transform and
no beta machinery for a fixed number of iterations, returning the
entrywise average of the last few Lambda iterates (diagonal re-projected
so full-generator rows sum to zero).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    BridgeBudgetError,
    EstimationError,
    NumericalError,
    StructuralError,
    ValidationError,
)
from .generator import InitialDistribution, SubIntensityMatrix
from .likelihood import (
    BetaObjective,
    SufficientStatistics,
    accumulate_statistics,
    gd_solve,
    mle_generator,
)
from .paths import HOMOGENEOUS, ContinuousPath, PanelObservationSet, RandomStream
from .scaling import GOMPERTZ, IDENTITY, WEIBULL, ScalingFamily
from .simulate import bridge_sample, check_absorbable, jump_model

_PATH_CAP = 1 << 16

_FAMILIES = (GOMPERTZ, WEIBULL, IDENTITY)


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameters of the estimation procedure."""

    family: str
    beta0: float = 1.0
    eta: float = 1e-6
    e_ell: float = 0.01
    beta_min: float = 1e-5
    max_sem_iterations: int = 200
    gd_max_steps: int = 100_000
    max_attempts: int = 1_000_000
    seed: int = 0
    homogeneous_mode: bool = False
    homog_iterations: int = 300
    homog_tail_average: int = 20
    bridge_replications: int = 1

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValidationError(
                f"unknown family {self.family!r}; expected one of {_FAMILIES}"
            )
        if self.homogeneous_mode and self.family != IDENTITY:
            raise ValidationError("homogeneous mode requires the identity family")
        if not (self.eta > 0.0 and self.e_ell > 0.0):
            raise ValidationError("eta and e_ell must be positive")
        if not (0.0 < self.beta_min <= self.beta0):
            raise ValidationError("need beta0 >= beta_min > 0")
        if self.max_sem_iterations < 1 or self.gd_max_steps < 1:
            raise ValidationError("iteration caps must be positive")
        if self.max_attempts < 1 or self.bridge_replications < 1:
            raise ValidationError("max_attempts and bridge_replications must be >= 1")
        if not (1 <= self.homog_tail_average <= self.homog_iterations):
            raise ValidationError(
                "need 1 <= homog_tail_average <= homog_iterations"
            )
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")


@dataclass(frozen=True)
class IterationRecord:
    """One row of the fit trace."""

    iteration: int
    gd_updates: int
    absorbed_paths: int
    beta_hat: float | None
    lam_hat: SubIntensityMatrix


@dataclass(frozen=True)
class FitResult:
    pi_hat: InitialDistribution
    lam_hat: SubIntensityMatrix
    beta_hat: float | None
    iterations_used: int
    termination: str  # single-update-converged | max-iterations
    trace: tuple[IterationRecord, ...]
    config: FitConfig
    completed: tuple[ContinuousPath, ...] | None = None


@dataclass(frozen=True)
class SemIterationResult:
    lam_hat: SubIntensityMatrix
    beta_hat: float | None
    gd_updates: int
    absorption_times: np.ndarray  # calendar timeline
    completed: tuple[ContinuousPath, ...]


class _PanelArrays:
    """Panel data unpacked once into kernel-friendly arrays (0-based)."""

    def __init__(self, data: PanelObservationSet):
        if len(data) == 0:
            raise ValidationError("cannot fit an empty panel")
        self.n = data.n
        self.times = [p.times for p in data.paths]
        self.states0 = [p.states.astype(np.int64) - 1 for p in data.paths]
        self.absorbed = np.array([p.absorbed(data.n) for p in data.paths])
        self.K = len(data)


def empirical_pi(data: PanelObservationSet) -> InitialDistribution:
    """Fraction of paths starting in each transient state."""
    if len(data) == 0:
        raise ValidationError("cannot fit an empty panel")
    counts = np.zeros(data.n, dtype=np.int64)
    for p in data.paths:
        first = int(p.states[0])
        if first == data.n + 1:
            raise ValidationError(
                f"path {p.path_id} starts in the absorbing state"
            )
        counts[first - 1] += 1
    return InitialDistribution(counts / len(data))


def _panel_as_naive_path(times: np.ndarray, states0: np.ndarray, n: int) -> ContinuousPath:
    """Read one panel path as if continuously observed: jumps exactly at
    the observation times where the state changes."""
    keep = np.concatenate(([True], states0[1:] != states0[:-1]))
    return ContinuousPath(
        n=n,
        times=times[keep],
        states=states0[keep] + 1,
        end_time=float(times[-1]),
        timeline=HOMOGENEOUS,
    )


def _naive_statistics(panel: _PanelArrays) -> SufficientStatistics:
    paths = [
        _panel_as_naive_path(t, s, panel.n)
        for t, s in zip(panel.times, panel.states0)
    ]
    return accumulate_statistics(paths, panel.n)


def initialize(
    data: PanelObservationSet,
    cfg: FitConfig,
    rng: RandomStream,
    beta_trace: list | None = None,
) -> tuple[InitialDistribution, SubIntensityMatrix, float]:
    """Starting point of the SEM loop: (pi_hat, Lambda0, refined beta).

    Lambda0 comes from the MLEs applied to the naive continuous reading of
    the panel.  For each absorbed path a latent absorption time is drawn
    by bridging its final segment (so it falls between the last two
    observation points), and beta0 is refined by ascent on those times.
    With no absorbed paths the refinement is skipped with a warning.
    """
    panel = _PanelArrays(data)
    pi_hat = empirical_pi(data)
    lam0 = mle_generator(_naive_statistics(panel), panel.K)[1]
    if cfg.homogeneous_mode:
        return pi_hat, lam0, cfg.beta0
    times = _init_absorption_times(panel, lam0, cfg, rng)
    if times.size == 0:
        warnings.warn(
            "no absorbed paths: keeping beta0 unrefined", RuntimeWarning
        )
        return pi_hat, lam0, cfg.beta0
    obj = BetaObjective(cfg.family, pi_hat, lam0, times)
    beta_hat, _steps = gd_solve(
        obj, cfg.beta0, cfg.eta, cfg.e_ell, cfg.beta_min, cfg.gd_max_steps,
        trace=beta_trace,
    )
    return pi_hat, lam0, beta_hat


def _init_absorption_times(
    panel: _PanelArrays, lam0: SubIntensityMatrix, cfg: FitConfig, rng: RandomStream
) -> np.ndarray:
    """Latent absorption epochs for absorbed paths, bridged on the raw
    timeline under the naive generator (iteration key 0)."""
    out = []
    for k in np.nonzero(panel.absorbed)[0]:
        t = panel.times[k]
        x = int(panel.states0[k][-2]) + 1
        seg = None
        for round_ in (0, 1):
            try:
                seg = bridge_sample(
                    lam0,
                    float(t[-2]),
                    x,
                    float(t[-1]),
                    panel.n + 1,
                    rng.substream(0, int(k), round_),
                    cfg.max_attempts,
                )
                break
            except BridgeBudgetError:
                if round_ == 1:
                    raise
        out.append(seg.jump_times[-1])
    return np.asarray(out, dtype=float)


def _complete_all(
    panel: _PanelArrays,
    lam: SubIntensityMatrix,
    family: ScalingFamily,
    cfg: FitConfig,
    rng: RandomStream,
    iteration: int,
) -> tuple[SufficientStatistics, np.ndarray, list[ContinuousPath]]:
    """SE-step: reconstruct every path on the homogeneous timeline.

    Returns pooled statistics, the homogeneous absorption epochs (one per
    path per replication, panel order) and the completed trajectories.
    """
    if np.any(~panel.absorbed):
        last = {int(s[-1]) for s, a in zip(panel.states0, panel.absorbed) if not a}
        check_absorbable(lam, sorted(last))
    cum, total = jump_model(lam)
    tbuf = np.empty(_PATH_CAP, dtype=np.float64)
    sbuf = np.empty(_PATH_CAP, dtype=np.int64)
    completed: list[ContinuousPath] = []
    absorption: list[float] = []
    for rep in range(cfg.bridge_replications):
        for k in range(panel.K):
            obs_s = np.asarray(family.g_inv(panel.times[k]), dtype=float)
            obs_x = panel.states0[k]
            path = None
            for round_ in (0, 1):
                key = (iteration, k, round_) if cfg.bridge_replications == 1 else (
                    iteration, k, round_, rep
                )
                gen = rng.substream(*key).generator()
                status, info, count, end = _kernels.complete_panel_path(
                    gen, obs_s, obs_x, cum, total, panel.n,
                    int(cfg.max_attempts), tbuf, sbuf,
                )
                if status == 0:
                    path = ContinuousPath(
                        n=panel.n,
                        times=np.concatenate(([0.0], tbuf[:count])),
                        states=np.concatenate(([obs_x[0]], sbuf[:count])) + 1,
                        end_time=float(end),
                        timeline=HOMOGENEOUS,
                    )
                    break
                if status == 1 and round_ == 0:
                    continue
                if status == 1:
                    seg = int(info)
                    raise BridgeBudgetError(
                        int(obs_x[seg]) + 1,
                        int(obs_x[seg + 1]) + 1,
                        float(obs_s[seg + 1] - obs_s[seg]),
                        int(cfg.max_attempts),
                    )
                if status == 3:
                    raise StructuralError(
                        f"path {k}: dead-end state {int(obs_x[-1]) + 1} cannot "
                        "reach absorption"
                    )
                raise NumericalError(
                    f"path {k}: completion exceeded {_PATH_CAP} jumps"
                )
            completed.append(path)
            absorption.append(path.end_time)
    stats = accumulate_statistics(completed, panel.n)
    return stats, np.asarray(absorption), completed


def sem_iteration(
    data: PanelObservationSet | _PanelArrays,
    pi_hat: InitialDistribution,
    lam_hat: SubIntensityMatrix,
    beta_hat: float | None,
    cfg: FitConfig,
    rng: RandomStream,
    iteration_index: int,
    beta_trace: list | None = None,
) -> SemIterationResult:
    """One SEM sweep from the current (pi, Lambda, beta) state.

    Observation times are transformed at the incoming beta; the imputed
    absorption epochs are mapped back at that same beta before it is
    updated (matching the order of the estimation procedure).
    """
    panel = data if isinstance(data, _PanelArrays) else _PanelArrays(data)
    update_beta = not cfg.homogeneous_mode
    if update_beta and beta_hat is None:
        raise ValidationError("beta_hat is required unless in homogeneous mode")
    family = (
        ScalingFamily.identity()
        if cfg.family == IDENTITY
        else ScalingFamily(cfg.family, beta_hat)
    )
    try:
        stats, abs_hom, completed = _complete_all(
            panel, lam_hat, family, cfg, rng, iteration_index
        )
        new_lam = mle_generator(stats, panel.K * cfg.bridge_replications)[1]
        if not update_beta:
            return SemIterationResult(
                new_lam, None, 0, family.g(abs_hom), tuple(completed)
            )
        abs_cal = np.asarray(family.g(abs_hom), dtype=float)
        obj = BetaObjective(cfg.family, pi_hat, new_lam, abs_cal)
        new_beta, gd_updates = gd_solve(
            obj, beta_hat, cfg.eta, cfg.e_ell, cfg.beta_min, cfg.gd_max_steps,
            trace=beta_trace,
        )
        return SemIterationResult(
            new_lam, new_beta, gd_updates, abs_cal, tuple(completed)
        )
    except EstimationError as err:
        err.args = (f"iteration {iteration_index}: {err.args[0]}",) + err.args[1:]
        raise


def fit(
    data: PanelObservationSet,
    cfg: FitConfig,
    rng: RandomStream | None = None,
    beta_trace: list | None = None,
    keep_completed: bool = False,
) -> FitResult:
    """Full estimation procedure on a panel data set.

    Runs initialization then SEM iterations until one converges with a
    single ascent update or ``max_sem_iterations`` is reached (reported in
    ``termination``, not raised).  ``beta_trace`` collects
    (step, beta, loglik, grad) rows across all ascent runs;
    ``keep_completed`` retains the last iteration's reconstructed paths.
    """
    if cfg.homogeneous_mode:
        return fit_homogeneous(data, cfg, rng, keep_completed=keep_completed)
    if rng is None:
        rng = RandomStream(cfg.seed)
    panel = _PanelArrays(data)
    absorbed_paths = int(panel.absorbed.sum())
    pi_hat, lam_hat, beta_hat = initialize(data, cfg, rng, beta_trace=beta_trace)
    trace: list[IterationRecord] = []
    termination = "max-iterations"
    iterations_used = cfg.max_sem_iterations
    completed = None
    for it in range(1, cfg.max_sem_iterations + 1):
        step = sem_iteration(
            panel, pi_hat, lam_hat, beta_hat, cfg, rng, it, beta_trace=beta_trace
        )
        lam_hat, beta_hat = step.lam_hat, step.beta_hat
        trace.append(
            IterationRecord(it, step.gd_updates, absorbed_paths, beta_hat, lam_hat)
        )
        if keep_completed:
            completed = step.completed
        if step.gd_updates == 1:
            termination = "single-update-converged"
            iterations_used = it
            break
    return FitResult(
        pi_hat=pi_hat,
        lam_hat=lam_hat,
        beta_hat=beta_hat,
        iterations_used=iterations_used,
        termination=termination,
        trace=tuple(trace),
        config=cfg,
        completed=completed,
    )


def _tail_average(records: list[IterationRecord], tail: int) -> SubIntensityMatrix:
    mats = np.stack([r.lam_hat.entries for r in records[-tail:]])
    mean = mats.mean(axis=0)
    off = np.where(np.eye(mean.shape[0], dtype=bool), 0.0, mean)
    exit_mean = np.maximum(-mats.sum(axis=2).mean(axis=0), 0.0)
    np.fill_diagonal(off, -(off.sum(axis=1) + exit_mean))
    return SubIntensityMatrix(off)


def fit_homogeneous(
    data: PanelObservationSet,
    cfg: FitConfig,
    rng: RandomStream | None = None,
    keep_completed: bool = False,
) -> FitResult:
    """Plain-homogeneous variant: identity transform, no beta machinery.

    Runs exactly ``homog_iterations`` SEM sweeps and returns the entrywise
    mean of the last ``homog_tail_average`` Lambda iterates, diagonal
    re-projected so full-generator rows sum to zero.
    """
    if not cfg.homogeneous_mode:
        raise ValidationError("fit_homogeneous requires cfg.homogeneous_mode")
    if rng is None:
        rng = RandomStream(cfg.seed)
    panel = _PanelArrays(data)
    absorbed_paths = int(panel.absorbed.sum())
    pi_hat, lam_hat, _beta = initialize(data, cfg, rng)
    trace: list[IterationRecord] = []
    completed = None
    for it in range(1, cfg.homog_iterations + 1):
        step = sem_iteration(panel, pi_hat, lam_hat, None, cfg, rng, it)
        lam_hat = step.lam_hat
        trace.append(IterationRecord(it, 0, absorbed_paths, None, lam_hat))
        if keep_completed:
            completed = step.completed
    lam_avg = _tail_average(trace, cfg.homog_tail_average)
    return FitResult(
        pi_hat=pi_hat,
        lam_hat=lam_avg,
        beta_hat=None,
        iterations_used=cfg.homog_iterations,
        termination="max-iterations",
        trace=tuple(trace),
        config=cfg,
        completed=completed,
    )
