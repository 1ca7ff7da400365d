"""Trajectory simulation, panel discretization, Markov bridges and
censored-path completion.

Simulation follows the jump-chain/holding-time construction: the holding
time in state x is Exponential with rate ``-lambda_xx``; the chain then
moves to y != x with probability ``lambda_xy / (-lambda_xx)`` or absorbs
with probability ``exit_rate_x / (-lambda_xx)``.  Bridges are drawn by
rejection: simulate from the left endpoint over the interval and accept
only when the state occupied at the right endpoint matches.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import BridgeBudgetError, NumericalError, StructuralError, ValidationError
from .generator import InitialDistribution, SubIntensityMatrix
from .paths import (
    HOMOGENEOUS,
    INHOMOGENEOUS,
    ContinuousPath,
    PanelPath,
    PathSegment,
    RandomStream,
)
from .scaling import ScalingFamily

_CHUNK = 4096
_BRIDGE_CAP = 1 << 16


def _as_matrix(m) -> SubIntensityMatrix:
    if not isinstance(m, SubIntensityMatrix):
        m = SubIntensityMatrix(m)
    m.require_valid()
    return m


def _as_pi(pi, n: int) -> InitialDistribution:
    if not isinstance(pi, InitialDistribution):
        pi = InitialDistribution(np.asarray(pi, dtype=float))
    if pi.n != n:
        raise ValidationError(
            f"initial distribution has {pi.n} states, generator has {n}"
        )
    return pi


def jump_model(m: SubIntensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative-rate table for the kernels: (cum, total).

    ``cum[x]`` accumulates the n off-diagonal rates of x (self entry
    zeroed) followed by its exit rate; ``total[x] == cum[x, -1]``.
    """
    arr = m.entries
    n = m.n
    rates = np.zeros((n, n + 1))
    rates[:, :n] = np.where(np.eye(n, dtype=bool), 0.0, arr)
    rates[:, n] = m.exit_rates()
    cum = np.ascontiguousarray(np.cumsum(rates, axis=1))
    return cum, np.ascontiguousarray(cum[:, -1].copy())


def check_absorbable(m: SubIntensityMatrix, start_states0) -> None:
    """Raise unless absorption is reachable from every state reachable
    from ``start_states0`` (0-based) along positive-rate edges."""
    arr = m.entries
    n = m.n
    edges = arr > 0.0
    np.fill_diagonal(edges, False)
    reach = np.zeros(n, dtype=bool)
    stack = [int(s) for s in start_states0]
    for s in stack:
        reach[s] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(edges[i])[0]:
            if not reach[j]:
                reach[j] = True
                stack.append(int(j))
    can_absorb = m.exit_rates() > 0.0
    changed = True
    while changed:
        changed = False
        for i in range(n):
            if not can_absorb[i] and np.any(edges[i] & can_absorb):
                can_absorb[i] = True
                changed = True
    bad = np.nonzero(reach & ~can_absorb)[0]
    if bad.size:
        states = ", ".join(str(i + 1) for i in bad)
        raise StructuralError(
            f"absorption is unreachable from reachable state(s) {states}"
        )


def _draw_initial(gen: np.random.Generator, pi: InitialDistribution) -> int:
    u = gen.random()
    cum = np.cumsum(pi.probabilities)
    return min(int(np.searchsorted(cum, u, side="right")), pi.n - 1)


def _run_jump_chain(gen, state0, t0, horizon, cum, total, n):
    """Chunked driver around the sim_path kernel; returns 0-based jump
    arrays plus the absorbed flag and end time."""
    times_parts: list[np.ndarray] = []
    states_parts: list[np.ndarray] = []
    state, t = state0, t0
    while True:
        tbuf = np.empty(_CHUNK, dtype=np.float64)
        sbuf = np.empty(_CHUNK, dtype=np.int64)
        status, count, state, t = _kernels.sim_path(
            gen, state, t, horizon, cum, total, n, tbuf, sbuf
        )
        if count:
            times_parts.append(tbuf[:count].copy())
            states_parts.append(sbuf[:count].copy())
        if status != 0:
            break
    if times_parts:
        times = np.concatenate(times_parts)
        states = np.concatenate(states_parts)
    else:
        times = np.empty(0, dtype=np.float64)
        states = np.empty(0, dtype=np.int64)
    return times, states, status == 1, t


def simulate_homogeneous(m, pi, horizon: float, rng: RandomStream) -> ContinuousPath:
    """Simulate one homogeneous trajectory up to ``horizon``.

    Parameters
    ----------
    m : SubIntensityMatrix
    pi : InitialDistribution
    horizon : float
        Censoring time on the homogeneous scale; may be ``inf``, in which
        case absorption must be reachable from every state the chain can
        visit.
    rng : RandomStream

    Returns
    -------
    ContinuousPath tagged with the homogeneous timeline.
    """
    m = _as_matrix(m)
    pi = _as_pi(pi, m.n)
    horizon = float(horizon)
    if np.isnan(horizon) or horizon < 0.0:
        raise ValidationError(f"horizon must be >= 0, got {horizon!r}")
    gen = rng.generator()
    x0 = _draw_initial(gen, pi)
    if np.isinf(horizon):
        check_absorbable(m, [x0])
    cum, total = jump_model(m)
    jt, js, absorbed, end = _run_jump_chain(gen, x0, 0.0, horizon, cum, total, m.n)
    times = np.concatenate(([0.0], jt))
    states = np.concatenate(([x0], js)) + 1
    return ContinuousPath(
        n=m.n, times=times, states=states, end_time=end, timeline=HOMOGENEOUS
    )


def simulate_inhomogeneous(
    m, pi, family: ScalingFamily, horizon: float, rng: RandomStream
) -> ContinuousPath:
    """Simulate one time-scaled trajectory up to inhomogeneous time ``horizon``.

    The homogeneous chain is simulated to the transformed horizon and every
    epoch is mapped back through the inverse transform, so with a shared
    RandomStream the state sequence equals the homogeneous path's exactly.
    """
    horizon = float(horizon)
    if np.isnan(horizon) or horizon < 0.0:
        raise ValidationError(f"horizon must be >= 0, got {horizon!r}")
    hom_horizon = np.inf if np.isinf(horizon) else float(family.g_inv(horizon))
    path = simulate_homogeneous(m, pi, hom_horizon, rng)
    times = np.concatenate(([0.0], family.g(path.times[1:])))
    end = family.g(path.end_time) if path.absorbed else horizon
    return ContinuousPath(
        n=path.n, times=times, states=path.states, end_time=end, timeline=INHOMOGENEOUS
    )


def discretize(path: ContinuousPath, grid, path_id: str = "p0") -> PanelPath:
    """Observe a continuous path on a discrete grid.

    The state recorded at a grid time is the last state entered at or
    before it.  Grid points after the absorption epoch are dropped except
    the first one, which records the absorbing state; grid points after a
    censoring horizon are dropped.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("observation grid must be a non-empty vector")
    if not np.all(np.isfinite(grid)):
        raise ValidationError("observation grid must be finite")
    if grid[0] != 0.0:
        raise ValidationError("observation grid must start at 0")
    if np.any(np.diff(grid) <= 0.0):
        raise ValidationError("observation grid must increase strictly")
    if path.absorbed:
        tau = path.times[-1]
        kept = grid[grid < tau]
        idx = np.searchsorted(path.times, kept, side="right") - 1
        states = path.states[idx]
        after = grid[grid >= tau]
        if after.size:
            kept = np.concatenate([kept, after[:1]])
            states = np.concatenate([states, [path.n + 1]])
    else:
        kept = grid[grid <= path.end_time]
        idx = np.searchsorted(path.times, kept, side="right") - 1
        states = path.states[idx]
    return PanelPath(path_id=path_id, times=kept, states=states)


def bridge_sample(
    m,
    s1: float,
    x: int,
    s2: float,
    y: int,
    rng: RandomStream,
    max_attempts: int = 1_000_000,
) -> PathSegment:
    """Draw an endpoint-conditioned segment by rejection.

    Simulates from state ``x`` over ``[s1, s2]`` repeatedly until the
    state occupied at ``s2`` equals ``y``; only such trajectories are
    accepted.  Epochs in the returned segment are absolute (in
    ``(s1, s2]``).

    Raises
    ------
    BridgeBudgetError
        After ``max_attempts`` rejected attempts (the endpoint pair has
        near-zero probability under ``m``).
    """
    m = _as_matrix(m)
    n = m.n
    s1, s2 = float(s1), float(s2)
    if not (np.isfinite(s1) and np.isfinite(s2) and s1 < s2):
        raise ValidationError(f"bridge needs finite s1 < s2, got {s1!r}, {s2!r}")
    if not (1 <= int(x) <= n):
        raise ValidationError(f"bridge start state must be transient, got {x}")
    if not (1 <= int(y) <= n + 1):
        raise ValidationError(f"bridge end state must lie in 1..{n + 1}, got {y}")
    if int(max_attempts) < 1:
        raise ValidationError("max_attempts must be at least 1")
    cum, total = jump_model(m)
    tbuf = np.empty(_BRIDGE_CAP, dtype=np.float64)
    sbuf = np.empty(_BRIDGE_CAP, dtype=np.int64)
    gen = rng.generator()
    status, attempts, count = _kernels.bridge_attempts(
        gen, int(x) - 1, int(y) - 1, s2 - s1, cum, total, n,
        int(max_attempts), tbuf, sbuf,
    )
    if status == 1:
        raise BridgeBudgetError(int(x), int(y), s2 - s1, attempts)
    if status == 2:
        raise NumericalError(
            f"bridge attempt exceeded {_BRIDGE_CAP} jumps; rates are too fast "
            "for this interval length"
        )
    return PathSegment(
        n=n,
        start_time=s1,
        start_state=int(x),
        jump_times=s1 + tbuf[:count],
        jump_states=sbuf[:count] + 1,
        end_time=s2,
        timeline=HOMOGENEOUS,
    )


def complete_censored(m, last_state: int, rng: RandomStream) -> PathSegment:
    """Simulate onward from a censored path's last state until absorption.

    The returned segment starts at its own origin (time 0); its final
    epoch is the additional homogeneous time needed to absorb.
    """
    m = _as_matrix(m)
    if not (1 <= int(last_state) <= m.n):
        raise ValidationError(
            f"last state must be transient (1..{m.n}), got {last_state}"
        )
    check_absorbable(m, [int(last_state) - 1])
    cum, total = jump_model(m)
    gen = rng.generator()
    jt, js, absorbed, end = _run_jump_chain(
        gen, int(last_state) - 1, 0.0, np.inf, cum, total, m.n
    )
    if not absorbed:  # pragma: no cover - excluded by check_absorbable
        raise StructuralError("censored completion failed to absorb")
    return PathSegment(
        n=m.n,
        start_time=0.0,
        start_state=int(last_state),
        jump_times=jt,
        jump_states=js + 1,
        end_time=end,
        timeline=HOMOGENEOUS,
    )
