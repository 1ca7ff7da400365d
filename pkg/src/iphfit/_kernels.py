"""Jitted jump-chain kernels.

The hot loops of trajectory simulation, bridge rejection sampling and
whole-path completion live here.  Every kernel draws from a
``numpy.random.Generator`` handed in by the caller; numba consumes the
underlying bit stream exactly like pure numpy does, so jitted and
non-jitted runs produce bitwise-identical paths.  Without numba the
decorated functions run as plain Python with the same semantics, just
slower.

Conventions inside this module only: states are 0-based, the absorbing
state has index n, and ``cum[x]`` holds the cumulative rates out of x over
the n+1 destinations (the n transient states with the self-rate zeroed,
then the exit rate), so ``cum[x, -1]`` is the total exit rate of x.  Each
jump consumes one exponential draw and, if it lands inside the horizon,
one uniform draw.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def decorate(func):
            return func

        return decorate


@njit(cache=True)
def sim_path(gen, state, t, horizon, cum, total, n, times, states):
    """Simulate the jump chain from ``state`` at time ``t``.

    Fills ``times``/``states`` with jump epochs and entered states until
    absorption, the horizon, or a full buffer.  Returns
    ``(status, count, state, time)`` with status 0 = buffer full (call
    again to continue), 1 = absorbed, 2 = horizon reached.  A state with
    no exit rate ends the path at the horizon.
    """
    cap = times.shape[0]
    count = 0
    while True:
        if count == cap:
            return 0, count, state, t
        rate = total[state]
        if rate <= 0.0:
            return 2, count, state, horizon
        dt = gen.exponential(1.0 / rate)
        if t + dt > horizon:
            return 2, count, state, horizon
        t = t + dt
        u = gen.random() * rate
        row = cum[state]
        nxt = 0
        while row[nxt] <= u:
            nxt += 1
        times[count] = t
        states[count] = nxt
        count += 1
        if nxt == n:
            return 1, count, nxt, t
        state = nxt


@njit(cache=True)
def bridge_attempts(gen, x, y, duration, cum, total, n, max_attempts, times, states):
    """Rejection-sample a path from x over ``duration`` ending in y.

    Each attempt resimulates the jump chain from scratch; an attempt is
    accepted iff the state occupied at ``duration`` equals y (an absorbed
    chain stays absorbed).  Returns ``(status, attempts, count)`` with
    status 0 = accepted (``count`` jumps in the buffers), 1 = budget
    exhausted, 2 = buffer overflow within an attempt.
    """
    cap = times.shape[0]
    for attempt in range(1, max_attempts + 1):
        count = 0
        state = x
        t = 0.0
        overflow = False
        while True:
            rate = total[state]
            if rate <= 0.0:
                break
            dt = gen.exponential(1.0 / rate)
            if t + dt > duration:
                break
            t = t + dt
            u = gen.random() * rate
            row = cum[state]
            nxt = 0
            while row[nxt] <= u:
                nxt += 1
            if count == cap:
                overflow = True
                break
            times[count] = t
            states[count] = nxt
            count += 1
            state = nxt
            if nxt == n:
                break
        if overflow:
            return 2, attempt, 0
        if state == y:
            return 0, attempt, count
    return 1, max_attempts, 0


@njit(cache=True)
def complete_panel_path(gen, obs_s, obs_x, cum, total, n, max_attempts, times, states):
    """Reconstruct one full trajectory consistent with its panel records.

    ``obs_s`` are the observation epochs on the homogeneous scale and
    ``obs_x`` the observed 0-based states (absorbing = n).  Every
    inter-observation segment is bridged by rejection; if the final
    observed state is transient the chain is then simulated to absorption.
    Jump epochs are absolute.  Returns ``(status, info, count, end_time)``
    with status 0 = completed (``end_time`` is the absorption epoch),
    1 = bridge budget exhausted on segment ``info``, 2 = buffer overflow,
    3 = dead-end state reached during the censored continuation.
    """
    cap = times.shape[0]
    count = 0
    m = obs_s.shape[0] - 1
    for seg in range(m):
        x = obs_x[seg]
        y = obs_x[seg + 1]
        s1 = obs_s[seg]
        duration = obs_s[seg + 1] - s1
        accepted = False
        for _attempt in range(max_attempts):
            k = 0
            state = x
            t = 0.0
            overflow = False
            while True:
                rate = total[state]
                if rate <= 0.0:
                    break
                dt = gen.exponential(1.0 / rate)
                if t + dt > duration:
                    break
                t = t + dt
                u = gen.random() * rate
                row = cum[state]
                nxt = 0
                while row[nxt] <= u:
                    nxt += 1
                if count + k == cap:
                    overflow = True
                    break
                times[count + k] = s1 + t
                states[count + k] = nxt
                k += 1
                state = nxt
                if nxt == n:
                    break
            if overflow:
                return 2, seg, 0, 0.0
            if state == y:
                count += k
                accepted = True
                break
        if not accepted:
            return 1, seg, 0, 0.0
    if obs_x[m] == n:
        return 0, m, count, times[count - 1]
    # censored: continue unconditioned from the last observed state
    state = obs_x[m]
    t = obs_s[m]
    while True:
        if count == cap:
            return 2, m, 0, 0.0
        rate = total[state]
        if rate <= 0.0:
            return 3, m, 0, 0.0
        t = t + gen.exponential(1.0 / rate)
        u = gen.random() * rate
        row = cum[state]
        nxt = 0
        while row[nxt] <= u:
            nxt += 1
        times[count] = t
        states[count] = nxt
        count += 1
        if nxt == n:
            return 0, m, count, t
        state = nxt
