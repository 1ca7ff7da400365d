import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from iphfit import (
    BetaObjective,
    ContinuousPath,
    GOMPERTZ,
    HOMOGENEOUS,
    IDENTITY,
    INHOMOGENEOUS,
    InitialDistribution,
    NonConvergenceError,
    PathSegment,
    RandomStream,
    ScalingFamily,
    StarvedStateError,
    SubIntensityMatrix,
    SufficientStatistics,
    ValidationError,
    WEIBULL,
    accumulate_statistics,
    beta_gradient,
    beta_loglik,
    gd_solve,
    iph_cdf,
    iph_density,
    matrix_exponential,
    mle_generator,
    simulate_homogeneous,
    simulate_inhomogeneous,
    validate_generator,
)

ONE_STATE = SubIntensityMatrix(np.array([[-1.0]]))
POINT_MASS = InitialDistribution(np.array([1.0]))


def _path(times, states, end_time, n=2, timeline=HOMOGENEOUS):
    return ContinuousPath(
        n=n,
        times=np.asarray(times, dtype=float),
        states=np.asarray(states),
        end_time=end_time,
        timeline=timeline,
    )


# ---------------------------------------------------------------------------
# sufficient statistics


def test_accumulate_single_absorbed_path():
    stats = accumulate_statistics([_path([0.0, 0.4, 1.0], [1, 2, 3], 1.0)])
    assert stats.start_counts.tolist() == [1, 0]
    assert stats.jump_counts.tolist() == [[0, 1], [0, 0]]
    assert stats.absorption_counts.tolist() == [0, 1]
    np.testing.assert_allclose(stats.occupation, [0.4, 0.6])


def test_accumulate_empty_collection():
    stats = accumulate_statistics([], n=3)
    assert stats.n == 3
    assert stats.start_counts.sum() == 0
    assert stats.occupation.sum() == 0.0


def test_accumulate_censored_partial_holding():
    stats = accumulate_statistics([_path([0.0, 0.4], [1, 2], 1.0)])
    assert stats.absorption_counts.tolist() == [0, 0]
    np.testing.assert_allclose(stats.occupation, [0.4, 0.6])


def test_accumulate_segment_contributes_no_start():
    seg = PathSegment(
        n=2,
        start_time=1.0,
        start_state=1,
        jump_times=np.array([1.5]),
        jump_states=np.array([3]),
        end_time=1.5,
        timeline=HOMOGENEOUS,
    )
    stats = accumulate_statistics([seg])
    assert stats.start_counts.tolist() == [0, 0]
    assert stats.absorption_counts.tolist() == [1, 0]
    np.testing.assert_allclose(stats.occupation, [0.5, 0.0])


def test_accumulate_merge_additivity(weibull_lam, weibull_pi):
    paths = [
        simulate_homogeneous(weibull_lam, weibull_pi, 20.0, RandomStream(61, (k,)))
        for k in range(40)
    ]
    merged = accumulate_statistics(paths)
    split = accumulate_statistics(paths[:17]) + accumulate_statistics(paths[17:], n=2)
    assert merged.start_counts.tolist() == split.start_counts.tolist()
    assert merged.jump_counts.tolist() == split.jump_counts.tolist()
    assert merged.absorption_counts.tolist() == split.absorption_counts.tolist()
    np.testing.assert_allclose(merged.occupation, split.occupation, rtol=1e-12)


def test_accumulate_rejects_inhomogeneous_timeline():
    with pytest.raises(ValidationError):
        accumulate_statistics(
            [_path([0.0, 0.4], [1, 2], 1.0, timeline=INHOMOGENEOUS)]
        )


def test_statistics_validation():
    with pytest.raises(ValidationError):
        SufficientStatistics(
            np.array([1]), np.array([[1]]), np.array([0]), np.array([1.0])
        )  # nonzero jump diagonal
    with pytest.raises(ValidationError):
        SufficientStatistics(
            np.array([-1]), np.array([[0]]), np.array([0]), np.array([1.0])
        )


# ---------------------------------------------------------------------------
# complete-data MLEs


def test_mle_ratio_example():
    stats = SufficientStatistics(
        np.array([2, 0]),
        np.array([[0, 3], [0, 0]]),
        np.array([0, 2]),
        np.array([6.0, 2.0]),
    )
    pi_hat, lam_hat = mle_generator(stats, 2)
    assert lam_hat.entries[0, 1] == pytest.approx(0.5)
    assert lam_hat.entries[0, 0] == pytest.approx(-0.5)
    assert lam_hat.entries[1, 1] == pytest.approx(-1.0)
    assert validate_generator(lam_hat).ok


def test_mle_pi_counting():
    stats = SufficientStatistics(
        np.array([2, 2]),
        np.array([[0, 1], [1, 0]]),
        np.array([1, 1]),
        np.array([3.0, 4.0]),
    )
    pi_hat, _ = mle_generator(stats, 4)
    np.testing.assert_allclose(pi_hat.probabilities, [0.5, 0.5])


def test_mle_starved_state():
    stats = SufficientStatistics(
        np.array([2, 0]),
        np.array([[0, 0], [0, 0]]),
        np.array([2, 0]),
        np.array([5.0, 0.0]),
    )
    with pytest.raises(StarvedStateError) as exc:
        mle_generator(stats, 2)
    assert exc.value.state == 2


def test_mle_simulation_consistency(weibull_lam, weibull_pi):
    root = RandomStream(62)
    paths = [
        simulate_homogeneous(weibull_lam, weibull_pi, np.inf, root.substream(k))
        for k in range(100_000)
    ]
    stats = accumulate_statistics(paths)
    _, lam_hat = mle_generator(stats, len(paths))
    # MC standard error of each rate: sqrt(count)/occupation
    for x in range(2):
        for y in range(2):
            if x == y:
                continue
            se = max(np.sqrt(stats.jump_counts[x, y]), 1.0) / stats.occupation[x]
            assert abs(lam_hat.entries[x, y] - weibull_lam.entries[x, y]) <= 3 * se


def complete_data_loglik(stats, lam: np.ndarray) -> float:
    """Log-likelihood of the jump/holding part given complete data."""
    n = stats.n
    exits = -lam.sum(axis=1)
    ll = float(np.sum(stats.occupation * np.diag(lam)))
    for x in range(n):
        for y in range(n):
            if x != y and stats.jump_counts[x, y] > 0:
                ll += stats.jump_counts[x, y] * np.log(lam[x, y])
        if stats.absorption_counts[x] > 0:
            ll += stats.absorption_counts[x] * np.log(exits[x])
    return ll


@pytest.mark.properties
def test_mle_perturbation_maximality():
    rng = np.random.default_rng(63)
    for trial in range(10):
        n = int(rng.integers(2, 5))
        jumps = rng.poisson(8.0, size=(n, n))
        np.fill_diagonal(jumps, 0)
        absorb = rng.poisson(5.0, size=n) + 1
        occ = rng.gamma(4.0, 2.0, size=n) + 0.5
        starts = rng.multinomial(20, np.ones(n) / n)
        stats = SufficientStatistics(starts, jumps, absorb, occ)
        _, lam_hat = mle_generator(stats, 20)
        base = complete_data_loglik(stats, lam_hat.entries)
        for x in range(n):
            for y in range(n):
                if x == y or stats.jump_counts[x, y] == 0:
                    continue
                for factor in (0.9, 1.1):
                    pert = lam_hat.entries.copy()
                    pert[x, y] *= factor
                    pert[x, x] -= pert[x, y] - lam_hat.entries[x, y]
                    assert complete_data_loglik(stats, pert) < base


# ---------------------------------------------------------------------------
# density and CDF


def test_density_exponential_special_case():
    fam = ScalingFamily(IDENTITY)
    t = np.linspace(0.0, 5.0, 30)
    np.testing.assert_allclose(
        iph_density(POINT_MASS, ONE_STATE, fam, t), np.exp(-t), rtol=1e-12
    )
    assert iph_density(POINT_MASS, ONE_STATE, fam, 0.0) == pytest.approx(1.0)


def test_density_scalar_weibull_closed_form():
    fam = ScalingFamily(WEIBULL, 3.0)
    t = np.linspace(0.05, 2.5, 40)
    np.testing.assert_allclose(
        iph_density(POINT_MASS, ONE_STATE, fam, t),
        3 * t**2 * np.exp(-(t**3)),
        rtol=1e-12,
    )
    assert iph_density(POINT_MASS, ONE_STATE, fam, 1.0) == pytest.approx(
        3 * np.exp(-1.0)
    )


def test_density_normalization(weibull_lam, weibull_pi):
    fam = ScalingFamily(WEIBULL, 3.0)
    total, _ = quad(
        lambda t: iph_density(weibull_pi, weibull_lam, fam, t),
        0.0,
        np.inf,
        limit=300,
    )
    assert total == pytest.approx(1.0, abs=1e-6)


def test_density_normalization_gompertz(gompertz_lam, gompertz_pi):
    fam = ScalingFamily(GOMPERTZ, 0.1019)
    total, _ = quad(
        lambda t: iph_density(gompertz_pi, gompertz_lam, fam, t),
        0.0,
        np.inf,
        limit=300,
    )
    assert total == pytest.approx(1.0, abs=1e-6)


def test_cdf_basics():
    fam = ScalingFamily(IDENTITY)
    assert iph_cdf(POINT_MASS, ONE_STATE, fam, 0.0) == 0.0
    assert iph_cdf(POINT_MASS, ONE_STATE, fam, 1.0) == pytest.approx(1 - np.exp(-1))


def test_cdf_derivative_matches_density(gompertz_lam, gompertz_pi):
    fam = ScalingFamily(GOMPERTZ, 0.1019)
    h = 1e-5
    for t in np.linspace(1.0, 50.0, 25):
        fd = (
            iph_cdf(gompertz_pi, gompertz_lam, fam, t + h)
            - iph_cdf(gompertz_pi, gompertz_lam, fam, t - h)
        ) / (2 * h)
        assert abs(fd - iph_density(gompertz_pi, gompertz_lam, fam, t)) <= 1e-6


def test_cdf_monotone_density_nonnegative(gompertz_lam, gompertz_pi):
    fam = ScalingFamily(GOMPERTZ, 0.1019)
    grid = np.linspace(0.0, 120.0, 400)
    cdf = iph_cdf(gompertz_pi, gompertz_lam, fam, grid)
    den = iph_density(gompertz_pi, gompertz_lam, fam, grid)
    assert np.all(np.diff(cdf) >= -1e-12)
    assert cdf.max() <= 1.0
    assert np.all(den >= 0.0)


def test_density_overflowing_transform_yields_zero(gompertz_lam, gompertz_pi):
    fam = ScalingFamily(GOMPERTZ, 1.0)
    # beta*t = 1000 overflows the transform; density has long underflown
    assert iph_density(gompertz_pi, gompertz_lam, fam, 1000.0) == 0.0
    assert iph_cdf(gompertz_pi, gompertz_lam, fam, 1000.0) == 1.0


# ---------------------------------------------------------------------------
# beta objective


def _gompertz_times(count, seed, gompertz_lam, gompertz_pi, beta=0.1019):
    fam = ScalingFamily(GOMPERTZ, beta)
    root = RandomStream(seed)
    return np.array(
        [
            simulate_inhomogeneous(
                gompertz_lam, gompertz_pi, fam, np.inf, root.substream(k)
            ).times[-1]
            for k in range(count)
        ]
    )


def test_loglik_identity_single_observation():
    obj = BetaObjective(IDENTITY, POINT_MASS, ONE_STATE, np.array([2.3]))
    for beta in (0.1, 1.0, 7.0):
        assert beta_loglik(obj, beta) == pytest.approx(-2.3, rel=1e-12)


def test_loglik_is_sum_of_log_densities(gompertz_lam, gompertz_pi):
    rng = np.random.default_rng(71)
    times = rng.uniform(0.5, 40.0, size=20)
    obj = BetaObjective(GOMPERTZ, gompertz_pi, gompertz_lam, times)
    for beta in (0.05, 0.1019, 0.2):
        fam = ScalingFamily(GOMPERTZ, beta)
        ref = np.sum(np.log(iph_density(gompertz_pi, gompertz_lam, fam, times)))
        assert abs(beta_loglik(obj, beta) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_loglik_grid_scan_peaks_near_truth(gompertz_lam, gompertz_pi):
    times = _gompertz_times(10_000, 72, gompertz_lam, gompertz_pi)
    obj = BetaObjective(GOMPERTZ, gompertz_pi, gompertz_lam, times)
    grid = np.linspace(0.05, 0.2, 31)
    with warnings.catch_warnings():
        # the scan deliberately sweeps into underflow territory at the top end
        warnings.simplefilter("ignore", RuntimeWarning)
        vals = [beta_loglik(obj, b) for b in grid]
    best = grid[int(np.argmax(vals))]
    assert abs(best - 0.1019) <= 0.02


def test_loglik_underflow_sentinel(gompertz_lam, gompertz_pi):
    obj = BetaObjective(
        GOMPERTZ, gompertz_pi, gompertz_lam, np.array([30.0, 45.0])
    )
    with pytest.warns(RuntimeWarning, match="underflow"):
        val = beta_loglik(obj, 1.0)
    assert val == -np.inf


def test_objective_validation(gompertz_lam, gompertz_pi):
    for bad in ([], [0.0], [-1.0], [np.inf]):
        with pytest.raises(ValidationError):
            BetaObjective(GOMPERTZ, gompertz_pi, gompertz_lam, np.asarray(bad, dtype=float))


def test_gradient_identity_is_zero():
    obj = BetaObjective(
        IDENTITY, POINT_MASS, ONE_STATE, np.array([0.5, 1.0, 4.0])
    )
    assert beta_gradient(obj, 1.0) == 0.0


@pytest.mark.properties
def test_gradient_matches_finite_differences(gompertz_lam, gompertz_pi, weibull_lam, weibull_pi):
    eps = 1e-6
    rng = np.random.default_rng(73)
    times = rng.uniform(0.1, 2.0, size=15)
    cases = [
        (GOMPERTZ, gompertz_pi, gompertz_lam),
        (WEIBULL, weibull_pi, weibull_lam),
    ]
    for kind, pi, lam in cases:
        obj = BetaObjective(kind, pi, lam, times)
        for beta in (0.05, 0.1019, 0.5, 3.0):
            fd = (beta_loglik(obj, beta + eps) - beta_loglik(obj, beta - eps)) / (
                2 * eps
            )
            grad = beta_gradient(obj, beta)
            assert abs(grad - fd) <= 1e-5 * max(1.0, abs(fd))


@pytest.mark.properties
def test_gompertz_gradient_dual_formula(gompertz_lam, gompertz_pi):
    # independent route: closed-form accumulated derivative and the matrix
    # exponential evaluated directly, no eigendecomposition shortcut
    rng = np.random.default_rng(74)
    lam_arr = gompertz_lam.entries
    exit_vec = gompertz_lam.exit_rates()
    p = gompertz_pi.probabilities
    times = rng.uniform(0.1, 5.0, size=12)
    obj = BetaObjective(GOMPERTZ, gompertz_pi, gompertz_lam, times)
    for beta in (0.08, 0.15, 0.3):
        ref = 0.0
        for t in times:
            s = np.expm1(beta * t) / beta
            e = matrix_exponential(lam_arr, s)
            int_dh = t * np.exp(beta * t) / beta - np.expm1(beta * t) / beta**2
            ref += t + int_dh * (p @ lam_arr @ e @ exit_vec) / (p @ e @ exit_vec)
        got = beta_gradient(obj, beta)
        assert abs(got - ref) <= 1e-9 * max(1.0, abs(ref))


# ---------------------------------------------------------------------------
# gradient ascent


def test_gd_identity_converges_in_one_step():
    obj = BetaObjective(IDENTITY, POINT_MASS, ONE_STATE, np.array([1.0, 2.0]))
    beta, steps = gd_solve(obj, beta0=0.7, eta=0.1, e_ell=1e-3)
    assert beta == 0.7
    assert steps == 1


def test_gd_monotone_ascent_from_below(gompertz_lam, gompertz_pi):
    times = _gompertz_times(400, 75, gompertz_lam, gompertz_pi)
    obj = BetaObjective(GOMPERTZ, gompertz_pi, gompertz_lam, times)
    trace = []
    beta, steps = gd_solve(obj, beta0=0.05, eta=1e-6, e_ell=0.01, trace=trace)
    betas = [row[1] for row in trace]
    assert all(b2 >= b1 for b1, b2 in zip(betas, betas[1:]))
    assert abs(beta - 0.1019) <= 0.03
    assert steps == len(trace)


def test_gd_clamps_at_beta_min():
    # one observation far in the tail: the first update is hugely negative
    # and the generous threshold accepts the clamped point immediately
    obj = BetaObjective(GOMPERTZ, POINT_MASS, ONE_STATE, np.array([5.0]))
    beta, steps = gd_solve(obj, beta0=0.5, eta=10.0, e_ell=1e9)
    assert beta == 1e-5
    assert steps == 1


def test_gd_nonconvergence_carries_trace(gompertz_lam, gompertz_pi):
    times = _gompertz_times(100, 76, gompertz_lam, gompertz_pi)
    obj = BetaObjective(GOMPERTZ, gompertz_pi, gompertz_lam, times)
    with pytest.raises(NonConvergenceError) as exc:
        gd_solve(obj, beta0=0.05, eta=1e-9, e_ell=1e-9, max_steps=3)
    assert len(exc.value.trace) == 3


def test_gd_argument_validation():
    obj = BetaObjective(IDENTITY, POINT_MASS, ONE_STATE, np.array([1.0]))
    with pytest.raises(ValidationError):
        gd_solve(obj, beta0=1.0, eta=0.0, e_ell=0.1)
    with pytest.raises(ValidationError):
        gd_solve(obj, beta0=1.0, eta=0.1, e_ell=-1.0)
    with pytest.raises(ValidationError):
        gd_solve(obj, beta0=1e-6, eta=0.1, e_ell=0.1)  # below beta_min
