import numpy as np
import pytest

from iphfit import (
    EstimationError,
    FitConfig,
    GOMPERTZ,
    IDENTITY,
    InitialDistribution,
    PanelObservationSet,
    PanelPath,
    RandomStream,
    ScalingFamily,
    SubIntensityMatrix,
    ValidationError,
    WEIBULL,
    empirical_pi,
    fit,
    fit_homogeneous,
    initialize,
    sem_iteration,
    validate_generator,
)
from iphfit.studies import cohort_panel, simulate_cohort, uniform_grid


def _panel(n, rows):
    """rows: list of (path_id, times, states)."""
    return PanelObservationSet(
        n,
        tuple(
            PanelPath(pid, np.asarray(t, dtype=float), np.asarray(s))
            for pid, t, s in rows
        ),
    )


def make_panel(pi, lam, family, horizon, delta, count, seed):
    stream = RandomStream(seed)
    cohort = simulate_cohort(pi, lam, family, horizon, count, stream)
    return cohort_panel(cohort, uniform_grid(horizon, delta))


GOMPERTZ_CFG = FitConfig(family=GOMPERTZ, beta0=1.0, eta=1e-6, e_ell=0.01)
WEIBULL_CFG = FitConfig(family=WEIBULL, beta0=2.0, eta=1e-4, e_ell=0.01)


# ---------------------------------------------------------------------------
# empirical initial distribution


def test_empirical_pi_counts_first_states():
    data = _panel(
        3,
        [
            ("a", [0.0, 1.0], [1, 1]),
            ("b", [0.0, 1.0], [1, 2]),
            ("c", [0.0, 1.0], [2, 4]),
            ("d", [0.0, 1.0], [3, 3]),
        ],
    )
    np.testing.assert_allclose(
        empirical_pi(data).probabilities, [0.5, 0.25, 0.25]
    )


def test_empirical_pi_degenerate_cases():
    all_one = _panel(3, [(f"p{k}", [0.0, 1.0], [1, 1]) for k in range(5)])
    np.testing.assert_allclose(empirical_pi(all_one).probabilities, [1, 0, 0])
    single = _panel(2, [("x", [0.0], [2])])
    np.testing.assert_allclose(empirical_pi(single).probabilities, [0, 1])


def test_empirical_pi_rejects_absorbing_start_and_empty():
    with pytest.raises(ValidationError, match="absorbing"):
        empirical_pi(_panel(2, [("a", [0.0], [3])]))
    with pytest.raises(ValidationError):
        empirical_pi(PanelObservationSet(2))


# ---------------------------------------------------------------------------
# initialization


def test_initialize_naive_bookkeeping():
    # read panel jumps as exact: R=(2,2), N12=1, N21=1, 2 absorptions from 2
    data = _panel(
        2,
        [
            ("a", [0.0, 1.0, 2.0, 3.0], [1, 1, 2, 3]),
            ("b", [0.0, 1.0], [2, 3]),
        ],
    )
    cfg = FitConfig(family=IDENTITY, homogeneous_mode=True)
    pi0, lam0, beta0 = initialize(data, cfg, RandomStream(0))
    np.testing.assert_allclose(pi0.probabilities, [0.5, 0.5])
    np.testing.assert_allclose(lam0.entries, [[-0.5, 0.5], [0.0, -1.0]])
    assert beta0 == cfg.beta0


def test_initialize_on_simulated_panel(gompertz_pi, gompertz_lam):
    fam = ScalingFamily(GOMPERTZ, 0.1019)
    data = make_panel(gompertz_pi, gompertz_lam, fam, 30.0, 1.0, 60, 81)
    pi0, lam0, beta0 = initialize(data, GOMPERTZ_CFG, RandomStream(81))
    assert validate_generator(lam0).ok
    assert np.all(np.isfinite(lam0.entries))
    assert beta0 >= GOMPERTZ_CFG.beta_min
    assert pi0.probabilities.sum() == pytest.approx(1.0)


def test_initialize_without_absorbed_paths_keeps_beta0():
    data = _panel(
        2,
        [
            ("a", [0.0, 1.0, 2.0], [1, 2, 2]),
            ("b", [0.0, 1.0, 2.0], [2, 1, 1]),
        ],
    )
    with pytest.warns(RuntimeWarning, match="no absorbed paths"):
        _, _, beta0 = initialize(data, GOMPERTZ_CFG, RandomStream(3))
    assert beta0 == GOMPERTZ_CFG.beta0


def test_fit_rejects_degenerate_panel():
    # single time-0 observation: no occupation anywhere, MLEs undefined
    data = _panel(2, [("a", [0.0], [1])])
    with pytest.raises(EstimationError):
        fit(data, GOMPERTZ_CFG)


# ---------------------------------------------------------------------------
# SEM iteration at the truth


def test_sem_iteration_near_fixed_point(weibull_pi, weibull_lam):
    fam = ScalingFamily(WEIBULL, 3.0)
    data = make_panel(weibull_pi, weibull_lam, fam, 5.0, 0.1, 400, 82)
    step = sem_iteration(
        data, weibull_pi, weibull_lam, 3.0, WEIBULL_CFG, RandomStream(82), 1
    )
    assert validate_generator(step.lam_hat).ok
    assert abs(step.lam_hat.entries[0, 0] + 3.0) <= 0.6
    assert abs(step.lam_hat.entries[0, 1] - 0.1) <= 0.08
    assert abs(step.lam_hat.entries[1, 0] - 0.01) <= 0.05
    assert abs(step.beta_hat - 3.0) <= 0.5
    assert step.absorption_times.size == len(data)
    assert step.gd_updates >= 1


def test_sem_iteration_requires_beta_outside_homogeneous_mode(
    weibull_pi, weibull_lam
):
    data = _panel(2, [("a", [0.0, 1.0], [1, 3])])
    with pytest.raises(ValidationError):
        sem_iteration(
            data, weibull_pi, weibull_lam, None, WEIBULL_CFG, RandomStream(0), 1
        )


# ---------------------------------------------------------------------------
# full fit


@pytest.fixture(scope="module")
def small_gompertz_fit(gompertz_pi, gompertz_lam):
    fam = ScalingFamily(GOMPERTZ, 0.1019)
    data = make_panel(gompertz_pi, gompertz_lam, fam, 30.0, 1.0, 80, 83)
    result = fit(data, GOMPERTZ_CFG, RandomStream(83))
    return data, result


def test_fit_outcome_shape(small_gompertz_fit):
    data, result = small_gompertz_fit
    assert result.termination in ("single-update-converged", "max-iterations")
    assert result.iterations_used == len(result.trace)
    assert result.beta_hat is not None and result.beta_hat > 0
    assert result.lam_hat.entries.shape == (3, 3)
    assert result.completed is None


def test_fit_trace_invariants(small_gompertz_fit):
    data, result = small_gompertz_fit
    absorbed = data.absorbed_count()
    for rec in result.trace:
        assert validate_generator(rec.lam_hat).ok
        assert rec.beta_hat >= GOMPERTZ_CFG.beta_min
        assert rec.absorbed_paths == absorbed
        assert rec.gd_updates >= 1
    assert [rec.iteration for rec in result.trace] == list(
        range(1, len(result.trace) + 1)
    )
    if result.termination == "single-update-converged":
        assert result.trace[-1].gd_updates == 1
        assert all(rec.gd_updates > 1 for rec in result.trace[:-1])


def test_fit_is_bitwise_reproducible(gompertz_pi, gompertz_lam):
    fam = ScalingFamily(GOMPERTZ, 0.1019)
    data = make_panel(gompertz_pi, gompertz_lam, fam, 25.0, 1.0, 50, 84)
    cfg = GOMPERTZ_CFG
    a = fit(data, cfg, RandomStream(7))
    b = fit(data, cfg, RandomStream(7))
    assert a.beta_hat == b.beta_hat
    assert np.array_equal(a.lam_hat.entries, b.lam_hat.entries)
    assert a.iterations_used == b.iterations_used
    assert a.termination == b.termination
    for ra, rb in zip(a.trace, b.trace):
        assert ra.beta_hat == rb.beta_hat
        assert np.array_equal(ra.lam_hat.entries, rb.lam_hat.entries)


def test_fit_seed_comes_from_config_when_rng_omitted(gompertz_pi, gompertz_lam):
    fam = ScalingFamily(GOMPERTZ, 0.1019)
    data = make_panel(gompertz_pi, gompertz_lam, fam, 25.0, 1.0, 50, 85)
    cfg = FitConfig(family=GOMPERTZ, beta0=1.0, eta=1e-6, e_ell=0.01, seed=9)
    a = fit(data, cfg)
    b = fit(data, cfg, RandomStream(9))
    assert a.beta_hat == b.beta_hat
    assert np.array_equal(a.lam_hat.entries, b.lam_hat.entries)


@pytest.fixture(scope="module")
def instrumented_fit(gompertz_pi, gompertz_lam):
    fam = ScalingFamily(GOMPERTZ, 0.1019)
    data = make_panel(gompertz_pi, gompertz_lam, fam, 30.0, 1.0, 80, 86)
    rows: list = []
    result = fit(
        data, GOMPERTZ_CFG, RandomStream(86), beta_trace=rows, keep_completed=True
    )
    return data, result, rows


def test_fit_keep_completed_returns_paths(instrumented_fit):
    data, result, _ = instrumented_fit
    assert result.completed is not None
    assert len(result.completed) == len(data)
    for p in result.completed:
        assert p.timeline == "homogeneous"


def test_fit_beta_trace_collects_ascent_rows(instrumented_fit):
    _, result, rows = instrumented_fit
    assert len(rows) >= result.iterations_used
    for step, beta, ell, grad in rows:
        assert step >= 1
        assert beta >= GOMPERTZ_CFG.beta_min
        assert np.isfinite(grad) or ell == -np.inf


# ---------------------------------------------------------------------------
# homogeneous variant


def test_fit_homogeneous_requires_mode():
    data = _panel(2, [("a", [0.0, 1.0], [1, 3])])
    with pytest.raises(ValidationError):
        fit_homogeneous(data, FitConfig(family=IDENTITY))


def test_fit_homogeneous_consistency():
    lam = SubIntensityMatrix(np.array([[-0.8, 0.3], [0.2, -0.6]]))
    pi = InitialDistribution(np.array([0.6, 0.4]))
    data = make_panel(pi, lam, ScalingFamily.identity(), 8.0, 0.5, 300, 87)
    cfg = FitConfig(
        family=IDENTITY,
        homogeneous_mode=True,
        homog_iterations=60,
        homog_tail_average=10,
    )
    result = fit_homogeneous(data, cfg, RandomStream(87))
    assert result.beta_hat is None
    assert result.iterations_used == 60
    assert len(result.trace) == 60
    assert validate_generator(result.lam_hat).ok
    assert np.max(np.abs(result.lam_hat.entries - lam.entries)) <= 0.15


def test_fit_homogeneous_single_sweep_equals_iteration():
    lam = SubIntensityMatrix(np.array([[-0.8, 0.3], [0.2, -0.6]]))
    pi = InitialDistribution(np.array([0.6, 0.4]))
    data = make_panel(pi, lam, ScalingFamily.identity(), 8.0, 0.5, 60, 88)
    cfg = FitConfig(
        family=IDENTITY,
        homogeneous_mode=True,
        homog_iterations=1,
        homog_tail_average=1,
    )
    result = fit_homogeneous(data, cfg, RandomStream(88))
    rng = RandomStream(88)
    pi0, lam0, _ = initialize(data, cfg, rng)
    step = sem_iteration(data, pi0, lam0, None, cfg, rng, 1)
    np.testing.assert_allclose(
        result.lam_hat.entries, step.lam_hat.entries, atol=1e-12
    )


def test_fit_dispatches_homogeneous_mode():
    lam = SubIntensityMatrix(np.array([[-0.8, 0.3], [0.2, -0.6]]))
    pi = InitialDistribution(np.array([0.6, 0.4]))
    data = make_panel(pi, lam, ScalingFamily.identity(), 8.0, 0.5, 40, 89)
    cfg = FitConfig(
        family=IDENTITY,
        homogeneous_mode=True,
        homog_iterations=3,
        homog_tail_average=2,
    )
    via_fit = fit(data, cfg, RandomStream(4))
    direct = fit_homogeneous(data, cfg, RandomStream(4))
    assert np.array_equal(via_fit.lam_hat.entries, direct.lam_hat.entries)
    assert via_fit.beta_hat is None


# ---------------------------------------------------------------------------
# configuration validation


def test_fit_config_validation():
    with pytest.raises(ValidationError):
        FitConfig(family="loglogistic")
    with pytest.raises(ValidationError):
        FitConfig(family=GOMPERTZ, homogeneous_mode=True)
    with pytest.raises(ValidationError):
        FitConfig(family=GOMPERTZ, eta=0.0)
    with pytest.raises(ValidationError):
        FitConfig(family=GOMPERTZ, e_ell=-0.1)
    with pytest.raises(ValidationError):
        FitConfig(family=GOMPERTZ, beta0=1e-6)  # below beta_min
    with pytest.raises(ValidationError):
        FitConfig(family=GOMPERTZ, max_sem_iterations=0)
    with pytest.raises(ValidationError):
        FitConfig(family=IDENTITY, homogeneous_mode=True, homog_tail_average=0)
    with pytest.raises(ValidationError):
        FitConfig(
            family=IDENTITY,
            homogeneous_mode=True,
            homog_iterations=5,
            homog_tail_average=6,
        )
    with pytest.raises(ValidationError):
        FitConfig(family=GOMPERTZ, seed=-1)
