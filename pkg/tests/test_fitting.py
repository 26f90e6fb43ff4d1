import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import least_squares

from pulsed_oscillator import closed_form as cf
from pulsed_oscillator.fitting import (
    FitProblem,
    InsufficientData,
    NotConverged,
    SingularJacobian,
    fit,
    initial_guess,
    model_values,
    synthetic_data,
)
from pulsed_oscillator.model import DriveSpec, InitialConditions, Method, SystemParams, TimeGrid, Trace


@pytest.fixture
def clean(gp, grid):
    return synthetic_data(grid, 2.0, 10.0, gp)


def test_noiseless_recovery(clean, gp):
    r = fit(FitProblem(clean, gp, init=(1.5, 8.0)))
    assert r.converged
    assert r.gamma_hat == pytest.approx(2.0, rel=1e-6)
    assert r.omega_hat == pytest.approx(10.0, rel=1e-6)
    assert r.residual_rms <= 1e-9 * np.max(np.abs(clean.values))
    assert r.gradient_norm < 1e-10


def test_start_at_truth(clean, gp):
    r = fit(FitProblem(clean, gp, init=(2.0, 10.0)))
    assert r.converged and r.n_iterations <= 2
    assert r.residual_rms == 0.0


def test_noisy_recovery_few_seeds(gp, grid):
    errs = []
    for seed in range(3):
        data = synthetic_data(grid, 2.0, 10.0, gp, noise=0.01, seed=seed)
        r = fit(FitProblem(data, gp, init=(1.5, 8.0)))
        assert r.converged and r.gradient_norm < 1e-10
        errs.append(max(abs(r.gamma_hat - 2.0) / 2.0, abs(r.omega_hat - 10.0) / 10.0))
    assert max(errs) <= 0.02


def test_matches_reference_least_squares(gp, grid):
    # an independent trust-region solver must land on the same optimum
    data = synthetic_data(grid, 2.0, 10.0, gp, noise=0.01, seed=11)
    ours = fit(FitProblem(data, gp, init=(1.5, 8.0)))
    ref = least_squares(
        lambda p: data.values - model_values(data.times, p[0], p[1], gp),
        x0=[1.5, 8.0], xtol=1e-14, ftol=1e-14, gtol=1e-14,
    )
    assert ours.gamma_hat == pytest.approx(ref.x[0], rel=1e-7)
    assert ours.omega_hat == pytest.approx(ref.x[1], rel=1e-7)


@pytest.mark.parametrize("kind", ["dc", "sp", "gp"])
def test_initial_guess_seeds_a_successful_fit(kind, grid):
    drive = DriveSpec(kind, 1.0, 0.0 if kind == "dc" else 0.001, 0.2)
    data = synthetic_data(grid, 2.0, 10.0, drive, noise=0.01, seed=5)
    r = fit(FitProblem(data, drive))
    assert r.converged
    assert abs(r.omega_hat - 10.0) <= 0.2 and abs(r.gamma_hat - 2.0) <= 0.1


def test_initial_guess_on_reference_configuration(params, dc, grid):
    data = cf.evaluate_trace(grid, params, dc)
    _, omega = initial_guess(data, dc)
    assert omega == pytest.approx(10.0, rel=0.15)


def test_initial_guess_on_free_decay(params, dc, grid):
    x = cf.homogeneous(grid.times, params, InitialConditions(1.0, 0.0))
    gamma, _ = initial_guess(Trace(grid, x, Method.time_periodic()), dc)
    assert gamma == pytest.approx(2.0, rel=0.1)


def test_initial_guess_needs_three_periods(clean, gp):
    short = Trace(TimeGrid(0.0, 2.5, 100), clean.values[:100], Method.time_periodic())
    with pytest.raises(InsufficientData):
        initial_guess(short, gp)


def test_amplitude_scaling_invariance(gp, grid):
    data = synthetic_data(grid, 2.0, 10.0, gp, noise=0.01, seed=3)
    scaled = Trace(grid, 7.5 * data.values, data.method)
    a = fit(FitProblem(data, gp, init=(1.5, 8.0)))
    b = fit(FitProblem(scaled, gp.with_impulse(7.5), init=(1.5, 8.0)))
    assert b.gamma_hat == pytest.approx(a.gamma_hat, rel=1e-9)
    assert b.omega_hat == pytest.approx(a.omega_hat, rel=1e-9)


@given(st.integers(0, 10_000), st.floats(1.2, 3.0), st.floats(7.0, 13.0))
@settings(max_examples=10)
def test_result_invariants(seed, g0, w0):
    grid = TimeGrid(0.0, 6.0, 1500)
    drive = DriveSpec.gaussian_train(1.0, 0.001, 0.2)
    data = synthetic_data(grid, 2.0, 10.0, drive, noise=0.02, seed=seed)
    r = fit(FitProblem(data, drive, init=(g0, w0)))
    assert all(a >= b for a, b in zip(r.rms_history, r.rms_history[1:]))
    assert abs(r.omega0_hat**2 - (r.gamma_hat**2 + r.omega_hat**2)) <= 4 * np.spacing(r.omega0_hat**2)
    assert 0 < r.gamma_hat < r.omega_hat


def test_second_harmonic_model(gp, grid):
    data = synthetic_data(grid, 2.0, 10.0, gp, model=Method.second_harmonic())
    r = fit(FitProblem(data, gp, model=Method.second_harmonic(), init=(1.6, 9.0)))
    assert r.gamma_hat == pytest.approx(2.0, rel=1e-6)
    assert r.omega_hat == pytest.approx(10.0, rel=1e-6)


def test_flat_data_has_singular_jacobian(grid):
    drive = DriveSpec.gaussian_train(1.0, 0.001, 0.2, impulse=0.0)
    data = Trace(grid, np.zeros(grid.n_samples), Method.time_periodic())
    with pytest.raises(SingularJacobian):
        fit(FitProblem(data, drive, init=(1.5, 8.0)))


def test_iteration_cap(clean, gp):
    r = fit(FitProblem(clean, gp, init=(1.0, 6.0)), max_iter=1)
    assert not r.converged and r.n_iterations == 1
    with pytest.raises(NotConverged) as info:
        fit(FitProblem(clean, gp, init=(1.0, 6.0)), max_iter=1, strict=True)
    assert info.value.result.n_iterations == 1


def test_problem_checks(clean, gp):
    with pytest.raises(ValueError):
        FitProblem(clean, gp, init=(3.0, 2.0))
    with pytest.raises(ValueError):
        FitProblem(clean, gp, model=Method.oracle())
    tiny = Trace(TimeGrid(0.0, 1.0, 5), np.zeros(5), Method.time_periodic())
    with pytest.raises(InsufficientData):
        FitProblem(tiny, gp)


def test_synthetic_noise_is_seeded(gp, grid):
    a = synthetic_data(grid, 2.0, 10.0, gp, noise=0.01, seed=4)
    b = synthetic_data(grid, 2.0, 10.0, gp, noise=0.01, seed=4)
    c = synthetic_data(grid, 2.0, 10.0, gp, noise=0.01, seed=5)
    assert np.array_equal(a.values, b.values) and not np.array_equal(a.values, c.values)
    params = SystemParams.from_omega(2.0, 10.0)
    residual = a.values - cf.tp_gp(grid.times, params, gp)
    assert np.std(residual) == pytest.approx(0.01 * np.max(np.abs(cf.tp_gp(grid.times, params, gp))), rel=0.05)
