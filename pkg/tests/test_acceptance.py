"""End-to-end sampling checks on analytic Gaussian targets. Slow; run with ``-m slow``."""
import numpy as np
import pytest

from pds.core.pipeline import SamplingPipeline
from pds.core.rng import RngStream
from pds.models.masks import Preconditioner, SolenoidalOp
from pds.models.schedule import SamplerConfig, SamplerMode
from pds.services.bench import run_bench
from pds.services.diagnostics import TrajectoryRecorder, energy_test, moment_check
from pds.services.loaders import synthetic_power_law_dataset
from pds.services.oracles import FrequencyDiagonalCovariance, GaussianTarget, power_law_spectrum
from pds.services.preconditioners import build_masks, build_matched_frequency_mask
from pds.services.schedules import accelerate, make_schedule
from pds.services.verification import final_state_fixture, steady_state_fixture

pytestmark = pytest.mark.slow


def test_final_state_matches_target():
    target, samples = final_state_fixture(RngStream(0, 0))
    assert moment_check(samples, target).passes(0.05, 0.10)


@pytest.mark.parametrize('label, omega', [
    ('shift(1,1)', 0.1),
    ('shift(10,10)', 0.1),
    ('fourier_shift(1,1)', 1000.0),
    ('fourier_antisym', 1000.0),
])
def test_steady_state_with_solenoidal_drift(label, omega):
    target, samples = steady_state_fixture(RngStream(0, 0), SolenoidalOp.parse(label, omega))
    report = moment_check(samples, target)
    assert report.mean_error < 0.05
    assert report.variance_error < 0.10
    assert report.spectral_variance_error < 0.10


@pytest.mark.parametrize('label', ['shift(1,1)', 'shift(10,10)'])
def test_strong_shift_drift_keeps_target_with_small_steps(label):
    # omega * epsilon^2 / 2 = 5e-4 keeps the explicit skew update stable
    target, samples = steady_state_fixture(
        RngStream(0, 0), SolenoidalOp.parse(label, 1000.0), n_steps=1000, epsilon=1e-3, start_at_target=True
    )
    assert np.all(np.isfinite(samples))
    report = moment_check(samples, target)
    assert report.mean_error < 0.05
    assert report.variance_error < 0.10
    assert report.spectral_variance_error < 0.10


def _ill_conditioned_target():
    shape = (1, 8, 8)
    return GaussianTarget(0.0, FrequencyDiagonalCovariance(power_law_spectrum(shape, 1000.0)))


def _accelerated_corrector_run(target, preconditioner):
    schedule = accelerate(make_schedule(2000, 1e-3, 1e-2, epsilon_base=0.01 / np.sqrt(20), epsilon_exponent=0.0), 20)
    assert schedule.T == 100
    config = SamplerConfig(SamplerMode.CORRECTOR_ONLY, preconditioner, initial_law='unit')
    recorder = TrajectoryRecorder(schedule.T)
    batch = SamplingPipeline(target, schedule, config).run(1000, RngStream(7, 0), recorder)
    return batch.samples, recorder.report()


def test_accelerated_schedule_needs_preconditioning():
    target = _ill_conditioned_target()
    exact = target.sample_exact(RngStream(7, 2), 1000)
    matched = Preconditioner(frequency=build_matched_frequency_mask(target.covariance.values))

    pds_samples, pds_report = _accelerated_corrector_run(target, matched)
    vanilla_samples, vanilla_report = _accelerated_corrector_run(target, None)

    assert not energy_test(pds_samples, exact, rng=RngStream(1, 0)).rejects(0.95)
    assert energy_test(vanilla_samples, exact, rng=RngStream(1, 0)).rejects(0.95)
    assert np.all(pds_report.v_trace['corrector'] < vanilla_report.v_trace['corrector'])
    assert np.all(pds_report.r_trace['corrector'] < vanilla_report.r_trace['corrector'])
    assert pds_report.v_coo < vanilla_report.v_coo
    assert pds_report.r_coo < vanilla_report.r_coo


def test_preconditioning_overhead_is_small():
    shape = (3, 256, 256)
    freq, pixel = build_masks(synthetic_power_law_dataset(8, shape, RngStream(0, 1)), alpha=2.0)
    table = run_bench(shape, Preconditioner(freq, pixel), iterations=3, latency=0.25)
    ratio = table.loc[table['sampler'] == 'preconditioned', 'relative'].item()
    assert ratio <= 1.15
