import numpy as np
import pytest

from pds.config import settings
from pds.core.exceptions import DivergenceError, InvalidParameterError
from pds.core.pipeline import SamplingPipeline, pds_sample, reverse_pass, run_langevin
from pds.core.rng import RngStream, StreamBundle
from pds.models.masks import PixelMask, Preconditioner
from pds.models.schedule import InitialLaw, SamplerConfig, SamplerMode
from pds.services.diagnostics import TrajectoryRecorder, moment_check
from pds.services.oracles import ScoreOracle, ZeroScoreOracle
from pds.services.schedules import make_schedule


class PoisonedOracle(ScoreOracle):
    """Gaussian-like score that turns NaN for the chain at a given batch row."""

    def __init__(self, shape, row):
        super().__init__(shape)
        self.row = row

    def score(self, x):
        out = -np.array(x, dtype=np.float64)
        if out.ndim == 4 and out.shape[0] > self.row:
            out[self.row] = np.nan
        return out

    def noised_score(self, x, sigma):
        return self.score(x)


@pytest.fixture
def short_schedule():
    return make_schedule(20, 0.05, 5.0)


@pytest.fixture
def pixel_config():
    pixel = PixelMask(np.linspace(0.5, 1.0, 16).reshape(1, 4, 4))
    return SamplerConfig(preconditioner=Preconditioner(pixel=pixel))


def test_same_seed_same_samples(frequency_target, short_schedule, pixel_config):
    a = pds_sample(pixel_config, frequency_target, short_schedule, 6, RngStream(3))
    b = pds_sample(pixel_config, frequency_target, short_schedule, 6, RngStream(3))
    np.testing.assert_array_equal(a, b)
    c = pds_sample(pixel_config, frequency_target, short_schedule, 6, RngStream(4))
    assert not np.allclose(a, c)


def test_blocking_does_not_change_samples(monkeypatch, frequency_target, short_schedule, pixel_config):
    whole = pds_sample(pixel_config, frequency_target, short_schedule, 7, RngStream(3))
    monkeypatch.setattr(settings, 'PDS_CHAIN_BLOCK', 2)
    monkeypatch.setattr(settings, 'PDS_THREADS', 3)
    blocked = pds_sample(pixel_config, frequency_target, short_schedule, 7, RngStream(3))
    np.testing.assert_allclose(whole, blocked, rtol=1e-12, atol=1e-12)


def test_chain_does_not_depend_on_chain_count(frequency_target, short_schedule):
    config = SamplerConfig()
    few = pds_sample(config, frequency_target, short_schedule, 3, RngStream(5))
    many = pds_sample(config, frequency_target, short_schedule, 8, RngStream(5))
    np.testing.assert_allclose(few, many[:3], rtol=1e-12, atol=1e-12)


def test_empty_schedule_returns_initial_law(isotropic_target):
    schedule = make_schedule(0, 0.01, 20.0)
    bundle = StreamBundle.for_chains(RngStream(1), 4)
    z = bundle.normal((4, 1, 4, 4))

    ve = pds_sample(SamplerConfig(), isotropic_target, schedule, 4, RngStream(1))
    np.testing.assert_allclose(ve, 20.0 * z)

    unit = pds_sample(SamplerConfig(SamplerMode.CORRECTOR_ONLY), isotropic_target, schedule, 4, RngStream(1))
    np.testing.assert_array_equal(unit, z)


def test_initial_law_defaults():
    assert SamplerConfig(SamplerMode.PREDICTOR_ONLY).resolved_initial_law == InitialLaw.VE
    assert SamplerConfig(SamplerMode.CORRECTOR_ONLY).resolved_initial_law == InitialLaw.UNIT
    assert SamplerConfig(SamplerMode.CORRECTOR_ONLY, initial_law='ve').resolved_initial_law == InitialLaw.VE


def test_ve_initial_law_ignores_preconditioner(isotropic_target, pixel_config):
    schedule = make_schedule(0, 0.01, 2.0)
    x = pds_sample(pixel_config, isotropic_target, schedule, 4, RngStream(1))
    z = StreamBundle.for_chains(RngStream(1), 4).normal((4, 1, 4, 4))
    np.testing.assert_allclose(x, 2.0 * z)


def test_ve_initial_variance_is_isotropic(isotropic_target, pixel_config):
    schedule = make_schedule(0, 0.01, 2.0)
    x = pds_sample(pixel_config, isotropic_target, schedule, 20000, RngStream(2))
    np.testing.assert_allclose(x.var(axis=0), 4.0, rtol=0.06)


def test_transformed_oracle_starts_from_shaped_law(isotropic_target, pixel_config):
    schedule = make_schedule(0, 0.01, 2.0)
    config = SamplerConfig(preconditioner=pixel_config.preconditioner, transformed_oracle=True)
    x = pds_sample(config, isotropic_target, schedule, 4, RngStream(1))
    z = StreamBundle.for_chains(RngStream(1), 4).normal((4, 1, 4, 4))
    np.testing.assert_allclose(x, 2.0 * z / pixel_config.preconditioner.pixel.values)


def test_zero_score_reverse_pass_accumulates_terminal_variance():
    schedule = make_schedule(20, 0.05, 5.0)
    config = SamplerConfig(SamplerMode.PREDICTOR_ONLY, initial_law='unit')
    x = pds_sample(config, ZeroScoreOracle((1, 4, 4)), schedule, 10000, RngStream(6))
    z = StreamBundle.for_chains(RngStream(6), 10000).normal((10000, 1, 4, 4))
    assert np.sum(schedule.g ** 2) == pytest.approx(25.0)
    assert (x - z).var(axis=0).mean() == pytest.approx(25.0, rel=0.03)


def test_reverse_pass_recovers_gaussian(isotropic_target):
    schedule = make_schedule(500, 0.01, 20.0)
    samples = reverse_pass(isotropic_target, schedule, 2000, RngStream(21))
    report = moment_check(samples, isotropic_target)
    assert report.passes(mean_tol=0.15, variance_tol=0.2)


def test_strict_run_raises_with_chain_index(short_schedule):
    pipeline = SamplingPipeline(PoisonedOracle((1, 2, 2), 1), short_schedule, SamplerConfig())
    with pytest.raises(DivergenceError) as info:
        pipeline.run(3, RngStream(0))
    assert info.value.chain == 1
    assert info.value.iteration == 1
    assert info.value.phase == 'predictor'


def test_lenient_run_collects_divergences(short_schedule):
    pipeline = SamplingPipeline(PoisonedOracle((1, 2, 2), 1), short_schedule, SamplerConfig())
    recorder = TrajectoryRecorder(short_schedule.T)
    batch = pipeline.run(3, RngStream(0), recorder, strict=False)
    assert [d.chain for d in batch.divergences] == [1]
    assert batch.finite.tolist() == [True, False, True]
    assert batch.survivors.shape == (2, 1, 2, 2)
    assert np.isfinite(recorder.report().v_coo)


def test_recorder_sees_every_iteration(frequency_target, short_schedule):
    recorder = TrajectoryRecorder(short_schedule.T)
    SamplingPipeline(frequency_target, short_schedule, SamplerConfig()).run(4, RngStream(0), recorder)
    v_trace, r_trace = recorder.traces()
    assert v_trace['predictor'].shape == (20,)
    assert v_trace['corrector'].shape == (20,)
    assert np.all(r_trace['corrector'] > 0)


def test_modes_select_phases(frequency_target, short_schedule):
    recorder = TrajectoryRecorder(short_schedule.T)
    SamplingPipeline(frequency_target, short_schedule, SamplerConfig(SamplerMode.PREDICTOR_ONLY)).run(
        2, RngStream(0), recorder
    )
    v_trace, _ = recorder.traces()
    assert v_trace['predictor'].shape == (20,)
    assert v_trace['corrector'].shape == (0,)


def test_transformed_oracle_needs_gaussian(short_schedule):
    config = SamplerConfig(transformed_oracle=True)
    with pytest.raises(InvalidParameterError):
        SamplingPipeline(ZeroScoreOracle((1, 2, 2)), short_schedule, config)


def test_invalid_chain_count(frequency_target, short_schedule):
    with pytest.raises(InvalidParameterError):
        SamplingPipeline(frequency_target, short_schedule, SamplerConfig()).run(0, RngStream(0))


def test_run_langevin_snapshots(diagonal_target):
    bundle = StreamBundle.for_chains(RngStream(2), 5)
    x0 = np.zeros((5, 1, 4, 4))
    x, snapshots = run_langevin(diagonal_target, x0, bundle, 0.01, 0.1, 30, snapshot_every=10)
    assert x.shape == (5, 1, 4, 4)
    assert len(snapshots) == 3
    np.testing.assert_array_equal(snapshots[-1], x)
