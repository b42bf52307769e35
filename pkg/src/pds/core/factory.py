import logging
from dataclasses import dataclass
from typing import Optional, Tuple

from pds.config import settings
from pds.core.exceptions import InvalidParameterError
from pds.core.pipeline import SamplingPipeline
from pds.core.rng import RngStream
from pds.models.experiment import ExperimentConfig
from pds.models.masks import GradientOrder, PixelMask, Preconditioner, SolenoidalOp, SpectralMask
from pds.models.schedule import SamplerConfig, Schedule
from pds.services.loaders import DatasetSource, load_dataset, subsample, synthetic_power_law_dataset
from pds.services.oracles import DiagonalCovariance, FrequencyDiagonalCovariance, GaussianTarget, OracleFactory, ScoreOracle
from pds.services.preconditioners import build_masks, build_matched_frequency_mask, build_matched_pixel_mask
from pds.services.schedules import accelerate, make_schedule
from pds.services.storage import load_mask

logger = logging.getLogger(__name__)


@dataclass
class Experiment:
    config: ExperimentConfig
    oracle: ScoreOracle
    schedule: Schedule
    sampler: SamplerConfig
    rng: RngStream

    def pipeline(self) -> SamplingPipeline:
        return SamplingPipeline(self.oracle, self.schedule, self.sampler)


def create_schedule(config: ExperimentConfig) -> Schedule:
    spec = config.schedule
    schedule = make_schedule(spec.T, spec.sigma_min, spec.sigma_max, spec.kind, spec.epsilon_base, spec.epsilon_exponent)
    return accelerate(schedule, spec.accel)


def _mask_files(config: ExperimentConfig) -> Tuple[Optional[SpectralMask], Optional[PixelMask]]:
    spec = config.sampler
    freq = load_mask(spec.frequency_mask) if spec.frequency_mask else None
    pixel = load_mask(spec.pixel_mask) if spec.pixel_mask else None
    if freq is not None and not isinstance(freq, SpectralMask):
        raise InvalidParameterError(f"{spec.frequency_mask} holds a pixel mask")
    if pixel is not None and not isinstance(pixel, PixelMask):
        raise InvalidParameterError(f"{spec.pixel_mask} holds a frequency mask")
    if freq is not None and pixel is not None and abs(freq.alpha - pixel.alpha) > 1e-12:
        raise InvalidParameterError(f"Mask alphas differ: frequency {freq.alpha}, pixel {pixel.alpha}")
    return freq, pixel


def create_preconditioner(config: ExperimentConfig, oracle: ScoreOracle, rng: RngStream) -> Optional[Preconditioner]:
    spec = config.sampler
    order = GradientOrder.from_flag(spec.gradient_order)
    freq, pixel = _mask_files(config)

    if freq is None and pixel is None and (spec.build_masks_from or spec.synthetic_masks):
        alpha = spec.alpha or 2.0
        shape = tuple(config.target.shape)
        if spec.build_masks_from:
            dataset = load_dataset(DatasetSource(spec.build_masks_from, shape))
            dataset = subsample(dataset, settings.PDS_SUBSAMPLE, rng)
        else:
            dataset = synthetic_power_law_dataset(settings.PDS_SUBSAMPLE, shape, rng)
        freq, pixel = build_masks(dataset, alpha)

    if freq is None and pixel is None and spec.matched_mask:
        if isinstance(oracle, GaussianTarget) and isinstance(oracle.covariance, FrequencyDiagonalCovariance):
            freq = build_matched_frequency_mask(oracle.covariance.values)
        elif isinstance(oracle, GaussianTarget) and isinstance(oracle.covariance, DiagonalCovariance):
            pixel = build_matched_pixel_mask(oracle.covariance.values)
        else:
            raise InvalidParameterError("matched_mask needs a frequency-diagonal or diagonal Gaussian target")

    if freq is None and pixel is None:
        return None
    return Preconditioner(freq, pixel, order)


def create_experiment(config: ExperimentConfig) -> Experiment:
    logger.info("Initializing sampling experiment")
    rng = RngStream(config.run.seed, 0)
    oracle = OracleFactory.create(config.target)
    schedule = create_schedule(config)
    spec = config.sampler
    solenoidal = SolenoidalOp.parse(spec.solenoidal, spec.omega) if spec.solenoidal else None
    sampler = SamplerConfig(
        mode=spec.mode,
        preconditioner=create_preconditioner(config, oracle, RngStream(config.run.seed, 1)),
        solenoidal=solenoidal,
        initial_law=spec.initial_law,
        transformed_oracle=spec.transformed_oracle,
    )
    return Experiment(config, oracle, schedule, sampler, rng)
