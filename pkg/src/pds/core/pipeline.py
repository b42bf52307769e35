import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from pds.config import settings
from pds.core.exceptions import DivergenceError, InvalidParameterError
from pds.core.rng import RngStream, StreamBundle
from pds.models.masks import Preconditioner, SolenoidalOp
from pds.models.schedule import ChainState, InitialLaw, SamplerConfig, SamplerMode, Schedule
from pds.services.diagnostics import TrajectoryRecorder
from pds.services.oracles import GaussianTarget, ScoreOracle, TransformedProcessOracle
from pds.services.preconditioners import apply_M
from pds.services.steps import (
    langevin_step,
    precond_langevin_step,
    precond_reverse_step,
    reverse_diffusion_step,
)

logger = logging.getLogger(__name__)


@dataclass
class SampleBatch:
    samples: np.ndarray
    divergences: List[DivergenceError] = field(default_factory=list)

    @property
    def finite(self) -> np.ndarray:
        return np.all(np.isfinite(self.samples), axis=(1, 2, 3))

    @property
    def survivors(self) -> np.ndarray:
        return self.samples[self.finite]


class SamplingPipeline:
    """Predictor-corrector loop over a batch of chains.

    Each iteration runs the predictor at level T - t + 1 and then the corrector
    at the same level. Chains are processed in blocks on a thread pool; chain i
    always draws from ``rng.child(i)``, so results do not depend on the blocking.
    """

    def __init__(self, oracle: ScoreOracle, schedule: Schedule, config: SamplerConfig):
        self.oracle = oracle
        self.schedule = schedule
        self.config = config
        self.predictor_oracle = oracle
        if config.transformed_oracle and config.mode.has_predictor:
            if not isinstance(oracle, GaussianTarget):
                raise InvalidParameterError("transformed_oracle needs a Gaussian target")
            self.predictor_oracle = TransformedProcessOracle(oracle, config.preconditioner)

    def _initial(self, bundle: StreamBundle) -> np.ndarray:
        z = bundle.normal((len(bundle),) + tuple(self.oracle.shape))
        if self.config.resolved_initial_law == InitialLaw.UNIT:
            return z
        if self.config.transformed_oracle:
            z = apply_M(self.config.preconditioner, z)
        return self.schedule.terminal_sigma * z

    def _predict(self, state: ChainState, t: int, check: bool) -> ChainState:
        p = self.config.preconditioner
        if self.config.is_vanilla:
            return reverse_diffusion_step(state, self.predictor_oracle, self.schedule, t, check)
        return precond_reverse_step(state, self.predictor_oracle, self.schedule, t, p, check)

    def _correct(self, state: ChainState, t: int, check: bool) -> ChainState:
        sigma = self.schedule.reverse_sigma(t)
        epsilon = self.schedule.reverse_epsilon(t)
        if self.config.is_vanilla:
            return langevin_step(state, self.oracle, sigma, epsilon, check)
        return precond_langevin_step(
            state, self.oracle, sigma, epsilon, self.config.preconditioner, self.config.solenoidal, check
        )

    def _run_block(
        self,
        bundle: StreamBundle,
        offset: int,
        recorder: Optional[TrajectoryRecorder],
        strict: bool,
    ) -> Tuple[np.ndarray, List[DivergenceError]]:
        state = ChainState(self._initial(bundle), 0, bundle, offset)
        diverged = np.zeros(len(bundle), dtype=bool)
        divergences: List[DivergenceError] = []
        mode = self.config.mode

        def after(phase: str):
            if recorder is not None:
                recorder.record(phase, state.t, state.x)
            if not strict:
                bad = ~np.all(np.isfinite(state.x), axis=(1, 2, 3)) & ~diverged
                for i in np.flatnonzero(bad):
                    divergences.append(DivergenceError(state.t, offset + int(i), phase))
                diverged[bad] = True

        with np.errstate(over='ignore', invalid='ignore'):
            for t in range(1, self.schedule.T + 1):
                state.t = t
                if mode.has_predictor:
                    state = self._predict(state, t, strict)
                    after('predictor')
                if mode.has_corrector:
                    state = self._correct(state, t, strict)
                    after('corrector')
        return state.x, divergences

    def run(
        self,
        n_chains: int,
        rng: RngStream,
        recorder: Optional[TrajectoryRecorder] = None,
        strict: bool = True,
    ) -> SampleBatch:
        if n_chains < 1:
            raise InvalidParameterError(f"n_chains must be >= 1, got {n_chains}")
        block = max(1, settings.PDS_CHAIN_BLOCK)
        starts = list(range(0, n_chains, block))
        logger.info(
            f"Sampling {n_chains} chains, T={self.schedule.T}, mode={self.config.mode.value}, "
            f"vanilla={self.config.is_vanilla}, blocks={len(starts)}"
        )

        def work(start: int):
            stop = min(start + block, n_chains)
            return self._run_block(StreamBundle.for_chains(rng, stop - start, start), start, recorder, strict)

        workers = min(settings.worker_count(), len(starts))
        if workers == 1:
            results = [work(s) for s in starts]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(work, starts))

        samples = np.concatenate([r[0] for r in results])
        divergences = [d for r in results for d in r[1]]
        if divergences:
            logger.warning(f"{len(divergences)} of {n_chains} chains diverged")
        return SampleBatch(samples, divergences)


def pds_sample(
    config: SamplerConfig,
    oracle: ScoreOracle,
    schedule: Schedule,
    n_chains: int,
    rng: RngStream,
    recorder: Optional[TrajectoryRecorder] = None,
) -> np.ndarray:
    """Final states of ``n_chains`` chains; raises DivergenceError naming chain and iteration."""
    return SamplingPipeline(oracle, schedule, config).run(n_chains, rng, recorder).samples


def reverse_pass(
    oracle: ScoreOracle,
    schedule: Schedule,
    n_chains: int,
    rng: RngStream,
    preconditioner: Optional[Preconditioner] = None,
    initial_law: InitialLaw = InitialLaw.VE,
    transformed_oracle: bool = False,
) -> np.ndarray:
    config = SamplerConfig(SamplerMode.PREDICTOR_ONLY, preconditioner, None, initial_law, transformed_oracle)
    return pds_sample(config, oracle, schedule, n_chains, rng)


def run_langevin(
    oracle: ScoreOracle,
    x0: np.ndarray,
    rng,
    sigma: float,
    epsilon: float,
    n_steps: int,
    preconditioner: Optional[Preconditioner] = None,
    solenoidal: Optional[SolenoidalOp] = None,
    snapshot_every: Optional[int] = None,
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Fixed-level Langevin chains from x0; returns final states and periodic snapshots."""
    state = ChainState(np.asarray(x0, dtype=np.float64), 0, rng)
    snapshots: List[np.ndarray] = []
    vanilla = (preconditioner is None or preconditioner.is_identity) and (solenoidal is None or solenoidal.omega == 0)
    for t in range(1, n_steps + 1):
        state.t = t
        if vanilla:
            state = langevin_step(state, oracle, sigma, epsilon)
        else:
            state = precond_langevin_step(state, oracle, sigma, epsilon, preconditioner, solenoidal)
        if snapshot_every and t % snapshot_every == 0:
            snapshots.append(state.x.copy())
    logger.debug(f"Langevin run finished after {n_steps} steps (sigma={sigma:g}, epsilon={epsilon:g})")
    return state.x, snapshots

