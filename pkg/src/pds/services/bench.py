import logging
import time
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from pds.config import settings
from pds.core.rng import RngStream
from pds.models.masks import Preconditioner
from pds.models.schedule import ChainState
from pds.services.oracles import FixedCostOracle
from pds.services.steps import langevin_step, precond_langevin_step

logger = logging.getLogger(__name__)


def _median_step_time(step, state: ChainState, iterations: int) -> float:
    times = []
    for t in range(1, iterations + 1):
        state.t = t
        start = time.perf_counter()
        state = step(state)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def run_bench(
    shape: Sequence[int],
    preconditioner: Optional[Preconditioner],
    iterations: int = 5,
    latency: Optional[float] = None,
    seed: int = 0,
) -> pd.DataFrame:
    """Median per-iteration wall time of the vanilla and preconditioned corrector step."""
    latency = settings.PDS_BENCH_ORACLE_LATENCY if latency is None else latency
    oracle = FixedCostOracle(shape, latency)
    rng = RngStream(seed, 0)
    x0 = rng.normal(tuple(shape))
    sigma, epsilon = 0.1, 0.01

    vanilla = _median_step_time(
        lambda s: langevin_step(s, oracle, sigma, epsilon), ChainState(x0.copy(), 0, rng.child(0)), iterations
    )
    preconditioned = _median_step_time(
        lambda s: precond_langevin_step(s, oracle, sigma, epsilon, preconditioner),
        ChainState(x0.copy(), 0, rng.child(1)),
        iterations,
    )
    ratio = preconditioned / vanilla if vanilla > 0 else float('nan')
    logger.info(f"Bench {tuple(shape)}: vanilla={vanilla:.4f}s, preconditioned={preconditioned:.4f}s, ratio={ratio:.3f}")
    return pd.DataFrame([
        {'sampler': 'vanilla', 'median_seconds': vanilla, 'relative': 1.0},
        {'sampler': 'preconditioned', 'median_seconds': preconditioned, 'relative': ratio},
    ]).assign(shape='x'.join(str(s) for s in shape), iterations=iterations, oracle_latency=latency)
