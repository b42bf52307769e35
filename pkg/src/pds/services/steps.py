"""Single update rules.

All four rules go through ``_euler_update`` so that, with an identity
preconditioner and no solenoidal term, the preconditioned rules perform the
same floating-point operations as the vanilla ones.
"""
import logging
from dataclasses import replace
from typing import Optional

import numpy as np

from pds.core.exceptions import DivergenceError, InvalidParameterError
from pds.models.masks import Preconditioner, SolenoidalOp
from pds.models.schedule import ChainState, Schedule
from pds.services.oracles import ScoreOracle
from pds.services.preconditioners import apply_M, apply_gradient_transform
from pds.services.solenoidal import apply_solenoidal

logger = logging.getLogger(__name__)


def _euler_update(x, drift_scale, drift, noise_scale, noise):
    return x + drift_scale * drift + noise_scale * noise


def check_finite(x: np.ndarray, iteration: int, phase: str, chain_offset: int = 0):
    if np.all(np.isfinite(x)):
        return
    chain = None
    if x.ndim == 4:
        bad = ~np.all(np.isfinite(x), axis=(1, 2, 3))
        chain = chain_offset + int(np.argmax(bad))
    raise DivergenceError(iteration, chain, phase)


def _advance(state: ChainState, x: np.ndarray, phase: str, check: bool) -> ChainState:
    if check:
        check_finite(x, state.t, phase, state.chain_offset)
    return replace(state, x=x)


def langevin_step(state: ChainState, oracle: ScoreOracle, sigma: float, epsilon: float, check: bool = True) -> ChainState:
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon}")
    g = oracle.noised_score(state.x, sigma)
    z = state.rng.normal(state.x.shape)
    return _advance(state, _euler_update(state.x, 0.5 * epsilon ** 2, g, epsilon, z), 'corrector', check)


def precond_langevin_step(
    state: ChainState,
    oracle: ScoreOracle,
    sigma: float,
    epsilon: float,
    p: Optional[Preconditioner],
    sol: Optional[SolenoidalOp] = None,
    check: bool = True,
) -> ChainState:
    """x + (eps^2/2)(G + omega S[g]) + eps M[z], G the gradient transform of g."""
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon}")
    g = oracle.noised_score(state.x, sigma)
    drift = apply_gradient_transform(p, g)
    if sol is not None and sol.omega != 0:
        drift = drift + sol.omega * apply_solenoidal(sol, g)
    z = state.rng.normal(state.x.shape)
    x = _euler_update(state.x, 0.5 * epsilon ** 2, drift, epsilon, apply_M(p, z))
    return _advance(state, x, 'corrector', check)


def reverse_diffusion_step(state: ChainState, oracle: ScoreOracle, schedule: Schedule, t: int, check: bool = True) -> ChainState:
    g_bar = schedule.reverse_g(t)
    score = oracle.noised_score(state.x, schedule.reverse_sigma(t))
    z = state.rng.normal(state.x.shape)
    return _advance(state, _euler_update(state.x, g_bar ** 2, score, g_bar, z), 'predictor', check)


def precond_reverse_step(
    state: ChainState,
    oracle: ScoreOracle,
    schedule: Schedule,
    t: int,
    p: Optional[Preconditioner],
    check: bool = True,
) -> ChainState:
    g_bar = schedule.reverse_g(t)
    score = oracle.noised_score(state.x, schedule.reverse_sigma(t))
    z = state.rng.normal(state.x.shape)
    x = _euler_update(state.x, g_bar ** 2, apply_gradient_transform(p, score), g_bar, apply_M(p, z))
    return _advance(state, x, 'predictor', check)
