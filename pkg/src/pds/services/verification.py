"""Fixed-seed property suites behind ``pds verify``.

Every check returns a CheckResult; a suite passes when all of its checks do.
Sizes are kept small so each suite finishes in seconds.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from pds.core.fourier import dft2, idft2
from pds.core.pipeline import reverse_pass, run_langevin
from pds.core.rng import RngStream, StreamBundle
from pds.models.masks import PixelMask, Preconditioner, SolenoidalOp, SpectralMask
from pds.models.schedule import SamplerConfig
from pds.models.tensor import inner
from pds.services.diagnostics import invariance_harness, moment_check
from pds.services.loaders import synthetic_power_law_dataset
from pds.services.oracles import (
    DiagonalCovariance,
    FrequencyDiagonalCovariance,
    GaussianTarget,
    MixtureTarget,
    IsotropicCovariance,
    power_law_spectrum,
)
from pds.services.preconditioners import (
    apply_M,
    apply_adjoint,
    apply_inverse_M,
    build_masks,
    symmetrize,
)
from pds.services.schedules import make_schedule
from pds.services.solenoidal import apply_solenoidal

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    suite: str
    check: str
    value: float
    tolerance: float
    passed: bool

    def to_line(self) -> str:
        status = 'PASS' if self.passed else 'FAIL'
        return f"{status} {self.suite}.{self.check} value={self.value:.3e} tolerance={self.tolerance:.3e}"


def _at_most(suite, check, value, tolerance) -> CheckResult:
    return CheckResult(suite, check, float(value), float(tolerance), bool(value <= tolerance))


def _at_least(suite, check, value, tolerance) -> CheckResult:
    return CheckResult(suite, check, float(value), float(tolerance), bool(value > tolerance))


def random_preconditioner(shape, rng: RngStream, low: float = 0.5) -> Preconditioner:
    """Strictly positive random masks, the frequency one symmetrized."""
    freq = symmetrize(rng.generator.uniform(low, 1.0, size=shape))
    pixel = rng.generator.uniform(low, 1.0, size=shape)
    return Preconditioner(SpectralMask(freq, 2.0), PixelMask(pixel, 2.0))


def naive_dft2(x: np.ndarray) -> np.ndarray:
    """O(n^2) double-loop reference DFT over the last two axes."""
    h, w = x.shape[-2:]
    out = np.zeros(x.shape, dtype=np.complex128)
    for k in range(h):
        for l in range(w):
            phase = np.exp(-2j * np.pi * (np.arange(h)[:, None] * k / h + np.arange(w)[None, :] * l / w))
            out[..., k, l] = np.sum(x * phase, axis=(-2, -1))
    return out


def adjoint_suite(rng: RngStream) -> List[CheckResult]:
    shape = (3, 8, 8)
    p = random_preconditioner(shape, rng)
    worst_adjoint = 0.0
    worst_inverse = 0.0
    for _ in range(100):
        x, y = rng.normal(shape), rng.normal(shape)
        lhs, rhs = inner(apply_M(p, x), y), inner(x, apply_adjoint(p, y))
        worst_adjoint = max(worst_adjoint, abs(lhs - rhs) / max(abs(lhs), 1e-300))
        worst_inverse = max(worst_inverse, float(np.max(np.abs(apply_inverse_M(p, apply_M(p, x)) - x))))
    return [
        _at_most('adjoint', 'inner_product_identity', worst_adjoint, 1e-10),
        _at_most('adjoint', 'inverse_round_trip', worst_inverse, 1e-10),
    ]


def skew_suite(rng: RngStream) -> List[CheckResult]:
    shape = (3, 8, 8)
    results = []
    for op in SolenoidalOp.standard_set(omega=1.0):
        worst = 0.0
        for _ in range(100):
            x = rng.normal(shape)
            worst = max(worst, abs(inner(x, apply_solenoidal(op, x))) / inner(x, x))
        results.append(_at_most('skew', op.label, worst, 1e-10))
    return results


def solenoidal_suite(rng: RngStream) -> List[CheckResult]:
    shape = (3, 8, 8)
    results = []
    for op in SolenoidalOp.standard_set(omega=1.0):
        worst = 0.0
        for _ in range(20):
            x, y = rng.normal(shape), rng.normal(shape)
            gap = inner(x, apply_solenoidal(op, y)) + inner(apply_solenoidal(op, x), y)
            worst = max(worst, abs(gap) / np.sqrt(inner(x, x) * inner(y, y)))
        results.append(_at_most('solenoidal', op.label, worst, 1e-10))
    return results


def invariance_suite(rng: RngStream) -> List[CheckResult]:
    shape = (3, 8, 8)
    target = GaussianTarget(0.3, DiagonalCovariance(np.geomspace(0.2, 2.0, 192).reshape(shape)))
    pixel = np.linspace(0.3, 1.0, 192).reshape(shape)
    config = SamplerConfig(preconditioner=Preconditioner(pixel=PixelMask(pixel, 2.0)))
    permutation = rng.generator.permutation(192)
    report = invariance_harness(permutation, config, target, n_steps=50, rng=rng)
    return [
        _at_most('invariance', 'vanilla_difference', report.vanilla_difference, 1e-10),
        _at_least('invariance', 'pixel_mask_difference', report.preconditioned_difference, 1e-3),
    ]


def steady_state_fixture(
    rng: RngStream,
    omega_op: Optional[SolenoidalOp] = None,
    n_chains: int = 4000,
    n_steps: int = 2000,
    epsilon: float = np.sqrt(2e-3),
    start_at_target: bool = False,
):
    """Frequency-diagonal 1x4x4 target, data-built masks with alpha=2, fixed-level Langevin.

    Chains start from N(0, I), or from exact target samples with ``start_at_target``.
    """
    shape = (1, 4, 4)
    target = GaussianTarget(0.0, FrequencyDiagonalCovariance(power_law_spectrum(shape, 2.0)))
    freq, pixel = build_masks(synthetic_power_law_dataset(200, shape, rng.child(1)), alpha=2.0)
    p = Preconditioner(freq, pixel)
    bundle = StreamBundle.for_chains(rng.child(2), n_chains)
    x0 = target.sample_exact(rng.child(3), n_chains) if start_at_target else bundle.normal((n_chains,) + shape)
    samples, _ = run_langevin(target, x0, bundle, 1e-4, epsilon, n_steps, p, omega_op)
    return target, samples


def steady_state_suite(rng: RngStream) -> List[CheckResult]:
    target, samples = steady_state_fixture(rng)
    report = moment_check(samples, target)
    return [
        _at_most('steady_state', 'mean_error', report.mean_error, 0.05),
        _at_most('steady_state', 'variance_error', report.variance_error, 0.10),
        _at_most('steady_state', 'spectral_variance_error', report.spectral_variance_error, 0.10),
    ]


def final_state_fixture(rng: RngStream, n_chains: int = 4000, T: int = 1000):
    """Preconditioned reverse pass with the transformed-process oracle on a 1x4x4 frequency target."""
    shape = (1, 4, 4)
    target = GaussianTarget(0.5, FrequencyDiagonalCovariance(power_law_spectrum(shape, 10.0)))
    freq, _ = build_masks(synthetic_power_law_dataset(200, shape, rng.child(1)), alpha=2.0)
    schedule = make_schedule(T, 0.01, 20.0)
    samples = reverse_pass(target, schedule, n_chains, rng.child(2), Preconditioner(frequency=freq), transformed_oracle=True)
    return target, samples


def final_state_suite(rng: RngStream) -> List[CheckResult]:
    target, samples = final_state_fixture(rng)
    report = moment_check(samples, target)
    return [
        _at_most('final_state', 'mean_error', report.mean_error, 0.05),
        _at_most('final_state', 'variance_error', report.variance_error, 0.10),
    ]


def oracle_dft_suite(rng: RngStream) -> List[CheckResult]:
    x = rng.normal((3, 8, 8))
    spectrum = dft2(x)
    parseval = abs(np.sum(x ** 2) - np.sum(np.abs(spectrum) ** 2) / 64) / np.sum(x ** 2)

    mixture = MixtureTarget(
        [0.3, 0.7],
        [GaussianTarget(-1.0, IsotropicCovariance((1, 2, 2), 0.5)), GaussianTarget(1.5, IsotropicCovariance((1, 2, 2), 2.0))],
    )
    point = rng.normal((1, 2, 2))
    score = mixture.score(point)
    numeric = np.zeros_like(point)
    for idx in np.ndindex(point.shape):
        step = np.zeros_like(point)
        step[idx] = 1e-5
        numeric[idx] = (mixture.log_density(point + step) - mixture.log_density(point - step)) / 2e-5
    fd_error = float(np.max(np.abs(score - numeric)) / max(float(np.max(np.abs(score))), 1e-12))
    return [
        _at_most('oracle_dft', 'naive_dft', np.max(np.abs(spectrum - naive_dft2(x))), 1e-8),
        _at_most('oracle_dft', 'round_trip', np.max(np.abs(idft2(spectrum) - x)), 1e-10),
        _at_most('oracle_dft', 'parseval', parseval, 1e-10),
        _at_most('oracle_dft', 'mixture_score_fd', fd_error, 1e-6),
    ]


SUITES: Dict[str, Callable[[RngStream], List[CheckResult]]] = {
    'adjoint': adjoint_suite,
    'skew': skew_suite,
    'solenoidal': solenoidal_suite,
    'invariance': invariance_suite,
    'steady_state': steady_state_suite,
    'final_state': final_state_suite,
    'oracle_dft': oracle_dft_suite,
}


def run_suite(name: str, seed: int) -> List[CheckResult]:
    if name not in SUITES:
        raise ValueError(f"Unknown verify suite: {name}. Choose from {sorted(SUITES)}")
    logger.info(f"Running verify suite '{name}' (seed={seed})")
    results = SUITES[name](RngStream(seed, 0))
    for r in results:
        (logger.info if r.passed else logger.error)(r.to_line())
    return results
