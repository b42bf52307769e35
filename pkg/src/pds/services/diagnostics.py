"""Ill-conditioning metrics and distribution checks."""
import logging
import threading
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from pds.config import settings
from pds.core.exceptions import InvalidParameterError, ShapeMismatchError
from pds.core.fourier import dft2
from pds.core.rng import RngStream, StreamBundle
from pds.models.report import DiagnosticReport, EnergyTestResult, InvarianceReport, MomentReport
from pds.models.schedule import ChainState, SamplerConfig
from pds.services.oracles import (
    FrequencyDiagonalCovariance,
    GaussianTarget,
    MixtureTarget,
    ScoreOracle,
    TransformedProcessOracle,
)
from pds.services.steps import precond_langevin_step

logger = logging.getLogger(__name__)

PHASES = ('predictor', 'corrector')


def coordinate_variation(x: np.ndarray) -> np.ndarray:
    """Sum of squared deviations from the coordinate mean, per tensor."""
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean(axis=(-3, -2, -1), keepdims=True)
    return np.sum(centered ** 2, axis=(-3, -2, -1))


def coordinate_range(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x.max(axis=(-3, -2, -1)) - x.min(axis=(-3, -2, -1))


class TrajectoryRecorder:
    """Accumulates per-iteration V_coo and R_coo for predictor and corrector states.

    Chain blocks may record concurrently; sums are combined under a lock.
    """

    def __init__(self, n_iterations: int, phases: Sequence[str] = PHASES):
        self.n_iterations = n_iterations
        self.phases = tuple(phases)
        self._lock = threading.Lock()
        self._v = {p: np.zeros(n_iterations) for p in self.phases}
        self._r = {p: np.zeros(n_iterations) for p in self.phases}
        self._count = {p: np.zeros(n_iterations) for p in self.phases}

    def record(self, phase: str, iteration: int, x: np.ndarray):
        """iteration is 1-based."""
        if phase not in self._v:
            return
        batch = x.reshape((-1,) + x.shape[-3:])
        finite = np.all(np.isfinite(batch), axis=(1, 2, 3))
        if not finite.any():
            return
        v = float(np.sum(coordinate_variation(batch[finite])))
        r = float(np.sum(coordinate_range(batch[finite])))
        with self._lock:
            self._v[phase][iteration - 1] += v
            self._r[phase][iteration - 1] += r
            self._count[phase][iteration - 1] += int(finite.sum())

    def traces(self) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
        v_trace, r_trace = {}, {}
        for p in self.phases:
            seen = self._count[p] > 0
            v_trace[p] = self._v[p][seen] / self._count[p][seen]
            r_trace[p] = self._r[p][seen] / self._count[p][seen]
        return v_trace, r_trace

    def report(self, aggregate: Sequence[str] = PHASES) -> DiagnosticReport:
        return trace_ill_conditioning(self, aggregate)


def trace_ill_conditioning(run, aggregate: Sequence[str] = PHASES) -> DiagnosticReport:
    """V_coo and R_coo averaged over chains and iterations.

    ``run`` is a TrajectoryRecorder or an array of states shaped
    (iterations, chains, C, H, W). ``aggregate`` picks which sub-states count.
    """
    if isinstance(run, TrajectoryRecorder):
        v_trace, r_trace = run.traces()
        totals_v = [run._v[p].sum() for p in aggregate if p in run._v]
        totals_r = [run._r[p].sum() for p in aggregate if p in run._r]
        counts = [run._count[p].sum() for p in aggregate if p in run._count]
        n = float(sum(counts))
        v = float(sum(totals_v) / n) if n else 0.0
        r = float(sum(totals_r) / n) if n else 0.0
        return DiagnosticReport(v_coo=v, r_coo=r, v_trace=v_trace, r_trace=r_trace)

    states = np.asarray(run, dtype=np.float64)
    if states.ndim == 4:
        states = states[:, None]
    v_per = coordinate_variation(states)
    r_per = coordinate_range(states)
    return DiagnosticReport(
        v_coo=float(v_per.mean()),
        r_coo=float(r_per.mean()),
        v_trace={'trajectory': v_per.mean(axis=1)},
        r_trace={'trajectory': r_per.mean(axis=1)},
    )


def target_moments(oracle: ScoreOracle) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """(mean, per-coordinate variance, per-frequency variance or None)."""
    if isinstance(oracle, TransformedProcessOracle):
        oracle = oracle.target
    if isinstance(oracle, GaussianTarget):
        cov = oracle.covariance
        spectral = cov.spectral_variances() if isinstance(cov, FrequencyDiagonalCovariance) else None
        return oracle.mean, cov.variances(), spectral
    if isinstance(oracle, MixtureTarget):
        w = oracle.weights.reshape((-1, 1, 1, 1))
        means = np.stack([c.mean for c in oracle.components])
        variances = np.stack([c.covariance.variances() for c in oracle.components])
        mean = np.sum(w * means, axis=0)
        second = np.sum(w * (variances + means ** 2), axis=0)
        return mean, second - mean ** 2, None
    raise InvalidParameterError(f"No analytic moments for {type(oracle).__name__}")


def moment_check(samples: np.ndarray, target: ScoreOracle) -> MomentReport:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 4 or samples.shape[0] < 2:
        raise InvalidParameterError("moment_check needs at least 2 samples shaped (N, C, H, W)")
    mean, variance, spectral = target_moments(target)
    if samples.shape[1:] != mean.shape:
        raise ShapeMismatchError(mean.shape, samples.shape[1:], "samples")
    sample_mean = samples.mean(axis=0)
    sample_var = samples.var(axis=0, ddof=1)
    mean_error = float(np.max(np.abs(sample_mean - mean)))
    variance_error = float(np.max(np.abs(sample_var - variance) / variance))
    spectral_error = None
    if spectral is not None:
        n = samples.shape[0]
        hw = samples.shape[-2] * samples.shape[-1]
        centered = samples - sample_mean
        power = np.zeros(mean.shape)
        for start in range(0, n, settings.PDS_CHAIN_BLOCK):
            s = dft2(centered[start:start + settings.PDS_CHAIN_BLOCK])
            power += np.sum((s * np.conj(s)).real, axis=0)
        spectral_var = power / (hw * (n - 1))
        spectral_error = float(np.max(np.abs(spectral_var - spectral) / spectral))
    return MomentReport(samples.shape[0], mean_error, variance_error, spectral_error)


def _flatten(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64)
    return arr.reshape(arr.shape[0], -1)


def _energy_from_sums(s_ab, s_aa, s_bb, n_a, n_b, paired):
    within_a = s_aa / (n_a * (n_a - 1)) if n_a > 1 else 0.0
    within_b = s_bb / (n_b * (n_b - 1)) if n_b > 1 else 0.0
    cross = s_ab / (n_a * (n_a - 1)) if paired else s_ab / (n_a * n_b)
    return 2.0 * cross - within_a - within_b


def energy_distance(samples_a, samples_b, paired: Optional[bool] = None) -> float:
    """U-statistic energy distance 2E|A-B| - E|A-A'| - E|B-B'|.

    With equally sized sets the cross term drops the i == j pairs as well
    (paired convention), which makes the distance of a set to itself exactly 0.
    """
    a, b = _flatten(samples_a), _flatten(samples_b)
    if a.shape[1] != b.shape[1]:
        raise ShapeMismatchError(a.shape[1:], b.shape[1:], "sample dimension")
    if paired is None:
        paired = len(a) == len(b) and len(a) > 1
    d_ab = cdist(a, b)
    s_ab = float(d_ab.sum() - (np.trace(d_ab) if paired else 0.0))
    return float(_energy_from_sums(s_ab, cdist(a, a).sum(), cdist(b, b).sum(), len(a), len(b), paired))


def energy_test(samples_a, samples_b, n_permutations: Optional[int] = None, rng: Optional[RngStream] = None) -> EnergyTestResult:
    """Permutation test of the unpaired energy statistic on a precomputed distance matrix."""
    a, b = _flatten(samples_a), _flatten(samples_b)
    n_permutations = n_permutations or settings.PDS_PERMUTATIONS
    rng = rng or RngStream(settings.PDS_SEED, 0)
    n_a, n_b = len(a), len(b)
    distances = cdist(np.vstack([a, b]), np.vstack([a, b]))

    def statistic(labels: np.ndarray) -> float:
        in_a = labels.astype(np.float64)
        in_b = 1.0 - in_a
        d_a = distances @ in_a
        return _energy_from_sums(float(in_b @ d_a), float(in_a @ d_a), float(in_b @ distances @ in_b), n_a, n_b, False)

    labels = np.zeros(n_a + n_b, dtype=bool)
    labels[:n_a] = True
    observed = statistic(labels)
    null = np.empty(n_permutations)
    for i in range(n_permutations):
        null[i] = statistic(rng.generator.permutation(labels))
    p_value = float((np.sum(null >= observed) + 1) / (n_permutations + 1))
    return EnergyTestResult(float(observed), float(np.quantile(null, 0.95)), p_value, null)


class PermutedOracle(ScoreOracle):
    """s'(x) = P s(P^T x) for a coordinate permutation P."""

    def __init__(self, base: ScoreOracle, permutation: np.ndarray):
        super().__init__(base.shape)
        self.base = base
        self.permutation = np.asarray(permutation)
        self.inverse = np.argsort(self.permutation)

    def score(self, x):
        return permute(self.base.score(permute(x, self.inverse)), self.permutation)

    def noised_score(self, x, sigma):
        return permute(self.base.noised_score(permute(x, self.inverse), sigma), self.permutation)


def permute(x: np.ndarray, permutation: np.ndarray) -> np.ndarray:
    """(P x)_i = x_{permutation[i]} over the flattened C, H, W coordinates."""
    flat = x.reshape(x.shape[:-3] + (-1,))
    return flat[..., permutation].reshape(x.shape)


class _ReplayNoise:

    def __init__(self, draws: Iterable[np.ndarray]):
        self._draws = iter(draws)

    def normal(self, shape):
        z = next(self._draws)
        if z.shape != tuple(shape):
            raise ShapeMismatchError(shape, z.shape, "replayed noise")
        return z


def _coupled_difference(oracle, x0, draws, permutation, sigma, epsilon, p, sol) -> float:
    original = ChainState(x0, 0, _ReplayNoise(draws))
    permuted = ChainState(permute(x0, permutation), 0, _ReplayNoise(permute(z, permutation) for z in draws))
    twin = PermutedOracle(oracle, permutation)
    worst = 0.0
    for t in range(1, len(draws) + 1):
        original.t = permuted.t = t
        original = precond_langevin_step(original, oracle, sigma, epsilon, p, sol)
        permuted = precond_langevin_step(permuted, twin, sigma, epsilon, p, sol)
        worst = max(worst, float(np.max(np.abs(permute(original.x, permutation) - permuted.x))))
    return worst


def invariance_harness(
    permutation: np.ndarray,
    config: SamplerConfig,
    oracle: ScoreOracle,
    n_steps: int = 50,
    n_chains: int = 4,
    sigma: float = 0.1,
    epsilon: float = 0.05,
    rng: Optional[RngStream] = None,
) -> InvarianceReport:
    """Coupled-noise permutation experiment for the vanilla and the configured sampler.

    The permuted run uses score P s(P^T x), start P x_0 and noise P z_t; the
    report holds max |P x_t - x'_t| over all steps.
    """
    rng = rng or RngStream(settings.PDS_SEED, 0)
    permutation = np.asarray(permutation)
    if permutation.shape != (oracle.shape.size,):
        raise ShapeMismatchError((oracle.shape.size,), permutation.shape, "permutation")
    bundle = StreamBundle.for_chains(rng, n_chains)
    shape = (n_chains,) + tuple(oracle.shape)
    x0 = bundle.normal(shape)
    draws = [bundle.normal(shape) for _ in range(n_steps)]
    vanilla = _coupled_difference(oracle, x0, draws, permutation, sigma, epsilon, None, None)
    preconditioned = _coupled_difference(
        oracle, x0, draws, permutation, sigma, epsilon, config.preconditioner, config.solenoidal
    )
    logger.info(f"Invariance: vanilla={vanilla:.3e}, preconditioned={preconditioned:.3e}")
    return InvarianceReport(n_steps, vanilla, preconditioned)
