"""Closed-form score oracles.

Every oracle exposes the exact score of its target and of the target convolved
with N(0, sigma^2 I); the samplers call these in place of a trained network.
Inputs may be single tensors (C, H, W) or batches (N, C, H, W).
"""
import logging
import math
import time
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg
from scipy.special import logsumexp

from pds.config import settings
from pds.core.exceptions import InvalidParameterError, ShapeMismatchError
from pds.core.fourier import centered_frequency_grid, dft2, idft2_complex
from pds.core.rng import RngStream
from pds.models.masks import Preconditioner
from pds.models.tensor import TensorShape, inner
from pds.services.preconditioners import apply_M, apply_adjoint, symmetrize

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


def _check_sigma(sigma: float):
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")


def _spectral_apply(r: np.ndarray, factor: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(idft2_complex(dft2(r) * factor).real)


class Covariance(ABC):
    """A covariance Sigma, optionally shifted by extra * I."""

    def __init__(self, shape: Sequence[int]):
        self.shape = TensorShape.of(shape)

    @abstractmethod
    def apply(self, r: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def apply_inverse(self, r: np.ndarray, extra: float = 0.0) -> np.ndarray:
        pass

    @abstractmethod
    def sample(self, z: np.ndarray) -> np.ndarray:
        """Sigma^(1/2) z."""
        pass

    @abstractmethod
    def log_det(self, extra: float = 0.0) -> float:
        pass

    @abstractmethod
    def variances(self, extra: float = 0.0) -> np.ndarray:
        """Per-coordinate marginal variances."""
        pass


class IsotropicCovariance(Covariance):

    def __init__(self, shape: Sequence[int], variance: float):
        super().__init__(shape)
        if not variance > 0:
            raise InvalidParameterError(f"Variance must be > 0, got {variance}")
        self.variance = float(variance)

    def apply(self, r):
        return self.variance * r

    def apply_inverse(self, r, extra=0.0):
        return r / (self.variance + extra)

    def sample(self, z):
        return math.sqrt(self.variance) * z

    def log_det(self, extra=0.0):
        return self.shape.size * math.log(self.variance + extra)

    def variances(self, extra=0.0):
        return np.full(self.shape, self.variance + extra)


class DiagonalCovariance(Covariance):

    def __init__(self, variances: np.ndarray):
        values = np.array(variances, dtype=np.float64)
        super().__init__(values.shape)
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise InvalidParameterError("Diagonal variances must be finite and > 0")
        self.values = values

    def apply(self, r):
        return self.values * r

    def apply_inverse(self, r, extra=0.0):
        return r / (self.values + extra)

    def sample(self, z):
        return np.sqrt(self.values) * z

    def log_det(self, extra=0.0):
        return float(np.sum(np.log(self.values + extra)))

    def variances(self, extra=0.0):
        return self.values + extra


class FrequencyDiagonalCovariance(Covariance):
    """Sigma = F^-1 diag(lambda) F, so that E|F[x - mu]|^2 / (HW) = lambda per frequency."""

    def __init__(self, spectral_variance: np.ndarray):
        values = np.array(spectral_variance, dtype=np.float64)
        super().__init__(values.shape)
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise InvalidParameterError("Spectral variances must be finite and > 0")
        self.values = symmetrize(values)

    def apply(self, r):
        return _spectral_apply(r, self.values)

    def apply_inverse(self, r, extra=0.0):
        return _spectral_apply(r, 1.0 / (self.values + extra))

    def sample(self, z):
        return _spectral_apply(z, np.sqrt(self.values))

    def log_det(self, extra=0.0):
        return float(np.sum(np.log(self.values + extra)))

    def spectral_variances(self, extra: float = 0.0) -> np.ndarray:
        return self.values + extra

    def variances(self, extra=0.0):
        per_channel = np.mean(self.values, axis=(-2, -1), keepdims=True) + extra
        return np.broadcast_to(per_channel, self.shape).copy()


def power_law_spectrum(shape: Sequence[int], condition_number: float, max_variance: float = 1.0) -> np.ndarray:
    """lambda(k) = max_variance * (1 + |k|^2)^-p with p chosen so max/min = condition_number."""
    shape = TensorShape.of(shape)
    if condition_number < 1:
        raise InvalidParameterError(f"condition_number must be >= 1, got {condition_number}")
    k, l = centered_frequency_grid(shape.height, shape.width)
    radius2 = 1.0 + k ** 2 + l ** 2
    top = float(radius2.max())
    exponent = math.log(condition_number) / math.log(top) if top > 1 else 0.0
    spectrum = max_variance * radius2 ** (-exponent)
    return np.broadcast_to(spectrum, tuple(shape)).copy()


class ScoreOracle(ABC):

    def __init__(self, shape: Sequence[int]):
        self.shape = TensorShape.of(shape)

    def _check(self, x: np.ndarray):
        if tuple(x.shape[-3:]) != tuple(self.shape):
            raise ShapeMismatchError(self.shape, x.shape[-3:], "oracle input")

    @abstractmethod
    def score(self, x: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def noised_score(self, x: np.ndarray, sigma: float) -> np.ndarray:
        pass

    def log_density(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no normalized density")

    def noised_log_density(self, x: np.ndarray, sigma: float) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no normalized density")

    def energy(self, x: np.ndarray) -> np.ndarray:
        return -self.log_density(x)

    def sample_exact(self, rng: RngStream, n: Optional[int] = None) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} cannot be sampled")

    def describe(self) -> Dict[str, Any]:
        return {'oracle': type(self).__name__, 'shape': list(self.shape)}


class GaussianTarget(ScoreOracle):

    def __init__(self, mean: Union[float, np.ndarray], covariance: Covariance):
        super().__init__(covariance.shape)
        self.covariance = covariance
        self.mean = np.broadcast_to(np.asarray(mean, dtype=np.float64), tuple(self.shape)).copy()

    def _residual(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        return np.asarray(x, dtype=np.float64) - self.mean

    def score(self, x):
        return -self.covariance.apply_inverse(self._residual(x))

    def noised_score(self, x, sigma):
        _check_sigma(sigma)
        return -self.covariance.apply_inverse(self._residual(x), extra=sigma ** 2)

    def _log_density(self, x, extra):
        r = self._residual(x)
        quad = inner(r, self.covariance.apply_inverse(r, extra=extra))
        return -0.5 * (quad + self.covariance.log_det(extra) + self.shape.size * _LOG_2PI)

    def log_density(self, x):
        return self._log_density(x, 0.0)

    def noised_log_density(self, x, sigma):
        _check_sigma(sigma)
        return self._log_density(x, sigma ** 2)

    def sample_exact(self, rng, n=None):
        z = rng.normal(tuple(self.shape) if n is None else (n,) + tuple(self.shape))
        return self.mean + self.covariance.sample(z)

    def variances(self) -> np.ndarray:
        return self.covariance.variances()

    def describe(self):
        info = super().describe()
        info['covariance'] = type(self.covariance).__name__
        return info


class MixtureTarget(ScoreOracle):

    def __init__(self, weights: Sequence[float], components: List[GaussianTarget]):
        if not components:
            raise InvalidParameterError("A mixture needs at least one component")
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (len(components),) or np.any(weights <= 0):
            raise InvalidParameterError("Mixture weights must be positive, one per component")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidParameterError(f"Mixture weights must sum to 1, got {weights.sum()!r}")
        super().__init__(components[0].shape)
        for c in components[1:]:
            if c.shape != self.shape:
                raise ShapeMismatchError(self.shape, c.shape, "mixture component")
        self.weights = weights
        self.components = list(components)
        self._log_weights = np.log(weights)

    def _responsibilities(self, x, extra) -> Tuple[np.ndarray, np.ndarray]:
        logs = np.stack([c._log_density(x, extra) for c in self.components])
        weighted = logs + self._log_weights.reshape((-1,) + (1,) * (logs.ndim - 1))
        total = logsumexp(weighted, axis=0)
        return np.exp(weighted - total), total

    def _score(self, x, extra):
        resp, _ = self._responsibilities(x, extra)
        out = np.zeros(np.shape(x))
        for k, c in enumerate(self.components):
            s = -c.covariance.apply_inverse(c._residual(x), extra=extra)
            out += resp[k][..., None, None, None] * s
        return out

    def score(self, x):
        return self._score(x, 0.0)

    def noised_score(self, x, sigma):
        _check_sigma(sigma)
        return self._score(x, sigma ** 2)

    def log_density(self, x):
        return self._responsibilities(x, 0.0)[1]

    def noised_log_density(self, x, sigma):
        _check_sigma(sigma)
        return self._responsibilities(x, sigma ** 2)[1]

    def sample_labels(self, rng: RngStream, n: int) -> np.ndarray:
        return rng.generator.choice(len(self.components), size=n, p=self.weights)

    def sample_exact(self, rng, n=None):
        count = 1 if n is None else n
        labels = self.sample_labels(rng, count)
        z = rng.normal((count,) + tuple(self.shape))
        out = np.empty_like(z)
        for k, c in enumerate(self.components):
            idx = labels == k
            out[idx] = c.mean + c.covariance.sample(z[idx])
        return out[0] if n is None else out


class ZeroScoreOracle(ScoreOracle):
    """score = 0 everywhere; an improper flat target."""

    def score(self, x):
        self._check(x)
        return np.zeros(np.shape(x))

    def noised_score(self, x, sigma):
        _check_sigma(sigma)
        return self.score(x)


class FixedCostOracle(ZeroScoreOracle):
    """Zero score after a fixed wall-clock delay, standing in for a network forward pass."""

    def __init__(self, shape: Sequence[int], latency: float):
        super().__init__(shape)
        self.latency = float(latency)

    def score(self, x):
        time.sleep(self.latency)
        return super().score(x)


class TransformedProcessOracle(ScoreOracle):
    """Score of p * N(0, sigma^2 M M^T) for a Gaussian p.

    This is the marginal law of the forward process whose noise is shaped by M,
    the process a preconditioned reverse step inverts. Solved in closed form when
    Sigma and M M^T are diagonal in the same basis, by conjugate gradients otherwise.
    """

    def __init__(self, target: GaussianTarget, preconditioner: Optional[Preconditioner]):
        super().__init__(target.shape)
        self.target = target
        self.preconditioner = preconditioner or Preconditioner()
        self._diagonal = self._diagonal_form()
        if self._diagonal is None:
            logger.info("Transformed-process oracle falls back to conjugate-gradient solves")

    def _diagonal_form(self) -> Optional[Tuple[str, np.ndarray, np.ndarray]]:
        """(basis, Sigma eigenvalues, M M^T eigenvalues) when they share a basis."""
        p = self.preconditioner
        cov = self.target.covariance
        freq, pixel = p.active_frequency, p.active_pixel
        ones = np.ones(tuple(self.shape))
        if freq is None and pixel is None:
            if isinstance(cov, FrequencyDiagonalCovariance):
                return 'frequency', cov.values, ones
            return 'pixel', cov.variances(), ones
        if pixel is None and isinstance(cov, (FrequencyDiagonalCovariance, IsotropicCovariance)):
            lam = cov.values if isinstance(cov, FrequencyDiagonalCovariance) else cov.variances()
            return 'frequency', lam, 1.0 / freq.values ** 2
        if freq is None and isinstance(cov, (DiagonalCovariance, IsotropicCovariance)):
            return 'pixel', cov.variances(), 1.0 / pixel.values ** 2
        return None

    def _solve(self, r: np.ndarray, sigma2: float) -> np.ndarray:
        if self._diagonal is not None:
            basis, lam, mmt = self._diagonal
            denom = lam + sigma2 * mmt
            if basis == 'frequency':
                return _spectral_apply(r, 1.0 / denom)
            return r / denom
        return self._cg_solve(r, sigma2)

    def _cg_solve(self, r: np.ndarray, sigma2: float) -> np.ndarray:
        shape = tuple(self.shape)
        size = self.shape.size
        cov = self.target.covariance
        p = self.preconditioner

        def matvec(v):
            u = v.reshape(shape)
            return (cov.apply(u) + sigma2 * apply_M(p, apply_adjoint(p, u))).ravel()

        operator = LinearOperator((size, size), matvec=matvec, dtype=np.float64)
        batch = r.reshape((-1,) + shape)
        out = np.empty_like(batch)
        for i, b in enumerate(batch):
            solution, info = cg(operator, b.ravel(), rtol=1e-12, atol=0.0, maxiter=10 * size)
            if info > 0:
                logger.warning(f"CG did not converge within {info} iterations")
            out[i] = solution.reshape(shape)
        return out.reshape(r.shape)

    def score(self, x):
        return self.target.score(x)

    def noised_score(self, x, sigma):
        _check_sigma(sigma)
        return -self._solve(self.target._residual(x), sigma ** 2)

    def log_density(self, x):
        return self.target.log_density(x)

    def noised_log_density(self, x, sigma):
        _check_sigma(sigma)
        if self._diagonal is None:
            raise NotImplementedError("Noised density needs a shared eigenbasis")
        _, lam, mmt = self._diagonal
        r = self.target._residual(x)
        quad = inner(r, self._solve(r, sigma ** 2))
        log_det = float(np.sum(np.log(lam + sigma ** 2 * mmt)))
        return -0.5 * (quad + log_det + self.shape.size * _LOG_2PI)

    def sample_exact(self, rng, n=None):
        return self.target.sample_exact(rng, n)

    def sample_noised(self, rng: RngStream, sigma: float, n: Optional[int] = None) -> np.ndarray:
        """Exact draw from p * N(0, sigma^2 M M^T)."""
        x = self.target.sample_exact(rng, n)
        return x + sigma * apply_M(self.preconditioner, rng.normal(x.shape))


class OracleFactory:

    @staticmethod
    def create(spec) -> ScoreOracle:
        shape = tuple(spec.shape)
        if spec.kind == 'zero':
            return ZeroScoreOracle(shape)
        if spec.kind == 'fixed_cost':
            latency = settings.PDS_BENCH_ORACLE_LATENCY if spec.latency is None else spec.latency
            return FixedCostOracle(shape, latency)
        if spec.kind == 'mixture':
            components = [
                GaussianTarget(c.mean, IsotropicCovariance(shape, c.variance)) for c in spec.components
            ]
            weights = np.array([c.weight for c in spec.components])
            return MixtureTarget(weights / weights.sum(), components)
        if spec.kind == 'gaussian':
            return GaussianTarget(spec.mean, OracleFactory.create_covariance(spec))
        raise ValueError(f"Unsupported target kind: {spec.kind}")

    @staticmethod
    def create_covariance(spec) -> Covariance:
        shape = tuple(spec.shape)
        if spec.covariance == 'isotropic':
            return IsotropicCovariance(shape, spec.variance)
        if spec.covariance == 'diagonal':
            low, high = spec.variance_range or (spec.variance, spec.variance)
            return DiagonalCovariance(np.geomspace(low, high, int(np.prod(shape))).reshape(shape))
        if spec.covariance == 'frequency':
            return FrequencyDiagonalCovariance(power_law_spectrum(shape, spec.condition_number, spec.max_variance))
        raise ValueError(f"Unsupported covariance: {spec.covariance}")
