from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass
class MomentReport:
    n_samples: int
    mean_error: float
    variance_error: float
    spectral_variance_error: Optional[float] = None

    def passes(self, mean_tol: float, variance_tol: float) -> bool:
        worst_variance = self.variance_error
        if self.spectral_variance_error is not None:
            worst_variance = max(worst_variance, self.spectral_variance_error)
        return self.mean_error < mean_tol and worst_variance < variance_tol

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_samples': self.n_samples,
            'mean_error': self.mean_error,
            'variance_error': self.variance_error,
            'spectral_variance_error': self.spectral_variance_error,
        }


@dataclass
class EnergyTestResult:
    statistic: float
    threshold_95: float
    p_value: float
    null_statistics: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    def threshold(self, level: float) -> float:
        return float(np.quantile(self.null_statistics, level))

    def rejects(self, level: float = 0.95) -> bool:
        return self.statistic > self.threshold(level)

    def to_dict(self) -> Dict[str, Any]:
        return {'statistic': self.statistic, 'threshold_95': self.threshold_95, 'p_value': self.p_value}


@dataclass
class InvarianceReport:
    n_steps: int
    vanilla_difference: float
    preconditioned_difference: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_steps': self.n_steps,
            'vanilla_difference': self.vanilla_difference,
            'preconditioned_difference': self.preconditioned_difference,
        }


@dataclass
class DiagnosticReport:
    """Ill-conditioning traces and distribution checks for one run."""

    v_coo: float = 0.0
    r_coo: float = 0.0
    v_trace: Dict[str, np.ndarray] = field(default_factory=dict)
    r_trace: Dict[str, np.ndarray] = field(default_factory=dict)
    moments: Optional[MomentReport] = None
    distances: Dict[str, float] = field(default_factory=dict)
    divergences: List[str] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'v_coo': self.v_coo,
            'r_coo': self.r_coo,
            'v_trace': {k: v.tolist() for k, v in self.v_trace.items()},
            'r_trace': {k: v.tolist() for k, v in self.r_trace.items()},
            'moments': self.moments.to_dict() if self.moments else None,
            'distances': dict(self.distances),
            'divergences': list(self.divergences),
            **self.extra,
        }

    def to_lines(self) -> List[str]:
        lines = [f"v_coo={self.v_coo:.10g}", f"r_coo={self.r_coo:.10g}"]
        for phase, trace in self.v_trace.items():
            lines.append(f"v_coo.{phase}={float(np.mean(trace)) if trace.size else 0.0:.10g}")
        for phase, trace in self.r_trace.items():
            lines.append(f"r_coo.{phase}={float(np.mean(trace)) if trace.size else 0.0:.10g}")
        if self.moments is not None:
            for key, value in self.moments.to_dict().items():
                if value is not None:
                    lines.append(f"moments.{key}={value:.10g}" if isinstance(value, float) else f"moments.{key}={value}")
        for key, value in self.distances.items():
            lines.append(f"distance.{key}={value:.10g}")
        for key, value in self.extra.items():
            lines.append(f"{key}={value}")
        lines.append(f"divergences={len(self.divergences)}")
        return lines
