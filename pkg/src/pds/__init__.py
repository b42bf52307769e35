"""Preconditioned diffusion sampling with analytic score oracles."""
from pds.core import SamplingPipeline, create_experiment

__version__ = "0.1.0"
