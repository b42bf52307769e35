from .masks import GradientOrder, PixelMask, Preconditioner, SolenoidalOp, SpectralMask
from .schedule import ChainState, SamplerConfig, SamplerMode, Schedule
from .experiment import ExperimentConfig
