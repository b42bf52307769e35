from .oracles import ScoreOracle, GaussianTarget, MixtureTarget, OracleFactory
from .preconditioners import build_masks, apply_M, apply_adjoint, apply_gradient_transform
from .schedules import make_schedule, accelerate
from .loaders import TensorLoader, TensorLoaderFactory
