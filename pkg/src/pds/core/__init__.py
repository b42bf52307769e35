from .pipeline import SamplingPipeline, pds_sample, reverse_pass, run_langevin
from .factory import Experiment, create_experiment
