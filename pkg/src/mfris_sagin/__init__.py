"""Multi-functional reconfigurable surfaces in a three-layer network: simulator and learners."""
from .config import ExperimentConfig, desk_config, load_config
from .env import SaginEnv

__all__ = ["ExperimentConfig", "SaginEnv", "desk_config", "load_config"]
__version__ = "0.1.0"
