from .config import ExperimentConfig, Seeds, build_config, load_config_file, parse_config_text
from .experiments import run_ct, run_spiral
from .persistence import load_model, save_model

__all__ = [
    "ExperimentConfig",
    "Seeds",
    "build_config",
    "load_config_file",
    "parse_config_text",
    "run_ct",
    "run_spiral",
    "load_model",
    "save_model",
]
