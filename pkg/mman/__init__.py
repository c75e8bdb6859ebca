"""MMAN, macro-micro adversarial networks for human parsing, built on a small numpy autograd engine."""

__version__ = "0.1.0"

from .config import ExperimentConfig as ExperimentConfig
from .config import TrainConfig as TrainConfig
from .config import DataConfig as DataConfig
from .config import LossWeights as LossWeights
from .models.variants import build_variant as build_variant
from .models.variants import VariantSpec as VariantSpec
from .training.trainer import Trainer as Trainer
from .training.trainer import train_alternating as train_alternating
from .training.inference import multi_scale_infer as multi_scale_infer
