from .losses import ScorePair as ScorePair
from .losses import adver_loss as adver_loss
from .losses import mce_loss as mce_loss
from .losses import mix_loss as mix_loss
from .losses import mman_loss as mman_loss
from .losses import variant_loss as variant_loss
from .optimizer import Adam as Adam
from .optimizer import AdamState as AdamState
from .optimizer import adam_step as adam_step
from .optimizer import lr_at as lr_at
from .checkpoint import Checkpoint as Checkpoint
from .checkpoint import checkpoint_load as checkpoint_load
from .checkpoint import checkpoint_save as checkpoint_save
from .inference import evaluate_models as evaluate_models
from .inference import multi_scale_infer as multi_scale_infer
from .inference import predict as predict
from .trainer import Trainer as Trainer
from .trainer import train_alternating as train_alternating
