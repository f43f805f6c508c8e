from .utilities import *
from .model_parameters import ModelConfig, TrainingConfig, ModelParams, parameter_shapes, initialize_parameters, \
    default_model_config
from .construct_encoder import encode
from .construct_prior import prior_generate, prior_predict
from .construct_fusion import prior_fuse, FUSION_VARIANTS
from .construct_decoder import decode
from .construct_losses import LossBreakdown, joint_loss
from .optimizer import adamw_update, learning_rate
from .checkpoint import save_checkpoint, load_checkpoint
from .construct_pipeline import ForwardOutput, TrainingBatch, TrainingResult, forward, batch_loss, train_step, \
    train_model, scaled_size, predict_logits, infer
