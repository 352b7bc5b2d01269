"""Hand-rolled neural network engine: layers, losses, optimizers, checkpoints."""

from .checkpoint import CorruptCheckpoint, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckResult, gradient_check
from .layers import (Conv2D, Dense, Dropout, Flatten, Layer, ReLU,
                     ShapeMismatch, Sigmoid, StaleForwardState)
from .losses import LOGIT_CLAMP, bce_loss, bce_loss_logits, sigmoid
from .network import Network, make_classifier
from .optim import Adam, Sgd, make_optimizer

__all__ = [
    "Adam", "Conv2D", "CorruptCheckpoint", "Dense", "Dropout", "Flatten",
    "GradCheckResult", "Layer", "LOGIT_CLAMP", "Network", "ReLU",
    "ShapeMismatch", "Sgd", "Sigmoid", "StaleForwardState", "bce_loss",
    "bce_loss_logits", "gradient_check", "load_checkpoint", "make_classifier",
    "make_optimizer", "save_checkpoint", "sigmoid",
]
