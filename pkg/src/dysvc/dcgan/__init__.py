"""Convolutional GAN for mapping healthy feature sequences toward a target group."""
from .io import load_model, read_loss_log, save_model, write_loss_log
from .layers import conv2d_backward, conv2d_forward
from .model import (
    ConvLayerSpec,
    DcganModel,
    GanHyper,
    PaddedBatch,
    discriminator_forward,
    generator_forward,
    init_model,
    make_identity_generator,
)
from .optim import AdamState, adam_step
from .train import discriminator_accuracy, train_gan, transform_features

__all__ = [
    "AdamState", "ConvLayerSpec", "DcganModel", "GanHyper", "PaddedBatch",
    "adam_step", "conv2d_backward", "conv2d_forward", "discriminator_accuracy",
    "discriminator_forward", "generator_forward", "init_model", "load_model",
    "make_identity_generator", "read_loss_log", "save_model", "train_gan",
    "transform_features", "write_loss_log",
]
