"""Trainable residual denoisers, hand-rolled autodiff and the training loop."""

from .net import ConvRecNet, NetConfig
from .training import (TrainSample, TrainState, build_nets, make_sample,
                       make_training_set, train, train_step)

__all__ = [
    "ConvRecNet", "NetConfig", "TrainSample", "TrainState", "build_nets",
    "make_sample", "make_training_set", "train", "train_step",
]
