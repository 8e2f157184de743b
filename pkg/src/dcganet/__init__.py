"""Infrared small-target segmentation, built from scratch on numpy.

Library layout:
  tensor      rank-4 container + golden-file dump format
  kernels     forward numerical kernels (convs, pools, shuffle, ...)
  oracles     naive loop references used by the test suite
  autograd    reverse-mode tape + finite-difference gradient checker
  functional  differentiable ops bound to the tape
  blocks      SVC / DCGA / ADFF blocks, the full net, ablation variants
  training    Soft-IoU loss, AdamW, poly LR decay, training loop
  metrics     IoU / nIoU / Pd / Fa and ROC sweeps
  synth       synthetic scene generator and PGM dataset IO
  config/cli  flat key=value run config and the command-line surface
"""

from .autograd import GradCheckReport, Tape, Variable, grad_check
from .blocks import (AdffBlock, DcgaBlock, DcgaNet, NetConfig, ParamStore,
                     SvcBlock, build_variant)
from .kernels import ConvSpec
from .metrics import ConfusionCounts, MetricsReport, RocPoint
from .synth import Sample, SceneConfig
from .tensor import Tensor4
from .training import AdamW, TrainConfig, poly_lr

__version__ = "0.1.0"

__all__ = [
    "AdamW", "AdffBlock", "ConfusionCounts", "ConvSpec", "DcgaBlock", "DcgaNet",
    "GradCheckReport", "MetricsReport", "NetConfig", "ParamStore", "RocPoint",
    "Sample", "SceneConfig", "SvcBlock", "Tape", "Tensor4", "TrainConfig",
    "Variable", "build_variant", "grad_check", "poly_lr",
]
