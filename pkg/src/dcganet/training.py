"""Training loop: Soft-IoU loss with deep supervision, AdamW, poly LR decay.

Everything is seed-deterministic: batch order comes from a counter-based
generator keyed on (seed, epoch), gradients are reduced in fixed sample
order, and the per-epoch log can be written with a wall-time placeholder
so two runs with the same seed produce byte-identical logs.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import functional as F
from .autograd import Tape
from .blocks import DcgaNet
from .checkpoint import save_checkpoint, load_checkpoint
from .errors import ConfigurationError, TrainingError
from .metrics import evaluate_batch


@dataclass
class TrainConfig:
    epochs: int = 500
    base_lr: float = 1e-4
    batch_size: int = 4
    poly_power: float = 0.9
    weight_decay: float = 1e-2
    smooth: float = 1.0
    # main head first, then one weight per aux head
    deep_supervision_weights: tuple = (1.0, 0.5, 0.5)
    seed: int = 0
    grad_clip: float = 0.0  # 0 = off
    checkpoint_every: int = 25
    log_wall_time: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.base_lr <= 0:
            raise ConfigurationError(f"base_lr must be > 0, got {self.base_lr}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if sum(self.deep_supervision_weights) <= 0:
            raise ConfigurationError("deep supervision weights must sum to > 0")


def poly_lr(base_lr: float, epoch: int, total_epochs: int, power: float = 0.9) -> float:
    """base_lr * (1 - epoch/total)^power."""
    if not 0 <= epoch <= total_epochs:
        raise ConfigurationError(f"epoch {epoch} outside [0, {total_epochs}]")
    return base_lr * (1.0 - epoch / total_epochs) ** power


class AdamW:
    """Decoupled weight decay, then bias-corrected Adam moments."""

    def __init__(self, params, weight_decay=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float, grad_clip: float = 0.0):
        self.t += 1
        grads = []
        for p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient in parameter {p.name!r}")
            grads.append(g)
        if grad_clip > 0:
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads))
            if norm > grad_clip:
                grads = [g * (grad_clip / norm) for g in grads]
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            p.data *= 1.0 - lr * self.weight_decay
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def batch_arrays(samples, dtype):
    imgs = np.stack([s.image for s in samples]).astype(dtype)[:, None]
    masks = np.stack([s.mask for s in samples]).astype(dtype)[:, None]
    return imgs, masks


def total_loss(net: DcgaNet, images, masks, cfg: TrainConfig):
    """Weighted Soft-IoU over the main head and every aux head."""
    logits, aux, _ = net.forward(images)
    heads = [logits] + aux
    weights = cfg.deep_supervision_weights
    if len(weights) != len(heads):
        raise ConfigurationError(
            f"{len(weights)} supervision weights for {len(heads)} heads")
    loss = None
    for w, head in zip(weights, heads):
        term = F.scale(F.soft_iou_loss(F.sigmoid(head), masks, cfg.smooth), w)
        loss = term if loss is None else F.add(loss, term)
    return loss


@dataclass
class EpochReport:
    epoch: int
    lr: float
    mean_loss: float
    seconds: float
    val_iou: float = float("nan")


def train_epoch(net, samples, cfg: TrainConfig, optimizer: AdamW, epoch: int):
    """One pass over shuffled batches; deterministic given (seed, epoch)."""
    if not samples:
        raise ConfigurationError("training dataset is empty")
    rng = np.random.Generator(np.random.Philox(key=(cfg.seed << 16) + epoch))
    order = rng.permutation(len(samples))
    lr = poly_lr(cfg.base_lr, epoch, cfg.epochs, cfg.poly_power)
    t0 = time.perf_counter()
    losses = []
    for start in range(0, len(order), cfg.batch_size):
        batch = [samples[i] for i in order[start : start + cfg.batch_size]]
        images, masks = batch_arrays(batch, net.store.dtype)
        net.store.zero_grad()
        with Tape() as tape:
            loss = total_loss(net, images, masks, cfg)
            value = float(loss.data)
            if not np.isfinite(value):
                ids = [s.id for s in batch]
                raise TrainingError(f"NaN loss at epoch {epoch}, batch ids {ids}")
            tape.backward(loss)
        optimizer.step(lr, cfg.grad_clip)
        losses.append(value)
    return EpochReport(epoch, lr, float(np.mean(losses)), time.perf_counter() - t0)


def validate_iou(net, samples, threshold=0.5):
    """Aggregate IoU of thresholded predictions over a sample list."""
    if not samples:
        return float("nan")
    report = evaluate_batch(net, samples, threshold=threshold)
    return report.iou


def _log_line(rep: EpochReport, log_time: bool) -> str:
    secs = f"{rep.seconds:.3f}" if log_time else "0.000"
    return f"{rep.epoch}\t{rep.lr:.10g}\t{rep.mean_loss:.10g}\t{secs}"


def fit(net: DcgaNet, train_samples, val_samples, cfg: TrainConfig,
        out_dir=None, meta=None, start_epoch: int = 0, optimizer: AdamW | None = None,
        log_fn=None):
    """Full training run with per-epoch log, periodic + best-IoU checkpoints.

    Returns (reports, best_val_iou).
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    optimizer = optimizer or AdamW(net.store.variables(), weight_decay=cfg.weight_decay)
    meta = dict(meta or {})
    best_iou = -1.0
    reports = []
    log_path = out_dir / "train.log" if out_dir is not None else None
    mode = "a" if start_epoch > 0 and log_path is not None and log_path.exists() else "w"
    log_fh = open(log_path, mode) if log_path is not None else None
    try:
        for epoch in range(start_epoch, cfg.epochs):
            rep = train_epoch(net, train_samples, cfg, optimizer, epoch)
            rep.val_iou = validate_iou(net, val_samples)
            reports.append(rep)
            line = _log_line(rep, cfg.log_wall_time)
            if log_fh is not None:
                log_fh.write(line + "\n")
                log_fh.flush()
            if log_fn is not None:
                log_fn(rep)
            if out_dir is not None:
                m = dict(meta, epoch=str(epoch))
                if (epoch + 1) % cfg.checkpoint_every == 0 or epoch == cfg.epochs - 1:
                    save_checkpoint(out_dir / f"epoch{epoch:04d}.ckpt",
                                    net.store.state_arrays(), m)
                if not np.isnan(rep.val_iou) and rep.val_iou > best_iou:
                    best_iou = rep.val_iou
                    save_checkpoint(out_dir / "best.ckpt", net.store.state_arrays(), m)
    finally:
        if log_fh is not None:
            log_fh.close()
    return reports, best_iou


def load_net_checkpoint(path, net: DcgaNet):
    """Load arrays into an already-built net; returns the checkpoint meta."""
    meta, arrays = load_checkpoint(path)
    net.store.load_state_arrays(arrays)
    return meta
