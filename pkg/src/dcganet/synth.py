"""Synthetic infrared scene generation and dataset IO.

Scenes are smoothed clutter backgrounds plus a handful of small Gaussian
blob targets; the ground-truth mask is the 0.5*peak superlevel set of each
blob's target-only layer. Generation is keyed on (seed, index) through the
Philox counter-based generator, so samples are reproducible across
platforms and generation order.

Datasets on disk: ``images/<id>.pgm`` and ``masks/<id>.pgm``, binary
(P5) 8-bit portable graymaps, masks stored as 0/255.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigurationError, DatasetError

MASK_LEVEL = 0.5  # blob superlevel fraction defining ground truth


@dataclass(frozen=True)
class SceneConfig:
    size: int = 64
    targets_min: int = 1
    targets_max: int = 3
    sigma_min: float = 0.7
    sigma_max: float = 2.5
    peak_min: float = 0.4
    peak_max: float = 1.0
    clutter_scale: float = 6.0
    clutter_contrast: float = 0.35
    seed: int = 0

    def __post_init__(self):
        if self.size < 16:
            raise ConfigurationError(f"scene size must be >= 16, got {self.size}")
        for lo, hi, what in ((self.targets_min, self.targets_max, "targets"),
                             (self.sigma_min, self.sigma_max, "sigma"),
                             (self.peak_min, self.peak_max, "peak")):
            if lo > hi:
                raise ConfigurationError(f"empty {what} range [{lo}, {hi}]")
        if not 0.0 <= self.clutter_contrast <= 1.0:
            raise ConfigurationError("clutter_contrast must lie in [0, 1]")


@dataclass
class Sample:
    image: np.ndarray  # (h, w) float in [0, 1]
    mask: np.ndarray   # (h, w) uint8 binary
    id: str


def _rng_for(seed: int, index: int) -> np.random.Generator:
    # Philox is counter-based; the key pins the stream to (seed, index)
    return np.random.Generator(np.random.Philox(key=(int(seed) << 32) ^ int(index)))


def _gaussian_blob(size, cy, cx, sigma, peak):
    y = np.arange(size)[:, None]
    x = np.arange(size)[None, :]
    return peak * np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2.0 * sigma * sigma))


def gen_scene(config: SceneConfig, index: int) -> Sample:
    """Deterministic per (config.seed, index)."""
    rng = _rng_for(config.seed, index)
    s = config.size
    if config.clutter_contrast > 0:
        noise = rng.random((s, s))
        bg = gaussian_filter(noise, sigma=config.clutter_scale, mode="reflect")
        lo, hi = bg.min(), bg.max()
        if hi > lo:
            bg = (bg - lo) / (hi - lo)
        bg = bg * config.clutter_contrast
        # occasional bright diffuse structure (cloud edge stand-in)
        if rng.random() < 0.3:
            cy, cx = rng.uniform(0, s, size=2)
            bg = bg + _gaussian_blob(s, cy, cx, sigma=s / 4.0,
                                     peak=0.3 * config.clutter_contrast)
    else:
        bg = np.zeros((s, s))

    n_targets = int(rng.integers(config.targets_min, config.targets_max + 1))
    target_layer = np.zeros((s, s))
    mask = np.zeros((s, s), dtype=np.uint8)
    placed = []
    margin = 3.0
    for _ in range(n_targets):
        ok = False
        for _attempt in range(50):
            cy = rng.uniform(margin, s - margin)
            cx = rng.uniform(margin, s - margin)
            sigma = rng.uniform(config.sigma_min, config.sigma_max)
            peak = rng.uniform(config.peak_min, config.peak_max)
            if all(np.hypot(cy - py, cx - px) > 4.0 * max(sigma, ps)
                   for py, px, ps in placed):
                ok = True
                break
        if not ok:
            continue  # emit fewer targets rather than fail
        placed.append((cy, cx, sigma))
        blob = _gaussian_blob(s, cy, cx, sigma, peak)
        target_layer += blob
        mask |= (blob >= MASK_LEVEL * peak).astype(np.uint8)
    image = np.clip(bg + target_layer, 0.0, 1.0)
    return Sample(image=image, mask=mask, id=f"{config.seed:08x}_{index:06d}")


def generate_dataset(config: SceneConfig, count: int):
    return [gen_scene(config, i) for i in range(count)]


# -- PGM IO ----------------------------------------------------------------


def write_pgm(path, arr: np.ndarray):
    """8-bit binary (P5) graymap."""
    a = np.asarray(arr)
    if a.dtype != np.uint8:
        a = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(a.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if not m:
        raise DatasetError(f"{path}: malformed PGM header at byte 0")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise DatasetError(f"{path}: only maxval 255 supported, got {maxval}")
    body = raw[m.end():]
    if len(body) < h * w:
        raise DatasetError(f"{path}: truncated payload at byte {m.end() + len(body)}")
    return np.frombuffer(body[: h * w], dtype=np.uint8).reshape(h, w)


def save_dataset(samples, directory):
    directory = Path(directory)
    (directory / "images").mkdir(parents=True, exist_ok=True)
    (directory / "masks").mkdir(parents=True, exist_ok=True)
    for s in samples:
        write_pgm(directory / "images" / f"{s.id}.pgm", s.image)
        write_pgm(directory / "masks" / f"{s.id}.pgm", s.mask * 255)


def load_dataset(directory):
    """Sorted by id; masks binarized at 128."""
    directory = Path(directory)
    img_dir, mask_dir = directory / "images", directory / "masks"
    if not img_dir.is_dir():
        raise DatasetError(f"{img_dir} is not a directory")
    image_ids = sorted(p.stem for p in img_dir.glob("*.pgm"))
    mask_ids = set(p.stem for p in mask_dir.glob("*.pgm")) if mask_dir.is_dir() else set()
    orphans = [i for i in image_ids if i not in mask_ids]
    if orphans:
        raise DatasetError(f"images without masks: {orphans}")
    samples = []
    for sid in image_ids:
        img = read_pgm(img_dir / f"{sid}.pgm").astype(np.float64) / 255.0
        mask = (read_pgm(mask_dir / f"{sid}.pgm") >= 128).astype(np.uint8)
        if img.shape != mask.shape:
            raise DatasetError(f"{sid}: image {img.shape} vs mask {mask.shape}")
        samples.append(Sample(image=img, mask=mask, id=sid))
    return samples


def augment(sample: Sample, seed: int) -> Sample:
    """Seeded flips and 90-degree rotations, identical on image and mask."""
    rng = _rng_for(seed, 0)
    img, mask = sample.image, sample.mask
    if rng.random() < 0.5:
        img, mask = img[:, ::-1], mask[:, ::-1]
    if rng.random() < 0.5:
        img, mask = img[::-1], mask[::-1]
    k = int(rng.integers(0, 4))
    img, mask = np.rot90(img, k), np.rot90(mask, k)
    return Sample(image=np.ascontiguousarray(img),
                  mask=np.ascontiguousarray(mask), id=sample.id)
