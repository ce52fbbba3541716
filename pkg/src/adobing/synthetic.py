"""Scripted synthetic sequences with known ground truth.

The distractor sequences move a textured target past a static lookalike region. The
target's appearance is perturbed every frame while the lookalike is not, so plain NCC
tends to prefer the lookalike once it comes into the search range.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bench import write_boxes
from .imaging import BBox, GrayImage, write_pgm


@dataclass(frozen=True)
class DistractorParams:
    width: int = 128
    height: int = 96
    target: int = 20
    n_frames: int = 40
    speed: float = 2.5
    blur: float = 1.5
    texture_std: float = 30.0
    target_offset: float = 70.0  # target brightness above the background
    target_noise: float = 8.0
    frame_noise: float = 2.0
    lookalike_contrast: float = 0.5
    background: float = 90.0
    lookalike_gap: int = 2  # pixels between target path edge and lookalike edge


@dataclass
class SyntheticSequence:
    name: str
    frames: list  # GrayImage
    ground_truth: list  # BBox
    lookalike: BBox | None = None

    def __len__(self):
        return len(self.frames)


def block_texture(rng: np.random.Generator, side: int, block: int, lo=40, hi=220) -> np.ndarray:
    n = -(-side // block)
    blocks = rng.uniform(lo, hi, size=(n, n))
    return np.kron(blocks, np.ones((block, block)))[:side, :side]


def smooth_texture(rng: np.random.Generator, side: int, sigma: float = 1.5, std: float = 30.0) -> np.ndarray:
    """Zero-mean Gaussian-blurred noise with the given standard deviation."""
    from scipy.ndimage import gaussian_filter

    pad = int(3 * sigma) + 1
    field = gaussian_filter(rng.normal(size=(side + 2 * pad, side + 2 * pad)), sigma)[pad:-pad, pad:-pad]
    field = field - field.mean()
    return field * (std / max(field.std(), 1e-12))


def _to_image(canvas: np.ndarray) -> GrayImage:
    return GrayImage(np.clip(np.floor(canvas + 0.5), 0, 255).astype(np.uint8))


def distractor_sequence(seed: int, params: DistractorParams = DistractorParams()) -> SyntheticSequence:
    """A bright textured target crosses the frame and passes just above or below a lookalike.

    The lookalike carries the target's texture pattern at reduced contrast with no
    brightness step to the background, so it matches the target under NCC but has no
    closed boundary.
    """
    p = params
    rng = np.random.default_rng(seed)
    s = p.target
    tex = smooth_texture(rng, s, p.blur, p.texture_std)
    bg = p.background + rng.uniform(-2, 2, size=(p.height, p.width))

    y_path = int(rng.integers(p.height // 2 - s // 2 - 6, p.height // 2 - s // 2 + 6))
    x_start = int(rng.integers(4, 12))
    above = bool(rng.integers(0, 2))
    lx = int(rng.integers(p.width // 2 - s // 2 - 8, p.width // 2 - s // 2 + 8))
    ly = y_path - s - p.lookalike_gap if above else y_path + s + p.lookalike_gap
    ly = int(np.clip(ly, 0, p.height - s))
    bg[ly:ly + s, lx:lx + s] += p.lookalike_contrast * tex

    frames, gt = [], []
    for t in range(p.n_frames):
        x = min(int(round(x_start + p.speed * t)), p.width - s)
        wobble = int(round(2.0 * np.sin(0.3 * t + seed)))
        y = int(np.clip(y_path + wobble, 0, p.height - s))
        canvas = bg.copy()
        canvas[y:y + s, x:x + s] = (p.background + p.target_offset + tex
                                    + rng.normal(0, p.target_noise, size=tex.shape))
        canvas += rng.normal(0, p.frame_noise, size=canvas.shape)
        frames.append(_to_image(canvas))
        gt.append(BBox(x, y, s, s))
    return SyntheticSequence(f"distractor_{seed:03d}", frames, gt, BBox(lx, ly, s, s))


def distractor_suite(n: int = 20, base_seed: int = 0, params: DistractorParams = DistractorParams()):
    return [distractor_sequence(base_seed + i, params) for i in range(n)]


def write_sequence(seq: SyntheticSequence, directory) -> Path:
    """Lay a sequence out on disk as img/0001.pgm ... plus groundtruth_rect.txt."""
    root = Path(directory)
    (root / "img").mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames, 1):
        write_pgm(root / "img" / f"{i:04d}.pgm", frame.pixels)
    write_boxes(root / "groundtruth_rect.txt", seq.ground_truth)
    return root


def static_sequence(seed: int = 0, n_frames: int = 5, width: int = 64, height: int = 48,
                    side: int = 16) -> SyntheticSequence:
    """Identical frames with a textured square; tracking it exactly is trivial."""
    rng = np.random.default_rng(seed)
    canvas = np.full((height, width), 90.0)
    x, y = (width - side) // 2, (height - side) // 2
    canvas[y:y + side, x:x + side] = block_texture(rng, side, 4)
    img = _to_image(canvas)
    return SyntheticSequence("static", [img] * n_frames, [BBox(x, y, side, side)] * n_frames)


def square_on_flat(width: int = 100, height: int = 100, box=(40, 30, 20, 20),
                   fg: int = 230, bg: int = 30) -> GrayImage:
    canvas = np.full((height, width), bg, dtype=np.uint8)
    x, y, w, h = box
    canvas[y:y + h, x:x + w] = fg
    return GrayImage(canvas)


def textured_target_frame(seed: int = 0, width: int = 120, height: int = 90, side: int = 24):
    """A bright textured target on a mildly textured background; returns (image, box)."""
    rng = np.random.default_rng(seed)
    canvas = 80.0 + rng.uniform(-15, 15, size=(height, width))
    x = int(rng.integers(10, width - side - 10))
    y = int(rng.integers(10, height - side - 10))
    canvas[y:y + side, x:x + side] = block_texture(rng, side, 4, 150, 250)
    return _to_image(canvas), BBox(x, y, side, side)


def generic_object_frame(seed: int, width: int = 128, height: int = 96):
    """A random textured rectangle, brighter or darker than a mildly textured background.

    Used to train a generic objectness model at small scale; returns (image, box).
    """
    rng = np.random.default_rng(seed)
    bg_level = rng.uniform(50, 200)
    canvas = bg_level + smooth_texture(rng, max(width, height), 2.0, rng.uniform(2, 12))[:height, :width]
    w = int(rng.integers(12, 40))
    h = int(rng.integers(12, 40))
    x = int(rng.integers(0, width - w))
    y = int(rng.integers(0, height - h))
    step = rng.uniform(40, 90) * rng.choice([-1.0, 1.0])
    canvas[y:y + h, x:x + w] = bg_level + step + smooth_texture(rng, max(w, h), rng.uniform(1, 3),
                                                                rng.uniform(5, 30))[:h, :w]
    canvas += rng.normal(0, 2.0, size=canvas.shape)
    return _to_image(canvas), BBox(x, y, w, h)
