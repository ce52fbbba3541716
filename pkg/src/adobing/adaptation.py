"""Harvest target-specific training windows from an annotated frame and adapt the base model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .adasvm import AdaSvmConfig, TrainingSet, fit_detailed, FitResult
from .bing import LinearModel, window_sizes_for
from .imaging import (
    BBox,
    GrayImage,
    ImageError,
    ceil_div,
    enumerate_origins,
    extract_ng_features,
    iou_many,
    normed_gradient,
)


class AdaptationError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotatedFrame:
    image: GrayImage
    target: BBox

    def __post_init__(self):
        if not self.target.inside(self.image.width, self.image.height):
            raise ImageError(f"target {self.target} outside {self.image.width}x{self.image.height} frame")


@dataclass(frozen=True)
class SampleSpec:
    stride: int
    window_sizes: tuple
    pos_iou: float = 0.5
    neg_iou: float = 0.3
    max_negatives: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not (0 < self.neg_iou < self.pos_iou < 1):
            raise ValueError("need 0 < neg_iou < pos_iou < 1")
        if self.max_negatives < 0:
            raise ValueError("max_negatives must be >= 0")
        if not self.window_sizes:
            raise ValueError("window_sizes is empty")
        object.__setattr__(self, "window_sizes", tuple((int(w), int(h)) for w, h in self.window_sizes))

    @classmethod
    def for_target(cls, target: BBox, width: int, height: int, **overrides) -> "SampleSpec":
        """Defaults scaled to the target: stride = ceil(min side / 8), sizes from the scale set."""
        kw = dict(
            stride=max(1, ceil_div(min(target.w, target.h), 8)),
            window_sizes=tuple(window_sizes_for(target.w, target.h, max_w=width, max_h=height)),
        )
        kw.update(overrides)
        return cls(**kw)

    def as_dict(self) -> dict:
        return {
            "stride": self.stride,
            "window_sizes": [list(s) for s in self.window_sizes],
            "pos_iou": self.pos_iou,
            "neg_iou": self.neg_iou,
            "max_negatives": self.max_negatives,
            "seed": self.seed,
        }


@dataclass
class LabeledWindows:
    boxes: np.ndarray  # (n, 4)
    features: np.ndarray  # (n, 64) uint8
    labels: np.ndarray  # (n,) +-1
    ious: np.ndarray = field(default=None)

    def training_set(self) -> TrainingSet:
        return TrainingSet.from_features(self.features, self.labels)


def enumerate_windows(width: int, height: int, sizes, stride: int) -> np.ndarray:
    """All (x, y, w, h) windows, size by size, row-major within a size."""
    parts = []
    for w, h in sizes:
        xs, ys = enumerate_origins(width, height, w, h, stride)
        parts.append(np.column_stack([xs, ys, np.full_like(xs, w), np.full_like(xs, h)]))
    return np.concatenate(parts).astype(np.int64)


def label_windows(frame: AnnotatedFrame, spec: SampleSpec) -> LabeledWindows:
    img = frame.image
    for w, h in spec.window_sizes:
        if w > img.width or h > img.height:
            raise AdaptationError(f"window {w}x{h} does not fit in {img.width}x{img.height} frame")
    boxes = enumerate_windows(img.width, img.height, spec.window_sizes, spec.stride)
    ious = iou_many(frame.target, boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3])
    pos = np.flatnonzero(ious >= spec.pos_iou)
    neg = np.flatnonzero(ious <= spec.neg_iou)
    if pos.size == 0:
        raise AdaptationError(
            f"no window reaches iou {spec.pos_iou} with target {frame.target}; "
            "lower the stride or add window sizes closer to the target size")
    if neg.size > spec.max_negatives:
        rng = np.random.default_rng(spec.seed)
        neg = np.sort(rng.choice(neg, size=spec.max_negatives, replace=False))

    gt = frame.target.as_int()
    gt_row = np.array([[gt.x, gt.y, gt.w, gt.h]], dtype=np.int64)
    keep = np.sort(np.concatenate([pos, neg]))
    keep = keep[~np.all(boxes[keep] == gt_row, axis=1)]
    chosen = np.concatenate([gt_row, boxes[keep]])
    labels = np.concatenate([[1.0], np.where(ious[keep] >= spec.pos_iou, 1.0, -1.0)])
    chosen_iou = np.concatenate([[1.0], ious[keep]])

    ngmap = normed_gradient(img)
    feats = np.empty((len(chosen), 64), dtype=np.uint8)
    # batch feature extraction per window size, written back in enumeration order
    sizes = chosen[:, 2:4]
    for w, h in {tuple(s) for s in sizes.tolist()}:
        idx = np.flatnonzero((sizes[:, 0] == w) & (sizes[:, 1] == h))
        feats[idx] = extract_ng_features(ngmap, chosen[idx, 0], chosen[idx, 1], w, h)
    return LabeledWindows(chosen, feats, labels, chosen_iou)


def generate_samples(frame: AnnotatedFrame, spec: SampleSpec) -> TrainingSet:
    return label_windows(frame, spec).training_set()


def _merge(sets: Sequence[TrainingSet]) -> TrainingSet:
    return TrainingSet(np.concatenate([s.X for s in sets]), np.concatenate([s.y for s in sets]))


def adapt_objectness_detailed(base: LinearModel, frames, spec: SampleSpec | None = None,
                              cfg: AdaSvmConfig = AdaSvmConfig(), trace: bool = False,
                              **spec_overrides) -> FitResult:
    """Fit the adaptive SVM on windows from one or more annotated frames.

    Without an explicit spec each frame gets SampleSpec.for_target(..., **spec_overrides).
    """
    if isinstance(frames, AnnotatedFrame):
        frames = [frames]
    sets = []
    for fr in frames:
        s = spec or SampleSpec.for_target(fr.target, fr.image.width, fr.image.height, **spec_overrides)
        sets.append(generate_samples(fr, s))
    data = sets[0] if len(sets) == 1 else _merge(sets)
    return fit_detailed(data, base, cfg, trace=trace)


def adapt_objectness(base: LinearModel, frame, spec: SampleSpec | None = None,
                     cfg: AdaSvmConfig = AdaSvmConfig()) -> LinearModel:
    return adapt_objectness_detailed(base, frame, spec, cfg).model


def train_base_model(frames, C: float = 1.0, **spec_overrides) -> LinearModel:
    """Small-scale generic model: the same solver started from zero (plain l1 squared-hinge SVM)."""
    zero = LinearModel(np.zeros(64))
    return adapt_objectness_detailed(zero, frames, None, AdaSvmConfig(C=C), **spec_overrides).model
