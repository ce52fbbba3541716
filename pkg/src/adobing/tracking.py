"""NCC template tracker with objectness fusion f_ot = f_t + lambda * f_o."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence

import numpy as np

from .bing import (
    DEFAULT_N_PLANES,
    DEFAULT_N_TERMS,
    LinearModel,
    argmax_tiebreak,
    binarize_features,
    binarize_model,
    fast_scores,
)
from .imaging import (
    BBox,
    GrayImage,
    ImageError,
    extract_ng_features,
    extract_patch,
    normed_gradient,
    resample_windows,
)

TEMPLATE_SIDE = 32


@dataclass
class Candidate:
    box: BBox
    f_t: float = 0.0
    f_o: float = 0.0
    f_ot: float = 0.0


@dataclass(frozen=True)
class FusionConfig:
    lam: float = 0.1
    search_radius: int = 24
    candidate_stride: int = 2
    scale_set: tuple = (1.0,)
    template_rate: float = 0.0  # linear template update; 0 keeps the first-frame template
    objectness: str = "exact"  # or "fast" for the popcount path

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.candidate_stride < 1:
            raise ValueError("candidate_stride must be >= 1")
        if self.search_radius < 0:
            raise ValueError("search_radius must be >= 0")
        if not self.scale_set or any(s <= 0 for s in self.scale_set):
            raise ValueError("scale_set must hold positive factors")
        if not 0.0 <= self.template_rate <= 1.0:
            raise ValueError("template_rate must be in [0, 1]")
        if self.objectness not in ("exact", "fast"):
            raise ValueError("objectness must be 'exact' or 'fast'")


@dataclass
class TrackState:
    template: np.ndarray  # TEMPLATE_SIDE x TEMPLATE_SIDE float intensities
    current: BBox
    adapted_model: Optional[LinearModel] = None

    @classmethod
    def init(cls, frame: GrayImage, box: BBox, model: Optional[LinearModel] = None) -> "TrackState":
        box = box.as_int()
        if not box.inside(frame.width, frame.height):
            raise ImageError(f"initial box {box} outside frame")
        return cls(extract_patch(frame, box, TEMPLATE_SIDE), box, model)


@dataclass
class Trajectory:
    boxes: list = field(default_factory=list)

    def __len__(self):
        return len(self.boxes)

    def lines(self) -> list[str]:
        return [",".join(_fmt(v) for v in b.as_tuple()) for b in self.boxes]

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.lines()) + "\n")


def _fmt(v) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


class BaseTracker(Protocol):
    """Anything that yields raw per-candidate confidences for a frame."""

    def confidences(self, frame: GrayImage, boxes: np.ndarray) -> np.ndarray: ...

    def update(self, frame: GrayImage, box: BBox) -> None: ...


def _scaled(prev: BBox, s: float) -> tuple[int, int]:
    return max(1, int(round(prev.w * s))), max(1, int(round(prev.h * s)))


def sample_candidates(prev: BBox, cfg: FusionConfig, frame_bounds: tuple[int, int]) -> list[Candidate]:
    """Translation grid within search_radius at candidate_stride, crossed with scale_set.

    Order: scale, then dy, then dx. Boxes are clamped to the frame, so duplicates may occur.
    """
    return [Candidate(BBox(*map(int, b))) for b in candidate_boxes(prev, cfg, frame_bounds)]


def candidate_boxes(prev: BBox, cfg: FusionConfig, frame_bounds: tuple[int, int]) -> np.ndarray:
    width, height = frame_bounds
    prev = prev.as_int()
    if not prev.inside(width, height):
        raise ImageError(f"previous box {prev} outside frame")
    n = cfg.search_radius // cfg.candidate_stride
    offs = np.arange(-n, n + 1) * cfg.candidate_stride
    rows = []
    cx, cy = prev.x + prev.w / 2.0, prev.y + prev.h / 2.0
    for s in cfg.scale_set:
        w, h = _scaled(prev, s)
        w, h = min(w, width), min(h, height)
        x0 = prev.x if (w, h) == (prev.w, prev.h) else int(round(cx - w / 2.0))
        y0 = prev.y if (w, h) == (prev.w, prev.h) else int(round(cy - h / 2.0))
        for dy in offs:
            for dx in offs:
                x = min(max(x0 + dx, 0), width - w)
                y = min(max(y0 + dy, 0), height - h)
                rows.append((x, y, w, h))
    return np.array(rows, dtype=np.int64)


def candidate_count(cfg: FusionConfig) -> int:
    per_axis = 2 * (cfg.search_radius // cfg.candidate_stride) + 1
    return per_axis * per_axis * len(cfg.scale_set)


def ncc(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if den <= 1e-12:
        return 0.0
    return float(np.clip(np.dot(a, b) / den, -1.0, 1.0))


def ncc_many(template: np.ndarray, patches: np.ndarray) -> np.ndarray:
    t = template.ravel() - template.mean()
    p = patches.reshape(len(patches), -1)
    p = p - p.mean(axis=1, keepdims=True)
    num = p @ t
    den = np.sqrt((p * p).sum(axis=1) * np.dot(t, t))
    out = np.zeros(len(p))
    ok = den > 1e-12
    out[ok] = np.clip(num[ok] / den[ok], -1.0, 1.0)
    return out


def _by_size(boxes: np.ndarray):
    sizes = boxes[:, 2:4]
    for w, h in sorted({tuple(s) for s in sizes.tolist()}):
        yield w, h, np.flatnonzero((sizes[:, 0] == w) & (sizes[:, 1] == h))


class NCCTracker:
    """Normalized cross-correlation against a 32x32 template, optionally updated linearly."""

    def __init__(self, state: TrackState, template_rate: float = 0.0):
        self.state = state
        self.template_rate = template_rate

    def confidences(self, frame: GrayImage, boxes: np.ndarray) -> np.ndarray:
        out = np.empty(len(boxes))
        for w, h, idx in _by_size(boxes):
            patches = resample_windows(frame.pixels, boxes[idx, 0], boxes[idx, 1], w, h,
                                       TEMPLATE_SIDE, TEMPLATE_SIDE)
            out[idx] = ncc_many(self.state.template, patches)
        return out

    def update(self, frame: GrayImage, box: BBox) -> None:
        self.state.current = box
        if self.template_rate > 0:
            patch = extract_patch(frame, box, TEMPLATE_SIDE)
            self.state.template = (1 - self.template_rate) * self.state.template + self.template_rate * patch


def base_confidence(state: TrackState, frame: GrayImage, box: BBox) -> float:
    return ncc(state.template, extract_patch(frame, box, TEMPLATE_SIDE))


def objectness_scores(model: LinearModel, frame: GrayImage, boxes: np.ndarray, mode: str = "exact",
                      n_terms: int = DEFAULT_N_TERMS, n_planes: int = DEFAULT_N_PLANES) -> np.ndarray:
    ngmap = normed_gradient(frame)
    out = np.empty(len(boxes))
    bm = binarize_model(model, n_terms) if mode == "fast" else None
    for w, h, idx in _by_size(boxes):
        feats = extract_ng_features(ngmap, boxes[idx, 0], boxes[idx, 1], w, h)
        if bm is None:
            out[idx] = feats.astype(np.float64) @ model.w
        else:
            out[idx] = fast_scores(bm, binarize_features(feats, n_planes))
    return out


def normalize_confidences(values) -> np.ndarray:
    """Min-max to [0, 1]; a constant list maps to all zeros."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot normalize an empty confidence list")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def fuse(candidates: Sequence[Candidate], lam: float) -> list[Candidate]:
    return [replace(c, f_ot=c.f_t + lam * c.f_o) for c in candidates]


def fuse_arrays(f_t: np.ndarray, f_o: np.ndarray, lam: float) -> np.ndarray:
    return f_t + lam * f_o


def select(boxes: np.ndarray, fused: np.ndarray) -> int:
    return argmax_tiebreak(fused, boxes)


def track_sequence(frames: Sequence[GrayImage], init: BBox, cfg: FusionConfig = FusionConfig(),
                   model: Optional[LinearModel] = None, tracker: Optional[BaseTracker] = None) -> Trajectory:
    """Track `init` through `frames`. Frame 1 returns the initialization unchanged."""
    frames = list(frames)
    if not frames:
        raise ValueError("empty frame list")
    first = frames[0]
    init = init.as_int()
    state = TrackState.init(first, init, model)
    if tracker is None:
        tracker = NCCTracker(state, cfg.template_rate)
    traj = Trajectory([init])
    current = init
    for frame in frames[1:]:
        boxes = candidate_boxes(current, cfg, (frame.width, frame.height))
        f_t = normalize_confidences(tracker.confidences(frame, boxes))
        if model is None:
            fused = f_t
        else:
            f_o = normalize_confidences(objectness_scores(model, frame, boxes, cfg.objectness))
            fused = fuse_arrays(f_t, f_o, cfg.lam)
        best = boxes[select(boxes, fused)]
        current = BBox(*map(int, best))
        tracker.update(frame, current)
        traj.boxes.append(current)
    return traj
