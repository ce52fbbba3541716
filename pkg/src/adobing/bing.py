"""Binarized normed-gradient objectness: model/feature binarization and popcount scoring."""
from __future__ import annotations

import os
from pathlib import Path
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .imaging import (
    FEATURE_DIM,
    BBox,
    GrayImage,
    ImageError,
    NGFeature,
    enumerate_origins,
    extract_ng_features,
    normed_gradient,
    write_pgm,
)

DEFAULT_N_TERMS = 2
DEFAULT_N_PLANES = 4
DEFAULT_SCALES = (0.5, 0.707, 1.0, 1.414, 2.0)

_BIT_WEIGHTS = (np.uint64(1) << np.arange(FEATURE_DIM, dtype=np.uint64))


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64).reshape(-1)
        if w.shape != (FEATURE_DIM,):
            raise ValueError(f"model needs {FEATURE_DIM} weights, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise ValueError("model weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __eq__(self, other):
        return isinstance(other, LinearModel) and np.array_equal(self.w, other.w)

    def __hash__(self):
        return hash(self.w.tobytes())

    def scaled(self, alpha: float) -> "LinearModel":
        return LinearModel(alpha * self.w)


@dataclass(frozen=True)
class BinarizedModel:
    betas: tuple[float, ...]
    a_plus: tuple[int, ...]  # 64-bit masks; bit i set <=> basis entry i is +1

    @property
    def num_terms(self) -> int:
        return len(self.betas)

    def basis(self, j: int) -> np.ndarray:
        return 2.0 * unpack_bits(self.a_plus[j]) - 1.0

    def reconstruct(self) -> np.ndarray:
        out = np.zeros(FEATURE_DIM)
        for j, beta in enumerate(self.betas):
            out += beta * self.basis(j)
        return out


@dataclass(frozen=True)
class BingFeature:
    planes: tuple[int, ...]  # b_1 (MSB) .. b_Ng

    @property
    def num_planes(self) -> int:
        return len(self.planes)

    def reconstruct(self) -> np.ndarray:
        g = np.zeros(FEATURE_DIM, dtype=np.int64)
        for k, word in enumerate(self.planes, start=1):
            g += (1 << (8 - k)) * unpack_bits(word).astype(np.int64)
        return g


def pack_bits(bits) -> int:
    """64 booleans -> int whose bit i is bits[i]."""
    bits = np.asarray(bits, dtype=bool).reshape(-1)
    return int(np.packbits(bits, bitorder="little").view("<u8")[0])


def pack_bits_rows(bits: np.ndarray) -> np.ndarray:
    """(n, 64) booleans -> (n,) uint64 words."""
    bits = np.ascontiguousarray(bits, dtype=bool)
    return np.packbits(bits, axis=1, bitorder="little").view("<u8").reshape(-1).astype(np.uint64)


def unpack_bits(word: int) -> np.ndarray:
    return ((np.uint64(word) & _BIT_WEIGHTS) != 0).astype(np.float64)


def binarize_model(m: LinearModel, n_terms: int = DEFAULT_N_TERMS) -> BinarizedModel:
    """Greedy sign-of-residual approximation w ~ sum_j beta_j * a_j with a_j in {-1,+1}^64."""
    if n_terms < 1:
        raise ValueError(f"n_terms must be >= 1, got {n_terms}")
    residual = m.w.copy()
    betas, masks = [], []
    for _ in range(n_terms):
        plus = residual >= 0
        a = np.where(plus, 1.0, -1.0)
        beta = float(np.dot(a, residual) / FEATURE_DIM)
        residual = residual - beta * a
        betas.append(beta)
        masks.append(pack_bits(plus))
    return BinarizedModel(tuple(betas), tuple(masks))


def _check_planes(n_planes: int) -> None:
    if not 1 <= n_planes <= 8:
        raise ValueError(f"n_planes must be in [1, 8], got {n_planes}")


def binarize_feature(f: NGFeature, n_planes: int = DEFAULT_N_PLANES) -> BingFeature:
    _check_planes(n_planes)
    return BingFeature(tuple(int(w) for w in binarize_features(f.g[None, :], n_planes)[0]))


def binarize_features(g: np.ndarray, n_planes: int = DEFAULT_N_PLANES) -> np.ndarray:
    """(n, 64) uint8 -> (n, n_planes) uint64 bit planes, most significant first."""
    _check_planes(n_planes)
    g = np.asarray(g, dtype=np.uint8)
    out = np.empty((g.shape[0], n_planes), dtype=np.uint64)
    for k in range(1, n_planes + 1):
        out[:, k - 1] = pack_bits_rows((g >> (8 - k)) & 1)
    return out


def exact_score(m: LinearModel, f: NGFeature) -> float:
    return float(np.dot(m.w, f.g.astype(np.float64)))


def _popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).astype(np.int64)


def fast_scores(bm: BinarizedModel, planes: np.ndarray) -> np.ndarray:
    """Vectorized popcount scoring of (n, N_g) bit-plane rows."""
    planes = np.asarray(planes, dtype=np.uint64)
    n_planes = planes.shape[1]
    plane_pop = _popcount(planes)
    scores = np.zeros(planes.shape[0], dtype=np.float64)
    for beta, mask in zip(bm.betas, bm.a_plus):
        inner = _popcount(planes & np.uint64(mask))
        total = np.zeros(planes.shape[0], dtype=np.int64)
        for k in range(1, n_planes + 1):
            total += (1 << (8 - k)) * (2 * inner[:, k - 1] - plane_pop[:, k - 1])
        scores += beta * total
    return scores


def fast_score(bm: BinarizedModel, bf: BingFeature) -> float:
    """sum_j beta_j sum_k 2^(8-k) (2 popcnt(a_j & b_k) - popcnt(b_k))."""
    s = 0.0
    for beta, mask in zip(bm.betas, bm.a_plus):
        total = 0
        for k, word in enumerate(bf.planes, start=1):
            total += (1 << (8 - k)) * (2 * (mask & word).bit_count() - word.bit_count())
        s += beta * total
    return s


def window_sizes_for(target_w: float, target_h: float, scales=DEFAULT_SCALES,
                     max_w: int | None = None, max_h: int | None = None) -> list[tuple[int, int]]:
    """Window sizes from scaling the target size independently in each dimension.

    Sizes that do not fit in (max_w, max_h) are dropped.
    """
    sizes = []
    for sy in scales:
        for sx in scales:
            w = max(1, int(round(target_w * sx)))
            h = max(1, int(round(target_h * sy)))
            if (max_w is not None and w > max_w) or (max_h is not None and h > max_h):
                continue
            if (w, h) not in sizes:
                sizes.append((w, h))
    return sizes


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ADOBING_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class ObjectnessMap:
    """Scored windows as parallel arrays, in enumeration order."""

    boxes: np.ndarray  # (n, 4) int: x, y, w, h
    scores: np.ndarray  # (n,)

    def __len__(self):
        return len(self.scores)

    def entries(self) -> list[tuple[BBox, float]]:
        return [(BBox(*map(int, b)), float(s)) for b, s in zip(self.boxes, self.scores)]

    def best(self) -> int:
        return argmax_tiebreak(self.scores, self.boxes)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("x,y,w,h,score\n")
            for (x, y, w, h), s in zip(self.boxes, self.scores):
                fh.write(f"{x},{y},{w},{h},{float(s)!r}\n")

    def heat(self, width: int, height: int) -> np.ndarray:
        """Per-pixel max score over covering windows, normalized to 0..255."""
        heat = np.full((height, width), -np.inf)
        for (x, y, w, h), s in zip(self.boxes, self.scores):
            view = heat[y:y + h, x:x + w]
            np.maximum(view, s, out=view)
        covered = np.isfinite(heat)
        out = np.zeros((height, width), dtype=np.uint8)
        if covered.any():
            lo, hi = heat[covered].min(), heat[covered].max()
            if hi > lo:
                out[covered] = np.floor((heat[covered] - lo) / (hi - lo) * 255 + 0.5).astype(np.uint8)
        return out

    def write_heat_pgm(self, path, width: int, height: int) -> None:
        write_pgm(path, self.heat(width, height))


def argmax_tiebreak(scores, boxes) -> int:
    """Index of the max score; ties go to smallest (y, x) origin, then smallest area."""
    scores = np.asarray(scores)
    boxes = np.asarray(boxes)
    cand = np.flatnonzero(scores == scores.max())
    if len(cand) == 1:
        return int(cand[0])
    b = boxes[cand]
    order = np.lexsort((b[:, 2] * b[:, 3], b[:, 0], b[:, 1]))
    return int(cand[order[0]])


def _score_size(ngmap, model_or_bm, size, stride, n_planes, exact):
    w, h = size
    xs, ys = enumerate_origins(ngmap.width, ngmap.height, w, h, stride)
    feats = extract_ng_features(ngmap, xs, ys, w, h)
    if exact:
        scores = feats.astype(np.float64) @ model_or_bm.w
    else:
        scores = fast_scores(model_or_bm, binarize_features(feats, n_planes))
    boxes = np.column_stack([xs, ys, np.full_like(xs, w), np.full_like(xs, h)])
    return boxes, scores


def objectness_map(img: GrayImage, m: LinearModel, windows, stride: int,
                   n_terms: int = DEFAULT_N_TERMS, n_planes: int = DEFAULT_N_PLANES,
                   exact: bool = False, workers: int | None = None) -> ObjectnessMap:
    """Score every window of every size in `windows` on a stride grid.

    Window sizes are processed in the given order, each in row-major origin order.
    """
    windows = [(int(w), int(h)) for w, h in windows]
    if not windows:
        raise ImageError("empty window set")
    if stride < 1:
        raise ImageError("stride must be >= 1")
    for w, h in windows:
        if w > img.width or h > img.height or w < 1 or h < 1:
            raise ImageError(f"window {w}x{h} does not fit in {img.width}x{img.height} image")
    ngmap = normed_gradient(img)
    scorer = m if exact else binarize_model(m, n_terms)
    workers = default_workers() if workers is None else workers
    args = [(ngmap, scorer, size, stride, n_planes, exact) for size in windows]
    if workers > 1 and len(windows) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda a: _score_size(*a), args))
    else:
        parts = [_score_size(*a) for a in args]
    return ObjectnessMap(np.concatenate([p[0] for p in parts]).astype(np.int64),
                         np.concatenate([p[1] for p in parts]))


def default_base_model() -> LinearModel:
    """Generic base model shipped with the package (see scripts/train_generic_base.py)."""
    from .modelio import load_model

    return load_model(Path(__file__).with_name("data") / "generic_base.json")
