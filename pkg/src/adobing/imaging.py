"""Grayscale images, normed gradients, boxes and the 8x8 normed-gradient feature."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FEATURE_SIDE = 8
FEATURE_DIM = FEATURE_SIDE * FEATURE_SIDE

# ITU-R BT.601 luma
BT601 = (0.299, 0.587, 0.114)


class ImageError(ValueError):
    pass


@dataclass(frozen=True)
class GrayImage:
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ImageError(f"expected a 2-d pixel array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255):
                raise ImageError("pixel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self):
        return self.pixels.shape


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: left, top, width, height in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ImageError(f"box must have positive size, got {self}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_tuple(self) -> tuple:
        return (self.x, self.y, self.w, self.h)

    def as_int(self) -> "BBox":
        return BBox(*(int(round(v)) for v in self.as_tuple()))

    def inside(self, width: int, height: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x + self.w <= width and self.y + self.h <= height

    def clamp(self, width: int, height: int) -> "BBox":
        """Shift (and if needed shrink) the box so it lies inside a width x height frame."""
        w = min(self.w, width)
        h = min(self.h, height)
        x = min(max(self.x, 0), width - w)
        y = min(max(self.y, 0), height - h)
        return BBox(x, y, w, h)


@dataclass(frozen=True)
class NormedGradientMap:
    values: np.ndarray  # (height, width) uint8

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class NGFeature:
    g: np.ndarray  # 64 uint8, row-major 8x8

    def __post_init__(self):
        g = np.asarray(self.g)
        if g.shape != (FEATURE_DIM,):
            g = g.reshape(-1)
        if g.shape != (FEATURE_DIM,):
            raise ImageError(f"feature needs {FEATURE_DIM} entries, got {g.size}")
        if g.dtype != np.uint8:
            if g.min() < 0 or g.max() > 255:
                raise ImageError("feature entries must lie in [0, 255]")
            g = g.astype(np.uint8)
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "g", g)


def to_grayscale(rgb) -> GrayImage:
    """Combine channels with BT.601 luma weights.

    Accepts an (H, W, 3) array or a sequence of three (H, W) channel arrays.
    """
    if isinstance(rgb, (list, tuple)):
        chans = [np.asarray(c, dtype=np.float64) for c in rgb]
        if len(chans) != 3:
            raise ImageError("need exactly three channels")
        if not (chans[0].shape == chans[1].shape == chans[2].shape):
            raise ImageError("channel dimensions differ")
    else:
        arr = np.asarray(rgb, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ImageError(f"expected (H, W, 3) array, got shape {arr.shape}")
        chans = [arr[..., 0], arr[..., 1], arr[..., 2]]
    lum = BT601[0] * chans[0] + BT601[1] * chans[1] + BT601[2] * chans[2]
    return GrayImage(np.clip(np.floor(lum + 0.5), 0, 255).astype(np.uint8))


def normed_gradient(img: GrayImage) -> NormedGradientMap:
    """min(|gx| + |gy|, 255) with forward differences.

    The last column/row has no forward neighbour and reuses the previous difference.
    """
    if img.width < 2 or img.height < 2:
        raise ImageError(f"image too small for gradients: {img.width}x{img.height}")
    p = img.pixels.astype(np.int32)
    gx = np.empty_like(p)
    gx[:, :-1] = p[:, 1:] - p[:, :-1]
    gx[:, -1] = gx[:, -2]
    gy = np.empty_like(p)
    gy[:-1, :] = p[1:, :] - p[:-1, :]
    gy[-1, :] = gy[-2, :]
    mag = np.minimum(np.abs(gx) + np.abs(gy), 255).astype(np.uint8)
    mag.setflags(write=False)
    return NormedGradientMap(mag)


def _axis_weights(size: int, out: int):
    # pixel-centre aligned sample positions, clamped to the window
    pos = (np.arange(out) + 0.5) * (size / out) - 0.5
    pos = np.clip(pos, 0.0, size - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, size - 1)
    frac = pos - i0
    return i0, i1, frac


def resample_windows(arr: np.ndarray, xs, ys, w: int, h: int, out_w: int, out_h: int) -> np.ndarray:
    """Bilinearly resample every (xs[n], ys[n], w, h) window of `arr` to out_h x out_w.

    Returns float64 of shape (n, out_h, out_w). Windows must lie inside `arr`.
    Rows are interpolated first, then columns; origins sharing an x (or y) share that pass.
    """
    xs = np.asarray(xs, dtype=np.intp).reshape(-1)
    ys = np.asarray(ys, dtype=np.intp).reshape(-1)
    cx0, cx1, fx = _axis_weights(w, out_w)
    cy0, cy1, fy = _axis_weights(h, out_h)
    a = np.asarray(arr, dtype=np.float64)
    ux, ix = np.unique(xs, return_inverse=True)
    uy, iy = np.unique(ys, return_inverse=True)
    if len(ux) * len(uy) > 4 * len(xs):
        return _resample_gather(a, xs, ys, cx0, cx1, fx, cy0, cy1, fy)
    r_lo, r_hi = uy[0], uy[-1] + h
    band = a[r_lo:r_hi]
    # horizontal pass: (rows, |ux|, out_w)
    hp = band[:, ux[:, None] + cx0[None, :]] * (1.0 - fx) + band[:, ux[:, None] + cx1[None, :]] * fx
    # vertical pass: (|uy|, out_h, |ux|, out_w)
    r0 = (uy - r_lo)[:, None] + cy0[None, :]
    r1 = (uy - r_lo)[:, None] + cy1[None, :]
    fy_ = fy[None, :, None, None]
    grid = hp[r0] * (1.0 - fy_) + hp[r1] * fy_
    return grid[iy, :, ix, :]


def _resample_gather(a, xs, ys, cx0, cx1, fx, cy0, cy1, fy):
    rows0 = ys[:, None, None] + cy0[None, :, None]
    rows1 = ys[:, None, None] + cy1[None, :, None]
    cols0 = xs[:, None, None] + cx0[None, None, :]
    cols1 = xs[:, None, None] + cx1[None, None, :]
    fx_ = fx[None, None, :]
    fy_ = fy[None, :, None]
    top = a[rows0, cols0] * (1.0 - fx_) + a[rows0, cols1] * fx_
    bot = a[rows1, cols0] * (1.0 - fx_) + a[rows1, cols1] * fx_
    return top * (1.0 - fy_) + bot * fy_


def round_to_bytes(values: np.ndarray) -> np.ndarray:
    """Round half up and saturate to uint8."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def _check_box(box: BBox, width: int, height: int) -> BBox:
    b = box.as_int()
    if b.w < 1 or b.h < 1:
        raise ImageError(f"degenerate box {box}")
    if not b.inside(width, height):
        raise ImageError(f"box {box} outside {width}x{height} image")
    return b


def extract_ng_features(ngmap: NormedGradientMap, xs, ys, w: int, h: int) -> np.ndarray:
    """Batch version of extract_ng_feature for same-size windows; returns (n, 64) uint8."""
    vals = resample_windows(ngmap.values, xs, ys, w, h, FEATURE_SIDE, FEATURE_SIDE)
    return round_to_bytes(vals).reshape(len(vals), FEATURE_DIM)


def extract_ng_feature(ngmap: NormedGradientMap, box: BBox) -> NGFeature:
    b = _check_box(box, ngmap.width, ngmap.height)
    return NGFeature(extract_ng_features(ngmap, [b.x], [b.y], b.w, b.h)[0])


def extract_patch(img: GrayImage, box: BBox, side: int = 32) -> np.ndarray:
    """Float side x side bilinear resample of the box's intensities."""
    b = _check_box(box, img.width, img.height)
    return resample_windows(img.pixels, [b.x], [b.y], b.w, b.h, side, side)[0]


def iou(a: BBox, b: BBox) -> float:
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return float(min(max(inter / union, 0.0), 1.0))


def iou_many(box: BBox, xs, ys, ws, hs) -> np.ndarray:
    """iou of `box` against arrays of boxes."""
    xs, ys, ws, hs = (np.asarray(v, dtype=np.float64) for v in (xs, ys, ws, hs))
    ix = np.minimum(box.x + box.w, xs + ws) - np.maximum(box.x, xs)
    iy = np.minimum(box.y + box.h, ys + hs) - np.maximum(box.y, ys)
    inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
    union = box.area + ws * hs - inter
    return np.clip(inter / union, 0.0, 1.0)


def enumerate_origins(width: int, height: int, w: int, h: int, stride: int):
    """Row-major window origins (ys outer, xs inner) for one window size."""
    if w > width or h > height:
        raise ImageError(f"window {w}x{h} larger than image {width}x{height}")
    gx = np.arange(0, width - w + 1, stride)
    gy = np.arange(0, height - h + 1, stride)
    yy, xx = np.meshgrid(gy, gx, indexing="ij")
    return xx.reshape(-1), yy.reshape(-1)


def window_count(width: int, height: int, w: int, h: int, stride: int) -> int:
    return ((width - w) // stride + 1) * ((height - h) // stride + 1)


# -- portable anymap IO ------------------------------------------------------

def _pnm_tokens(data: bytes):
    """Yield (token, end_offset) for header tokens, skipping '#' comments."""
    i, n = 0, len(data)
    while i < n:
        c = data[i:i + 1]
        if c == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            yield data[i:j], j
            i = j


def read_pnm(path) -> np.ndarray:
    """Read P2/P3/P5/P6 files. Returns (H, W) or (H, W, 3) uint8."""
    data = Path(path).read_bytes()
    toks = _pnm_tokens(data)
    try:
        magic, _ = next(toks)
        width, _ = next(toks)
        height, _ = next(toks)
        maxval, end = next(toks)
    except StopIteration:
        raise ImageError(f"{path}: truncated PNM header") from None
    magic = magic.decode("ascii", "replace")
    if magic not in ("P2", "P3", "P5", "P6"):
        raise ImageError(f"{path}: unsupported PNM type {magic!r}")
    width, height, maxval = int(width), int(height), int(maxval)
    chans = 3 if magic in ("P3", "P6") else 1
    count = width * height * chans
    if magic in ("P5", "P6"):
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        if len(data) - (end + 1) < count * dtype.itemsize:
            raise ImageError(f"{path}: truncated pixel data")
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=end + 1)
    else:
        raw = np.array(data[end:].split()[:count], dtype=np.int64)
        if raw.size != count:
            raise ImageError(f"{path}: expected {count} samples, found {raw.size}")
    arr = raw.astype(np.float64)
    if maxval != 255:
        arr = np.floor(arr * 255.0 / maxval + 0.5)
    arr = arr.astype(np.uint8)
    return arr.reshape(height, width, 3) if chans == 3 else arr.reshape(height, width)


def write_pgm(path, pixels: np.ndarray) -> None:
    px = np.asarray(pixels, dtype=np.uint8)
    h, w = px.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(px.tobytes())


def read_image(path) -> GrayImage:
    """Load an image file as grayscale; PNM is read natively, other formats via Pillow."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".ppm", ".pnm"):
        arr = read_pnm(path)
    else:
        from PIL import Image

        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB") if im.mode not in ("L", "RGB") else im)
    if arr.ndim == 3:
        return to_grayscale(arr[..., :3])
    return GrayImage(arr)


def write_gradient_map(path, ngmap: NormedGradientMap) -> None:
    write_pgm(path, ngmap.values)


def ceil_div(a: float, b: float) -> int:
    return int(math.ceil(a / b))
