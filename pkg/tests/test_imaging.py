import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adobing.imaging import (
    BBox,
    GrayImage,
    ImageError,
    NGFeature,
    enumerate_origins,
    extract_ng_feature,
    extract_ng_features,
    extract_patch,
    iou,
    iou_many,
    normed_gradient,
    read_image,
    read_pnm,
    resample_windows,
    to_grayscale,
    window_count,
    write_gradient_map,
    write_pgm,
)


# ---- reference implementations ---------------------------------------------

def naive_gradient(p):
    p = p.astype(int)
    h, w = p.shape
    out = np.zeros_like(p)
    for i in range(h):
        for j in range(w):
            jj = j if j < w - 1 else j - 1
            ii = i if i < h - 1 else i - 1
            gx = p[i, jj + 1] - p[i, jj]
            gy = p[ii + 1, j] - p[ii, j]
            out[i, j] = min(abs(gx) + abs(gy), 255)
    return out


def naive_bilinear(p, x, y, w, h, out_w=8, out_h=8):
    out = np.zeros((out_h, out_w))
    for r in range(out_h):
        py = min(max((r + 0.5) * h / out_h - 0.5, 0.0), h - 1)
        y0 = int(math.floor(py))
        y1 = min(y0 + 1, h - 1)
        fy = py - y0
        for c in range(out_w):
            px = min(max((c + 0.5) * w / out_w - 0.5, 0.0), w - 1)
            x0 = int(math.floor(px))
            x1 = min(x0 + 1, w - 1)
            fx = px - x0
            top = (1 - fx) * p[y + y0, x + x0] + fx * p[y + y0, x + x1]
            bot = (1 - fx) * p[y + y1, x + x0] + fx * p[y + y1, x + x1]
            out[r, c] = (1 - fy) * top + fy * bot
    return out


def naive_iou(a, b):
    inter = 0
    for yy in range(min(a[1], b[1]), max(a[1] + a[3], b[1] + b[3])):
        for xx in range(min(a[0], b[0]), max(a[0] + a[2], b[0] + b[2])):
            ina = a[0] <= xx < a[0] + a[2] and a[1] <= yy < a[1] + a[3]
            inb = b[0] <= xx < b[0] + b[2] and b[1] <= yy < b[1] + b[3]
            inter += ina and inb
    return inter / (a[2] * a[3] + b[2] * b[3] - inter)


boxes = st.tuples(st.integers(0, 20), st.integers(0, 20), st.integers(1, 12), st.integers(1, 12))


# ---- grayscale ---------------------------------------------------------------

def test_grayscale_constant_channels():
    rgb = np.full((4, 5, 3), 100, dtype=np.uint8)
    assert np.all(to_grayscale(rgb).pixels == 100)


def test_grayscale_black():
    assert not to_grayscale(np.zeros((3, 3, 3))).pixels.any()


def test_grayscale_matches_per_pixel():
    rng = np.random.default_rng(1)
    rgb = rng.integers(0, 256, size=(4, 4, 3))
    got = to_grayscale(rgb).pixels
    for i in range(4):
        for j in range(4):
            r, g, b = (float(v) for v in rgb[i, j])
            assert got[i, j] == min(255, max(0, math.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5)))


def test_grayscale_channel_mismatch():
    with pytest.raises(ImageError):
        to_grayscale((np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 4))))
    with pytest.raises(ImageError):
        to_grayscale(np.zeros((3, 3, 4)))


# ---- normed gradient ---------------------------------------------------------

def test_gradient_constant_is_zero():
    assert not normed_gradient(GrayImage(np.full((6, 7), 42, np.uint8))).values.any()


def test_gradient_two_columns_saturate():
    p = np.zeros((3, 2), np.uint8)
    p[:, 1] = 255
    assert np.all(normed_gradient(GrayImage(p)).values == 255)


def test_gradient_matches_loop():
    p = np.random.default_rng(0).integers(0, 256, size=(10, 10)).astype(np.uint8)
    assert np.array_equal(normed_gradient(GrayImage(p)).values, naive_gradient(p))


def test_gradient_too_small():
    with pytest.raises(ImageError):
        normed_gradient(GrayImage(np.zeros((1, 5), np.uint8)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60))
def test_gradient_shift_invariant(seed, shift):
    p = np.random.default_rng(seed).integers(0, 190, size=(9, 11)).astype(np.uint8)
    a = normed_gradient(GrayImage(p)).values
    b = normed_gradient(GrayImage(p + shift)).values
    assert np.array_equal(a, b)


# ---- features ----------------------------------------------------------------

def test_feature_identity_on_8x8():
    vals = np.random.default_rng(3).integers(0, 256, size=(8, 8)).astype(np.uint8)
    from adobing.imaging import NormedGradientMap
    f = extract_ng_feature(NormedGradientMap(vals), BBox(0, 0, 8, 8))
    assert np.array_equal(f.g, vals.ravel())


def test_feature_uniform_map():
    from adobing.imaging import NormedGradientMap
    m = NormedGradientMap(np.full((30, 40), 77, np.uint8))
    assert np.all(extract_ng_feature(m, BBox(3, 2, 21, 13)).g == 77)


def test_feature_matches_naive_bilinear():
    from adobing.imaging import NormedGradientMap
    vals = np.random.default_rng(5).integers(0, 256, size=(50, 60)).astype(np.uint8)
    ref = naive_bilinear(vals.astype(float), 7, 11, 32, 24)
    got = extract_ng_feature(NormedGradientMap(vals), BBox(7, 11, 32, 24)).g.reshape(8, 8)
    assert np.abs(got.astype(int) - np.floor(ref + 0.5)).max() <= 1
    floats = resample_windows(vals, [7], [11], 32, 24, 8, 8)[0]
    assert np.allclose(floats, ref, atol=1e-9)


def test_separable_and_gather_paths_agree():
    # many distinct origins on both axes force the gather fallback
    vals = np.random.default_rng(8).integers(0, 256, size=(40, 40)).astype(np.uint8)
    xs = np.arange(0, 20)
    ys = np.arange(0, 20)
    batch = resample_windows(vals, xs, ys, 13, 9, 8, 8)
    for n in range(len(xs)):
        single = resample_windows(vals, [xs[n]], [ys[n]], 13, 9, 8, 8)[0]
        assert np.array_equal(batch[n], single)


def test_feature_box_outside():
    from adobing.imaging import NormedGradientMap
    m = NormedGradientMap(np.zeros((10, 10), np.uint8))
    with pytest.raises(ImageError):
        extract_ng_feature(m, BBox(5, 5, 8, 8))


def test_degenerate_box_rejected():
    with pytest.raises(ValueError):
        BBox(0, 0, 0, 4)


def test_ngfeature_needs_64():
    with pytest.raises(ValueError):
        NGFeature(np.zeros(63))


def test_patch_of_constant_image():
    img = GrayImage(np.full((20, 20), 9, np.uint8))
    assert np.all(extract_patch(img, BBox(1, 1, 10, 15)) == 9)


def test_batch_features_match_single():
    from adobing.imaging import NormedGradientMap
    vals = np.random.default_rng(9).integers(0, 256, size=(30, 30)).astype(np.uint8)
    m = NormedGradientMap(vals)
    xs, ys = enumerate_origins(30, 30, 12, 10, 3)
    batch = extract_ng_features(m, xs, ys, 12, 10)
    for k in range(len(xs)):
        assert np.array_equal(batch[k], extract_ng_feature(m, BBox(xs[k], ys[k], 12, 10)).g)


# ---- iou -----------------------------------------------------------------------

def test_iou_examples():
    a = BBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BBox(20, 20, 5, 5)) == 0.0
    assert iou(a, BBox(5, 0, 10, 10)) == pytest.approx(1 / 3)


@given(boxes, boxes)
def test_iou_symmetric_bounded_and_exact(a, b):
    ba, bb = BBox(*a), BBox(*b)
    v = iou(ba, bb)
    assert v == iou(bb, ba)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(naive_iou(a, b))
    assert iou(ba, ba) == 1.0
    many = iou_many(ba, [b[0]], [b[1]], [b[2]], [b[3]])[0]
    assert many == pytest.approx(v)


# ---- enumeration -----------------------------------------------------------------

def test_window_count_100x100():
    xs, ys = enumerate_origins(100, 100, 20, 20, 10)
    assert len(xs) == 81 == window_count(100, 100, 20, 20, 10)
    # row-major: x varies fastest
    assert (xs[0], ys[0], xs[1], ys[1]) == (0, 0, 10, 0)


@given(st.integers(5, 60), st.integers(5, 60), st.integers(1, 5), st.integers(1, 5), st.integers(1, 7))
def test_enumeration_count_formula(W, H, w, h, s):
    xs, ys = enumerate_origins(W, H, w, h, s)
    brute = [(x, y) for y in range(0, H - h + 1, s) for x in range(0, W - w + 1, s)]
    assert list(zip(xs.tolist(), ys.tolist())) == brute
    assert window_count(W, H, w, h, s) == len(brute)


# ---- file IO ---------------------------------------------------------------------

def test_pgm_roundtrip(tmp_path):
    p = np.random.default_rng(2).integers(0, 256, size=(7, 9)).astype(np.uint8)
    write_pgm(tmp_path / "a.pgm", p)
    assert np.array_equal(read_image(tmp_path / "a.pgm").pixels, p)


def test_ascii_pnm_with_comments(tmp_path):
    (tmp_path / "a.pgm").write_text("P2\n# a comment\n3 2\n255\n0 1 2\n3 4 255\n")
    assert read_pnm(tmp_path / "a.pgm").tolist() == [[0, 1, 2], [3, 4, 255]]
    (tmp_path / "c.ppm").write_text("P3 1 1 255 10 20 30\n")
    assert read_image(tmp_path / "c.ppm").pixels[0, 0] == round(0.299 * 10 + 0.587 * 20 + 0.114 * 30)


def test_png_through_pillow(tmp_path):
    from PIL import Image
    p = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    Image.fromarray(p).save(tmp_path / "a.png")
    assert np.array_equal(read_image(tmp_path / "a.png").pixels, p)


def test_gradient_export(tmp_path):
    img = GrayImage(np.random.default_rng(4).integers(0, 256, size=(6, 6)).astype(np.uint8))
    m = normed_gradient(img)
    write_gradient_map(tmp_path / "g.pgm", m)
    assert np.array_equal(read_pnm(tmp_path / "g.pgm"), m.values)


def test_truncated_pnm(tmp_path):
    (tmp_path / "bad.pgm").write_bytes(b"P5\n4 4\n255\n\x00\x01")
    with pytest.raises(ImageError):
        read_pnm(tmp_path / "bad.pgm")
