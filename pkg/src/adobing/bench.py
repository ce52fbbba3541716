"""Sequence loading and the precision / success / AUC evaluation protocol."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .imaging import BBox, GrayImage, iou, read_image

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".pgm", ".ppm", ".pnm", ".tif", ".tiff"}
GT_NAMES = ("groundtruth_rect.txt", "groundtruth.txt", "gt.txt")
PRECISION_THRESHOLDS = np.arange(0, 51, dtype=np.float64)
SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 21)
PRECISION_RANK_THRESHOLD = 20.0

_SPLIT = re.compile(r"[,\t ]+")


class SequenceError(ValueError):
    pass


@dataclass
class SequenceDataset:
    name: str
    frames: list  # image paths
    ground_truth: list  # BBox per frame

    def __post_init__(self):
        if len(self.frames) != len(self.ground_truth):
            raise SequenceError(f"{self.name}: {len(self.frames)} frames but "
                                f"{len(self.ground_truth)} ground-truth boxes")
        if not self.frames:
            raise SequenceError(f"{self.name}: empty sequence")

    def __len__(self):
        return len(self.frames)

    def images(self) -> list[GrayImage]:
        return [read_image(p) for p in self.frames]


@dataclass
class EvaluationRecord:
    tracked: list  # BBox or None (lost)
    truth: list

    def __post_init__(self):
        if len(self.tracked) != len(self.truth):
            raise ValueError(f"record lengths differ: {len(self.tracked)} vs {len(self.truth)}")

    def __len__(self):
        return len(self.truth)


@dataclass
class Curve:
    thresholds: np.ndarray
    values: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("threshold,value\n")
            for t, v in zip(self.thresholds, self.values):
                fh.write(f"{float(t)!r},{float(v)!r}\n")

    def at(self, threshold: float) -> float:
        idx = np.flatnonzero(np.isclose(self.thresholds, threshold))
        if idx.size == 0:
            raise KeyError(f"threshold {threshold} not on the grid")
        return float(self.values[idx[0]])


class PrecisionCurve(Curve):
    pass


class SuccessCurve(Curve):
    pass


def parse_box_line(line: str, lineno: int = 0, source: str = "") -> Optional[BBox]:
    """Parse "x,y,w,h" (comma, tab or space separated). NaN entries mean a lost frame."""
    parts = [p for p in _SPLIT.split(line.strip()) if p]
    where = f"{source}:{lineno}" if source else f"line {lineno}"
    if len(parts) != 4:
        raise SequenceError(f"{where}: expected 4 values, got {len(parts)}: {line.strip()!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise SequenceError(f"{where}: non-numeric value in {line.strip()!r}") from None
    if any(math.isnan(v) for v in vals):
        return None
    if vals[2] <= 0 or vals[3] <= 0:
        return None
    return BBox(*vals)


def read_boxes(path, allow_missing: bool = False) -> list:
    path = Path(path)
    boxes = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        box = parse_box_line(line, lineno, str(path))
        if box is None and not allow_missing:
            raise SequenceError(f"{path}:{lineno}: missing or degenerate box")
        boxes.append(box)
    if not boxes:
        raise SequenceError(f"{path}: no boxes")
    return boxes


def write_boxes(path, boxes) -> None:
    lines = []
    for b in boxes:
        if b is None:
            lines.append("nan,nan,nan,nan")
        else:
            lines.append(",".join(str(int(v)) if float(v).is_integer() else repr(float(v))
                                  for v in b.as_tuple()))
    Path(path).write_text("\n".join(lines) + "\n")


def _find_image_dir(root: Path) -> Path:
    for name in ("img", "imgs", "images", "rgb", "color"):
        cand = root / name
        if cand.is_dir():
            return cand
    subdirs = [d for d in sorted(root.iterdir()) if d.is_dir()]
    for d in subdirs:
        if any(p.suffix.lower() in IMAGE_SUFFIXES for p in d.iterdir()):
            return d
    raise SequenceError(f"{root}: no image folder found")


def load_sequence(directory) -> SequenceDataset:
    """OTB-style directory: an image subfolder plus a ground-truth rectangle file."""
    root = Path(directory)
    if not root.is_dir():
        raise SequenceError(f"{root}: not a directory")
    gt_path = next((root / n for n in GT_NAMES if (root / n).is_file()), None)
    if gt_path is None:
        raise SequenceError(f"{root}: no ground-truth file ({', '.join(GT_NAMES)})")
    img_dir = _find_image_dir(root)
    frames = sorted((p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
                    key=lambda p: p.name)
    if not frames:
        raise SequenceError(f"{img_dir}: no images")
    boxes = read_boxes(gt_path, allow_missing=True)
    if boxes[0] is None:
        raise SequenceError(f"{gt_path}: first frame must be annotated")
    if len(boxes) != len(frames):
        raise SequenceError(f"{root}: {len(frames)} images but {len(boxes)} ground-truth lines")
    return SequenceDataset(root.name, frames, boxes)


def center_error(r_t: Optional[BBox], r_g: Optional[BBox]) -> float:
    if r_t is None or r_g is None:
        return math.inf
    (ax, ay), (bx, by) = r_t.center, r_g.center
    return math.hypot(ax - bx, ay - by)


def center_errors(rec: EvaluationRecord) -> np.ndarray:
    return np.array([center_error(t, g) for t, g in zip(rec.tracked, rec.truth)])


def overlaps(rec: EvaluationRecord) -> np.ndarray:
    return np.array([0.0 if (t is None or g is None) else iou(t, g)
                     for t, g in zip(rec.tracked, rec.truth)])


def _check(rec: EvaluationRecord) -> None:
    if len(rec) == 0:
        raise ValueError("empty evaluation record")


def precision_curve(rec: EvaluationRecord, thresholds=PRECISION_THRESHOLDS) -> PrecisionCurve:
    _check(rec)
    th = np.asarray(thresholds, dtype=np.float64)
    err = center_errors(rec)
    vals = (err[None, :] <= th[:, None]).mean(axis=1)
    return PrecisionCurve(th, vals)


def success_curve(rec: EvaluationRecord, thresholds=SUCCESS_THRESHOLDS) -> SuccessCurve:
    _check(rec)
    th = np.asarray(thresholds, dtype=np.float64)
    ov = overlaps(rec)
    vals = (ov[None, :] > th[:, None]).mean(axis=1)
    return SuccessCurve(th, vals)


def auc(curve: SuccessCurve) -> float:
    """Mean success over a uniform threshold grid."""
    th = np.asarray(curve.thresholds, dtype=np.float64)
    if th.size == 0:
        raise ValueError("empty curve")
    if th.size > 2 and not np.allclose(np.diff(th), th[1] - th[0], rtol=1e-9, atol=1e-12):
        raise ValueError("auc needs a uniform threshold grid")
    return float(np.mean(curve.values))


def evaluate(rec: EvaluationRecord) -> dict:
    prec = precision_curve(rec)
    succ = success_curve(rec)
    return {
        "precision_at_20": prec.at(PRECISION_RANK_THRESHOLD),
        "auc": auc(succ),
        "precision": prec,
        "success": succ,
    }


def write_metrics(out_dir, rec: EvaluationRecord, stem: str = "") -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res = evaluate(rec)
    pre = f"{stem}_" if stem else ""
    metrics = {"precision_at_20": res["precision_at_20"], "auc": res["auc"]}
    (out_dir / f"{pre}metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    res["precision"].to_csv(out_dir / f"{pre}precision.csv")
    res["success"].to_csv(out_dir / f"{pre}success.csv")
    return metrics


def record_from(tracked: Sequence, truth: Sequence) -> EvaluationRecord:
    return EvaluationRecord(list(tracked), list(truth))
