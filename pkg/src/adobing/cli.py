"""Command line: adapt, objmap, track, eval.

Configuration precedence is flags > --config JSON file > built-in defaults.
Exit codes: 0 success, 2 usage/config, 3 IO, 4 algorithmic failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from . import bench
from .adaptation import AdaptationError, AnnotatedFrame, SampleSpec, adapt_objectness_detailed
from .adasvm import AdaSvmConfig, write_trace
from .bing import default_base_model, objectness_map, window_sizes_for
from .imaging import BBox, ImageError, read_image
from .modelio import ModelFileError, load_model, model_hash, save_model
from .tracking import FusionConfig, track_sequence

log = logging.getLogger("adobing")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_ALGO = 0, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    # adaptive SVM
    C: float = 0.01
    beta: float = 0.5
    sigma: float = 0.01
    max_outer_iters: int = 1000
    tol: float = 1e-4
    max_backtracks: int = 40
    # sample harvesting (stride 0 = derive from the target size)
    sample_stride: int = 0
    pos_iou: float = 0.5
    neg_iou: float = 0.3
    max_negatives: int = 500
    adapt_frames: int = 1
    # fusion / tracking
    lam: float = 0.1
    search_radius: int = 24
    candidate_stride: int = 2
    scale_set: tuple = (1.0,)
    template_rate: float = 0.0
    objectness: str = "exact"
    # objectness maps
    map_stride: int = 4
    seed: int = 0

    def adasvm(self) -> AdaSvmConfig:
        return AdaSvmConfig(C=self.C, beta=self.beta, sigma=self.sigma, max_outer_iters=self.max_outer_iters,
                            tol=self.tol, max_backtracks=self.max_backtracks)

    def fusion(self) -> FusionConfig:
        return FusionConfig(lam=self.lam, search_radius=self.search_radius,
                            candidate_stride=self.candidate_stride, scale_set=tuple(self.scale_set),
                            template_rate=self.template_rate, objectness=self.objectness)

    def spec_overrides(self) -> dict:
        kw = dict(pos_iou=self.pos_iou, neg_iou=self.neg_iou, max_negatives=self.max_negatives, seed=self.seed)
        if self.sample_stride > 0:
            kw["stride"] = self.sample_stride
        return kw

    def sample_spec(self, target: BBox, width: int, height: int) -> SampleSpec:
        return SampleSpec.for_target(target, width, height, **self.spec_overrides())

    def validate(self) -> "RunConfig":
        try:
            self.adasvm()
            self.fusion()
            SampleSpec(stride=max(self.sample_stride, 1), window_sizes=((1, 1),), pos_iou=self.pos_iou,
                       neg_iou=self.neg_iou, max_negatives=self.max_negatives, seed=self.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if self.adapt_frames < 1 or self.map_stride < 1:
            raise UsageError("adapt_frames and map_stride must be >= 1")
        return self


# flag name -> RunConfig field
_FLAG_FIELDS = {
    "C": "C", "lam": "lam", "seed": "seed", "radius": "search_radius", "cand_stride": "candidate_stride",
    "scales": "scale_set", "template_rate": "template_rate", "objectness": "objectness",
    "sample_stride": "sample_stride", "max_negatives": "max_negatives", "adapt_frames": "adapt_frames",
    "map_stride": "map_stride", "tol": "tol", "max_iters": "max_outer_iters",
}


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from None
        known = {f.name for f in fields(RunConfig)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
        values.update(doc)
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    if "scale_set" in values:
        values["scale_set"] = tuple(float(s) for s in values["scale_set"])
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    return cfg.validate()


def parse_box(text: str) -> BBox:
    try:
        box = bench.parse_box_line(text)
    except bench.SequenceError as exc:
        raise UsageError(f"bad box {text!r}: {exc}") from None
    if box is None:
        raise UsageError(f"bad box {text!r}")
    return box


def parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise UsageError(f"bad window size {text!r}, expected WxH") from None


def _check_out(path: Optional[str], what: str) -> Path:
    if not path:
        raise UsageError(f"--out is required for {what}")
    out = Path(path)
    if out.parent and not out.parent.exists():
        raise UsageError(f"output directory {out.parent} does not exist")
    return out


def _base_model(path: Optional[str]):
    return load_model(path) if path else default_base_model()


def cmd_adapt(args, cfg: RunConfig) -> int:
    out = _check_out(args.out, "adapt")
    if args.trace:
        _check_out(args.trace, "the trace")
    if args.seq:
        seq = bench.load_sequence(args.seq)
        n = min(cfg.adapt_frames, len(seq))
        frames = [AnnotatedFrame(read_image(seq.frames[i]), seq.ground_truth[i])
                  for i in range(n) if seq.ground_truth[i] is not None]
        if not frames:
            raise AdaptationError(f"{args.seq}: no annotated frame among the first {n}")
    else:
        if not (args.frame and args.gt):
            raise UsageError("adapt needs --seq, or --frame together with --gt x,y,w,h")
        frames = [AnnotatedFrame(read_image(args.frame), parse_box(args.gt))]
    base = _base_model(args.base_model)
    first = frames[0]
    spec = cfg.sample_spec(first.target, first.image.width, first.image.height)
    if len(frames) == 1:
        res = adapt_objectness_detailed(base, frames, spec, cfg.adasvm(), trace=True)
    else:
        res = adapt_objectness_detailed(base, frames, None, cfg.adasvm(), trace=True, **cfg.spec_overrides())
    provenance = {
        "base_model_hash": model_hash(base),
        "C": cfg.C,
        "seed": cfg.seed,
        "spec": spec.as_dict(),
        "frames": len(frames),
    }
    save_model(out, res.model, provenance)
    if args.trace:
        write_trace(args.trace, res.trace)
    first_obj = res.trace[0][1] if res.trace else res.objective
    print(f"adapted in {res.n_iter} sweeps (converged={res.converged}); "
          f"objective after first sweep {first_obj:.6g}, final {res.objective:.6g}; "
          f"{int((res.model.w != base.w).sum())} of 64 weights changed -> {out}")
    return EXIT_OK


def cmd_objmap(args, cfg: RunConfig) -> int:
    out = _check_out(args.out, "objmap")
    img = read_image(args.image)
    model = _base_model(args.model)
    if args.window:
        sizes = [parse_size(s) for s in args.window]
    elif args.gt:
        box = parse_box(args.gt)
        sizes = window_sizes_for(box.w, box.h, max_w=img.width, max_h=img.height)
    else:
        side = max(2, min(img.width, img.height) // 4)
        sizes = [(side, side)]
    omap = objectness_map(img, model, sizes, cfg.map_stride, exact=args.exact)
    csv_path = out.with_suffix(".csv")
    pgm_path = out.with_suffix(".pgm")
    omap.to_csv(csv_path)
    omap.write_heat_pgm(pgm_path, img.width, img.height)
    best = omap.boxes[omap.best()]
    print(f"{len(omap)} windows scored; best {tuple(int(v) for v in best)} -> {csv_path}, {pgm_path}")
    return EXIT_OK


def cmd_track(args, cfg: RunConfig) -> int:
    out = _check_out(args.out, "track")
    if not args.seq:
        raise UsageError("track needs --seq")
    seq = bench.load_sequence(args.seq)
    frames = seq.images()
    model = load_model(args.model) if args.model else None
    traj = track_sequence(frames, seq.ground_truth[0], cfg.fusion(), model)
    traj.write(out)
    print(f"tracked {len(traj)} frames ({'fused' if model is not None else 'base only'}) -> {out}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    if not (args.traj and args.gt):
        raise UsageError("eval needs --traj and --gt")
    out_dir = Path(args.out) if args.out else None
    tracked = bench.read_boxes(args.traj, allow_missing=True)
    truth = bench.read_boxes(args.gt, allow_missing=True)
    if len(tracked) != len(truth):
        raise bench.SequenceError(f"{len(tracked)} tracked boxes but {len(truth)} ground-truth boxes")
    rec = bench.record_from(tracked, truth)
    if out_dir is not None:
        metrics = bench.write_metrics(out_dir, rec)
    else:
        res = bench.evaluate(rec)
        metrics = {"precision_at_20": res["precision_at_20"], "auc": res["auc"]}
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--C", type=float, help="adaptive SVM loss weight (default 0.01)")
    common.add_argument("--lambda", dest="lam", type=float, help="objectness fusion weight (default 0.1)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="adobing", description="Tracking-adaptive objectness.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("adapt", parents=[common], help="adapt the base objectness model to a target")
    p.add_argument("--base-model")
    p.add_argument("--seq", help="sequence directory; uses its first annotated frame(s)")
    p.add_argument("--frame", help="image file of the annotated frame")
    p.add_argument("--gt", help="target box x,y,w,h")
    p.add_argument("--adapt-frames", type=int, help="annotated frames to harvest from --seq (default 1)")
    p.add_argument("--sample-stride", type=int)
    p.add_argument("--max-negatives", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--trace", help="write the convergence trace CSV here")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("objmap", parents=[common], help="score sliding windows of an image")
    p.add_argument("--image", required=True)
    p.add_argument("--model")
    p.add_argument("--window", action="append", help="window size WxH (repeatable)")
    p.add_argument("--gt", help="derive window sizes from this box x,y,w,h")
    p.add_argument("--map-stride", type=int)
    p.add_argument("--exact", action="store_true", help="dot-product scoring instead of popcount")
    p.set_defaults(func=cmd_objmap)

    p = sub.add_parser("track", parents=[common], help="track a sequence")
    p.add_argument("--seq")
    p.add_argument("--model", help="objectness model; omit for the base tracker alone")
    p.add_argument("--radius", type=int)
    p.add_argument("--cand-stride", type=int)
    p.add_argument("--scales", type=float, nargs="+")
    p.add_argument("--template-rate", type=float)
    p.add_argument("--template-update", dest="template_rate", action="store_const", const=0.05,
                   help="linear template update at rate 0.05")
    p.add_argument("--objectness", choices=("exact", "fast"))
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", parents=[common], help="precision / success / AUC of a trajectory")
    p.add_argument("--traj", required=True)
    p.add_argument("--gt", required=True, help="ground-truth rectangle file")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"adobing: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ModelFileError, bench.SequenceError, ImageError) as exc:
        print(f"adobing: IO error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AdaptationError, ValueError, ArithmeticError) as exc:
        print(f"adobing: failed: {exc}", file=sys.stderr)
        return EXIT_ALGO


if __name__ == "__main__":
    sys.exit(main())
