"""Train the generic base objectness model shipped in src/adobing/data/generic_base.json.

Each training image holds one random textured rectangle on a textured background; windows
are harvested exactly as for target adaptation and fit with the solver started at zero.
"""
import argparse
from pathlib import Path

from adobing.adaptation import AnnotatedFrame, train_base_model
from adobing.modelio import save_model
from adobing.synthetic import generic_object_frame

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "adobing" / "data" / "generic_base.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--images", type=int, default=40)
    ap.add_argument("--seed", type=int, default=1000)
    ap.add_argument("--C", type=float, default=1.0)
    ap.add_argument("--max-negatives", type=int, default=100)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args()

    frames = [AnnotatedFrame(*generic_object_frame(args.seed + i)) for i in range(args.images)]
    model = train_base_model(frames, C=args.C, max_negatives=args.max_negatives)
    save_model(args.out, model, {
        "trainer": "generic_object_frame corpus",
        "images": args.images, "seed": args.seed, "C": args.C,
        "max_negatives": args.max_negatives,
    })
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
