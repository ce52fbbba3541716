"""Time whole-image objectness maps, popcount path vs dot-product path."""
import argparse
import time

import numpy as np

from adobing.bing import default_base_model, objectness_map, window_sizes_for
from adobing.imaging import GrayImage, read_image


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--image", help="image file (default: random 320x240)")
    ap.add_argument("--target", type=int, default=32, help="square target side used to derive window sizes")
    ap.add_argument("--stride", type=int, default=4)
    ap.add_argument("--full-scales", action="store_true", help="use the 5x5 scale cross instead of 3 squares")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    if args.image:
        img = read_image(args.image)
    else:
        img = GrayImage(np.random.default_rng(0).integers(0, 256, (240, 320)).astype(np.uint8))
    t = args.target
    if args.full_scales:
        sizes = window_sizes_for(t, t, max_w=img.width, max_h=img.height)
    else:
        sizes = [(int(t * s), int(t * s)) for s in (0.75, 1.0, 1.5)]
    m = default_base_model()
    n = len(objectness_map(img, m, sizes, args.stride))
    for exact in (False, True):
        secs = best_of(lambda: objectness_map(img, m, sizes, args.stride, exact=exact, workers=args.workers),
                       args.repeats)
        print(f"{'exact ' if exact else 'popcnt'}  {n} windows  {secs * 1000:7.1f} ms  "
              f"{n / secs / 1e6:.2f} Mwin/s")


if __name__ == "__main__":
    main()
