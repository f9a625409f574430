"""Center sets: midpoints of parallel-tangent pairs.  A centrally
symmetric ellipse collapses to its center; two circles give two circles
about the midpoint of their centres."""
import argparse
from pathlib import Path

import numpy as np

from conflictsets import ParametricHypersurface, Scene, center_set, center_symmetry_set, export_svg, parallel_pairs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/center_sets")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    center = np.array([0.3, -0.2])
    ellipse = Scene.build([ParametricHypersurface.create("ellipse", [*center, 2, 1, 0.4])])
    _, polys = center_symmetry_set(ellipse)
    P = np.vstack([p for p in polys if len(p)])
    print(f"ellipse: {len(P)} midpoints, farthest from the center {np.linalg.norm(P - center, axis=1).max():.1e}")

    circles = Scene.build([ParametricHypersurface.create("circle", [-1.5, 0.2, 1.0]),
                           ParametricHypersurface.create("circle", [1.0, -0.4, 0.5])])
    pairs = parallel_pairs(circles)
    polys = center_set(pairs)
    mid = np.array([-0.25, -0.1])
    for tr, P in zip(pairs, polys):
        r = np.linalg.norm(P - mid, axis=1)
        print(f"circles, sign {tr.records[0].sign:+d}: radius {np.median(r):.6f} (spread {np.ptp(r):.1e})")
    export_svg(polys, out / "circles_center.svg", ([-3.0, -2.0], [2.5, 2.0]))


if __name__ == "__main__":
    main()
