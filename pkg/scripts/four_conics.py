"""Conflict set of two Euclidean circles: four conic branches, one per
sign pattern of d1 - r1 = +-(d2 - r2)."""
import argparse
from pathlib import Path

import numpy as np

from conflictsets import ParametricHypersurface, Scene, conflict_set, export_csv, export_svg


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/four_conics")
    ap.add_argument("--density", type=int, default=64)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    c1, r1, c2, r2 = np.array([-2.0, 0.0]), 1.0, np.array([2.0, 0.0]), 0.5
    scene = Scene.build([ParametricHypersurface.create("circle", [*c1, r1]),
                         ParametricHypersurface.create("circle", [*c2, r2])])
    box = ([-4.0, -4.0], [4.0, 4.0])
    traces = conflict_set(scene, box=box, density=args.density)
    print(f"{len(traces)} branches")
    for k, tr in enumerate(traces):
        X = tr.vertices[:, :2]
        gap = np.linalg.norm(X - c1, axis=1) - np.linalg.norm(X - c2, axis=1)
        print(f"  branch {k}: {len(tr)} vertices, d1 - d2 = {np.median(gap):+.6f} (spread {np.ptp(gap):.1e}), "
              f"ends {tr.ends[0]}/{tr.ends[1]}")
    export_csv(traces, out / "conflict.csv")
    export_svg([tr.vertices[:, :2] for tr in traces], out / "conflict.svg", box)


if __name__ == "__main__":
    main()
