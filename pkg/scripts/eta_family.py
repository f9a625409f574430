"""Oriented conflict sets of two circles when the second front is faster
by a factor eta.  The branches are Cartesian ovals; for small circles
they approach Apollonius circles."""
import argparse
from pathlib import Path

import numpy as np

from conflictsets import FinslerMetric, ParametricHypersurface, Scene, export_svg, oriented_conflict_set


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/eta_family")
    ap.add_argument("--eta", type=float, nargs="+", default=[1.2, 2.0, 5.0])
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    box = ([-4.0, -4.0], [4.0, 4.0])
    c1, c2 = np.array([-1.5, 0.0]), np.array([1.5, 0.0])
    for eta in args.eta:
        scene = Scene.build(
            [ParametricHypersurface.create("circle", [*c1, 0.5]), ParametricHypersurface.create("circle", [*c2, 0.5])],
            metrics=[FinslerMetric.euclidean(2), FinslerMetric.scaled(2, eta)],
        )
        traces = oriented_conflict_set(scene, box=box)
        worst = 0.0
        for tr in traces:
            for cp in tr.records:
                worst = max(worst, *cp.residuals())
        print(f"eta = {eta}: {len(traces)} branches, {sum(len(t) for t in traces)} vertices, max residual {worst:.1e}")
        export_svg([tr.vertices[:, :2] for tr in traces], out / f"eta_{eta:g}.svg", box)


if __name__ == "__main__":
    main()
