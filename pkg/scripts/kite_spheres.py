"""Kite curves of three spheres in R^3: where the three footpoint tangent
planes meet.  Each branch of the kite is a straight line."""
import argparse
from pathlib import Path

from conflictsets import ParametricHypersurface, Scene, export_obj, kite_curve, oriented_conflict_set
from conflictsets.kite import collinearity_residual


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/kite_spheres")
    ap.add_argument("--density", type=int, default=24)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    spheres = [(1, 0, 0, 1), (-1, 0.3, 0.2, 0.7), (0.2, 1.5, -0.1, 0.5)]
    scene = Scene.build([ParametricHypersurface.create("sphere", list(c)) for c in spheres])
    traces = oriented_conflict_set(scene, box=([-3.0] * 3, [3.0] * 3), density=args.density)
    lines = []
    for k, tr in enumerate(traces):
        kc = kite_curve(tr)
        res = max((collinearity_residual(s) for s in kc.segments), default=0.0)
        gaps = sum(p is None for p in kc.points)
        print(f"branch {k}: {len(tr)} vertices, collinearity {res:.1e}, {gaps} degenerate")
        lines.extend(kc.segments)
    export_obj([tr.vertices[:, :3] for tr in traces], out / "conflict.obj")
    export_obj(lines, out / "kite.obj")


if __name__ == "__main__":
    main()
