"""Conflict surface of two fold families x0 = s^3 + s x1 + x2 and
x0 = s^3 + s x3 - x2, traced slice by slice in x2 and compared with the
closed-form parametrisation x1 = -3 s1^2, x3 = -3 s2^2, s1^3 - s2^3 = x2."""
import argparse
import time
from pathlib import Path

import numpy as np

from conflictsets import ContinuationSettings, FoldFamily, conflict_set, export_obj


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/a2a2")
    ap.add_argument("--slices", type=int, default=9)
    ap.add_argument("--step", type=float, default=5e-3)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    e = np.eye(3)
    fams = [FoldFamily(e[0], e[1], domain=(-3, 3), label="G1"), FoldFamily(e[2], -e[1], domain=(-3, 3), label="G2")]
    box = ([-3.0, -1.0, -3.0], [0.5, 1.0, 0.5])
    offsets = np.linspace(-0.8, 0.8, args.slices)
    cfg = ContinuationSettings(step_max=args.step, step_init=args.step)
    t0 = time.perf_counter()
    traces = conflict_set(fams, box=box, density=40, settings=cfg, slices=[(e[1], c) for c in offsets])
    print(f"{len(traces)} slice branches in {time.perf_counter() - t0:.1f} s")
    worst = 0.0
    for tr in traces:
        for cp in tr.records:
            s1, s2 = float(cp.footpoints[0][0]), float(cp.footpoints[1][0])
            pred = np.array([-3 * s1 ** 2, s1 ** 3 - s2 ** 3, -3 * s2 ** 2])
            worst = max(worst, float(np.abs(cp.x - pred).max()))
    print(f"largest deviation from the parametrisation: {worst:.2e}")
    export_obj([tr.vertices[:, :3] for tr in traces], out / "a2a2.obj")


if __name__ == "__main__":
    main()
