"""Command-line interface.

Exit codes: 0 success, 2 invalid input, 3 solver failure (no branch found).
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import center, classify, conflict, io, kite, propagation
from .errors import ConflictSetsError, SceneError

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3
SUBCOMMANDS = ("conflict", "oriented-conflict", "symmetry", "center", "chords", "kite", "front", "classify",
               "partitions", "check")
# options whose values may start with "-"
_VALUE_OPTIONS = ("--box", "--time")


class SolverFailure(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    scene_path: str | None = None
    box: tuple | None = None
    output_dir: str = "."
    svg: bool = True
    obj: bool = True
    overrides: dict = field(default_factory=dict)
    seed: int = 0
    density: int | None = None


def _parser():
    p = argparse.ArgumentParser(prog="conflictsets", description="Conflict sets of wavefronts and related sets.")
    sub = p.add_subparsers(dest="command", required=True)

    def scene_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--scene", required=True)
        sp.add_argument("--box", help="lo1,hi1,lo2,hi2[,lo3,hi3]")
        sp.add_argument("--out", default=".")
        sp.add_argument("--density", type=int)
        sp.add_argument("--step-max", type=float)
        sp.add_argument("--step-init", type=float)
        sp.add_argument("--newton-tol", type=float)
        sp.add_argument("--seed", type=int, default=0, help="grid jitter seed, 0 = no jitter")
        sp.add_argument("--no-svg", action="store_true")
        sp.add_argument("--no-obj", action="store_true")
        sp.add_argument("-v", "--verbose", action="store_true")
        return sp

    scene_cmd("conflict", "unoriented conflict set")
    scene_cmd("oriented-conflict", "oriented conflict set")
    scene_cmd("symmetry", "symmetry set of a single surface")
    scene_cmd("center", "center set (midpoints of parallel-tangent pairs)")
    scene_cmd("chords", "normal chord set")
    sp = scene_cmd("kite", "kite curve of the conflict set (l = n)")
    sp.add_argument("--oriented", action="store_true")
    sp = scene_cmd("front", "momental fronts at a given time")
    sp.add_argument("--time", type=float, required=True)
    sp.add_argument("--samples", type=int, default=256)
    sp.add_argument("--both", action="store_true", help="both orientations")
    sp = scene_cmd("classify", "germ labels along the conflict set")
    sp.add_argument("--oriented", action="store_true")
    sp = scene_cmd("check", "transversality margins along a trace CSV")
    sp.add_argument("--trace", required=True)
    sp = sub.add_parser("partitions", help="admissible multi-germ codimension tuples")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--l", type=int, required=True)
    sp.add_argument("--new-cases", action="store_true")
    return p


def _join_values(argv):
    out = []
    it = iter(argv)
    for a in it:
        if a in _VALUE_OPTIONS:
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def _config(args):
    over = {}
    for key in ("step_max", "step_init", "newton_tol"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    return RunConfig(
        subcommand=args.command,
        scene_path=getattr(args, "scene", None),
        box=getattr(args, "box", None),
        output_dir=getattr(args, "out", "."),
        svg=not getattr(args, "no_svg", False),
        obj=not getattr(args, "no_obj", False),
        overrides=over,
        seed=getattr(args, "seed", 0),
        density=getattr(args, "density", None),
    )


def _load(cfg):
    scene = io.load_scene(cfg.scene_path)
    settings = scene.settings
    if cfg.overrides:
        over = dict(cfg.overrides)
        if "step_max" in over and "step_init" not in over:
            over["step_init"] = min(settings.step_init, over["step_max"])
        settings = replace(settings, **over)
    if cfg.box is not None:
        box = io.parse_box(cfg.box.split(","), scene.ambient_dim)
    elif scene.options.box is not None:
        box = scene.options.box
    else:
        box = None
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return scene, settings, box, out


def _plot_box(box, polylines):
    if box is not None:
        return box
    pts = np.vstack([p for p in polylines if len(p)]) if any(len(p) for p in polylines) else np.zeros((1, 2))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return lo - 1e-9, np.maximum(hi, lo + 1e-9) + 1e-9


def _export_geometry(cfg, out, stem, polylines, n, box):
    if n == 2 and cfg.svg:
        io.export_svg(polylines, out / f"{stem}.svg", _plot_box(box, polylines))
    if n == 3 and cfg.obj:
        io.export_obj(polylines, out / f"{stem}.obj")


def _require_box(box):
    if box is None:
        raise SceneError("a box is required (--box or options.box)")
    return box


def _cmd_conflict(cfg, oriented=False, symmetric=False):
    scene, settings, box, out = _load(cfg)
    box = _require_box(box)
    if symmetric:
        traces = conflict.symmetry_set(scene, box, settings, cfg.density, jitter=cfg.seed)
        stem = "symmetry"
    elif oriented:
        traces = conflict.oriented_conflict_set(scene, box, settings, cfg.density, jitter=cfg.seed)
        stem = "oriented-conflict"
    else:
        traces = conflict.conflict_set(scene, box, settings, cfg.density, jitter=cfg.seed)
        stem = "conflict"
    if not traces:
        raise SolverFailure("no branch found")
    io.export_csv(traces, out / f"{stem}.csv")
    polylines = [np.array([cp.x for cp in tr.records]) for tr in traces]
    _export_geometry(cfg, out, stem, polylines, scene.ambient_dim, box)
    print(f"{stem}: {len(traces)} branch(es), {sum(len(t) for t in traces)} vertices -> {out / (stem + '.csv')}")
    return EXIT_OK


def _pairs(cfg):
    scene, settings, box, out = _load(cfg)
    pairs = center.parallel_pairs(scene, density=cfg.density or 24)
    if not pairs:
        raise SolverFailure("no parallel pairs found")
    return scene, box, out, pairs


def _cmd_center(cfg):
    scene, box, out, pairs = _pairs(cfg)
    n = scene.ambient_dim
    cs = center.center_set(pairs)
    p = scene.surfaces[0].surface.dim_param
    head = ["branch", "sign"] + [f"s1_{j + 1}" for j in range(p)] + [f"s2_{j + 1}" for j in range(p)]
    head += [f"y{k + 1}" for k in range(n)] + ["margin"]
    rows = []
    for b, (tr, Y) in enumerate(zip(pairs, cs)):
        for rec, y in zip(tr.records, Y):
            rows.append([b, rec.sign, *rec.s1, *rec.s2, *y, rec.margin])
    io.write_table(out / "center.csv", head, rows)
    _export_geometry(cfg, out, "center", cs, n, box)
    print(f"center: {len(pairs)} branch(es) -> {out / 'center.csv'}")
    return EXIT_OK


def _cmd_chords(cfg):
    scene, box, out, pairs = _pairs(cfg)
    n = scene.ambient_dim
    head = ["branch", "sign"] + [f"v{k + 1}" for k in range(n)] + [f"mu1_{k + 1}" for k in range(n)]
    head += [f"mu2_{k + 1}" for k in range(n)] + ["normal"]
    rows = []
    for b, (tr, chords) in enumerate(zip(pairs, center.normal_chord_set(pairs))):
        for rec, c in zip(tr.records, chords):
            rows.append([b, rec.sign, *c.v, *c.mu1, *c.mu2, int(c.normal)])
    io.write_table(out / "chords.csv", head, rows)
    print(f"chords: {len(rows)} chord(s) -> {out / 'chords.csv'}")
    return EXIT_OK


def _cmd_kite(cfg, oriented):
    scene, settings, box, out = _load(cfg)
    box = _require_box(box)
    n = scene.ambient_dim
    if len(scene.surfaces) != n:
        raise SceneError(f"the kite needs l = n = {n} surfaces")
    solve = conflict.oriented_conflict_set if oriented else conflict.conflict_set
    traces = solve(scene, box, settings, cfg.density, jitter=cfg.seed)
    if not traces:
        raise SolverFailure("no branch found")
    head = ["branch"] + [f"y{k + 1}" for k in range(n)] + ["condition", "residual"]
    rows, report, polylines = [], [], []
    for b, tr in enumerate(traces):
        kc = kite.kite_curve(tr)
        for kp in kc.points:
            if kp is not None:
                rows.append([b, *kp.y, kp.condition, kp.residual])
        res = max((kite.collinearity_residual(s) for s in kc.segments), default=0.0)
        gaps = sum(p is None for p in kc.points)
        report.append(f"collinearity branch {b}: {io.format_value(res)} ({gaps} degenerate vertices)")
        polylines.extend(kc.segments)
    io.write_table(out / "kite.csv", head, rows, comments=report)
    _export_geometry(cfg, out, "kite", polylines, n, None)
    print("\n".join(report))
    return EXIT_OK


def _cmd_front(cfg, t, samples, both):
    scene, settings, box, out = _load(cfg)
    n = scene.ambient_dim
    head = ["branch", "surface"] + [f"s{j + 1}" for j in range(n - 1)] + [f"x{k + 1}" for k in range(n)]
    rows, polylines = [], []
    b = 0
    for e in scene.surfaces:
        front = propagation.momental_front(e.surface, e.metric, t, samples, both_branches=both)
        for sign in sorted({f.branch for f in front}, reverse=True):
            part = [f for f in front if f.branch == sign]
            rows += [[b, e.label, *f.s, *f.x] for f in part]
            polylines.append(np.array([f.x for f in part]))
            b += 1
    io.write_table(out / "front.csv", head, rows)
    if n == 2 and cfg.svg:
        io.export_svg(polylines, out / "front.svg", _plot_box(box, polylines))
    print(f"front: {len(rows)} samples -> {out / 'front.csv'}")
    return EXIT_OK


def _cmd_classify(cfg, oriented):
    scene, settings, box, out = _load(cfg)
    box = _require_box(box)
    solve = conflict.oriented_conflict_set if oriented else conflict.conflict_set
    if len(scene.surfaces) == 1:
        traces = conflict.symmetry_set(scene, box, settings, cfg.density, jitter=cfg.seed)
        system = conflict.build_conflict_system([conflict.scene_sources(scene)[0]] * 2, box=box)
    else:
        traces = solve(scene, box, settings, cfg.density, jitter=cfg.seed)
        system = conflict.build_conflict_system(scene, oriented=oriented, box=box)
    if not traces:
        raise SolverFailure("no branch found")
    lines = []
    for b, tr in enumerate(traces):
        counts = {}
        for lab in tr.labels:
            counts[lab] = counts.get(lab, 0) + 1
        summary = ", ".join(f"{k}: {v}" for k, v in sorted(counts.items()))
        lines.append(f"branch {b}: {len(tr)} vertices, ends {tr.ends[0]}/{tr.ends[1]}, labels {summary}, "
                     f"median margin {io.format_value(float(np.median(tr.margins)))}")
        if tr.info.get("slice") is None and len(tr) > 1 and "cluster" not in tr.ends:
            for cp in conflict.germ_transitions(system, tr):
                x = " ".join(io.format_value(c) for c in cp.x)
                lines.append(f"  transition at x = ({x}): {cp.label}")
    text = "\n".join(lines) + "\n"
    (out / "classify.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def _cmd_check(cfg, trace_path):
    scene, settings, box, out = _load(cfg)
    header, rows, _ = io.read_table(trace_path)
    n = scene.ambient_dim
    sources = conflict.scene_sources(scene)
    if len(sources) == 1:
        sources = sources * 2
    pdims = [s.dim_param for s in sources]
    try:
        xcols = [header.index(f"x{k + 1}") for k in range(n)]
        tcol = header.index("t")
        scols = [[header.index(f"s{i + 1}_{j + 1}") for j in range(p)] for i, p in enumerate(pdims)]
        bcol = header.index("branch")
    except ValueError as exc:
        raise SceneError(f"trace file does not match the scene: {exc}") from exc
    margins = {}
    for row in rows:
        x = np.array([row[c] for c in xcols], dtype=float)
        fps = [np.array([row[c] for c in cols], dtype=float) for cols in scols]
        cp = conflict.ConflictPoint(x, float(row[tcol]), fps, [], 0.0, (), tuple(sources))
        margins.setdefault(row[bcol], []).append(classify.transversality_margin_conflict(cp))
    if not margins:
        raise SolverFailure("trace file holds no vertices")
    head = ["branch", "vertices", "min_margin", "median_margin"]
    table = [[b, len(m), min(m), float(np.median(m))] for b, m in sorted(margins.items())]
    io.write_table(out / "check.csv", head, table)
    for r in table:
        print(f"branch {r[0]}: {r[1]} vertices, min margin {io.format_value(r[2])}, median {io.format_value(r[3])}")
    return EXIT_OK


def _cmd_partitions(n, l, new_cases):
    table = classify.new_cases(n, l) if new_cases else classify.partition_table(n, l)
    text = table.format()
    if text:
        print(text)
    return EXIT_OK


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        args = parser.parse_args(_join_values(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = _config(args)
    try:
        cmd = args.command
        if cmd == "partitions":
            return _cmd_partitions(args.n, args.l, args.new_cases)
        if cmd in ("conflict", "oriented-conflict", "symmetry"):
            return _cmd_conflict(cfg, oriented=cmd == "oriented-conflict", symmetric=cmd == "symmetry")
        if cmd == "center":
            return _cmd_center(cfg)
        if cmd == "chords":
            return _cmd_chords(cfg)
        if cmd == "kite":
            return _cmd_kite(cfg, args.oriented)
        if cmd == "front":
            return _cmd_front(cfg, args.time, args.samples, args.both)
        if cmd == "classify":
            return _cmd_classify(cfg, args.oriented)
        if cmd == "check":
            return _cmd_check(cfg, args.trace)
    except (SceneError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverFailure, ConflictSetsError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_INVALID


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

