"""Scene files (strict JSON) and exporters: CSV, SVG, OBJ."""
from __future__ import annotations

import json
import math
from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import SceneError
from .scene import (
    ContinuationSettings,
    FinslerMetric,
    ParametricHypersurface,
    Scene,
    SceneOptions,
    SceneSurface,
    check_immersion,
    check_periodicity,
)

SCENE_KEYS = {"ambient_dim", "surfaces", "options"}
SURFACE_KEYS = {"label", "kind", "coefficients", "domain", "periodic", "orientation", "metric"}
METRIC_KEYS = {"Q"}
OPTION_KEYS = {"box", "seed_density", "separation", "unoriented_front", "continuation"}
SETTINGS_KEYS = {f.name for f in fields(ContinuationSettings)}


def _reject_constant(name):
    raise SceneError(f"non-finite number {name} in scene file")


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise SceneError(f"{where} must be an object")
    for key in obj:
        if key not in allowed:
            raise SceneError(f"unknown key {key!r} in {where}")


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SceneError(f"{where} must be a number")
    if not math.isfinite(v):
        raise SceneError(f"{where} must be finite")
    return float(v)


def _numbers(v, where):
    if not isinstance(v, list):
        raise SceneError(f"{where} must be a list of numbers")
    return [_number(x, f"{where}[{i}]") for i, x in enumerate(v)]


def scene_from_dict(data, validate=True):
    _check_keys(data, SCENE_KEYS, "scene")
    if "ambient_dim" not in data or "surfaces" not in data:
        raise SceneError("scene needs 'ambient_dim' and 'surfaces'")
    n = data["ambient_dim"]
    if n not in (2, 3) or isinstance(n, bool):
        raise SceneError("ambient_dim must be 2 or 3")
    if not isinstance(data["surfaces"], list) or not data["surfaces"]:
        raise SceneError("'surfaces' must be a non-empty list")
    entries = []
    for i, sd in enumerate(data["surfaces"]):
        where = f"surfaces[{i}]"
        _check_keys(sd, SURFACE_KEYS, where)
        for key in ("kind", "coefficients"):
            if key not in sd:
                raise SceneError(f"{where} needs {key!r}")
        domain = sd.get("domain")
        if domain is not None:
            if not isinstance(domain, list):
                raise SceneError(f"{where}.domain must be a list of [a, b] pairs")
            domain = [_numbers(iv, f"{where}.domain[{k}]") for k, iv in enumerate(domain)]
            if any(len(iv) != 2 for iv in domain):
                raise SceneError(f"{where}.domain entries must be [a, b]")
        periodic = sd.get("periodic")
        if periodic is not None and not (isinstance(periodic, list) and all(isinstance(p, bool) for p in periodic)):
            raise SceneError(f"{where}.periodic must be a list of booleans")
        orientation = sd.get("orientation", 1)
        if orientation not in (1, -1) or isinstance(orientation, bool):
            raise SceneError(f"{where}.orientation must be +1 or -1")
        surface = ParametricHypersurface.create(
            sd["kind"], _numbers(sd["coefficients"], f"{where}.coefficients"),
            domain=domain, periodic=periodic, orientation=orientation, dim_ambient=n,
        )
        md = sd.get("metric", {"Q": np.eye(n).tolist()})
        _check_keys(md, METRIC_KEYS, f"{where}.metric")
        Q = md.get("Q")
        if not isinstance(Q, list) or len(Q) != n:
            raise SceneError(f"{where}.metric.Q must be an {n}x{n} matrix")
        Q = [_numbers(row, f"{where}.metric.Q[{k}]") for k, row in enumerate(Q)]
        if any(len(row) != n for row in Q):
            raise SceneError(f"{where}.metric.Q must be an {n}x{n} matrix")
        label = sd.get("label", f"M{i + 1}")
        if not isinstance(label, str):
            raise SceneError(f"{where}.label must be a string")
        entries.append(SceneSurface(surface, FinslerMetric(np.array(Q)), label))
    options = _options_from_dict(data.get("options", {}), n)
    scene = Scene(n, tuple(entries), options)
    if validate:
        for e in entries:
            check_immersion(e.surface)
            check_periodicity(e.surface)
    return scene


def _options_from_dict(od, n):
    _check_keys(od, OPTION_KEYS, "options")
    kw = {}
    if "continuation" in od:
        cd = od["continuation"]
        _check_keys(cd, SETTINGS_KEYS, "options.continuation")
        vals = {}
        for k, v in cd.items():
            vals[k] = int(_number(v, f"options.continuation.{k}")) if k in ("newton_max_iter", "max_points") else _number(v, f"options.continuation.{k}")
        kw["settings"] = ContinuationSettings(**vals)
    if "box" in od:
        box = _numbers(od["box"], "options.box")
        kw["box"] = parse_box(box, n)
    if "seed_density" in od:
        kw["seed_density"] = int(_number(od["seed_density"], "options.seed_density"))
    if "separation" in od:
        kw["separation"] = _number(od["separation"], "options.separation")
    if "unoriented_front" in od:
        if not isinstance(od["unoriented_front"], bool):
            raise SceneError("options.unoriented_front must be a boolean")
        kw["unoriented_front"] = od["unoriented_front"]
    return SceneOptions(**kw)


def parse_box(values, n):
    """[lo1, hi1, lo2, hi2, ...] -> (lo, hi)."""
    v = [float(x) for x in values]
    if len(v) != 2 * n:
        raise SceneError(f"box needs {2 * n} numbers, got {len(v)}")
    lo = np.array(v[0::2])
    hi = np.array(v[1::2])
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi > lo)):
        raise SceneError("box must satisfy lo < hi on every axis")
    return lo, hi


def loads_scene(text, validate=True):
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SceneError(f"invalid JSON: {exc}") from exc
    return scene_from_dict(data, validate)


def load_scene(path, validate=True):
    return loads_scene(Path(path).read_text(), validate)


def scene_to_dict(scene):
    out = {"ambient_dim": scene.ambient_dim, "surfaces": []}
    for e in scene.surfaces:
        s = e.surface
        out["surfaces"].append({
            "label": e.label,
            "kind": s.kind,
            "coefficients": list(s.coefficients),
            "domain": [list(iv) for iv in s.domain],
            "periodic": list(s.periodic),
            "orientation": s.orientation,
            "metric": {"Q": e.metric.Q.tolist()},
        })
    return out


# ---------------------------------------------------------------------------
# CSV

def format_value(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_table(path, header, rows, comments=()):
    lines = [",".join(header)]
    lines += [",".join(format_value(v) for v in row) for row in rows]
    lines += [f"# {c}" for c in comments]
    text = "\n".join(lines) + "\n"
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _parse_cell(c):
    try:
        if c.lstrip("-").isdigit():
            return int(c)
        return float(c)
    except ValueError:
        return c


def read_table(path):
    """Header and rows of a CSV written by ``write_table``; comment lines
    are returned separately."""
    header, rows, comments = None, [], []
    with open(path, newline="") as fh:
        for line in fh.read().split("\n"):
            if not line:
                continue
            if line.startswith("# "):
                comments.append(line[2:])
                continue
            cells = line.split(",")
            if header is None:
                header = cells
            else:
                rows.append([_parse_cell(c) for c in cells])
    return header or [], rows, comments


def conflict_header(n, param_dims):
    head = ["branch", "t"] + [f"x{k + 1}" for k in range(n)]
    for i, p in enumerate(param_dims):
        head += [f"s{i + 1}_{j + 1}" for j in range(p)]
    return head + ["margin", "germ"]


def conflict_rows(traces):
    rows = []
    for b, tr in enumerate(traces):
        for cp in tr.records:
            row = [b, cp.t, *cp.x]
            for s in cp.footpoints:
                row += list(np.atleast_1d(s))
            row += [cp.margin, cp.label or "-"]
            rows.append(row)
    return rows


def export_csv(traces, path, n=None, param_dims=None):
    """Conflict-type traces (records are ConflictPoints) to CSV."""
    if traces and traces[0].records:
        cp = traces[0].records[0]
        n = len(cp.x)
        param_dims = [len(np.atleast_1d(s)) for s in cp.footpoints]
    if n is None or param_dims is None:
        raise ValueError("empty trace list: pass n and param_dims for the header")
    return write_table(path, conflict_header(n, param_dims), conflict_rows(traces))


def polylines_from_table(header, rows, columns):
    """Group rows by their branch column into arrays of the named columns."""
    idx = [header.index(c) for c in columns]
    bcol = header.index("branch")
    out = {}
    for row in rows:
        out.setdefault(row[bcol], []).append([float(row[i]) for i in idx])
    return [np.array(out[k]) for k in sorted(out)]


# ---------------------------------------------------------------------------
# SVG / OBJ

def export_svg(polylines, path, box, stroke_width=None, points=()):
    """One <path> per polyline; y is flipped so the picture is upright."""
    lo, hi = (np.asarray(v, dtype=float) for v in box)
    if lo.shape != (2,):
        raise ValueError("SVG export needs planar data")
    pad = 0.05 * float(np.max(hi - lo))
    w, h = (hi - lo) + 2 * pad
    sw = stroke_width or 0.004 * float(max(w, h))
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{format_value(lo[0] - pad)} {format_value(-hi[1] - pad)} '
        f'{format_value(w)} {format_value(h)}">',
    ]
    for k, P in enumerate(polylines):
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or len(P) == 0:
            continue
        if P.shape[1] != 2:
            raise ValueError("SVG export needs planar data")
        d = "M " + " L ".join(f"{format_value(x)} {format_value(-y)}" for x, y in P)
        parts.append(f'<path id="branch{k}" d="{d}" fill="none" stroke="black" stroke-width="{format_value(sw)}"/>')
    for x, y in points:
        parts.append(f'<circle cx="{format_value(x)}" cy="{format_value(-y)}" r="{format_value(2 * sw)}" fill="red"/>')
    parts.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
    return path


def export_obj(polylines, path, mode="lines"):
    """Vertices plus one line element per polyline (or point elements)."""
    if mode not in ("lines", "points"):
        raise ValueError("mode must be 'lines' or 'points'")
    lines = ["# conflictsets export"]
    elems = []
    start = 1
    for P in polylines:
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or len(P) == 0:
            continue
        if P.shape[1] != 3:
            raise ValueError("OBJ export needs points in R^3")
        lines += ["v " + " ".join(format_value(c) for c in p) for p in P]
        idx = " ".join(str(i) for i in range(start, start + len(P)))
        if mode == "lines" and len(P) >= 2:
            elems.append("l " + idx)
        else:
            elems.append("p " + idx)
        start += len(P)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines + elems) + "\n")
    return path
