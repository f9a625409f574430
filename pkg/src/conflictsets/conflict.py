"""Conflict sets, oriented conflict sets and symmetry sets.

Unoriented mode solves for (x, t, s_1..s_l) with t = F_i(x, s_i) and
dF_i/ds_i = 0.  Oriented mode intersects the oriented big fronts directly:
unknowns (t, s_1..s_l), equations gamma_1 + t v_1 = gamma_i + t v_i, and x
is read off the first ray.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .classify import germ_label, multigerm_label, transversality_margin_conflict
from .errors import (
    ConflictSetsError,
    OverdeterminedSceneError,
    PreconditionError,
    SceneError,
)
from .propagation import SurfaceSource
from .scene import ContinuationSettings, Scene, conormal_frame, evaluate_jet
from .solver import (
    NonlinearSystem,
    TraceResult,
    newton_refine,
    trace_from_seeds,
)

log = logging.getLogger(__name__)

DEFAULT_DENSITY = 64


@dataclass
class ConflictPoint:
    x: np.ndarray
    t: float
    footpoints: list
    conormals: list
    margin: float = 0.0
    germ: tuple = ()
    sources: tuple = field(default=(), repr=False)
    oriented: bool = False

    @property
    def label(self):
        return multigerm_label(self).name if self.germ else ""

    def residuals(self):
        """(max_i |F_i - t|, max_i |dF_i/ds_i|), recomputed from the sources.

        In oriented mode F_i is the signed time <x - gamma_i, xi_i>.
        """
        tie, crit = 0.0, 0.0
        for src, s, xi in zip(self.sources, self.footpoints, self.conormals):
            j = src.jet(self.x, s)
            if self.oriented:
                value = float((self.x - src.footpoint(s)) @ xi)
            else:
                value = j.value
            tie = max(tie, abs(value - self.t))
            crit = max(crit, float(np.abs(j.grad_s).max()))
        return tie, crit


def scene_sources(scene):
    return [SurfaceSource(e.surface, e.metric, e.label) for e in scene.surfaces]


def _sources_of(scene):
    if isinstance(scene, Scene):
        return scene_sources(scene), scene.ambient_dim
    sources = list(scene)
    return sources, sources[0].dim_ambient


def _param_layout(sources):
    ps = [src.dim_param for src in sources]
    offs = np.concatenate([[0], np.cumsum(ps)]).astype(int)
    periods = []
    for src in sources:
        for (a, b), per in zip(src.domain, src.periodic):
            periods.append(b - a if per else 0.0)
    return offs, np.array(periods)


def _param_ok(sources, blocks):
    for src, s in zip(sources, blocks):
        for (a, b), per, v in zip(src.domain, src.periodic, s):
            if not per and not (a <= v <= b):
                return False
    return True


def _box_ok(box, x):
    if box is None:
        return True
    lo, hi = (np.asarray(v, dtype=float) for v in box)
    pad = 1e-9 * np.maximum(hi - lo, 1.0)
    return bool(np.all(x >= lo - pad) and np.all(x <= hi + pad))


def _separation(src, s1, s2):
    d = np.asarray(s1, dtype=float) - np.asarray(s2, dtype=float)
    for j, ((a, b), per) in enumerate(zip(src.domain, src.periodic)):
        if per:
            P = b - a
            d[j] = (d[j] + 0.5 * P) % P - 0.5 * P
    return float(np.linalg.norm(d))


def build_conflict_system(scene, oriented=False, box=None, separation=0.0):
    """Nonlinear system whose solution set is the (oriented) conflict set.

    ``scene`` is a Scene or a list of time sources.  ``separation`` > 0
    keeps the footpoints of the first two sources apart (symmetry sets).
    """
    sources, n = _sources_of(scene)
    l = len(sources)
    if l > n + 1:
        raise OverdeterminedSceneError(f"{l} surfaces in R^{n}: the conflict set is generically empty")
    if l < 2:
        raise SceneError("a conflict set needs at least two surfaces")
    offs, sper = _param_layout(sources)
    ns = int(offs[-1])
    use_sep = separation > 0

    def blocks(u, start):
        return [u[start + offs[i]:start + offs[i + 1]] for i in range(l)]

    def separated(bl):
        return not use_sep or _separation(sources[0], bl[0], bl[1]) >= separation

    if not oriented:
        dim = n + 1 + ns

        def evaluate(u):
            x, t = u[:n], u[n]
            r = np.empty(l + ns)
            J = np.zeros((l + ns, dim))
            for i, (src, s) in enumerate(zip(sources, blocks(u, n + 1))):
                j = src.jet(x, s)
                cols = slice(n + 1 + offs[i], n + 1 + offs[i + 1])
                rows = slice(l + offs[i], l + offs[i + 1])
                r[i] = t - j.value
                J[i, :n] = -j.grad_x
                J[i, n] = 1.0
                J[i, cols] = -j.grad_s
                r[rows] = j.grad_s
                J[rows, :n] = j.mixed_sx
                J[rows, cols] = j.hess_s
            return r, J

        def in_domain(u):
            bl = blocks(u, n + 1)
            return _box_ok(box, u[:n]) and _param_ok(sources, bl) and separated(bl)

        eye = np.hstack([np.eye(n), np.zeros((n, 1 + ns))])
        return NonlinearSystem(
            dim, l + ns, evaluate,
            periods=np.concatenate([np.zeros(n + 1), sper]),
            in_domain=in_domain,
            ambient=lambda u: u[:n].copy(),
            ambient_jacobian=lambda u: eye,
            name="conflict",
            info={"mode": "unoriented", "sources": sources, "n": n, "offsets": offs, "separation": separation, "box": box},
        )

    for src in sources:
        if not isinstance(src, SurfaceSource):
            raise SceneError("oriented mode needs surface sources with conormals")
    dim = 1 + ns

    def rays(u):
        t = u[0]
        out = []
        for src, s in zip(sources, blocks(u, 1)):
            g = evaluate_jet(src.surface, s, order=1, strict=False)
            xi, dxi = conormal_frame(src.surface, src.metric, s, derivative=True)
            Q = src.metric.Q
            v = Q @ xi  # H(xi) = 1
            out.append((g.position + t * v, v, g.tangents() + t * (Q @ dxi)))
        return out

    def evaluate(u):
        R = rays(u)
        y0, v0, dy0 = R[0]
        r = np.empty(n * (l - 1))
        J = np.zeros((n * (l - 1), dim))
        for i in range(1, l):
            yi, vi, dyi = R[i]
            rows = slice(n * (i - 1), n * i)
            r[rows] = y0 - yi
            J[rows, 0] = v0 - vi
            J[rows, 1 + offs[0]:1 + offs[1]] = dy0
            J[rows, 1 + offs[i]:1 + offs[i + 1]] = -dyi
        return r, J

    def ambient(u):
        src, s = sources[0], u[1 + offs[0]:1 + offs[1]]
        g = evaluate_jet(src.surface, s, order=0, strict=False).position
        xi, _ = conormal_frame(src.surface, src.metric, s, derivative=False)
        return g + u[0] * (src.metric.Q @ xi)

    def ambient_jacobian(u):
        y0, v0, dy0 = rays(u)[0]
        A = np.zeros((n, dim))
        A[:, 0] = v0
        A[:, 1 + offs[0]:1 + offs[1]] = dy0
        return A

    def in_domain(u):
        bl = blocks(u, 1)
        return _param_ok(sources, bl) and separated(bl) and _box_ok(box, ambient(u))

    return NonlinearSystem(
        dim, n * (l - 1), evaluate,
        periods=np.concatenate([[0.0], sper]),
        in_domain=in_domain,
        ambient=ambient,
        ambient_jacobian=ambient_jacobian,
        name="oriented-conflict",
        info={"mode": "oriented", "sources": sources, "n": n, "offsets": offs, "separation": separation, "box": box},
    )


# ---------------------------------------------------------------------------
# seeding from arrival ties

def _critical_mask(F, shape, periodic):
    """Samples (columns of F) that are critical for the row's function."""
    m = F.shape[0]
    if len(shape) == 1:
        left = np.roll(F, 1, axis=1)
        right = np.roll(F, -1, axis=1)
        mask = ((F <= left) & (F < right)) | ((F >= left) & (F > right))
        var = np.maximum(np.abs(F - left), np.abs(F - right))
        if not periodic[0]:
            mask[:, 0] = mask[:, -1] = False
        return mask, var
    a, b = shape
    G = F.reshape(m, a, b)
    gu = np.roll(G, -1, axis=1) - np.roll(G, 1, axis=1)
    gv = np.roll(G, -1, axis=2) - np.roll(G, 1, axis=2)
    valid = np.ones((a, b), dtype=bool)
    if not periodic[0]:
        valid[0, :] = valid[-1, :] = False
    if not periodic[1]:
        valid[:, 0] = valid[:, -1] = False

    def straddles(g):
        # the four corners of a cell do not share a strict sign
        pos, neg = g > 0, g < 0
        cpos = pos & np.roll(pos, -1, axis=1)
        cpos &= np.roll(cpos, -1, axis=2)
        cneg = neg & np.roll(neg, -1, axis=1)
        cneg &= np.roll(cneg, -1, axis=2)
        return ~(cpos | cneg)

    mu = straddles(gu)
    mv = straddles(gv)
    cell_valid = valid & np.roll(valid, -1, 0) & np.roll(valid, -1, 1) & np.roll(np.roll(valid, -1, 0), -1, 1)
    mask = mu & mv & cell_valid[None]
    var = 0.5 * (np.abs(gu) + np.abs(gv))
    return mask.reshape(m, -1), var.reshape(m, -1)


def _default_samples(src):
    return 720 if src.dim_param == 1 else 40


def plane_grid(box, normal, offset, density):
    """Grid points of the hyperplane <normal, x> = offset inside the box."""
    lo, hi = (np.asarray(v, dtype=float) for v in box)
    a = np.asarray(normal, dtype=float)
    a = a / np.linalg.norm(a)
    offset = offset / np.linalg.norm(normal)
    n = len(a)
    basis = np.linalg.svd(a[None, :])[2][1:]  # orthonormal complement
    centre = 0.5 * (lo + hi)
    centre = centre + (offset - a @ centre) * a
    half = 0.5 * float(np.linalg.norm(hi - lo))
    ax = np.linspace(-half, half, int(density))
    coords = np.stack(np.meshgrid(*([ax] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    X = centre + coords @ basis
    keep = np.all((X >= lo - 1e-12) & (X <= hi + 1e-12), axis=1)
    return X[keep], 2 * half / max(int(density) - 1, 1)


def tie_seeds(sources, box, density=DEFAULT_DENSITY, oriented=False, plane=None, separation=0.0, samples=None,
              jitter=0):
    """Initial guesses from ambient grid nodes where critical arrival times agree.

    For each node x every source contributes its critical samples; a choice
    of one critical sample per source is a seed when the times agree within
    the grid resolution (Lipschitz bound times the cell diagonal plus the
    local sampling variation).  Seeds are returned sorted lexicographically.
    A nonzero ``jitter`` seeds an RNG that shifts the grid by a random
    fraction of a cell.
    """
    lo, hi = (np.asarray(v, dtype=float) for v in box)
    n = len(lo)
    if plane is None:
        axes = [np.linspace(a, b, int(density)) for a, b in zip(lo, hi)]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        cell = float(np.linalg.norm((hi - lo) / max(int(density) - 1, 1)))
    else:
        X, h = plane_grid(box, plane[0], plane[1], density)
        cell = h * math.sqrt(n - 1)
    if len(X) == 0:
        return []
    if jitter:
        rng = np.random.default_rng(jitter)
        X = X + rng.uniform(-0.5, 0.5, size=n) * cell / math.sqrt(n)
        X = X[np.all((X >= lo) & (X <= hi), axis=1)]
    l = len(sources)
    per_source = []
    lips = []
    for k, src in enumerate(sources):
        if k > 0 and src is sources[k - 1]:
            per_source.append(per_source[-1])
            lips.append(lips[-1])
            continue
        count = samples or _default_samples(src)
        S, shape = src.sample(count)
        chunk = max(1, int(4e6 // max(len(S), 1)))
        rows, cols, vals, errs = [], [], [], []
        for start in range(0, len(X), chunk):
            Xc = X[start:start + chunk]
            F = src.times(Xc, S)
            mask, var = _critical_mask(F, shape, src.periodic)
            r, c = np.nonzero(mask)
            V = src.signed_times(Xc, S)[r, c] if oriented else F[r, c]
            rows.append(r + start)
            cols.append(c)
            vals.append(V)
            errs.append(var[r, c])
        per_source.append((S, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), np.concatenate(errs)))
        lips.append(src.speed_bound((lo, hi)))
    tol_x = cell * max(lips)
    grouped = []
    for S, r, c, v, e in per_source:
        order = np.argsort(r, kind="stable")
        r, c, v, e = r[order], c[order], v[order], e[order]
        bounds = np.searchsorted(r, np.arange(len(X) + 1))
        grouped.append((S, c, v, e, bounds))
    seeds = []
    for m in range(len(X)):
        lists = []
        for S, c, v, e, bounds in grouped:
            a, b = bounds[m], bounds[m + 1]
            if a == b:
                break
            lists.append(list(zip(c[a:b], v[a:b], e[a:b])))
        if len(lists) < l:
            continue
        for combo in itertools.product(*lists):
            vals = [cv[1] for cv in combo]
            err = sum(cv[2] for cv in combo)
            if max(vals) - min(vals) > tol_x + err:
                continue
            params = [grouped[i][0][cv[0]] for i, cv in enumerate(combo)]
            if separation > 0 and sources[0] is sources[1]:
                if combo[0][0] >= combo[1][0] or _separation(sources[0], params[0], params[1]) < separation:
                    continue
            t = float(np.mean(vals))
            head = [np.array([t])] if oriented else [X[m], np.array([t])]
            seeds.append(np.concatenate(head + params))
    if not seeds:
        return []
    seeds = np.array(seeds)
    seeds = seeds[np.lexsort(seeds.T[::-1])]
    # thin out near-duplicates from neighbouring grid nodes
    kept = []
    radius = 0.75 * cell
    for u in seeds:
        if not kept or np.min(np.linalg.norm(np.array(kept) - u, axis=1)) > radius:
            kept.append(u)
    return kept


# ---------------------------------------------------------------------------
# annotation

def conflict_point(system, u, labels=True):
    info = system.info
    sources = info["sources"]
    offs = info["offsets"]
    n = info["n"]
    oriented = info["mode"] == "oriented"
    start = 1 if oriented else n + 1
    fps = [np.array(u[start + offs[i]:start + offs[i + 1]]) for i in range(len(sources))]
    fps = [src.wrap(s) for src, s in zip(sources, fps)]
    if oriented:
        x = system.ambient(u)
        t = float(u[0])
        xis = [src.conormal(s) for src, s in zip(sources, fps)]
    else:
        x = np.array(u[:n])
        t = float(u[n])
        xis = [src.time_gradient(x, s) for src, s in zip(sources, fps)]
    cp = ConflictPoint(x, t, fps, xis, 0.0, (), tuple(sources), oriented)
    try:
        cp.margin = transversality_margin_conflict(cp)
    except ConflictSetsError:
        cp.margin = 0.0
    if labels:
        try:
            cp.germ = tuple(germ_label(src, x, s) for src, s in zip(sources, fps))
        except ConflictSetsError as exc:
            log.debug("no germ label at %s: %s", x, exc)
    return cp


def annotate(system, trace, labels=True):
    trace.records = [conflict_point(system, u, labels) for u in trace.vertices]
    trace.labels = [cp.label for cp in trace.records]
    trace.info.setdefault("mode", system.info["mode"])
    return trace


def _curvature_indicator(src, x, s):
    """Dimensionless Hessian determinant of F(x, .); changes sign at A2."""
    L = src.length_scale(x, s) or 1.0
    E = src.param_frame(s)
    return float(np.linalg.det(E.T @ src.jet(x, s).hess_s @ E * L))


def germ_transitions(system, trace, tol=1e-12):
    """Conflict points where some footpoint germ degenerates (A1 -> A2).

    Located by bisection on the sign of the Hessian determinant between
    consecutive trace vertices, each bisection point corrected back onto
    the solution curve.
    """
    info = system.info
    sources = info["sources"]
    out = []
    recs = trace.records or [conflict_point(system, u, labels=False) for u in trace.vertices]
    for i, src in enumerate(sources):
        q = np.array([_curvature_indicator(src, cp.x, cp.footpoints[i]) for cp in recs])
        for k in np.nonzero(np.sign(q[:-1]) * np.sign(q[1:]) < 0)[0]:
            a, b = trace.vertices[k], trace.vertices[k + 1]
            qa = q[k]
            chord = system.difference(b, a)
            lo, hi = 0.0, 1.0
            u = a
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                p = a + mid * chord
                sub = system.with_constraint(lambda v, p=p: chord @ system.difference(v, p), lambda v: chord)
                try:
                    u = newton_refine(sub, p).x
                except ConflictSetsError:
                    break
                cp = conflict_point(system, u, labels=False)
                qm = _curvature_indicator(src, cp.x, cp.footpoints[i])
                if np.sign(qm) == np.sign(qa):
                    lo = mid
                else:
                    hi = mid
                if hi - lo < tol:
                    break
            out.append(conflict_point(system, u, labels=True))
    return out


# ---------------------------------------------------------------------------
# drivers

def _box_of(scene, box):
    if box is None and isinstance(scene, Scene):
        box = scene.options.box
    if box is None:
        raise SceneError("a bounded box is required")
    n = scene.ambient_dim if isinstance(scene, Scene) else _sources_of(scene)[1]
    lo, hi = (np.asarray(v, dtype=float) for v in box)
    if lo.shape != (n,) or hi.shape != lo.shape or not np.all(hi > lo):
        raise SceneError("box must give lo < hi in every ambient coordinate")
    return lo, hi


def default_slices(box, count=9, axis=-1):
    lo, hi = box
    n = len(lo)
    normal = np.eye(n)[axis]
    offsets = np.linspace(lo[axis], hi[axis], count + 2)[1:-1]
    return [(normal, float(c)) for c in offsets]


def _swap_alias(system):
    """Seed filter: (s1, s2) and (s2, s1) describe the same symmetry point."""
    info = system.info
    start = 1 if info["mode"] == "oriented" else info["n"] + 1
    offs = info["offsets"]

    def swapped(u):
        v = u.copy()
        a = slice(start + offs[0], start + offs[1])
        b = slice(start + offs[1], start + offs[2])
        v[a], v[b] = u[b], u[a]
        return v

    return swapped


def _solve(system, box, sources, oriented, settings, density, slices, separation, labels, jitter=0):
    n = system.info["n"]
    dof = system.unknown_dim - system.equation_dim
    alias = _swap_alias(system) if separation > 0 else None
    if dof == 1:
        seeds = tie_seeds(sources, box, density, oriented=oriented, separation=separation, jitter=jitter)
        traces, singular = trace_from_seeds(system, seeds, settings, alias=alias)
    elif dof == 2:
        slices = slices or default_slices(box)
        traces, singular = [], []
        for k, (normal, offset) in enumerate(slices):
            sub = system.with_ambient_slice(normal, offset)
            seeds = tie_seeds(sources, box, density, oriented=oriented, plane=(normal, offset), separation=separation,
                              jitter=jitter)
            tr, sg = trace_from_seeds(sub, seeds, settings, alias=alias)
            for t in tr:
                t.info["slice"] = k
                t.info["slice_plane"] = (np.asarray(normal, dtype=float), float(offset))
                annotate(sub, t, labels)
            traces.extend(tr)
            singular.extend(sg)
        return traces, singular
    else:
        raise SceneError(f"solution set of dimension {dof} in R^{n} is not supported")
    for t in traces:
        annotate(system, t, labels)
    return traces, singular


def _run_defaults(scene, settings, density):
    if isinstance(scene, Scene):
        return settings or scene.settings, density or scene.options.seed_density or DEFAULT_DENSITY
    return settings or ContinuationSettings(), density or DEFAULT_DENSITY


def conflict_set(scene, box=None, settings=None, density=None, slices=None, labels=True, jitter=0):
    """Traced branches of the unoriented conflict set inside ``box``.

    ``scene`` may also be a list of time sources (e.g. fold families).
    """
    box = _box_of(scene, box)
    settings, density = _run_defaults(scene, settings, density)
    system = build_conflict_system(scene, oriented=False, box=box)
    traces, _ = _solve(system, box, system.info["sources"], False, settings, density, slices, 0.0, labels, jitter)
    return traces


def oriented_conflict_set(scene, box=None, settings=None, density=None, slices=None, labels=True, jitter=0):
    """Branches where the oriented signed-time fronts meet; t may be negative."""
    box = _box_of(scene, box)
    settings, density = _run_defaults(scene, settings, density)
    system = build_conflict_system(scene, oriented=True, box=box)
    traces, _ = _solve(system, box, system.info["sources"], True, settings, density, slices, 0.0, labels, jitter)
    return traces


def symmetry_set(scene, box=None, settings=None, density=None, separation=None, slices=None, labels=True,
                 cluster_radius=1e-6, jitter=0):
    """Points with two distinct critical footpoints of equal time on one surface.

    Branch ends where the footpoints merge (the separation constraint
    becomes active) are labelled ``A2_closure``.  Degenerate solution sets
    (the centre of a circle) come back as single-point traces with ends
    ``cluster``.
    """
    if len(scene.surfaces) != 1:
        raise SceneError("the symmetry set is defined for a single surface")
    box = _box_of(scene, box)
    settings = settings or scene.settings
    density = density or scene.options.seed_density or DEFAULT_DENSITY
    src = scene_sources(scene)[0]
    if separation is None:
        span = math.sqrt(sum((b - a) ** 2 for a, b in src.domain))
        separation = scene.options.separation * span
    system = build_conflict_system([src, src], oriented=False, box=box, separation=separation)
    traces, singular = _solve(system, box, [src, src], False, settings, density, slices, separation, labels, jitter)
    n = system.info["n"]
    offs = system.info["offsets"]
    for tr in traces:
        ends = list(tr.ends)
        for k, idx in enumerate((0, len(tr.vertices) - 1)):
            u = tr.vertices[idx]
            s1 = u[n + 1 + offs[0]:n + 1 + offs[1]]
            s2 = u[n + 1 + offs[1]:n + 1 + offs[2]]
            if ends[k] == "domain" and _separation(src, s1, s2) <= separation * (1 + 1e-6):
                ends[k] = "A2_closure"
        tr.ends = tuple(ends)
    clusters = []
    for u in singular:
        x = u[:n]
        if not any(np.linalg.norm(x - c[0][:n]) < max(cluster_radius, 1e3 * settings.newton_tol) for c in clusters):
            clusters.append([u])
        else:
            next(c for c in clusters if np.linalg.norm(x - c[0][:n]) < max(cluster_radius, 1e3 * settings.newton_tol)).append(u)
    for c in clusters:
        tr = TraceResult(np.array([c[0]]), np.array([0.0]), False, ("cluster", "cluster"), name="symmetry-cluster",
                         info={"cluster_size": len(c)})
        annotate(system, tr, labels=False)
        traces.append(tr)
    return traces


def unoriented_from_oriented(scene, box=None, settings=None, density=None):
    """Union of oriented conflict sets over all 2^l orientation choices."""
    out = []
    for signs in itertools.product((1, -1), repeat=len(scene.surfaces)):
        entries = tuple(
            type(e)(e.surface.with_orientation(sg), e.metric, e.label) for e, sg in zip(scene.surfaces, signs)
        )
        sc = Scene(scene.ambient_dim, entries, scene.options)
        for tr in oriented_conflict_set(sc, box, settings, density, labels=False):
            tr.info["signs"] = signs
            out.append(tr)
    return out


def trace_points(traces):
    """All ambient vertices of a list of annotated traces, stacked."""
    pts = [np.array([cp.x for cp in tr.records]) for tr in traces if tr.records]
    if not pts:
        return np.zeros((0, 0))
    return np.vstack(pts)


def validate_seed(system, u):
    r = system.residual(u)
    if np.linalg.norm(r) > 1e-8:
        raise PreconditionError("not a conflict point", residual=float(np.linalg.norm(r)))
    return conflict_point(system, u)
