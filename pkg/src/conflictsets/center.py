"""Parallel tangent planes: center sets, weighted center sets and the
normal chord set, all through the Euclidean Gauss map."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .classify import transversality_margin_chords
from .errors import ConflictSetsError, SceneError
from .scene import ContinuationSettings, _normal_and_derivative, evaluate_jet, unit_normal
from .solver import NonlinearSystem, trace_from_seeds


@dataclass
class ParallelPair:
    s1: np.ndarray
    s2: np.ndarray
    v: np.ndarray
    sign: int
    x1: np.ndarray
    x2: np.ndarray
    surface1: object = field(default=None, repr=False)
    surface2: object = field(default=None, repr=False)
    margin: float = float("nan")

    @property
    def params(self):
        return [self.s1, self.s2]

    @property
    def points(self):
        return [self.x1, self.x2]


@dataclass
class ParallelTuple:
    params: list
    points: list
    v: np.ndarray
    signs: tuple  # sign of <n_1, n_i>, first entry +1


@dataclass
class ChordImagePoint:
    v: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    normal: bool


def gauss_image(surface, s, tol=1e-10):
    """(v, mu): oriented unit normal and tangential part of the position."""
    v = unit_normal(surface, s)
    jet = evaluate_jet(surface, s, order=1, strict=False)
    g = jet.position
    crit = float(np.abs(v @ jet.tangents()).max())
    if crit > tol * max(1.0, float(np.linalg.norm(jet.tangents()))):
        raise ConflictSetsError(f"<v, dgamma/ds> = {crit:.3e}: normal not orthogonal to the tangents")
    return v, g - (g @ v) * v


def _param_layout(surfaces):
    p = surfaces[0].dim_param
    periods = []
    for srf in surfaces:
        for (a, b), per in zip(srf.domain, srf.periodic):
            periods.append(b - a if per else 0.0)
    return p, np.array(periods)


def _wrapped_gap(surface, a, b):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    for j, ((lo, hi), per) in enumerate(zip(surface.domain, surface.periodic)):
        if per:
            P = hi - lo
            d[j] = (d[j] + 0.5 * P) % P - 0.5 * P
    return float(np.linalg.norm(d))


def parallel_system(surfaces, separation=0.0):
    """Unknowns (s_1..s_l); equations <N_i(s_i), dgamma_1/ds_1j> = 0, i >= 2.

    The solution set has dimension n - 1 for every l.
    """
    l = len(surfaces)
    if l < 2:
        raise SceneError("parallel tuples need at least two surfaces")
    n = surfaces[0].dim_ambient
    if any(s.dim_ambient != n for s in surfaces):
        raise SceneError("surfaces must share the ambient dimension")
    p, periods = _param_layout(surfaces)
    dim = l * p
    same = surfaces[0] is surfaces[1]

    def evaluate(u):
        j1 = evaluate_jet(surfaces[0], u[:p], order=2, strict=False)
        T1 = j1.tangents()
        S1 = j1.second()
        r = np.empty((l - 1) * p)
        J = np.zeros(((l - 1) * p, dim))
        for i in range(1, l):
            ji = evaluate_jet(surfaces[i], u[i * p:(i + 1) * p], order=2, strict=False)
            N, dN = _normal_and_derivative(ji, True)
            rows = slice((i - 1) * p, i * p)
            r[rows] = N @ T1
            J[rows, :p] = np.einsum("k,abk->ab", N, S1)
            J[rows, i * p:(i + 1) * p] = T1.T @ dN
        return r, J

    def in_domain(u):
        for i, srf in enumerate(surfaces):
            for (a, b), per, x in zip(srf.domain, srf.periodic, u[i * p:(i + 1) * p]):
                if not per and not a <= x <= b:
                    return False
        if separation > 0 and same and _wrapped_gap(surfaces[0], u[:p], u[p:2 * p]) < separation:
            return False
        return True

    return NonlinearSystem(
        dim, (l - 1) * p, evaluate,
        periods=periods,
        in_domain=in_domain,
        ambient=lambda u: u.copy(),
        ambient_jacobian=lambda u: np.eye(dim),
        name="parallel",
        info={"surfaces": surfaces, "p": p, "separation": separation},
    )


def _unit_normals(surface, S):
    N = surface.orientation * surface.normal(S)
    return N / np.linalg.norm(N, axis=-1, keepdims=True)


def _curve_seeds(surfaces, count, dense, separation):
    """Brute-force angle scan: for sampled s_1, every s_i whose normal is
    parallel to n_1(s_1) (sign change of <N_i, T_1>)."""
    S1, _ = surfaces[0].sample(count)
    T1 = surfaces[0].tangents(S1)[..., 0]
    cands = []
    for srf in surfaces[1:]:
        Si, _ = srf.sample(dense)
        G = T1 @ srf.normal(Si).T  # (count, dense)
        nxt = np.roll(G, -1, axis=1)
        ok = np.sign(G) * np.sign(nxt) <= 0
        if not srf.periodic[0]:
            ok[:, -1] = False
        si = Si[:, 0]
        step = np.roll(si, -1) - si
        if srf.periodic[0]:
            a, b = srf.domain[0]
            step = np.where(step < 0, step + (b - a), step)
        rows = []
        for k in range(len(S1)):
            idx = np.nonzero(ok[k])[0]
            g0, g1 = G[k, idx], nxt[k, idx]
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(g0 != g1, g0 / (g0 - g1), 0.0)
            rows.append(si[idx] + np.clip(frac, 0, 1) * step[idx])
        cands.append(rows)
    seeds = []
    same = surfaces[0] is surfaces[1]
    for k, s1 in enumerate(S1[:, 0]):
        for combo in itertools.product(*[c[k] for c in cands]):
            if same and separation > 0 and _wrapped_gap(surfaces[0], [s1], [combo[0]]) < separation:
                continue
            seeds.append(np.array([s1, *combo]))
    return seeds


def _sign_pattern(surfaces, u, p):
    n1 = unit_normal(surfaces[0], u[:p])
    return tuple(int(np.sign(n1 @ unit_normal(srf, u[i * p:(i + 1) * p]))) for i, srf in enumerate(surfaces))


def _record(surfaces, u, p):
    params = [surfaces[i].wrap(u[i * p:(i + 1) * p], strict=False) for i in range(len(surfaces))]
    pts = [evaluate_jet(srf, s, order=0, strict=False).position for srf, s in zip(surfaces, params)]
    v = unit_normal(surfaces[0], params[0])
    signs = _sign_pattern(surfaces, u, p)
    if len(surfaces) == 2:
        pair = ParallelPair(params[0], params[1], v, signs[1], pts[0], pts[1], surfaces[0], surfaces[1])
        try:
            pair.margin = transversality_margin_chords(pair)
        except ConflictSetsError:
            pass
        return pair
    return ParallelTuple(params, pts, v, signs)


def _swap(p):
    def alias(u):
        w = u.copy()
        w[:p], w[p:2 * p] = u[p:2 * p], u[:p]
        return w
    return alias


def parallel_tuples(surfaces, signs=None, settings=None, separation=0.0, density=24, slices=None):
    """Traced families of footpoint tuples with parallel tangent planes.

    ``signs`` filters the branches by their sign pattern (for two surfaces
    either an int or a tuple of accepted signs).  Curves are traced
    directly; surfaces in R^3 are sliced at fixed values of the first
    parameter of the first surface.
    """
    settings = settings or ContinuationSettings(step_max=0.05)
    system = parallel_system(surfaces, separation)
    p = system.info["p"]
    alias = _swap(p) if surfaces[0] is surfaces[1] else None
    if p == 1:
        seeds = _curve_seeds(surfaces, density, 720, separation)
        traces, _ = trace_from_seeds(system, seeds, settings, alias=alias)
    else:
        traces = []
        a, b = surfaces[0].domain[0]
        slices = slices if slices is not None else list(np.linspace(a, b, 9, endpoint=not surfaces[0].periodic[0]))
        for k, c in enumerate(slices):
            normal = np.zeros(system.unknown_dim)
            normal[0] = 1.0
            sub = system.with_ambient_slice(normal, c)
            seeds = _surface_seeds(surfaces, c, density, separation)
            tr, _ = trace_from_seeds(sub, seeds, settings, alias=alias)
            for t in tr:
                t.info["slice"] = k
            traces.extend(tr)
    out = []
    for tr in traces:
        tr.records = [_record(surfaces, u, p) for u in tr.vertices]
        pattern = _sign_pattern(surfaces, tr.vertices[0], p)
        tr.info["signs"] = pattern
        tr.info["sign"] = pattern[1] if len(pattern) == 2 else None
        if signs is not None:
            wanted = signs if isinstance(signs, (tuple, list)) else (signs,)
            key = pattern[1] if len(surfaces) == 2 else pattern
            if key not in wanted and pattern not in wanted:
                continue
        out.append(tr)
    return out


def _surface_seeds(surfaces, u1, density, separation):
    """Seeds on the slice s_1[0] = u1: sampled s_1[1] against a grid on the
    other surfaces, keeping samples whose normals are within a grid angle."""
    first = surfaces[0]
    (a, b) = first.domain[1]
    vs = np.linspace(a, b, density)
    S1 = np.stack([np.full_like(vs, u1), vs], axis=-1)
    N1 = _unit_normals(first, S1)
    cands = []
    for srf in surfaces[1:]:
        Si, _ = srf.sample(density)
        Ni = _unit_normals(srf, Si)
        C = np.abs(N1 @ Ni.T)
        thr = math.cos(3.0 * math.pi / density)
        cands.append([Si[C[k] >= thr] for k in range(len(S1))])
    seeds = []
    same = surfaces[0] is surfaces[1]
    for k in range(len(S1)):
        for combo in itertools.product(*[c[k] for c in cands]):
            if same and separation > 0 and _wrapped_gap(first, S1[k], combo[0]) < separation:
                continue
            seeds.append(np.concatenate([S1[k], *combo]))
    return seeds


def parallel_pairs(scene, signs=(1, -1), settings=None, density=24, separation=None):
    """Parallel-tangent pairs on the two surfaces of a scene (metrics ignored).

    A single-surface scene gives the self pairs with opposite normals and
    a separation constraint (the center symmetry set of the surface).
    """
    surfaces = [e.surface for e in scene.surfaces]
    if len(surfaces) == 1:
        srf = surfaces[0]
        if separation is None:
            span = math.sqrt(sum((b - a) ** 2 for a, b in srf.domain))
            separation = scene.options.separation * span
        return parallel_tuples([srf, srf], signs=-1, settings=settings, separation=separation, density=density)
    if len(surfaces) != 2:
        raise SceneError("parallel pairs need one or two surfaces")
    return parallel_tuples(surfaces, signs=signs, settings=settings, density=density)


def center_set(pairs, weights=None):
    """Weighted points sum_i a_i x_i for every traced pair/tuple; one
    polyline per trace.  Default weights are the midpoint (1/2, 1/2)."""
    out = []
    for tr in pairs:
        if not tr.records:
            out.append(np.zeros((0, 0)))
            continue
        l = len(tr.records[0].points)
        a = np.full(l, 1.0 / l) if weights is None else np.asarray(weights, dtype=float)
        if a.shape != (l,):
            raise SceneError(f"need {l} weights, got {a.size}")
        if np.any(a == 0):
            raise SceneError("weights must be nonzero")
        out.append(np.array([sum(w * x for w, x in zip(a, rec.points)) for rec in tr.records]))
    return out


def weighted_center_set(surfaces, weights, settings=None, density=24):
    """Center set with weights a_i: tuples whose normals follow sign(a_i)."""
    a = np.asarray(weights, dtype=float)
    if a.shape != (len(surfaces),):
        raise SceneError("one weight per surface required")
    if np.any(a == 0):
        raise SceneError("weights must be nonzero")
    pattern = tuple(int(np.sign(a[0] * w)) for w in a)
    key = pattern[1] if len(surfaces) == 2 else pattern
    traces = parallel_tuples(list(surfaces), signs=(key,), settings=settings, density=density)
    return traces, center_set(traces, a)


def center_symmetry_set(scene, settings=None, density=24, separation=None):
    pairs = parallel_pairs(scene, settings=settings, density=density, separation=separation)
    return pairs, center_set(pairs)


def chord_image(pair, tol=1e-9):
    v = pair.v
    mu1 = pair.x1 - (pair.x1 @ v) * v
    mu2 = pair.x2 - (pair.x2 @ v) * v
    scale = max(1.0, float(np.linalg.norm(pair.x1)), float(np.linalg.norm(pair.x2)))
    if np.linalg.norm(mu1 - mu2) <= tol * scale:
        return ChordImagePoint(v, mu1, mu1.copy(), True)
    return ChordImagePoint(v, mu1, mu2, False)


def normal_chord_set(pairs, tol=1e-9):
    """Chords as points (v, mu) of the space of oriented lines, per trace."""
    return [[chord_image(rec, tol) for rec in tr.records] for tr in pairs]
