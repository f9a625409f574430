"""Newton refinement, pseudo-arclength continuation, slicing and grid seeding."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConflictSetsError, NoConvergence, PreconditionError, SingularJacobian
from .scene import ContinuationSettings

log = logging.getLogger(__name__)

# step acceptance / growth thresholds of the predictor-corrector loop;
# all are geometric so the trace does not depend on equation scaling
_MAX_TURN = 0.2
_MAX_DRIFT = 0.1
_GROW_TURN = 0.05
_GROW_DRIFT = 0.02
_CORRECTOR_ITER = 8


@dataclass
class NonlinearSystem:
    """Residual r: R^u -> R^e with analytic Jacobian.

    ``evaluate(u)`` returns ``(r, J)``.  ``periods`` holds the period of
    each unknown (0 for non-periodic ones); ``ambient`` maps a solution to
    its point in R^n when that makes sense.
    """

    unknown_dim: int
    equation_dim: int
    evaluate: Callable
    periods: np.ndarray | None = None
    in_domain: Callable | None = None
    ambient: Callable | None = None
    ambient_jacobian: Callable | None = None
    name: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.periods is None:
            self.periods = np.zeros(self.unknown_dim)
        self.periods = np.asarray(self.periods, dtype=float)

    def residual(self, u):
        return self.evaluate(np.asarray(u, dtype=float))[0]

    def jacobian(self, u):
        return self.evaluate(np.asarray(u, dtype=float))[1]

    def contains(self, u):
        return True if self.in_domain is None else bool(self.in_domain(u))

    def difference(self, a, b):
        """a - b with periodic unknowns reduced to [-P/2, P/2)."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        per = self.periods > 0
        if np.any(per):
            P = self.periods[per]
            d[..., per] = (d[..., per] + 0.5 * P) % P - 0.5 * P
        return d

    def scaled(self, factor):
        """Same solution set, equations multiplied by ``factor``."""
        ev = self.evaluate

        def evaluate(u):
            r, J = ev(u)
            return factor * r, factor * J

        return replace(self, evaluate=evaluate, name=f"{self.name}*{factor:g}")

    def with_constraint(self, value, gradient, name="constraint"):
        """Append one scalar equation value(u) = 0 with gradient(u)."""
        ev = self.evaluate

        def evaluate(u):
            r, J = ev(u)
            return np.append(r, value(u)), np.vstack([J, gradient(u)])

        return replace(self, equation_dim=self.equation_dim + 1, evaluate=evaluate, name=f"{self.name}|{name}")

    def with_ambient_slice(self, normal, offset):
        """Restrict to the ambient hyperplane <normal, x(u)> = offset."""
        if self.ambient is None or self.ambient_jacobian is None:
            raise ValueError("system has no ambient map to slice")
        a = np.asarray(normal, dtype=float)
        amb, ajac = self.ambient, self.ambient_jacobian
        out = self.with_constraint(lambda u: a @ amb(u) - offset, lambda u: a @ ajac(u), name="slice")
        out.info = dict(self.info, slice=(a.copy(), float(offset)))
        return out


@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    last_step: float


@dataclass
class TraceResult:
    """Ordered polyline of solutions in unknown space."""

    vertices: np.ndarray
    margins: np.ndarray
    closed: bool = False
    ends: tuple = ("seed", "seed")
    records: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    name: str = ""
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.vertices)

    @property
    def singular_ends(self):
        return [k for k, e in zip((0, len(self.vertices) - 1), self.ends) if e in ("margin", "step")]


def row_normalized(J):
    J = np.atleast_2d(np.asarray(J, dtype=float))
    norms = np.linalg.norm(J, axis=1)
    norms[norms == 0] = 1.0
    return J / norms[:, None]


def smallest_singular_value(matrix):
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def _safe_evaluate(system, u):
    try:
        r, J = system.evaluate(u)
    except (ConflictSetsError, FloatingPointError, np.linalg.LinAlgError):
        return None, None
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(J))):
        return None, None
    return r, J


def newton_refine(system, guess, settings=None, max_iter=None, tol=None):
    """Damped Gauss-Newton with minimum-norm steps.

    Square systems get plain Newton steps; wide systems (curves, surfaces)
    converge to a nearby point of the solution set; tall consistent systems
    get least-squares steps.
    """
    settings = settings or ContinuationSettings()
    tol = settings.newton_tol if tol is None else tol
    max_iter = settings.newton_max_iter if max_iter is None else max_iter
    u = np.array(guess, dtype=float).reshape(-1)
    if u.shape[0] != system.unknown_dim or not np.all(np.isfinite(u)):
        raise PreconditionError("guess must be a finite vector of the system's unknown dimension")
    r, J = _safe_evaluate(system, u)
    if r is None:
        raise NoConvergence("residual undefined at the initial guess", point=u)
    norm = float(np.linalg.norm(r))
    growth = 0
    step_norm = 0.0
    for it in range(max_iter + 1):
        if norm < tol:
            return NewtonResult(u, norm, it, step_norm)
        if it == max_iter:
            break
        step, _, rank, sv = np.linalg.lstsq(J, -r, rcond=1e-13)
        if sv.size == 0 or sv[0] == 0:
            raise SingularJacobian("zero Jacobian", sigma_min=0.0, point=u)
        alpha = 1.0
        best = None
        for _ in range(12):
            trial = u + alpha * step
            rt, Jt = _safe_evaluate(system, trial)
            if rt is not None:
                nt = float(np.linalg.norm(rt))
                if best is None or nt < best[0]:
                    best = (nt, trial, rt, Jt, alpha)
                if nt <= (1.0 - 1e-4 * alpha) * norm:
                    break
            alpha *= 0.5
        if best is None:
            raise NoConvergence("residual undefined along the Newton direction", point=u, residual_norm=norm, iterations=it)
        nt, trial, rt, Jt, alpha = best
        if nt >= norm:
            growth += 1
            smin = float(sv[-1]) if len(sv) == min(J.shape) else 0.0
            if rank < min(J.shape) and growth >= 2:
                raise SingularJacobian("Jacobian rank-deficient and no descent", sigma_min=smin, point=u)
            if growth >= 5:
                raise NoConvergence("residual grew for 5 consecutive damped steps", point=u, residual_norm=norm, iterations=it)
        else:
            growth = 0
        step_norm = float(alpha * np.linalg.norm(step))
        u, r, J, norm = trial, rt, Jt, nt
    raise NoConvergence(f"no convergence in {max_iter} iterations (|r| = {norm:.3e})", point=u, residual_norm=norm, iterations=max_iter)


def _tangent(J, previous=None):
    _, _, Vt = np.linalg.svd(J, full_matrices=True)
    t = Vt[-1]
    if previous is not None:
        if t @ previous < 0:
            t = -t
    else:
        k = int(np.argmax(np.abs(t)))
        if t[k] < 0:
            t = -t
    return t


def _margin(J):
    return smallest_singular_value(row_normalized(J))


def _correct(system, predictor, direction, settings):
    """Newton on [r(v); direction.(v - predictor)] = 0."""
    v = predictor.copy()
    for _ in range(_CORRECTOR_ITER):
        r, J = _safe_evaluate(system, v)
        if r is None:
            return None
        if np.linalg.norm(r) < settings.newton_tol:
            return v, J
        A = np.vstack([J, direction])
        b = np.append(r, direction @ system.difference(v, predictor))
        try:
            dv = np.linalg.solve(A, -b)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(dv)):
            return None
        v = v + dv
    r, J = _safe_evaluate(system, v)
    if r is not None and np.linalg.norm(r) < settings.newton_tol:
        return v, J
    return None


def _land(system, inside, outside, settings):
    """Point of the solution curve on the domain boundary between two vertices."""
    chord = system.difference(outside, inside)
    lo, hi = 0.0, 1.0
    best = inside
    direction = chord / np.linalg.norm(chord)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        res = _correct(system, inside + mid * chord, direction, settings)
        if res is None:
            hi = mid
            continue
        if system.contains(res[0]):
            lo, best = mid, res[0]
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return best


def _march(system, seed, tangent, settings, start_tangent):
    pts = [seed.copy()]
    r, J = system.evaluate(seed)
    margins = [_margin(J)]
    u, t = seed.copy(), tangent.copy()
    h = settings.step_init
    side = 0.0
    end = "max_points"
    closed = False
    while len(pts) < settings.max_points:
        while True:
            up = u + h * t
            res = _correct(system, up, t, settings)
            if res is not None:
                v, Jv = res
                tv = _tangent(Jv, t)
                turn = math.acos(min(1.0, max(-1.0, float(t @ tv))))
                drift = float(np.linalg.norm(system.difference(v, up))) / h
                if turn <= _MAX_TURN and drift <= _MAX_DRIFT:
                    break
            h *= 0.5
            if h < settings.step_min:
                return pts, margins, "step", closed
        if not system.contains(v):
            landed = _land(system, u, v, settings)
            if np.linalg.norm(system.difference(landed, u)) > 0:
                pts.append(landed)
                margins.append(_margin(system.evaluate(landed)[1]))
            end = "domain"
            break
        m = _margin(Jv)
        pts.append(v)
        margins.append(m)
        if m < settings.margin_floor:
            end = "margin"
            break
        offset = system.difference(v, seed)
        new_side = float(start_tangent @ offset)
        if len(pts) > 3 and side < 0 <= new_side and np.linalg.norm(offset) < 2 * h and tv @ start_tangent > 0:
            pts[-1] = v - offset
            margins[-1] = margins[0]
            closed = True
            end = "closure"
            break
        side = new_side
        u, t = v, tv
        if turn < _GROW_TURN and drift < _GROW_DRIFT:
            h = min(1.5 * h, settings.step_max)
    return pts, margins, end, closed


def trace_curve(system, seed, settings=None):
    """Pseudo-arclength trace of the one-dimensional solution set through seed."""
    settings = settings or ContinuationSettings()
    if system.unknown_dim != system.equation_dim + 1:
        raise PreconditionError("trace_curve needs unknown_dim = equation_dim + 1")
    seed = np.array(seed, dtype=float)
    r, J = _safe_evaluate(system, seed)
    if r is None or np.linalg.norm(r) >= settings.newton_tol:
        res = None if r is None else float(np.linalg.norm(r))
        raise PreconditionError("seed is not a solution", residual=res)
    if _margin(J) < settings.margin_floor:
        raise PreconditionError("Jacobian at the seed is not of full row rank")
    t0 = _tangent(J)
    fwd, fm, fend, closed = _march(system, seed, t0, settings, t0)
    if closed:
        return TraceResult(np.array(fwd), np.array(fm), True, ("closure", "closure"), name=system.name)
    bwd, bm, bend, _ = _march(system, seed, -t0, settings, -t0)
    verts = np.array(bwd[::-1] + fwd[1:])
    margins = np.array(bm[::-1] + fm[1:])
    return TraceResult(verts, margins, False, (bend, fend), name=system.name)


def distance_to_trace(system, point, trace):
    if len(trace.vertices) == 0:
        return math.inf
    d = system.difference(trace.vertices, point[None, :])
    return float(np.sqrt((d * d).sum(axis=1)).min())


def trace_from_seeds(system, seeds, settings=None, skip_radius=None, refine=True, known=(), alias=None):
    """Trace every branch reached from ``seeds``; seeds lying on an already
    traced branch are skipped.  ``alias(u)`` may map a solution to an
    equivalent representation (e.g. swapped footpoints) that is also
    skipped.  Returns (traces, singular_points)."""
    settings = settings or ContinuationSettings()
    skip_radius = 0.6 * settings.step_max if skip_radius is None else skip_radius
    traces = []
    singular = []

    def covered(u):
        cands = [u] if alias is None else [u, alias(u)]
        for c in cands:
            if any(distance_to_trace(system, c, tr) < skip_radius for tr in itertools.chain(known, traces)):
                return True
            if singular:
                d = system.difference(np.array(singular), c[None, :])
                if np.sqrt((d * d).sum(axis=1)).min() < skip_radius:
                    return True
        return False

    for guess in seeds:
        guess = np.asarray(guess, dtype=float)
        if refine and covered(guess):
            continue
        try:
            u = newton_refine(system, guess, settings).x if refine else guess
        except ConflictSetsError:
            continue
        if not system.contains(u) or covered(u):
            continue
        try:
            traces.append(trace_curve(system, u, settings))
        except PreconditionError:
            singular.append(u)
    return traces, singular


def slice_surface(system, slices, seeds, settings=None):
    """Trace a two-dimensional solution set as a stack of ambient sections.

    ``slices`` is a list of (normal, offset) hyperplanes; ``seeds`` is either
    a list (one list of guesses per slice) or a callable slice_index -> guesses.
    """
    settings = settings or ContinuationSettings()
    if system.unknown_dim != system.equation_dim + 2:
        raise PreconditionError("slice_surface needs unknown_dim = equation_dim + 2")
    out = []
    for k, (normal, offset) in enumerate(slices):
        sub = system.with_ambient_slice(normal, offset)
        guesses = seeds(k) if callable(seeds) else seeds[k]
        traces, _ = trace_from_seeds(sub, guesses, settings)
        if not traces:
            log.info("slice %d (offset %g) is empty; skipped", k, offset)
        for tr in traces:
            tr.info["slice"] = k
            tr.info["slice_plane"] = (np.asarray(normal, dtype=float), float(offset))
        out.extend(traces)
    return out


def grid_seed(system, box, density, settings=None):
    """Newton from every node of a grid over the unknowns; converged,
    in-domain points are sorted lexicographically and deduplicated."""
    settings = settings or ContinuationSettings()
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    dens = np.broadcast_to(np.atleast_1d(density), lo.shape)
    axes = [np.linspace(a, b, int(m)) if m > 1 else np.array([0.5 * (a + b)]) for a, b, m in zip(lo, hi, dens)]
    found = []
    for node in itertools.product(*axes):
        try:
            res = newton_refine(system, np.array(node), settings)
        except ConflictSetsError:
            continue
        if system.contains(res.x):
            found.append(res.x)
    if not found:
        return []
    found = np.array(found)
    order = np.lexsort(found.T[::-1])
    radius = 10 * settings.newton_tol
    kept = []
    for u in found[order]:
        if all(np.linalg.norm(system.difference(u, k)) > radius for k in kept):
            kept.append(u)
    return kept
