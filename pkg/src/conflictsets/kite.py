"""Kite curves: where the footpoint tangent planes of a conflict point meet,
and the image of the lifted conflict set in the space of oriented lines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCovectorError, DegenerateKiteError, PreconditionError

MAX_CONDITION = 1e8


@dataclass
class KitePoint:
    y: np.ndarray
    source: object  # ConflictPoint
    condition: float
    residual: float


@dataclass
class KiteCurve:
    points: list  # KitePoint or None (gap) per trace vertex
    segments: list  # arrays of consecutive non-degenerate y's

    @property
    def polyline(self):
        pts = [p.y for p in self.points if p is not None]
        return np.array(pts) if pts else np.zeros((0, 0))


@dataclass
class LiftImagePoint:
    v: np.ndarray  # unit vector in R^(n+1), time coordinate first
    mu: np.ndarray  # tangential part of (t, x)
    source: object


def kite_point(cp, max_condition=MAX_CONDITION):
    """Solve <x - y, xi_i> = t for y.

    The lifted conormals have time component -1, so this is the tangent
    plane of each footpoint shifted along the ray; with unit conormals it
    reduces to the intersection of the footpoint tangent planes.
    """
    A = np.array(cp.conormals, dtype=float)
    n = len(cp.x)
    if A.shape != (n, n):
        raise PreconditionError(f"the kite needs l = n surfaces, got l={A.shape[0]} in R^{n}")
    cond = float(np.linalg.cond(A))
    if not cond < max_condition:
        raise DegenerateKiteError(f"footpoint tangent planes nearly parallel (condition {cond:.3e})", condition=cond)
    y = np.linalg.solve(A, A @ cp.x - cp.t)
    res = float(np.abs(A @ (cp.x - y) - cp.t).max())
    return KitePoint(y, cp, cond, res)


def kite_curve(trace, max_condition=MAX_CONDITION):
    """Per-vertex kite points of an annotated trace; degenerate vertices are gaps."""
    points = []
    segments = []
    current = []
    for cp in trace.records:
        try:
            kp = kite_point(cp, max_condition)
        except DegenerateKiteError:
            kp = None
        points.append(kp)
        if kp is None:
            if current:
                segments.append(np.array(current))
            current = []
        else:
            current.append(kp.y)
    if current:
        segments.append(np.array(current))
    return KiteCurve(points, segments)


def collinearity_residual(points):
    """Largest distance of the points to their least-squares line."""
    P = np.asarray(points, dtype=float)
    if len(P) < 3:
        return 0.0
    c = P.mean(axis=0)
    D = P - c
    _, _, Vt = np.linalg.svd(D, full_matrices=False)
    d = Vt[0]
    perp = D - np.outer(D @ d, d)
    return float(np.linalg.norm(perp, axis=1).max())


def lift_covector(cp):
    """Fibre sum of the lifted conormals (-1, xi_i), time component first."""
    xi = np.sum(np.array(cp.conormals, dtype=float), axis=0)
    return np.concatenate([[-float(len(cp.conormals))], xi])


def lift_image_point(cp):
    xb = lift_covector(cp)
    nrm2 = float(xb @ xb)
    if not nrm2 > 0:
        raise DegenerateCovectorError("zero lifted covector")
    pt = np.concatenate([[cp.t], cp.x])
    v = xb / np.sqrt(nrm2)
    mu = pt - (pt @ xb) * xb / nrm2
    return LiftImagePoint(v, mu, cp)


def gauss_image_of_lift(trace):
    """(v, mu) of every vertex of an annotated trace; None where undefined."""
    out = []
    for cp in trace.records:
        try:
            out.append(lift_image_point(cp))
        except DegenerateCovectorError:
            out.append(None)
    return out
