"""Travel-time functions, momental fronts and the graph of the time function.

A *time source* is anything that supplies the multivalued time function
x0 = F(x, s) together with its derivatives: a surface under a quadratic
metric (``SurfaceSource``) or an explicit generating family such as
``FoldFamily``.  The conflict solvers only talk to this interface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, SingularTimeError
from .scene import (
    MAX_ORDER,
    conormal_frame,
    evaluate_jet,
    front_velocity,
    unit_conormal,
)


@dataclass
class TimeFunctionJet:
    value: float
    grad_s: np.ndarray
    hess_s: np.ndarray
    grad_x: np.ndarray
    mixed_sx: np.ndarray  # d^2 F / ds_j dx_k, shape (p, n)
    higher_s: list = field(default_factory=list)


@dataclass
class FrontSample:
    x: np.ndarray
    t: float
    s: np.ndarray
    xi: np.ndarray
    branch: int


@dataclass
class TimeGraphPoint:
    x: np.ndarray
    t: float
    s: np.ndarray
    hessian_eigenvalues: np.ndarray
    residual: float

    @property
    def point(self):
        return np.append(self.x, self.t)


def sqrt_series(phi):
    """Taylor coefficients of sqrt of a series with phi[0] > 0."""
    f = np.zeros_like(phi)
    f[0] = math.sqrt(phi[0])
    for m in range(1, len(phi)):
        acc = phi[m] - sum(f[k] * f[m - k] for k in range(1, m))
        f[m] = acc / (2.0 * f[0])
    return f


class SurfaceSource:
    """Travel time from a hypersurface under a quadratic Finsler metric."""

    def __init__(self, surface, metric, label="M"):
        self.surface = surface
        self.metric = metric
        self.label = label
        self.P = metric.Qinv

    @property
    def dim_param(self):
        return self.surface.dim_param

    @property
    def dim_ambient(self):
        return self.surface.dim_ambient

    @property
    def domain(self):
        return self.surface.domain

    @property
    def periodic(self):
        return self.surface.periodic

    def jet(self, x, s, strict=False):
        g = evaluate_jet(self.surface, s, order=2, strict=strict)
        d = np.asarray(x, dtype=float) - g.position
        Pd = self.P @ d
        phi = float(d @ Pd)
        if not phi > 1e-300:
            raise SingularTimeError("travel time evaluated on the source surface")
        F = math.sqrt(phi)
        T = g.tangents()
        S = g.second()
        grad_s = -(Pd @ T) / F
        PT = self.P @ T
        hess = (T.T @ PT - np.einsum("k,abk->ab", Pd, S)) / F - np.outer(grad_s, grad_s) / F
        grad_x = Pd / F
        mixed = -PT.T / F - np.outer(grad_s, Pd) / F ** 2
        return TimeFunctionJet(F, grad_s, hess, grad_x, mixed)

    def series(self, x, s, direction, order=MAX_ORDER):
        """Taylor coefficients of h -> F(x, s + h e)."""
        g = evaluate_jet(self.surface, s, order=order, strict=False)
        c = g.directional_series(direction, order)
        d = -c
        d[0] += np.asarray(x, dtype=float)
        phi = np.array([sum(d[a] @ self.P @ d[m - a] for a in range(m + 1)) for m in range(order + 1)])
        if not phi[0] > 1e-300:
            raise SingularTimeError("travel time evaluated on the source surface")
        return sqrt_series(phi)

    def length_scale(self, x, s):
        g = evaluate_jet(self.surface, s, order=0, strict=False)
        return float(np.linalg.norm(np.asarray(x, dtype=float) - g.position))

    def param_frame(self, s):
        """Parameter directions whose images are Euclidean-orthonormal."""
        T = evaluate_jet(self.surface, s, order=1, strict=False).tangents()
        G = T.T @ T
        L = np.linalg.cholesky(G)
        return np.linalg.inv(L).T  # columns e_k with (T e_k) orthonormal

    def footpoint(self, s):
        return evaluate_jet(self.surface, s, order=0, strict=False).position

    def sample(self, counts):
        return self.surface.sample(counts)

    def wrap(self, s):
        return self.surface.wrap(s, strict=False)

    def conormal(self, s):
        return conormal_frame(self.surface, self.metric, s, derivative=False)[0]

    def time_gradient(self, x, s):
        """Covector xi with <x - gamma(s), xi> = F and H(xi) = 1."""
        d = np.asarray(x, dtype=float) - self.footpoint(s)
        Pd = self.P @ d
        return Pd / math.sqrt(d @ Pd)

    def times(self, X, S):
        """Vectorised travel times: X (m, n) against samples S (k, p) -> (m, k)."""
        G = self.surface.position(S)
        X = np.atleast_2d(X)
        XP = X @ self.P
        sq = np.einsum("mi,mi->m", XP, X)[:, None] - 2.0 * XP @ G.T + np.einsum("ki,ij,kj->k", G, self.P, G)[None, :]
        return np.sqrt(np.maximum(sq, 0.0))

    def speed_bound(self, box=None):
        return self.metric.speed_bound()

    def signed_times(self, X, S):
        """<x - gamma(s), xi(s)> with the oriented conormal; equals the
        signed time at critical footpoints."""
        G = self.surface.position(S)
        N = self.surface.orientation * self.surface.normal(S)
        h = np.sqrt(np.einsum("ki,ij,kj->k", N, self.metric.Q, N))
        Xi = N / h[:, None]
        return np.atleast_2d(X) @ Xi.T - np.einsum("ki,ki->k", G, Xi)[None, :]


class FoldFamily:
    """Generating family x0 = s^3 + (a.x) s + b.x with one fold variable s.

    Two such families with a = e_1, b = e_2 and a = e_3, b = -e_2 give the
    A2A2 (D4+) example.
    """

    dim_param = 1
    periodic = (False,)

    def __init__(self, a, b, domain=(-10.0, 10.0), label="G"):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.domain = (tuple(domain),)
        self.label = label

    @property
    def dim_ambient(self):
        return len(self.a)

    def jet(self, x, s, strict=False):
        x = np.asarray(x, dtype=float)
        s = float(np.asarray(s).reshape(-1)[0])
        ax = self.a @ x
        F = s ** 3 + ax * s + self.b @ x
        return TimeFunctionJet(
            F,
            np.array([3 * s * s + ax]),
            np.array([[6 * s]]),
            s * self.a + self.b,
            self.a[None, :].copy(),
        )

    def series(self, x, s, direction, order=MAX_ORDER):
        e = float(np.asarray(direction).reshape(-1)[0])
        s = float(np.asarray(s).reshape(-1)[0])
        x = np.asarray(x, dtype=float)
        ax = self.a @ x
        c = np.zeros(order + 1)
        base = [s ** 3 + ax * s + self.b @ x, 3 * s * s + ax, 3 * s, 1.0]
        for m, v in enumerate(base[: order + 1]):
            c[m] = v * e ** m
        return c

    def length_scale(self, x, s):
        return 1.0

    def param_frame(self, s):
        return np.eye(1)

    def sample(self, counts):
        a, b = self.domain[0]
        m = int(np.atleast_1d(counts)[0])
        return np.linspace(a, b, m)[:, None], (m,)

    def wrap(self, s):
        return np.atleast_1d(np.asarray(s, dtype=float)).copy()

    def times(self, X, S):
        X = np.atleast_2d(X)
        s = np.asarray(S, dtype=float)[:, 0]
        ax = X @ self.a
        bx = X @ self.b
        return s[None, :] ** 3 + ax[:, None] * s[None, :] + bx[:, None]

    def signed_times(self, X, S):
        return self.times(X, S)

    def speed_bound(self, box):
        """Lipschitz bound of the critical values over the box (|s| <= sqrt(|a.x|/3))."""
        lo, hi = (np.asarray(v, dtype=float) for v in box)
        amax = float(np.abs(self.a) @ np.maximum(np.abs(lo), np.abs(hi)))
        smax = math.sqrt(amax / 3.0)
        return float(np.linalg.norm(self.a) * smax + np.linalg.norm(self.b))

    def time_gradient(self, x, s):
        return self.jet(x, s).grad_x


def travel_time_jet(surface, metric, x, s, order=2, directions=()):
    """Travel-time jet of (x, s) -> sqrt((x-g)^T Q^-1 (x-g)), g = gamma(s)."""
    src = SurfaceSource(surface, metric)
    j = src.jet(x, s, strict=True)
    for e in directions:
        c = src.series(x, s, e, order=max(order, 2))
        j.higher_s.append(np.array([math.factorial(m) * c[m] for m in range(len(c))]))
    return j


def momental_front(surface, metric, t, samples, both_branches=False):
    """Front at time t: gamma(s) + t * v(xi(s)) on a uniform parameter grid."""
    if np.min(samples) < 2:
        raise ValueError("samples must be >= 2")
    params, _ = surface.sample(samples)
    branches = (surface.orientation, -surface.orientation) if both_branches else (surface.orientation,)
    out = []
    for sign in branches:
        oriented = surface.with_orientation(sign)
        for s in params:
            xi = unit_conormal(oriented, metric, s)
            v = front_velocity(metric, xi)
            g = evaluate_jet(surface, s, order=0).position
            out.append(FrontSample(g + t * v, float(t), s.copy(), xi, sign))
    return out


def time_graph_point(surface, metric, x, s, tol=1e-8):
    """(x, t) on the graph of the time function at a critical footpoint."""
    j = travel_time_jet(surface, metric, x, s)
    res = float(np.linalg.norm(j.grad_s))
    if res > tol:
        raise PreconditionError(f"footpoint is not critical: |dF/ds| = {res:.3e}", residual=res)
    return TimeGraphPoint(
        np.asarray(x, dtype=float).copy(),
        j.value,
        np.atleast_1d(np.asarray(s, dtype=float)).copy(),
        np.linalg.eigvalsh(j.hess_s),
        res,
    )


def critical_footpoints(source, x, samples=256, tol=1e-12, max_iter=30):
    """All critical footpoints of s -> F(x, s) found from a dense scan.

    Only for curve sources (p = 1).  Returns a sorted list of parameters.
    """
    params, _ = source.surface.sample(samples)
    F = source.times(np.atleast_2d(x), params)[0]
    out = []
    m = len(F)
    per = source.periodic[0]
    for k in range(m):
        if not per and (k == 0 or k == m - 1):
            continue
        a, b = F[k - 1], F[(k + 1) % m]
        if (F[k] <= a and F[k] < b) or (F[k] >= a and F[k] > b):
            s = np.array(params[k], dtype=float)
            for _ in range(max_iter):
                j = source.jet(x, s)
                step = j.grad_s[0] / j.hess_s[0, 0] if j.hess_s[0, 0] != 0 else 0.0
                s = s - step
                if abs(step) < tol:
                    break
            out.append(float(source.surface.wrap(s, strict=False)[0]))
    return sorted(out)
