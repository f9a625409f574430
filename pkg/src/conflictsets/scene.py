"""Surfaces, metrics and scenes.

Every surface kind carries closed-form partial derivatives up to order
``MAX_ORDER`` so that the solvers and the germ classifier never need finite
differences.  Formulas are written against numpy arrays so the same code
serves single evaluations and dense sampling.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateCovectorError,
    DomainError,
    ImmersionError,
    OverdeterminedSceneError,
    SceneError,
)

MAX_ORDER = 6
TWO_PI = 2.0 * math.pi

# kind -> (ambient dim, parameter dim)
KINDS = {
    "line": (2, 1),
    "circle": (2, 1),
    "ellipse": (2, 1),
    "fourier-curve": (2, 1),
    "graph-polynomial": (None, None),  # 2 or 3, decided by coefficients/ambient
    "sphere": (3, 2),
    "plane": (3, 2),
    "biquadratic-patch": (3, 2),
}

_DEFAULT_DOMAINS = {
    "circle": ([(0.0, TWO_PI)], [True]),
    "ellipse": ([(0.0, TWO_PI)], [True]),
    "fourier-curve": ([(0.0, TWO_PI)], [True]),
    "sphere": ([(0.0, TWO_PI), (-1.4, 1.4)], [True, False]),
}


# ---------------------------------------------------------------------------
# derivative helpers

def _dcos(w, m):
    return np.cos(w + 0.5 * math.pi * m)


def _dsin(w, m):
    return np.sin(w + 0.5 * math.pi * m)


def _falling(k, m):
    out = 1
    for j in range(m):
        out *= k - j
    return out


def _trig_terms(coefficients):
    """Split curve coefficients into centre and (k, A_k, B_k) harmonics."""
    c = np.asarray(coefficients, dtype=float)
    centre = c[:2]
    rest = c[2:].reshape(-1, 4)
    return centre, [(k + 1, row[:2], row[2:]) for k, row in enumerate(rest)]


def _trig_coefficients(kind, coefficients):
    c = list(map(float, coefficients))
    if kind == "circle":
        cx, cy, r = c
        return [cx, cy, r, 0.0, 0.0, r]
    if kind == "ellipse":
        cx, cy, a, b = c[:4]
        th = c[4] if len(c) == 5 else 0.0
        ct, st = math.cos(th), math.sin(th)
        return [cx, cy, a * ct, a * st, -b * st, b * ct]
    return c


def _poly2_exponents(ncoef):
    """Exponent pairs (i, j) for triangular bivariate coefficient lists."""
    out = []
    d = 0
    while len(out) < ncoef:
        for i in range(d, -1, -1):
            out.append((i, d - i))
        d += 1
    if len(out) != ncoef:
        raise SceneError(f"bivariate polynomial needs a triangular number of coefficients, got {ncoef}")
    return out


@dataclass(frozen=True, eq=False)
class ParametricHypersurface:
    """An embedding of a parameter box into R^n (n = 2 or 3).

    ``orientation`` (+1/-1) only flips the conormal field.  The positive
    normal N is chosen so that (N, tangents...) is a positively oriented
    frame: for curves N = (T_y, -T_x), for surfaces N = T_u x T_v.
    """

    kind: str
    coefficients: tuple
    domain: tuple
    periodic: tuple
    orientation: int = 1
    dim_ambient: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SceneError(f"unknown surface kind {self.kind!r}")
        if self.orientation not in (1, -1):
            raise SceneError("orientation must be +1 or -1")
        n, p = KINDS[self.kind]
        if n is not None and n != self.dim_ambient:
            raise SceneError(f"kind {self.kind!r} lives in R^{n}, scene is R^{self.dim_ambient}")
        if self.dim_ambient not in (2, 3):
            raise SceneError("ambient dimension must be 2 or 3")
        if len(self.domain) != self.dim_param or len(self.periodic) != self.dim_param:
            raise SceneError(f"{self.kind} needs {self.dim_param} domain interval(s)")
        for a, b in self.domain:
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise SceneError(f"bad domain interval [{a}, {b}]")
        self._check_coefficients()

    # -- construction helpers -------------------------------------------
    @classmethod
    def create(cls, kind, coefficients, domain=None, periodic=None, orientation=1, dim_ambient=None):
        if kind not in KINDS:
            raise SceneError(f"unknown surface kind {kind!r}")
        if dim_ambient is None:
            dim_ambient = KINDS[kind][0] or 2
        if domain is None:
            if kind not in _DEFAULT_DOMAINS:
                raise SceneError(f"kind {kind!r} needs an explicit domain")
            domain, default_periodic = _DEFAULT_DOMAINS[kind]
            if periodic is None:
                periodic = default_periodic
        if periodic is None:
            periodic = [False] * len(domain)
        coefficients = tuple(float(c) for c in coefficients)
        if not all(math.isfinite(c) for c in coefficients):
            raise SceneError("coefficients must be finite")
        return cls(
            kind=kind,
            coefficients=coefficients,
            domain=tuple((float(a), float(b)) for a, b in domain),
            periodic=tuple(bool(p) for p in periodic),
            orientation=int(orientation),
            dim_ambient=int(dim_ambient),
        )

    @property
    def dim_param(self):
        return self.dim_ambient - 1

    @functools.cached_property
    def _harmonics(self):
        return _trig_terms(_trig_coefficients(self.kind, self.coefficients))

    def with_orientation(self, sign):
        return ParametricHypersurface(
            self.kind, self.coefficients, self.domain, self.periodic, int(sign), self.dim_ambient
        )

    def _check_coefficients(self):
        k, c = self.kind, self.coefficients
        expected = {"line": 4, "circle": 3, "sphere": 4, "plane": 9, "biquadratic-patch": 27}
        if k in expected and len(c) != expected[k]:
            raise SceneError(f"{k} takes {expected[k]} coefficients, got {len(c)}")
        if k == "ellipse" and len(c) not in (4, 5):
            raise SceneError("ellipse takes [cx, cy, a, b] or [cx, cy, a, b, theta]")
        if k == "fourier-curve" and (len(c) < 6 or (len(c) - 2) % 4):
            raise SceneError("fourier-curve takes [cx, cy] followed by 4 numbers per harmonic")
        if k == "graph-polynomial":
            if len(c) == 0:
                raise SceneError("graph-polynomial needs coefficients")
            if self.dim_ambient == 3:
                _poly2_exponents(len(c))
        if k in ("circle", "sphere") and c[-1] <= 0:
            raise SceneError(f"{k} radius must be positive")
        if k == "ellipse" and (c[2] <= 0 or c[3] <= 0):
            raise SceneError("ellipse semi-axes must be positive")

    # -- evaluation -----------------------------------------------------
    def wrap(self, s, strict=True):
        """Reduce periodic coordinates into [a, b); check the others."""
        s = np.array(s, dtype=float).reshape(self.dim_param)
        for j, ((a, b), per) in enumerate(zip(self.domain, self.periodic)):
            if per:
                s[j] = a + (s[j] - a) % (b - a)
            elif strict:
                span = b - a
                if s[j] < a - 1e-12 * span or s[j] > b + 1e-12 * span:
                    raise DomainError(f"parameter {s[j]!r} outside [{a}, {b}]")
        return s

    def partial(self, s, alpha):
        """Vectorised partial derivative d^alpha gamma at s (shape (..., p)) -> (..., n)."""
        s = np.asarray(s, dtype=float)
        kind, c = self.kind, self.coefficients
        if self.dim_param == 1:
            m = alpha[0]
            t = s[..., 0]
            if kind == "line":
                p = np.array(c[:2])
                d = np.array(c[2:])
                if m == 0:
                    return p + t[..., None] * d
                if m == 1:
                    return np.broadcast_to(d, t.shape + (2,)).copy()
                return np.zeros(t.shape + (2,))
            if kind in ("circle", "ellipse", "fourier-curve"):
                centre, harmonics = self._harmonics
                out = np.zeros(t.shape + (2,))
                if m == 0:
                    out += centre
                for k, A, B in harmonics:
                    w = k * t
                    out += (k ** m) * (_dcos(w, m)[..., None] * A + _dsin(w, m)[..., None] * B)
                return out
            if kind == "graph-polynomial":
                out = np.zeros(t.shape + (2,))
                if m == 0:
                    out[..., 0] = t
                elif m == 1:
                    out[..., 0] = 1.0
                y = np.zeros(t.shape)
                for k, a in enumerate(c):
                    if k >= m:
                        y = y + a * _falling(k, m) * t ** (k - m)
                out[..., 1] = y
                return out
        else:
            i, j = alpha
            u, v = s[..., 0], s[..., 1]
            if kind == "sphere":
                cx, cy, cz, r = c
                out = np.empty(u.shape + (3,))
                out[..., 0] = r * _dcos(u, i) * _dcos(v, j)
                out[..., 1] = r * _dsin(u, i) * _dcos(v, j)
                out[..., 2] = r * _dsin(v, j) if i == 0 else 0.0
                if i == 0 and j == 0:
                    out += np.array([cx, cy, cz])
                return out
            if kind == "plane":
                p, e1, e2 = np.array(c[:3]), np.array(c[3:6]), np.array(c[6:9])
                if i == 0 and j == 0:
                    return p + u[..., None] * e1 + v[..., None] * e2
                if (i, j) == (1, 0):
                    return np.broadcast_to(e1, u.shape + (3,)).copy()
                if (i, j) == (0, 1):
                    return np.broadcast_to(e2, u.shape + (3,)).copy()
                return np.zeros(u.shape + (3,))
            if kind == "biquadratic-patch":
                P = np.array(c).reshape(3, 3, 3)
                out = np.zeros(u.shape + (3,))
                for a in range(3):
                    for b in range(3):
                        if a >= i and b >= j:
                            w = _falling(a, i) * _falling(b, j) * u ** (a - i) * v ** (b - j)
                            out += w[..., None] * P[a, b]
                return out
            if kind == "graph-polynomial":
                out = np.zeros(u.shape + (3,))
                if (i, j) == (0, 0):
                    out[..., 0] = u
                    out[..., 1] = v
                elif (i, j) == (1, 0):
                    out[..., 0] = 1.0
                elif (i, j) == (0, 1):
                    out[..., 1] = 1.0
                z = np.zeros(u.shape)
                for coef, (a, b) in zip(c, _poly2_exponents(len(c))):
                    if a >= i and b >= j:
                        z = z + coef * _falling(a, i) * _falling(b, j) * u ** (a - i) * v ** (b - j)
                out[..., 2] = z
                return out
        raise SceneError(f"kind {kind!r} unsupported in R^{self.dim_ambient}")

    def position(self, s):
        return self.partial(s, (0,) * self.dim_param)

    def tangents(self, s):
        """Tangent vectors as array (..., n, p)."""
        cols = [self.partial(s, tuple(int(k == j) for k in range(self.dim_param))) for j in range(self.dim_param)]
        return np.stack(cols, axis=-1)

    def normal(self, s):
        """Positive (unnormalised) Euclidean normal, vectorised."""
        T = self.tangents(s)
        if self.dim_param == 1:
            return np.stack([T[..., 1, 0], -T[..., 0, 0]], axis=-1)
        return np.cross(T[..., 0], T[..., 1])

    def sample(self, counts):
        """Uniform parameter grid; periodic axes exclude the right end point.

        Returns (params, shape) with params of shape (prod(counts), p).
        """
        counts = np.broadcast_to(np.atleast_1d(counts), (self.dim_param,))
        axes = []
        for (a, b), per, m in zip(self.domain, self.periodic, counts):
            axes.append(np.linspace(a, b, int(m), endpoint=not per))
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1), tuple(int(m) for m in counts)


@dataclass(frozen=True)
class Jet:
    """Partial derivatives of an embedding at one parameter value."""

    s: np.ndarray
    order: int
    derivs: dict

    @property
    def position(self):
        return self.derivs[(0,) * len(self.s)]

    def __getitem__(self, alpha):
        return self.derivs[tuple(alpha)]

    def tangents(self):
        p = len(self.s)
        return np.stack([self.derivs[tuple(int(k == j) for k in range(p))] for j in range(p)], axis=-1)

    def second(self):
        p = len(self.s)
        n = len(self.position)
        out = np.empty((p, p, n))
        for a in range(p):
            for b in range(p):
                alpha = [0] * p
                alpha[a] += 1
                alpha[b] += 1
                out[a, b] = self.derivs[tuple(alpha)]
        return out

    def directional_series(self, direction, order=None):
        """Taylor coefficients c_m with gamma(s + h e) = sum c_m h^m."""
        order = self.order if order is None else order
        e = np.asarray(direction, dtype=float)
        p = len(self.s)
        n = len(self.position)
        out = np.zeros((order + 1, n))
        for alpha, d in self.derivs.items():
            m = sum(alpha)
            if m > order:
                continue
            w = 1.0
            for a, ea in zip(alpha, e):
                w *= ea ** a / math.factorial(a)
            out[m] += w * d
        return out


def _multi_indices(p, order):
    for m in range(order + 1):
        for alpha in itertools.product(range(m + 1), repeat=p):
            if sum(alpha) == m:
                yield alpha


def evaluate_jet(surface, s, order=1, strict=True):
    """All partial derivatives of gamma at s up to ``order`` (<= 6).

    ``strict=False`` evaluates the analytic continuation outside a
    non-periodic domain; the solvers use it while iterating.
    """
    if order < 0 or order > MAX_ORDER:
        raise ValueError(f"jet order must be in 0..{MAX_ORDER}")
    s = surface.wrap(s, strict=strict)
    derivs = {alpha: surface.partial(s, alpha) for alpha in _multi_indices(surface.dim_param, order)}
    return Jet(s=s, order=order, derivs=derivs)


# ---------------------------------------------------------------------------
# metrics

@dataclass(frozen=True, eq=False)
class FinslerMetric:
    """Quadratic Hamiltonian H(xi) = sqrt(xi^T Q xi), Q symmetric positive definite."""

    Q: np.ndarray
    Qinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise SceneError("metric Q must be a square matrix")
        if not np.all(np.isfinite(Q)):
            raise SceneError("metric Q must be finite")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise SceneError("metric Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        if np.linalg.eigvalsh(Q).min() <= 0:
            raise SceneError("metric Q must be positive definite")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        Qinv = np.linalg.inv(Q)
        Qinv = 0.5 * (Qinv + Qinv.T)
        Qinv.setflags(write=False)
        object.__setattr__(self, "Qinv", Qinv)

    @classmethod
    def euclidean(cls, n):
        return cls(np.eye(n))

    @classmethod
    def scaled(cls, n, eta):
        """H = eta |xi|: fronts travel with speed eta."""
        return cls(eta ** 2 * np.eye(n))

    @property
    def dim(self):
        return self.Q.shape[0]

    def H(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", xi, self.Q, xi))

    def grad_H(self, xi):
        return front_velocity(self, xi)

    def hess_H2(self, xi=None):
        return 2.0 * self.Q

    def travel_time(self, d):
        """Time to cover displacement d along a straight trajectory."""
        d = np.asarray(d, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", d, self.Qinv, d))

    def speed_bound(self):
        """Lipschitz constant of the travel time in x."""
        return 1.0 / math.sqrt(np.linalg.eigvalsh(self.Q).min())


def front_velocity(metric, xi):
    xi = np.asarray(xi, dtype=float)
    h = metric.H(xi)
    if not np.all(h > 0):
        raise DegenerateCovectorError("front velocity of the zero covector")
    return (xi @ metric.Q) / np.asarray(h)[..., None] if xi.ndim > 1 else metric.Q @ xi / h


def unit_conormal(surface, metric, s):
    xi, _ = conormal_frame(surface, metric, s, derivative=False)
    return xi


def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _normal_and_derivative(jet, derivative):
    T = jet.tangents()
    n, p = T.shape
    if p == 1:
        N = np.array([T[1, 0], -T[0, 0]])
        scale = np.linalg.norm(T[:, 0])
        dN = None
        if derivative:
            g2 = jet[(2,)]
            dN = np.array([[g2[1]], [-g2[0]]])
    else:
        N = _cross(T[:, 0], T[:, 1])
        scale = np.linalg.norm(T[:, 0]) * np.linalg.norm(T[:, 1])
        dN = None
        if derivative:
            uu, uv, vv = jet[(2, 0)], jet[(1, 1)], jet[(0, 2)]
            dN = np.stack(
                [_cross(uu, T[:, 1]) + _cross(T[:, 0], uv), _cross(uv, T[:, 1]) + _cross(T[:, 0], vv)],
                axis=-1,
            )
    if not scale > 0 or np.linalg.norm(N) <= 1e-12 * scale:
        raise ImmersionError(f"surface not immersive at s={jet.s}")
    return N, dN


def conormal_frame(surface, metric, s, derivative=True, strict=False):
    """Oriented unit conormal xi (H(xi)=1) and its s-derivative (n x p)."""
    jet = evaluate_jet(surface, s, order=2 if derivative else 1, strict=strict)
    N, dN = _normal_and_derivative(jet, derivative)
    N = surface.orientation * N
    h = float(np.sqrt(N @ metric.Q @ N))
    xi = N / h
    if not derivative:
        return xi, None
    dN = surface.orientation * dN
    dh = (metric.Q @ N) @ dN / h
    dxi = dN / h - np.outer(N, dh) / h ** 2
    return xi, dxi


def unit_normal(surface, s, strict=False):
    """Oriented Euclidean unit normal."""
    jet = evaluate_jet(surface, s, order=1, strict=strict)
    N, _ = _normal_and_derivative(jet, False)
    N = surface.orientation * N
    return N / np.linalg.norm(N)


def check_immersion(surface, samples=64):
    params, _ = surface.sample(samples)
    T = surface.tangents(params)
    sv = np.linalg.svd(T, compute_uv=False)
    smin = sv[:, -1]
    smax = sv[:, 0]
    bad = ~(smin > 1e-10 * np.maximum(smax, 1e-300))
    if np.any(bad):
        raise ImmersionError(f"{surface.kind} not immersive near s={params[np.argmax(bad)]}")


def check_periodicity(surface, order=5):
    for j, per in enumerate(surface.periodic):
        if not per:
            continue
        a, b = surface.domain[j]
        params, _ = surface.sample(5)
        lo = params.copy()
        hi = params.copy()
        lo[:, j] = a
        hi[:, j] = b
        for alpha in _multi_indices(surface.dim_param, order):
            pa, pb = surface.partial(lo, alpha), surface.partial(hi, alpha)
            tol = 1e-12 * max(1.0, float(np.abs(pa).max()))
            if np.abs(pa - pb).max() > tol:
                raise SceneError(f"{surface.kind}: parameter {j} flagged periodic but derivative {alpha} differs at the ends")


# ---------------------------------------------------------------------------
# scenes

@dataclass(frozen=True)
class ContinuationSettings:
    step_init: float = 1e-2
    step_min: float = 1e-6
    step_max: float = 1e-1
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    margin_floor: float = 1e-8
    max_points: int = 20000

    def __post_init__(self):
        if not (0 < self.step_min <= self.step_init <= self.step_max):
            raise SceneError("need 0 < step_min <= step_init <= step_max")
        if not self.newton_tol > 0:
            raise SceneError("newton_tol must be positive")
        if self.newton_max_iter < 1 or self.max_points < 2:
            raise SceneError("newton_max_iter >= 1 and max_points >= 2 required")


@dataclass(frozen=True)
class SceneOptions:
    settings: ContinuationSettings = field(default_factory=ContinuationSettings)
    seed_density: int | None = None
    separation: float = 1e-2
    box: tuple | None = None
    unoriented_front: bool = False


@dataclass(frozen=True)
class SceneSurface:
    surface: ParametricHypersurface
    metric: FinslerMetric
    label: str


@dataclass(frozen=True)
class Scene:
    ambient_dim: int
    surfaces: tuple
    options: SceneOptions = field(default_factory=SceneOptions)

    def __post_init__(self):
        if self.ambient_dim not in (2, 3):
            raise SceneError("ambient_dim must be 2 or 3")
        l = len(self.surfaces)
        if l > self.ambient_dim + 1:
            raise OverdeterminedSceneError(
                f"{l} surfaces in R^{self.ambient_dim}: the conflict set is generically empty")
        if l < 1:
            raise SceneError(f"a scene in R^{self.ambient_dim} holds 1..{self.ambient_dim + 1} surfaces, got {l}")
        labels = [e.label for e in self.surfaces]
        if len(set(labels)) != l:
            raise SceneError("surface labels must be unique")
        for e in self.surfaces:
            if e.surface.dim_ambient != self.ambient_dim or e.metric.dim != self.ambient_dim:
                raise SceneError(f"surface {e.label!r} does not live in R^{self.ambient_dim}")

    @classmethod
    def build(cls, surfaces, metrics=None, labels=None, options=None, validate=True):
        surfaces = list(surfaces)
        n = surfaces[0].dim_ambient
        if metrics is None:
            metrics = [FinslerMetric.euclidean(n)] * len(surfaces)
        if labels is None:
            labels = [f"M{i + 1}" for i in range(len(surfaces))]
        entries = tuple(SceneSurface(s, m, lab) for s, m, lab in zip(surfaces, metrics, labels))
        scene = cls(n, entries, options or SceneOptions())
        if validate:
            for e in entries:
                check_immersion(e.surface)
                check_periodicity(e.surface)
        return scene

    @property
    def settings(self):
        return self.options.settings

    def __len__(self):
        return len(self.surfaces)
