"""Germ codimensions, ADE labels, transversality margins and the
multi-germ partition calculus."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, SceneError
from .scene import evaluate_jet
from .solver import row_normalized, smallest_singular_value

TOL_REL = 1e-6
CRITICAL_TOL = 1e-8


@dataclass(frozen=True)
class GermLabel:
    kind: str  # "A1".."A5", "D4_flag" or "degenerate"
    codim: int
    corank: int
    witness: tuple = ()

    @property
    def name(self):
        return {"D4_flag": "D4", "degenerate": "X"}.get(self.kind, self.kind)


@dataclass(frozen=True)
class MultiGermLabel:
    germs: tuple
    name: str
    total_codim: int
    budget: int

    @property
    def exceeds_budget(self):
        return self.total_codim > self.budget


@dataclass(frozen=True)
class PartitionTable:
    n: int
    l: int
    partitions: tuple

    def format(self):
        return "\n".join(format_partition(p) for p in self.partitions)


@dataclass(frozen=True)
class NiceDimension:
    N: int
    is_nice: bool


def classify_germ_1d(derivatives, scale=1.0, tol_rel=TOL_REL):
    """A_k label of a one-variable germ from its derivatives G', G'', ...

    A derivative of order m counts as present when its Taylor term
    |G^(m)| scale^m / m! exceeds ``tol_rel``; the first present order
    m >= 2 gives A_{m-1}, i.e. G ~ s^(k+1) with local algebra (s^k).
    """
    d = np.asarray(derivatives, dtype=float)
    if d.size < 2:
        raise ValueError("need at least G' and G''")
    first = abs(d[0]) * scale
    if first > CRITICAL_TOL:
        raise PreconditionError(f"germ is not critical: |G'| scale = {first:.3e}", residual=first)
    terms = tuple(abs(d[m - 1]) * scale ** m / math.factorial(m) for m in range(1, d.size + 1))
    for m in range(2, d.size + 1):
        if terms[m - 1] > tol_rel:
            k = m - 1
            return GermLabel(f"A{k}", k, 0 if k == 1 else 1, terms)
    return GermLabel("degenerate", d.size, 1, terms)


def classify_germ_2d(hessian, third_along_kernel=0.0, fourth_along_kernel=0.0, scale=1.0,
                     mixed_third=0.0, tol_rel=TOL_REL):
    """Label of a two-variable critical germ from its Hessian and the
    derivatives along the Hessian kernel.

    ``mixed_third`` is d^3/dk^2 dn (k kernel, n the other eigendirection);
    eliminating n shifts the effective quartic along k by -3 mixed^2 / lambda_n.
    """
    H = np.asarray(hessian, dtype=float)
    lam = np.linalg.eigvalsh(0.5 * (H + H.T))
    hterms = np.abs(lam) * scale ** 2 / 2.0
    flat = hterms <= tol_rel
    corank = int(flat.sum())
    if corank == 0:
        return GermLabel("A1", 1, 0, tuple(hterms))
    if corank == 2:
        return GermLabel("D4_flag", 4, 2, tuple(hterms))
    lam_n = float(lam[~flat][0])
    c3 = abs(third_along_kernel) * scale ** 3 / 6.0
    if c3 > tol_rel:
        return GermLabel("A2", 2, 1, (*hterms, c3))
    q = fourth_along_kernel - 3.0 * mixed_third ** 2 / lam_n
    c4 = abs(q) * scale ** 4 / 24.0
    if c4 > tol_rel:
        return GermLabel("A3", 3, 1, (*hterms, c3, c4))
    return GermLabel("degenerate", 4, 1, (*hterms, c3, c4))


def _dimensionless(source, x, s):
    L = source.length_scale(x, s)
    return L if L > 0 else 1.0


def germ_label(source, x, s, tol_rel=TOL_REL):
    """Label of s' -> F(x, s') at a critical footpoint s of a time source.

    Parameters are measured in units of Euclidean length along the surface
    and lengths are divided by L = |x - gamma(s)|, so thresholds are
    scale-free (the quadratic term is (1 - kappa t)/2 for curves).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    L = _dimensionless(source, x, s)
    E = source.param_frame(s)
    if source.dim_param == 1:
        c = source.series(x, s, E[:, 0], order=6)
        derivs = [math.factorial(m) * c[m] * L ** (m - 1) for m in range(1, 7)]
        return classify_germ_1d(derivs, 1.0, tol_rel)
    jet = source.jet(x, s)
    He = E.T @ jet.hess_s @ E * L
    lam, vec = np.linalg.eigh(He)
    order = np.argsort(np.abs(lam))
    k = E @ vec[:, order[0]]
    nrm = E @ vec[:, order[1]]
    ck = source.series(x, s, k, order=4)
    third = 6.0 * ck[3] * L ** 2
    fourth = 24.0 * ck[4] * L ** 3
    d3 = lambda e: 6.0 * source.series(x, s, e, order=3)[3]
    mixed = (d3(k + nrm) - d3(k - nrm) - 2.0 * d3(nrm)) / 6.0 * L ** 2
    return classify_germ_2d(He, third, fourth, 1.0, mixed, tol_rel)


def multigerm_label(cp):
    """Combined label of a conflict point, e.g. A2A1."""
    germs = cp.germ if cp.germ else tuple(germ_label(src, cp.x, s) for src, s in zip(cp.sources, cp.footpoints))
    ordered = sorted(germs, key=lambda g: (-g.codim, g.name))
    total = sum(g.codim for g in germs)
    n = len(cp.x)
    return MultiGermLabel(tuple(ordered), "".join(g.name for g in ordered), total, n + 1)


def conflict_rank_matrix(sources, x, footpoints):
    """Derivatives in (s, lambda, x) of d_(s,lambda) of the phase function
    sum_k lambda_k (F_k - F_(k+1)).

    The row of the phase function itself is left out: by homogeneity in
    lambda it is a combination of the d_lambda rows and would force a zero
    singular value.
    """
    l = len(sources)
    n = len(x)
    lam = np.arange(1, l, dtype=float)
    lam /= np.linalg.norm(lam) if l > 1 else 1.0
    coef = np.append(lam, 0.0) - np.insert(lam, 0, 0.0)  # c_i = lambda_i - lambda_(i-1)
    jets = [src.jet(x, s) for src, s in zip(sources, footpoints)]
    ps = [src.dim_param for src in sources]
    offs = np.concatenate([[0], np.cumsum(ps)])
    ns = int(offs[-1])
    cols = ns + (l - 1) + n
    rows = []
    for i, j in enumerate(jets):
        block = np.zeros((ps[i], cols))
        block[:, offs[i]:offs[i + 1]] = coef[i] * j.hess_s
        block[:, ns + l - 1:] = coef[i] * j.mixed_sx
        rows.append(block)
    for k in range(l - 1):
        row = np.zeros((1, cols))
        row[0, ns + l - 1:] = jets[k].grad_x - jets[k + 1].grad_x
        rows.append(row)
    return np.vstack(rows)


def transversality_margin_conflict(cp):
    M = conflict_rank_matrix(cp.sources, cp.x, cp.footpoints)
    return smallest_singular_value(row_normalized(M))


def sphere_tangent_basis(v):
    v = np.asarray(v, dtype=float)
    if len(v) == 2:
        return np.array([[-v[1], v[0]]])
    a = np.eye(3)[int(np.argmin(np.abs(v)))]
    e1 = np.cross(v, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(v, e1)
    return np.array([e1, e2])


def chord_rank_matrix(surface1, surface2, s1, s2, v):
    """d_(v, s1, s2) (d_(s1, s2) F) with F = <v, g1(s1)> + <v, g2(s2)>,
    v in local coordinates of the sphere."""
    E = sphere_tangent_basis(v)
    j1 = evaluate_jet(surface1, s1, order=2, strict=False)
    j2 = evaluate_jet(surface2, s2, order=2, strict=False)
    p = surface1.dim_param
    q = E.shape[0]
    M = np.zeros((2 * p, q + 2 * p))
    for b, (j, off) in enumerate(((j1, q), (j2, q + p))):
        T = j.tangents()
        S = j.second()
        M[b * p:(b + 1) * p, :q] = (E @ T).T
        M[b * p:(b + 1) * p, off:off + p] = np.einsum("k,abk->ab", v, S)
    return M


def transversality_margin_chords(pair):
    M = chord_rank_matrix(pair.surface1, pair.surface2, pair.s1, pair.s2, pair.v)
    return smallest_singular_value(row_normalized(M))


# ---------------------------------------------------------------------------
# partition calculus

def _check_nl(n, l):
    if not (isinstance(n, (int, np.integer)) and isinstance(l, (int, np.integer))):
        raise SceneError("n and l must be integers")
    if n < 1 or not 1 <= l <= n + 1:
        raise SceneError(f"need n >= 1 and 1 <= l <= n+1, got n={n}, l={l}")


def _descending(parts, budget, cap):
    if parts == 0:
        yield ()
        return
    for first in range(min(cap, budget - (parts - 1)), 0, -1):
        for rest in _descending(parts - 1, budget - first, first):
            yield (first,) + rest


def partition_table(n, l):
    """All codimension tuples (mu_1 >= ... >= mu_l >= 1) with sum <= n+1."""
    _check_nl(n, l)
    parts = sorted(_descending(l, n + 1, n + 1))
    return PartitionTable(n, l, tuple(parts))


def reduce_partition(p):
    """Drop the parts equal to 1 (smooth fronts only lower n and l)."""
    return tuple(m for m in p if m > 1)


def new_cases(n, l):
    """Reduced tuples that first appear at difference n - l.

    A reduced tuple with k parts and sum S fits into (n, l) exactly when
    k <= l and S - k <= n - l + 1; it is new when equality holds.
    """
    _check_nl(n, l)
    seen = {reduce_partition(p) for p in partition_table(n, l).partitions}
    d = n - l
    out = [r for r in seen if r and sum(r) - len(r) == d + 1]
    return PartitionTable(n, l, tuple(sorted(out)))


def format_partition(p):
    return "(" + ",".join(str(m) for m in p) + ")"


def nice_dimension_check(n, l):
    _check_nl(n, l)
    return NiceDimension(min(n - l + 2, 6), n - l + 2 <= 6)
