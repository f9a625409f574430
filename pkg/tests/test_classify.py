import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from conflictsets import FinslerMetric, ParametricHypersurface, classify_germ_1d, classify_germ_2d, germ_label
from conflictsets.classify import (
    format_partition,
    new_cases,
    nice_dimension_check,
    partition_table,
    reduce_partition,
)
from conflictsets.errors import PreconditionError, SceneError
from conflictsets.propagation import SurfaceSource

E2 = FinslerMetric.euclidean(2)
E3 = FinslerMetric.euclidean(3)


# --- one variable -----------------------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_monomial_germs(k):
    # G = s^(k+1): derivatives G', ..., G^(6) at 0
    derivs = [math.factorial(k + 1) if m == k + 1 else 0.0 for m in range(1, 7)]
    lab = classify_germ_1d(derivs)
    assert lab.name == f"A{k}" and lab.codim == k
    assert lab.corank == (0 if k == 1 else 1)


def test_flat_germ_is_degenerate():
    assert classify_germ_1d([0.0] * 6).name == "X"


def test_non_critical_germ_rejected():
    with pytest.raises(PreconditionError):
        classify_germ_1d([0.1, 1.0])


def _sym_derivs(expr, s, at, count=6):
    return [float(expr.diff(s, m).subs(s, at)) for m in range(1, count + 1)]


def test_circle_footpoint_is_fold_free():
    srf = ParametricHypersurface.create("circle", [0, 0, 1])
    src = SurfaceSource(srf, E2)
    assert germ_label(src, np.array([3.0, 0.0]), [0.0]).name == "A1"
    assert germ_label(src, np.array([-0.5, 0.0]), [0.0]).name == "A1"


def test_circle_centre_is_flat():
    src = SurfaceSource(ParametricHypersurface.create("circle", [0, 0, 1]), E2)
    assert germ_label(src, np.array([0.0, 0.0]), [0.3]).name == "X"


def test_ellipse_vertex_focal_point_is_a3():
    # independent check: F(s) = |(1.5, 0) - (2 cos s, sin s)| has F'' = F''' = 0, F'''' != 0 at s = 0
    s = sp.Symbol("s", real=True)
    F = sp.sqrt((sp.Rational(3, 2) - 2 * sp.cos(s)) ** 2 + sp.sin(s) ** 2)
    d = _sym_derivs(F, s, 0)
    assert abs(d[1]) < 1e-14 and abs(d[2]) < 1e-14 and abs(d[3]) > 1e-2
    src = SurfaceSource(ParametricHypersurface.create("ellipse", [0, 0, 2, 1]), E2)
    lab = germ_label(src, np.array([1.5, 0.0]), [0.0])
    assert lab.name == "A3" and lab.codim == 3


def test_ellipse_evolute_point_is_a2():
    th = 0.4
    a, b = 2.0, 1.0
    x = np.array([(a * a - b * b) / a * np.cos(th) ** 3, -(a * a - b * b) / b * np.sin(th) ** 3])
    # footpoint of that curvature centre: s with the same normal line
    s = sp.Symbol("s", real=True)
    F = sp.sqrt((x[0] - 2 * sp.cos(s)) ** 2 + (x[1] - sp.sin(s)) ** 2)
    d = _sym_derivs(F, s, th)
    assert abs(d[0]) < 1e-12 and abs(d[1]) < 1e-10 and abs(d[2]) > 1e-3
    src = SurfaceSource(ParametricHypersurface.create("ellipse", [0, 0, 2, 1]), E2)
    assert germ_label(src, x, [th]).name == "A2"


# --- two variables ----------------------------------------------------------

def _graph(coeffs):
    return ParametricHypersurface.create("graph-polynomial", coeffs, domain=[(-1, 1), (-1, 1)], dim_ambient=3)


def _sym_graph_time(coeffs, x):
    u, v = sp.symbols("u v", real=True)
    z = sum(sp.nsimplify(c) * m for c, m in zip(coeffs, [1, u, v, u * u, u * v, v * v, u ** 3, u * u * v, u * v * v, v ** 3]))
    F = sp.sqrt((x[0] - u) ** 2 + (x[1] - v) ** 2 + (sp.nsimplify(x[2]) - z) ** 2)
    return u, v, F


def test_parabolic_cylinder_focal_point_is_a3():
    coeffs = [0, 0, 0, 0.5, 0, 0]
    x = (0.0, 0.0, 1.0)
    u, v, F = _sym_graph_time(coeffs, x)
    at = {u: 0, v: 0}
    assert F.diff(u, 2).subs(at) == 0 and F.diff(u, 3).subs(at) == 0
    assert F.diff(u, 4).subs(at) != 0 and F.diff(v, 2).subs(at) != 0
    lab = germ_label(SurfaceSource(_graph(coeffs), E3), np.array(x), [0.0, 0.0])
    assert lab.name == "A3" and lab.corank == 1


def test_cubic_graph_focal_point_is_a2():
    coeffs = [0, 0, 0, 0.5, 0, 1.0, 0.3, 0, 0, 0]
    x = (0.0, 0.0, 1.0)
    u, v, F = _sym_graph_time(coeffs, x)
    at = {u: 0, v: 0}
    assert F.diff(u, 2).subs(at) == 0 and F.diff(u, 3).subs(at) != 0
    lab = germ_label(SurfaceSource(_graph(coeffs), E3), np.array(x), [0.0, 0.0])
    assert lab.name == "A2"


def test_sphere_centre_is_umbilic_flag():
    src = SurfaceSource(ParametricHypersurface.create("sphere", [0, 0, 0, 1]), E3)
    lab = germ_label(src, np.zeros(3), [0.2, 0.1])
    assert lab.name == "D4" and lab.corank == 2


def test_quartic_correction_from_mixed_term():
    # f = k^4 + n^2 + c k^2 n: eliminating n leaves (1 - c^2/4) k^4
    H = np.diag([0.0, 2.0])
    assert classify_germ_2d(H, 0.0, 24.0, 1.0, 0.0).name == "A3"
    # c = 2: quartic cancels exactly (mixed third d^3/dk^2dn = 2c = 4)
    assert classify_germ_2d(H, 0.0, 24.0, 1.0, 4.0).name == "X"


def test_regular_2d_germ():
    assert classify_germ_2d(np.diag([1.0, -3.0])).name == "A1"


# --- partitions --------------------------------------------------------------

def test_partition_table_small():
    t = partition_table(3, 2)
    assert set(t.partitions) == {(1, 1), (2, 1), (3, 1), (2, 2)}
    assert list(t.partitions) == sorted(t.partitions)


def test_new_cases_format():
    assert new_cases(3, 2).format() == "(2,2)\n(3)"
    assert format_partition((4, 2, 2)) == "(4,2,2)"


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.data())
def test_new_cases_rule(n, data):
    l = data.draw(st.integers(1, n + 1))
    d = n - l
    cases = new_cases(n, l).partitions
    for r in cases:
        assert all(m >= 2 for m in r)
        assert len(r) <= l and sum(r) - len(r) == d + 1
        # each padded with ones fits the codimension budget
        assert sum(r) + (l - len(r)) <= n + 1
    # every reduction of a valid tuple has sum - len <= d + 1
    for p in partition_table(n, l).partitions:
        r = reduce_partition(p)
        assert sum(r) - len(r) <= d + 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4), st.integers(0, 3))
def test_new_cases_depend_on_difference_only(d, extra):
    base_l = d + 1
    l = max(base_l, 2) + extra
    a = new_cases(d + max(base_l, 2), max(base_l, 2)).partitions
    b = new_cases(d + l, l).partitions
    assert a == b


def test_nice_dimensions():
    assert nice_dimension_check(3, 2).is_nice
    assert nice_dimension_check(7, 3).N == 6 and nice_dimension_check(7, 3).is_nice
    chk = nice_dimension_check(9, 2)
    assert chk.N == 6 and not chk.is_nice


@pytest.mark.parametrize("n,l", [(0, 1), (2, 4), (3, 0)])
def test_bad_partition_arguments(n, l):
    with pytest.raises(SceneError):
        new_cases(n, l)
