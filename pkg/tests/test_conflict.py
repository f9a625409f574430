import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conflictsets import (
    ContinuationSettings,
    FinslerMetric,
    ParametricHypersurface,
    Scene,
    build_conflict_system,
    conflict_set,
    oriented_conflict_set,
    symmetry_set,
)
from conflictsets.conflict import germ_transitions, unoriented_from_oriented
from conflictsets.errors import OverdeterminedSceneError, SceneError
from conflictsets.propagation import SurfaceSource

from conftest import circle, line, sphere
from oracles import hausdorff_to_polylines

BOX = ([-4.0, -4.0], [4.0, 4.0])


def xs(traces):
    return [np.array([cp.x for cp in tr.records]) for tr in traces]


def _fd_jacobian(system, u, h=1e-6):
    J = np.zeros((system.equation_dim, system.unknown_dim))
    for k in range(system.unknown_dim):
        e = np.zeros_like(u)
        e[k] = h
        J[:, k] = (system.residual(u + e) - system.residual(u - e)) / (2 * h)
    return J


@pytest.mark.parametrize("oriented", [False, True])
def test_jacobian_matches_finite_differences(oriented):
    Q = np.array([[1.4, 0.2], [0.2, 0.6]])
    sc = Scene.build(
        [ParametricHypersurface.create("ellipse", [0, 0, 2, 1, 0.3]), circle(2.5, 1, 0.7)],
        metrics=[FinslerMetric(Q), FinslerMetric.euclidean(2)],
    )
    system = build_conflict_system(sc, oriented=oriented)
    rng = np.random.default_rng(5)
    for _ in range(20):
        u = rng.uniform(-2, 2, system.unknown_dim)
        J = system.jacobian(u)
        fd = _fd_jacobian(system, u)
        assert np.allclose(J, fd, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(fd).max()))


def test_jacobian_matches_finite_differences_spheres():
    sc = Scene.build([sphere(1, 0, 0, 1), sphere(-1, 0.3, 0.2, 0.7), sphere(0.2, 1.5, -0.1, 0.5)])
    for oriented in (False, True):
        system = build_conflict_system(sc, oriented=oriented)
        rng = np.random.default_rng(6)
        for _ in range(10):
            u = rng.uniform(-1, 1, system.unknown_dim)
            fd = _fd_jacobian(system, u)
            assert np.allclose(system.jacobian(u), fd, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(fd).max()))


def test_conflict_points_satisfy_their_equations(four_conics_scene):
    for tr in conflict_set(four_conics_scene, box=BOX):
        for cp in tr.records:
            tie, crit = cp.residuals()
            assert tie < 1e-8 and crit < 1e-8
            assert cp.label == "A1A1"
            assert cp.margin > 0


def test_oriented_points_satisfy_their_equations():
    sc = Scene.build([circle(-1.5, 0, 0.5), circle(1.5, 0, 0.5)],
                     metrics=[FinslerMetric.euclidean(2), FinslerMetric(np.diag([2.0, 0.5]))])
    traces = oriented_conflict_set(sc, box=BOX)
    assert traces
    for tr in traces:
        for cp in tr.records:
            tie, crit = cp.residuals()
            assert tie < 1e-8 and crit < 1e-8


def test_orientation_union_equals_unoriented(generic_two_circles):
    un = conflict_set(generic_two_circles, box=BOX)
    union = unoriented_from_oriented(generic_two_circles, box=BOX)
    system = build_conflict_system(generic_two_circles)
    # every oriented vertex, with t -> |t|, is an unoriented conflict point
    for tr in union:
        for cp in tr.records:
            u = np.concatenate([cp.x, [abs(cp.t)], *cp.footpoints])
            assert np.linalg.norm(system.residual(u)) < 1e-8
    # and the two constructions cover the same set
    a, b = xs(un), xs(union)
    assert hausdorff_to_polylines(np.vstack(a), b) < 5e-3
    assert hausdorff_to_polylines(np.vstack(b), a) < 5e-3


def test_order_of_surfaces_does_not_matter(generic_two_circles):
    e = generic_two_circles.surfaces
    swapped = Scene(2, (e[1], e[0]), generic_two_circles.options)
    a = xs(conflict_set(generic_two_circles, box=BOX))
    b = xs(conflict_set(swapped, box=BOX))
    assert len(a) == len(b)
    assert hausdorff_to_polylines(np.vstack(a), b) < 5e-3
    assert hausdorff_to_polylines(np.vstack(b), a) < 5e-3


def test_rigid_motion_equivariance():
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    shift = np.array([0.3, -0.2])
    c1, c2 = np.array([-2.0, 0.0]), np.array([2.0, 0.0])
    m1, m2 = R @ c1 + shift, R @ c2 + shift
    sc = Scene.build([circle(*m1, 1.0), circle(*m2, 0.5)])
    traces = conflict_set(sc, box=([-5, -5], [5, 5]))
    assert len(traces) == 4
    consts = []
    for X in xs(traces):
        back = (X - shift) @ R  # R^T (x - shift)
        d = np.linalg.norm(back - c1, axis=1) - np.linalg.norm(back - c2, axis=1)
        assert np.ptp(d) < 1e-8
        consts.append(round(float(d[0]), 6))
    assert sorted(consts) == [-1.5, -0.5, 0.5, 1.5]


@settings(max_examples=6, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(0.3, 1.2), st.floats(0.3, 1.2))
def test_random_circle_pairs_tie_exactly(dy, r1, r2):
    sc = Scene.build([circle(-2, 0, r1), circle(2, dy, r2)])
    traces = conflict_set(sc, box=BOX, density=32, labels=False)
    assert traces
    for tr in traces:
        for cp in tr.records:
            assert max(cp.residuals()) < 1e-8


def test_line_and_circle_oriented():
    # upward line (orientation -1) and a circle above it: a parabola branch
    sc = Scene.build([line(0, 0, 1, 0, orientation=-1), circle(0, 2, 1)])
    traces = oriented_conflict_set(sc, box=([-3, -1], [3, 4]))
    good = [X for X in xs(traces) if len(X)]
    pts = np.vstack(good)
    # points with both fronts outward: y = |x - (0,2)| - 1 (focus-directrix parabola)
    on_parabola = np.abs(pts[:, 1] - (np.hypot(pts[:, 0], pts[:, 1] - 2) - 1)) < 1e-8
    assert on_parabola.any()


def test_symmetry_set_of_ellipse():
    sc = Scene.build([ParametricHypersurface.create("ellipse", [0, 0, 2, 1])])
    traces = symmetry_set(sc, box=BOX)
    branches = [tr for tr in traces if tr.ends != ("cluster", "cluster")]
    assert len(branches) == 2
    for tr in branches:
        X = np.array([cp.x for cp in tr.records])
        on_axis = np.abs(X).min(axis=1)
        assert on_axis.max() < 1e-9
        assert tr.ends == ("A2_closure", "A2_closure")
    spans = sorted(float(np.abs(np.array([cp.x for cp in tr.records])).max()) for tr in branches)
    # the medial branch ends at the curvature centres (a^2-b^2)/a and (a^2-b^2)/b
    assert np.allclose(spans, [1.5, 3.0], atol=5e-3)


def test_symmetry_set_of_circle_is_centre_cluster():
    sc = Scene.build([circle(0.5, -0.5, 1.0)])
    traces = symmetry_set(sc, box=([-2, -2], [2, 2]))
    clusters = [tr for tr in traces if tr.ends == ("cluster", "cluster")]
    assert len(clusters) == 1
    assert np.allclose(clusters[0].vertices[0][:2], [0.5, -0.5], atol=1e-8)


def test_germ_transitions_lie_on_the_evolute():
    sc = Scene.build([ParametricHypersurface.create("ellipse", [0, 0, 2, 1]), circle(0.3, 0.4, 0.2)])
    system = build_conflict_system(sc, box=BOX)
    found = []
    for tr in conflict_set(sc, box=BOX, density=48):
        found += germ_transitions(system, tr)
    assert found
    for cp in found:
        x, y = cp.x
        assert abs(abs(x / 1.5) ** (2 / 3) + abs(y / 3) ** (2 / 3) - 1) < 1e-8
        assert cp.label == "A2A1"


def test_two_spheres_sliced():
    sc = Scene.build([sphere(1, 0, 0, 0.5), sphere(-1, 0, 0, 0.5)])
    normal = np.array([0, 0, 1.0])
    traces = conflict_set(sc, box=([-3, -3, -3], [3, 3, 3]), slices=[(normal, 0.3)], density=24)
    assert traces
    for X in xs(traces):
        assert np.allclose(X[:, 2], 0.3)
        # equal radii: the conflict set is the bisecting plane x = 0 ...
        # ... or the two-sheeted hyperboloid |d1 - d2| = 1 for mixed extrema
        d1 = np.linalg.norm(X - [1, 0, 0], axis=1)
        d2 = np.linalg.norm(X - [-1, 0, 0], axis=1)
        assert np.all((np.abs(X[:, 0]) < 1e-8) | (np.abs(np.abs(d1 - d2) - 1) < 1e-8))


def test_scene_errors():
    cs = [circle(k, 0, 0.3) for k in range(4)]
    with pytest.raises(OverdeterminedSceneError):
        Scene.build(cs)
    with pytest.raises(OverdeterminedSceneError):
        build_conflict_system([SurfaceSource(c, FinslerMetric.euclidean(2)) for c in cs])
    with pytest.raises(SceneError):
        build_conflict_system(Scene.build(cs[:1]))
    with pytest.raises(SceneError):
        conflict_set(Scene.build(cs[:2]))  # no box
    with pytest.raises(SceneError):
        conflict_set(Scene.build(cs[:2]), box=([0, 0], [-1, 1]))
    with pytest.raises(SceneError):
        symmetry_set(Scene.build(cs[:2]), box=BOX)


def test_deterministic_output(four_conics_scene):
    a = conflict_set(four_conics_scene, box=BOX, labels=False)
    b = conflict_set(four_conics_scene, box=BOX, labels=False)
    assert len(a) == len(b)
    for p, q in zip(a, b):
        assert np.array_equal(p.vertices, q.vertices)


def test_jitter_is_reproducible(four_conics_scene):
    a = conflict_set(four_conics_scene, box=BOX, labels=False, jitter=3)
    b = conflict_set(four_conics_scene, box=BOX, labels=False, jitter=3)
    assert len(a) == len(b) == 4
    for p, q in zip(a, b):
        assert np.array_equal(p.vertices, q.vertices)


def test_step_settings_respected(four_conics_scene):
    cfg = ContinuationSettings(step_max=0.05, step_init=0.01)
    for tr in conflict_set(four_conics_scene, box=BOX, settings=cfg, labels=False):
        steps = np.linalg.norm(np.diff(tr.vertices, axis=0), axis=1)
        assert steps.max() <= 0.05 * 1.05
