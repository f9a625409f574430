"""Conflict sets of wavefronts from hypersurfaces under quadratic Finsler metrics,
with kite curves, center sets and germ classification."""
from .center import (
    ChordImagePoint,
    ParallelPair,
    ParallelTuple,
    center_set,
    center_symmetry_set,
    gauss_image,
    normal_chord_set,
    parallel_pairs,
    parallel_tuples,
    weighted_center_set,
)
from .classify import (
    GermLabel,
    PartitionTable,
    classify_germ_1d,
    classify_germ_2d,
    germ_label,
    multigerm_label,
    new_cases,
    nice_dimension_check,
    partition_table,
    transversality_margin_chords,
    transversality_margin_conflict,
)
from .conflict import (
    ConflictPoint,
    build_conflict_system,
    conflict_set,
    oriented_conflict_set,
    symmetry_set,
)
from .errors import *  # noqa: F401,F403
from .io import export_csv, export_obj, export_svg, load_scene, loads_scene
from .kite import KitePoint, gauss_image_of_lift, kite_curve, kite_point
from .propagation import FoldFamily, SurfaceSource, momental_front, time_graph_point, travel_time_jet
from .scene import (
    ContinuationSettings,
    FinslerMetric,
    ParametricHypersurface,
    Scene,
    SceneOptions,
    evaluate_jet,
    front_velocity,
    unit_conormal,
)
from .solver import NonlinearSystem, TraceResult, grid_seed, newton_refine, slice_surface, trace_curve

__version__ = "0.1.0"
