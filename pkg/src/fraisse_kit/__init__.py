"""Finite combinatorics of partial automorphisms in Fraisse classes: normal
forms and amalgamation for partial isos of finite Boolean algebras, measured
and metric amalgams, tree extensions, bounded class checks and stagewise
generic constructions."""

from .core import (
    AlgebraEmbedding,
    AmbientAlgebra,
    DomainError,
    InvariantViolation,
    MalformedError,
    PartialIso,
    PartialIsoSystem,
    Subalgebra,
    SystemEmbedding,
    embed_join_system,
    embed_system,
)
from .chains import decompose, is_normal, jep_boolean, normalize, wap_witness
from .cap import amalgamate_over_normal, derivation_fixed_point
from .measured import RationalMeasure, MeasuredSystem, amalgamate_measured, jep_measured_systems
from .metric import FiniteMetricSpace, MetricSystem, amalgamate_metric, jep_metric_systems
from .trees import TreeIso, extend_to_tree_automorphism, factor_through_stabilizers
from .grid import GridPermutation, factor_grid_permutation
from .shift import shift_independence
from .checkers import check_cap, check_jep, check_wap, get_driver
from .builder import build_dense_orbit_approx, build_generic_approx, replay

__all__ = [name for name in dir() if not name.startswith("_")]
