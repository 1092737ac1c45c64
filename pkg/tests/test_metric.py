import random
from fractions import Fraction
from itertools import permutations

import pytest
from hypothesis import given, settings, strategies as st

from fraisse_kit.core import DomainError, MalformedError
from fraisse_kit.metric import (
    FiniteMetricSpace,
    MetricSystem,
    amalgamate_metric,
    isometry_failures,
    jep_metric_systems,
    metric_embedding_failures,
    union_isometry,
)
from fraisse_kit.sampling import random_metric_space


def space(points, pairs):
    return FiniteMetricSpace.from_pairs(tuple(points), pairs)


def test_triangle_inequality_is_enforced():
    with pytest.raises(MalformedError):
        space("abc", {("a", "b"): 1, ("b", "c"): 1, ("a", "c"): 3})
    with pytest.raises(MalformedError):
        space("ab", {})
    with pytest.raises(MalformedError):
        FiniteMetricSpace((), ())


def test_systems_hold_partial_isometries():
    X = space("abc", {("a", "b"): 1, ("b", "c"): 2, ("a", "c"): 2})
    with pytest.raises(MalformedError):
        MetricSystem(X, ((("a", "b"), ("b", "c")),))
    MetricSystem(X, ((("a", "c"), ("c", "a")),))


def test_two_points_join_at_distance_one():
    one = MetricSystem(space(["p"], {}), ((),))
    U, e_S, e_T = jep_metric_systems(one, one)
    assert U.space.d(e_S["p"], e_T["p"]) == 1


def test_cross_distance_exceeds_both_diameters():
    S = MetricSystem(space("ab", {("a", "b"): 3}), ((("a", "b"), ("b", "a")),))
    T = MetricSystem(space("xy", {("x", "y"): 2}), ((),))
    U, e_S, e_T = jep_metric_systems(S, T)
    assert {U.space.d(e_S[s], e_T[t]) for s in "ab" for t in "xy"} == {Fraction(6)}
    assert metric_embedding_failures(e_S, S, U) == []
    assert metric_embedding_failures(e_T, T, U) == []


def test_joint_embedding_needs_equal_arity():
    S = MetricSystem(space("a", {}), ((),))
    T = MetricSystem(space("a", {}), ((), ()))
    with pytest.raises(DomainError):
        jep_metric_systems(S, T)


def test_amalgam_over_itself():
    A = space("xy", {("x", "y"): 2})
    assert amalgamate_metric(A, A) == A


def test_single_shared_point():
    B = space("zb", {("z", "b"): 1})
    C = space("zc", {("z", "c"): 2})
    assert amalgamate_metric(B, C).d("b", "c") == 3


def test_two_paths_take_the_shorter():
    B = space(["z1", "z2", "b"], {("z1", "z2"): 5, ("b", "z1"): 1, ("b", "z2"): 6})
    C = space(["z1", "z2", "c"], {("z1", "z2"): 5, ("z1", "c"): 6, ("z2", "c"): 1})
    assert amalgamate_metric(B, C).d("b", "c") == 7


def test_disagreeing_overlap_is_refused():
    B = space("xyb", {("x", "y"): 1, ("x", "b"): 1, ("y", "b"): 1})
    C = space("xyc", {("x", "y"): 2, ("x", "c"): 1, ("y", "c"): 1})
    with pytest.raises(DomainError):
        amalgamate_metric(B, C)


def test_identity_maps_glue_to_identity():
    B = space("zb", {("z", "b"): 1})
    C = space("zc", {("z", "c"): 2})
    theta = union_isometry({"z": "z", "b": "b"}, B, {"z": "z", "c": "c"}, C)
    assert theta == {"z": "z", "b": "b", "c": "c"}


def test_swap_of_equidistant_points_glues():
    B = space("zab", {("z", "a"): 2, ("z", "b"): 2, ("a", "b"): 1})
    C = space("zc", {("z", "c"): 3})
    theta = union_isometry({"z": "z", "a": "b", "b": "a"}, B, {"z": "z", "c": "c"}, C)
    assert isometry_failures(amalgamate_metric(B, C), theta) == []


def test_maps_must_agree_on_shared_points():
    B = space("zwb", {("z", "w"): 1, ("z", "b"): 1, ("w", "b"): 1})
    C = space("zwc", {("z", "w"): 1, ("z", "c"): 1, ("w", "c"): 1})
    with pytest.raises(DomainError):
        union_isometry({"z": "w", "w": "z"}, B, {"z": "z", "w": "w"}, C)


def _glued(rng):
    """Two random spaces sharing the points of a random common subspace."""
    while True:
        A = random_metric_space(rng.randint(1, 3), rng)
        B = random_metric_space(len(A.points) + rng.randint(0, 2), rng, values=(1, 2, 3))
        C = random_metric_space(len(A.points) + rng.randint(0, 2), rng, values=(1, 2, 3))
        pts_b = A.points + tuple(f"b{i}" for i in range(len(B.points) - len(A.points)))
        pts_c = A.points + tuple(f"c{i}" for i in range(len(C.points) - len(A.points)))
        pairs_b = {(x, y): B.dist[i][j] for i, x in enumerate(pts_b) for j, y in enumerate(pts_b) if i < j}
        pairs_c = {(x, y): C.dist[i][j] for i, x in enumerate(pts_c) for j, y in enumerate(pts_c) if i < j}
        for i, x in enumerate(A.points):
            for j, y in enumerate(A.points):
                if i < j:
                    pairs_b[(x, y)] = pairs_c[(x, y)] = A.dist[i][j]
        try:
            return space(pts_b, pairs_b), space(pts_c, pairs_c)
        except MalformedError:
            continue


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_amalgam_is_a_metric_extending_both_sides(seed):
    B, C = _glued(random.Random(seed))
    D = amalgamate_metric(B, C)
    assert D.restrict(B.points) == B
    assert D.restrict(C.points) == C
    for x, y, z in permutations(D.points, 3):
        assert D.d(x, z) <= D.d(x, y) + D.d(y, z)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_glued_isometries_preserve_every_distance(seed):
    rng = random.Random(seed)
    B, C = _glued(rng)
    shared = [p for p in B.points if p in C]
    D = amalgamate_metric(B, C)
    # isometries of each side fixing the shared points
    def isometries(X):
        free = [p for p in X.points if p not in shared]
        out = []
        for perm in permutations(free):
            m = {p: p for p in shared}
            m.update(zip(free, perm))
            if not isometry_failures(X, m):
                out.append(m)
        return out
    phi = rng.choice(isometries(B))
    chi = rng.choice(isometries(C))
    theta = union_isometry(phi, B, chi, C, D)
    assert isometry_failures(D, theta) == []
    assert set(theta) == set(D.points)
