import random

import pytest
from hypothesis import given, settings, strategies as st

from fraisse_kit.cap import (
    amalgam_condition_failures,
    amalgamate_over_normal,
    derivation_fixed_point,
    derivation_step,
    largest_valid_cells,
)
from fraisse_kit.chains import wap_witness
from fraisse_kit.core import (
    AlgebraEmbedding,
    DomainError,
    InvariantViolation,
    MalformedError,
    PartialIsoSystem,
    SystemEmbedding,
    split_system,
)
from fraisse_kit.sampling import random_partial_iso, random_refinement

from helpers import (
    normal_base,
    derive_by_definition,
    iso,
    stabilize_by_definition,
    stable_chain_instance,
    system,
)

F = frozenset


def _extension(S, atom, mapping):
    """Split ``atom`` of S in two and impose ``mapping`` on the result."""
    T, f = split_system(S, atom, 2)
    T2 = PartialIsoSystem.single(iso(T.ambient.atoms, mapping))
    return f.compose(SystemEmbedding(AlgebraEmbedding.identity(T.ambient), T, T2))


# ------------------------------------------------------------- derivation


def test_vacuous_guard_leaves_y_unchanged():
    Y = {(0, 1), (1, 0)}
    assert derivation_step(Y, [{0}], [{0}], [{1}], [{1}]) == F(Y)


def test_two_by_two_window_example():
    # each pair's own window lies in Y, so nothing is pruned
    Y = {(0, 0), (0, 1)}
    out = derivation_step(Y, [{0}, {1}], [{0}, {1}], [{0}, {1}], [{0}, {1}])
    assert out == F(Y)


def test_missing_window_prunes():
    Y = {(0, 0), (1, 1)}
    out = derivation_step(Y, [{0}], [{0}], [{1}], [{0}])
    assert out == F({(1, 1)})


def test_full_grid_is_already_stable():
    k = 4
    grid = F((i, j) for i in range(k) for j in range(k))
    gl = [{0}, {1}]
    dl = [{2}, {3}]
    assert derivation_fixed_point(grid, gl, gl, dl, dl, k, k) == grid


def test_bad_partition_data_is_rejected():
    with pytest.raises(MalformedError):
        derivation_fixed_point({(0, 0)}, [{0}], [{0}], [{0}, {1}], [{0}], 2, 2)
    with pytest.raises(MalformedError):
        derivation_fixed_point({(0, 0)}, [{0}, {0, 1}], [{0}, {1}], [{0}, {1}], [{0}, {1}], 2, 2)


def test_empty_row_is_an_invariant_violation():
    with pytest.raises(InvariantViolation):
        derivation_fixed_point({(0, 0)}, [{0}], [{0}], [{1}], [{1}], 2, 2)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fixed_point_matches_the_set_builder_oracle(seed):
    k, X0, gl, gr, ll, lr = stable_chain_instance(random.Random(seed))
    fp = derivation_fixed_point(X0, gl, gr, ll, lr, k, k)
    assert fp == stabilize_by_definition(X0, gl, gr, ll, lr)
    assert derivation_step(fp, gl, gr, ll, lr) == fp
    assert {i for i, _ in fp} == set(range(k)) == {j for _, j in fp}


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sets(st.tuples(st.integers(0, 5), st.integers(0, 5))))
def test_step_shrinks_and_matches_definition(seed, Y):
    _, _, gl, gr, ll, lr = stable_chain_instance(random.Random(seed), k_max=6)
    out = derivation_step(Y, gl, gr, ll, lr)
    assert out <= F(Y)
    assert out == derive_by_definition(F(Y), gl, gr, ll, lr)


# ---------------------------------------------------------- amalgamation


def test_degenerate_amalgam_is_the_base():
    S = system("012", {"0": "1", "1": "2", "2": "0"})
    ident = SystemEmbedding.identity(S)
    am = amalgamate_over_normal(S, ident, ident)
    assert len(am.system.ambient) == 3
    assert am.left.compose(SystemEmbedding.identity(am.system)).base == am.left.base
    assert am.left.base == am.right.base


def test_identity_and_swap_splits_give_a_tensor_product():
    S = system("0", {"0": "0"})
    left = _extension(S, "0", {("0.a",): ("0.a",), ("0.b",): ("0.b",)})
    right = _extension(S, "0", {("0.a",): ("0.b",), ("0.b",): ("0.a",)})
    am = amalgamate_over_normal(S, left, right)
    # tensor atoms (x, y) in row-major order: 0=aa 1=ab 2=ba 3=bb
    assert am.system == system("0123", {"0": "1", "1": "0", "2": "3", "3": "2"})
    assert am.left.base(["0.a"]) == F("01")
    assert am.right.base(["0.a"]) == F("02")
    assert left.compose(am.left).base == right.compose(am.right).base


def test_stable_chain_amalgam_satisfies_the_block_conditions():
    S = system("012", {"0": "01", "12": "2"})
    rng = random.Random(3)
    for _ in range(40):
        am = amalgamate_over_normal(S, random_refinement(S, rng), random_refinement(S, rng))
        cert = am.certificate
        assert amalgam_condition_failures(cert) == []
        assert cert.cells <= largest_valid_cells(cert)


def test_non_normal_base_is_refused():
    S = system("012", {"0": "2", "12": "01"})
    ident = SystemEmbedding.identity(S)
    with pytest.raises(DomainError, match="normalize"):
        amalgamate_over_normal(S, ident, ident)


def test_base_must_be_its_own_join():
    S = system("0123", {"01": "23", "23": "01"})
    ident = SystemEmbedding.identity(S)
    with pytest.raises(DomainError):
        amalgamate_over_normal(S, ident, ident)


def test_condition_checker_flags_empty_rows():
    S = system("0", {"0": "0"})
    left = _extension(S, "0", {("0.a",): ("0.a",), ("0.b",): ("0.b",)})
    right = _extension(S, "0", {("0.a",): ("0.b",), ("0.b",): ("0.a",)})
    cert = amalgamate_over_normal(S, left, right).certificate
    row = {c for c in cert.cells if c[0] == "0.a"}
    problems = amalgam_condition_failures(cert, cert.cells - row)
    assert any(p.startswith("(a) row 0.a") for p in problems)
    problems = amalgam_condition_failures(cert, cert.cells - {("0.a", "0.a")})
    assert any(p.startswith("(c)") for p in problems)


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_amalgam_squares_commute_and_conditions_hold(seed):
    rng = random.Random(seed)
    S = normal_base(rng)
    f_l, f_r = random_refinement(S, rng), random_refinement(S, rng)
    am = amalgamate_over_normal(S, f_l, f_r)
    assert am.left.source == f_l.target and am.right.source == f_r.target
    assert am.left.target == am.system == am.right.target
    assert f_l.compose(am.left).base == f_r.compose(am.right).base
    assert amalgam_condition_failures(am.certificate) == []
    assert am.certificate.cells <= largest_valid_cells(am.certificate)
