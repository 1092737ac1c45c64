"""Desk-scale acceptance run.  Every criterion records a one-line verdict that
is printed in the terminal summary; the assertions carry the detail."""

import json
import random
import subprocess
import sys
import time
from contextlib import contextmanager
from itertools import permutations, product

import pytest

from fraisse_kit import builder
from fraisse_kit.cap import (
    amalgam_condition_failures,
    amalgamate_over_normal,
    derivation_fixed_point,
    derivation_step,
)
from fraisse_kit.chains import ChainDecomposition, decompose, normalize, refinement_embedding
from fraisse_kit.checkers import COUNTEREXAMPLE, check_jep, check_wap, get_driver
from fraisse_kit.cli import main
from fraisse_kit.core import (
    AmbientAlgebra,
    PartialIso,
    PartialIsoSystem,
    all_partial_isos,
    join_subalgebras,
)
from fraisse_kit.grid import GridPermutation, factor_grid_permutation, factorization_failures
from fraisse_kit.measured import (
    MeasuredSystem,
    RationalMeasure,
    amalgamate_measured,
    is_dyadic,
    jep_measured_systems,
    measure_preserving,
)
from fraisse_kit.sampling import random_measure, random_partial_iso, random_refinement, random_split
from fraisse_kit.shift import shift_independence, window
from fraisse_kit.trees import (
    all_automorphisms,
    all_subtrees,
    all_tree_isos,
    extend_to_tree_automorphism,
    factor_through_stabilizers,
    factorization_failures as tree_factorization_failures,
)

from conftest import VERDICTS
from helpers import (
    normal_base,
    normal_by_definition,
    stabilize_by_definition,
    stable_chain_instance,
)

pytestmark = pytest.mark.acceptance


@contextmanager
def criterion(key, title, limit=None):
    """Time the block and record PASS/FAIL; a time limit counts as a check."""
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        VERDICTS[key] = f"criterion {key}: FAIL  {title} ({type(exc).__name__})"
        raise
    elapsed = time.perf_counter() - t0
    if limit is not None and elapsed >= limit:
        VERDICTS[key] = f"criterion {key}: FAIL  {title} ({elapsed:.1f}s >= {limit}s)"
        pytest.fail(f"took {elapsed:.1f}s, limit {limit}s")
    VERDICTS[key] = f"criterion {key}: PASS  {title} ({elapsed:.1f}s)"


# --------------------------------------------------------------- 1 normal form


def _certifies(psi: PartialIso, dec: ChainDecomposition) -> bool:
    """Both normality clauses, read off the decomposition itself."""
    J = set(join_subalgebras(psi.domain, psi.range).blocks)
    ends = {ch.end for ch in dec.stable}
    outside = (set(psi.domain.blocks) | set(psi.range.blocks)) - J
    if not outside <= ends:
        return False
    placed = set()
    for chain in dec.cyclic + dec.linking:
        placed |= set(chain)
    for ch in dec.stable:
        placed |= set(ch.terms) | set(ch.free)
        if not all(b < ch.end for b in ch.free):
            return False
    return J <= placed


def _normal_form_case(psi):
    refined, dec = normalize(psi)
    refinement_embedding(psi, refined)
    assert _certifies(refined, dec)
    assert decompose(refined) == dec
    assert normal_by_definition(refined)


def test_criterion_1_normal_form():
    with criterion("1", "normal form, exhaustive <=5 atoms + 1000 random <=7", limit=60):
        cases = 0
        for n in range(1, 6):
            for psi in all_partial_isos(AmbientAlgebra.of_size(n)):
                _normal_form_case(psi)
                cases += 1
        assert cases == 7089
        rng = random.Random(1)
        for _ in range(1000):
            _normal_form_case(random_partial_iso(rng.randint(1, 7), rng))


# ------------------------------------------------------------------ 2 CAP


def test_criterion_2_cap_suite():
    with criterion("2", "amalgamation over 500 normal systems", limit=120):
        rng = random.Random(2)
        for _ in range(500):
            S = normal_base(rng, max_chains=4)
            f_l, f_r = random_refinement(S, rng), random_refinement(S, rng)
            am = amalgamate_over_normal(S, f_l, f_r)
            assert am.left.source == f_l.target and am.right.source == f_r.target
            assert am.left.target == am.system == am.right.target
            assert f_l.compose(am.left).base == f_r.compose(am.right).base
            assert amalgam_condition_failures(am.certificate) == []


# ------------------------------------------------------------ 3 derivation


def test_criterion_3_derivation_fixed_point():
    with criterion("3", "derivation fixed point, 1000 instances k<=8"):
        rng = random.Random(3)
        pruned = 0
        for _ in range(1000):
            k, X0, gl, gr, ll, lr = stable_chain_instance(rng, k_max=8)
            fp = derivation_fixed_point(X0, gl, gr, ll, lr, k, k)
            assert fp == stabilize_by_definition(X0, gl, gr, ll, lr)
            assert derivation_step(fp, gl, gr, ll, lr) == fp
            assert {i for i, _ in fp} == set(range(k)) == {j for _, j in fp}
            pruned += fp != X0
        assert pruned > 0


# ---------------------------------------------------------------- 4 measured


def _doubled_system(rng, dyadic):
    """Every atom halved, with a random partial iso that swaps or fixes the
    halves: equal masses, so the iso is measure preserving."""
    mu = random_measure(AmbientAlgebra.of_size(rng.randint(1, 3)), rng, dyadic)
    mass = {}
    pairs = []
    for a in mu.ambient:
        x, y = f"{a}.a", f"{a}.b"
        mass[x] = mass[y] = mu([a]) / 2
        if rng.random() < 0.7:
            swap = rng.random() < 0.5
            pairs.append((frozenset([x]), frozenset([y if swap else x])))
            pairs.append((frozenset([y]), frozenset([x if swap else y])))
        else:
            pairs.append((frozenset([x, y]), frozenset([x, y])))
    nu = RationalMeasure.of(mass, dyadic)
    psi = PartialIso.from_map(nu.ambient, dict(pairs))
    return MeasuredSystem(PartialIsoSystem.single(psi), nu)


def test_criterion_4_measured_suite():
    with criterion("4", "measured amalgam and JEP, 1000 instances each"):
        rng = random.Random(4)
        for i in range(1000):
            dyadic = i % 2 == 0
            mu = random_measure(AmbientAlgebra.of_size(rng.randint(1, 4)), rng, dyadic)
            # dyadic splits use equal power-of-two shares, so the amalgam stays dyadic
            nu, f = random_split(mu, rng, dyadic)
            rho, g = random_split(mu, rng, dyadic)
            am = amalgamate_measured(mu, f, nu, g, rho)
            assert sum(q for _, q in am.measure.mass) == 1
            assert measure_preserving(am.left, nu, am.measure)
            assert measure_preserving(am.right, rho, am.measure)
            assert f.compose(am.left) == g.compose(am.right)
            assert am.measure.dyadic == dyadic
            assert not dyadic or am.measure.all_dyadic()
        for i in range(1000):
            dyadic = i % 2 == 0
            S, T = _doubled_system(rng, dyadic), _doubled_system(rng, dyadic)
            U, e_S, e_T = jep_measured_systems(S, T)
            assert sum(q for _, q in U.measure.mass) == 1
            assert measure_preserving(e_S.base, S.measure, U.measure)
            assert measure_preserving(e_T.base, T.measure, U.measure)
            assert U.measure.dyadic == dyadic
            assert not dyadic or all(is_dyadic(q) for _, q in U.measure.mass)
            for psi in U.system.isos:
                assert all(U.measure(b) == U.measure(c) for b, c in psi.pairs)


# ----------------------------------------------------------------- 5 grids


def test_criterion_5_grid_factorization():
    with criterion("5", "grid factorization, 24 + 720 + 362880 permutations", limit=120):
        counts = []
        for n, m in [(2, 2), (2, 3), (3, 3)]:
            c = 0
            for perm in permutations(range(n * m)):
                rho = GridPermutation(n, m, perm)
                f1, h, f2 = factor_grid_permutation(rho)
                assert factorization_failures(rho, f1, h, f2) == []
                c += 1
            counts.append(c)
        assert counts == [24, 720, 362880]


# ----------------------------------------------------------------- 6 trees


def test_criterion_6_tree_suite():
    with criterion("6", "tree extension and stabilizer factorization at m=2"):
        small = all_subtrees(2, 2, max_nodes=4)
        extended = 0
        for S in small:
            for T in small:
                for phi in all_tree_isos(S, T):
                    g = extend_to_tree_automorphism(phi, 2)
                    assert all(g(u) == v for u, v in phi.items())
                    extended += 1
        autos = all_automorphisms(2, 2)
        trees = all_subtrees(2, 2)
        factored = 0
        for S in trees:
            for T in trees:
                common = S.nodes & T.nodes
                for phi in autos:
                    if any(phi(u) != u for u in common):
                        continue
                    fac = factor_through_stabilizers(phi, S, T)
                    assert fac.bound == 4
                    assert tree_factorization_failures(fac, phi, S, T) == []
                    factored += 1
        assert extended > 0 and factored > len(trees) ** 2


# -------------------------------------------------------- 7 class checkers


def test_criterion_7_class_checkers():
    with criterion("7", "class checker regressions", limit=300):
        report = check_jep(get_driver("equiv2"), 1, 4)
        assert report.verdict == COUNTEREXAMPLE and report.bound_independent
        for name in ("linear-order", "graph", "metric", "boolean"):
            assert check_jep(get_driver(name), 1, 3).holds, name
            assert check_jep(get_driver(name), 2, 2).holds, name
        for name, bound in (("linear-order", 3), ("boolean", 3), ("graph", 2), ("metric", 2)):
            assert check_wap(get_driver(name), 1, bound).holds, name


# --------------------------------------------------------- 8 generic builder


def _round_trip(tmp_path, trace_doc, name):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(trace_doc))
    assert main(["build-generic", "--replay", str(path)]) == 0
    reread = json.loads(path.read_text())
    driver, trace = builder.trace_from_doc(reread)
    assert builder.trace_to_doc(driver, trace) == trace_doc


def test_criterion_8a_builder_on_two_block_subalgebras(tmp_path):
    title = "Boolean builder, depth-2 conditions over <=2-block subalgebras"
    with criterion("8a", title):
        driver = builder.get_build_driver("boolean")
        schedule = builder.boolean_schedule(2, 2)
        assert len(schedule) == 99
        for name, build in (("dense", builder.build_dense_orbit_approx),
                            ("generic", builder.build_generic_approx)):
            trace = build(driver, schedule, 10000)
            assert trace.complete
            assert builder.replay(driver, trace) == []
            _round_trip(tmp_path, builder.trace_to_doc(driver, trace), name)
        out = tmp_path / "cli.json"
        assert main(["build-generic", "--class", "boolean", "--mode", "dense", "--depth", "2",
                     "--max-blocks", "2", "--out", str(out)]) == 0
        assert main(["build-generic", "--replay", str(out)]) == 0


_FULL_BUILD = """
from fraisse_kit import builder
d = builder.get_build_driver("boolean")
t = builder.build_dense_orbit_approx(d, builder.boolean_schedule(2, None), 10000)
assert t.complete and builder.replay(d, t) == []
"""


@pytest.mark.xfail(strict=True, reason="joint embeddings of all depth-2 types need "
                   "3*4**10 atoms; the build does not finish at desk scale")
def test_criterion_8b_builder_on_every_depth_2_subalgebra():
    title = "Boolean builder, depth-2 conditions over every subalgebra"
    with criterion("8b", title, limit=120):
        schedule = builder.boolean_schedule(2, None)
        assert len(schedule) == 339
        try:
            subprocess.run([sys.executable, "-c", _FULL_BUILD], check=True, timeout=120)
        except subprocess.TimeoutExpired:
            raise TimeoutError("dense build over 339 conditions did not finish in 120s")


# ------------------------------------------------------------------ 9 shift


def _joint_atoms_by_points(k, p):
    """Distinct (window, shifted window) restrictions of points, counted over
    the coordinates the two windows touch."""
    w0, w1 = window(k), window(k, p)
    coords = sorted(set(w0) | set(w1))
    seen = set()
    for x in product((0, 1), repeat=len(coords)):
        pt = dict(zip(coords, x))
        seen.add((tuple(pt[i] for i in w0), tuple(pt[i] for i in w1)))
    return len(seen)


def test_criterion_9_shift_independence():
    with criterion("9", "shift independence for k = 0, 1, 2"):
        for k in (0, 1, 2):
            depth = 2 * (2 * k + 1) + 2
            cert = shift_independence(k, depth)
            assert cert.depth == depth and cert.power == 2 * k + 1
            assert cert.product_atoms == 2 ** (2 * (2 * k + 1))
            assert _joint_atoms_by_points(k, cert.power) == cert.product_atoms
