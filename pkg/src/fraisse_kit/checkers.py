"""Bounded checks of the joint embedding, weak amalgamation and cofinal
amalgamation properties for classes of n-systems.

A driver knows how to enumerate the systems of its class up to a size bound,
how to look for joint embeddings and amalgams, and how to validate the
embeddings it returns.  The checkers only combine those pieces and record
what was searched, so a "holds" verdict always means "holds up to the stated
bounds".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Any, Iterable, Optional

from .cap import amalgamate_over_normal
from .chains import is_normal, jep_boolean, wap_witness
from .core import (
    AlgebraEmbedding,
    AmbientAlgebra,
    DomainError,
    PartialIso,
    PartialIsoSystem,
    Subalgebra,
    SystemEmbedding,
    all_partial_isos,
    embed_system,
    is_system_embedding,
    split_system,
)
from . import metric, relational as rel

HOLDS = "holds-up-to-bound"
COUNTEREXAMPLE = "counterexample"


@dataclass
class CheckReport:
    property: str
    n: int
    bound: int
    verdict: str
    driver: str
    search_bound: str
    checked: int = 0
    bound_independent: bool = False
    witness: list = field(default_factory=list)
    counterexample: Optional[dict] = None

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def summary(self) -> str:
        tail = " (bound-independent)" if self.bound_independent else ""
        return (f"{self.property} n={self.n} bound={self.bound} [{self.driver}]: "
                f"{self.verdict}{tail}, {self.checked} cases")


# ------------------------------------------------------------------ drivers


class ClassDriver:
    """Interface shared by the class drivers."""

    name = "abstract"
    #: True when the joint-embedding search covers every possible witness
    exhaustive_jep = False

    def systems(self, n: int, bound: int) -> list:
        raise NotImplementedError

    def size(self, S) -> int:
        raise NotImplementedError

    def describe(self, S) -> Any:
        raise NotImplementedError

    def joint_embedding(self, S, T):
        """(U, e_S, e_T) or None."""
        raise NotImplementedError

    def amalgamate(self, S, T1, e1, T2, e2):
        """(U, g1, g2) with g1 e1 = g2 e2 on S, or None."""
        raise NotImplementedError

    def wap_candidates(self, S, bound: int) -> Iterable:
        """Extensions (S_hat, i) tried in order as WAP witnesses."""
        raise NotImplementedError

    def probes(self, S) -> list:
        """Extensions (T, e) of S used to test amalgamation."""
        raise NotImplementedError

    def compose(self, e1, e2):
        """e2 after e1."""
        raise NotImplementedError

    def valid(self, e, S, T) -> bool:
        raise NotImplementedError

    def pinned_systems(self, base, n: int, bound: int) -> list:
        """Systems T with an embedding of <base, id, ..., id>."""
        raise NotImplementedError

    # cofinal subclass oracle, optional
    def in_cofinal(self, S) -> bool:
        raise DomainError(f"driver {self.name} has no cofinal subclass oracle")

    def cofinal_extension(self, S):
        raise DomainError(f"driver {self.name} has no cofinal subclass oracle")


class RelationalDriver(ClassDriver):
    exhaustive_jep = True

    def __init__(self, cls: rel.RelationalClass, cofinal: str | None = None):
        self.cls = cls
        self.name = cls.name
        self.cofinal = cofinal  # None or "whole"

    def systems(self, n, bound):
        return rel.all_systems(self.cls, n, bound)

    def size(self, S):
        return S.size

    def describe(self, S):
        return {"points": S.size, "labels": [str(a) for a in S.labels],
                "maps": [[list(p) for p in m] for m in S.isos]}

    def joint_embedding(self, S, T):
        found = rel.amalgam_search(self.cls, S, T)
        return None if found is None else (found.system, found.left, found.right)

    def amalgamate(self, S, T1, e1, T2, e2):
        forced = [(e1[x], e2[x]) for x in range(S.size)]
        found = rel.amalgam_search(self.cls, T1, T2, forced)
        return None if found is None else (found.system, found.left, found.right)

    def wap_candidates(self, S, bound):
        return rel.extensions_up_to(self.cls, S, bound)

    def probes(self, S):
        return rel.one_point_extensions(self.cls, S)

    def compose(self, e1, e2):
        return tuple(e2[v] for v in e1)

    def valid(self, e, S, T):
        return rel.system_ok(self.cls, T) and not rel.embedding_failures(self.cls, e, S, T)

    def pinned_systems(self, base, n, bound):
        B = rel.RelSystem(base.size, base.labels, tuple(tuple((x, x) for x in range(base.size))
                                                         for _ in range(n)))
        out = []
        for T in self.systems(n, bound):
            for e in permutations(range(T.size), B.size):
                if not rel.embedding_failures(self.cls, e, B, T):
                    out.append((T, e))
                    break
        return B, out

    def in_cofinal(self, S):
        if self.cofinal == "whole":
            return True
        return super().in_cofinal(S)

    def cofinal_extension(self, S):
        if self.cofinal == "whole":
            return S, tuple(range(S.size))
        return super().cofinal_extension(S)


class MetricDriver(RelationalDriver):
    """Metric spaces with distances in {1, 2}.  With cofinal="full" the
    cofinal subclass is the systems of full automorphisms; spans of those
    amalgamate by the shortest-path metric and the union of the two maps,
    truncated at 2 (truncation keeps both the metric and the isometries)."""

    def __init__(self, cofinal: str | None = None):
        super().__init__(rel.METRIC12, cofinal)

    @staticmethod
    def _full(S) -> bool:
        return all(len(m) == S.size for m in S.isos)

    def in_cofinal(self, S):
        if self.cofinal == "full":
            return self._full(S)
        return super().in_cofinal(S)

    def cofinal_extension(self, S):
        if self.cofinal == "full":
            for T, e in rel.extensions_up_to(self.cls, S, 2 * S.size):
                if self._full(T):
                    return T, e
            raise DomainError("no full extension within twice the size")
        return super().cofinal_extension(S)

    def amalgamate(self, S, T1, e1, T2, e2):
        if self.cofinal != "full" or not (self._full(T1) and self._full(T2)):
            return super().amalgamate(S, T1, e1, T2, e2)
        return self.union_amalgam(S, T1, e1, T2, e2)

    def union_amalgam(self, S, T1, e1, T2, e2):
        name1 = {e1[x]: f"s{x}" for x in range(S.size)}
        name2 = {e2[x]: f"s{x}" for x in range(S.size)}
        for i in range(T1.size):
            name1.setdefault(i, f"l{i}")
        for j in range(T2.size):
            name2.setdefault(j, f"r{j}")

        def space(T, name):
            pts = [name[i] for i in range(T.size)]
            return metric.FiniteMetricSpace.from_pairs(
                pts, {(name[x], name[y]): T.label(x, y, self.cls) for x, y in rel.pair_list(T.size)})

        B, C = space(T1, name1), space(T2, name2)
        amal = metric.amalgamate_metric(B, C)
        points = list(amal.points)
        ix = {p: i for i, p in enumerate(points)}
        isos = []
        for m1, m2 in zip(T1.maps(), T2.maps()):
            phi = {name1[x]: name1[y] for x, y in m1.items()}
            chi = {name2[x]: name2[y] for x, y in m2.items()}
            theta = metric.union_isometry(phi, B, chi, C, amal)
            isos.append(tuple(sorted((ix[x], ix[y]) for x, y in theta.items())))
        labels = tuple(min(2, amal.d(points[x], points[y])) for x, y in rel.pair_list(len(points)))
        U = rel.RelSystem(len(points), labels, tuple(isos))
        return U, tuple(ix[name1[i]] for i in range(T1.size)), tuple(ix[name2[j]] for j in range(T2.size))


def _boolean_canonical(S: PartialIsoSystem) -> tuple:
    """Least encoding of S over all renamings of its atoms."""
    atoms = list(S.ambient)
    best = None
    for perm in permutations(range(len(atoms))):
        name = dict(zip(atoms, perm))

        def enc(block):
            return tuple(sorted(name[a] for a in block))

        sig = (len(atoms), tuple(tuple(sorted((enc(b), enc(c)) for b, c in psi.pairs))
                                 for psi in S.isos))
        if best is None or sig < best:
            best = sig
    return best


class BooleanDriver(ClassDriver):
    """Finite Boolean algebras with partial automorphisms.  Witnesses are
    constructive: products for joint embedding, the normal refinement as WAP
    witness, and the tensor-atom amalgam over it."""

    name = "boolean"

    def systems(self, n, bound):
        seen = set()
        out = []
        for k in range(1, bound + 1):
            A = AmbientAlgebra.of_size(k)
            isos = list(all_partial_isos(A))
            for combo in product(isos, repeat=n):
                S = PartialIsoSystem(A, tuple(combo))
                key = _boolean_canonical(S)
                if key not in seen:
                    seen.add(key)
                    out.append((key, S))
        return [S for _, S in sorted(out, key=lambda kv: kv[0])]

    def size(self, S):
        return len(S.ambient)

    def describe(self, S):
        return [[[sorted(b), sorted(c)] for b, c in psi.pairs] for psi in S.isos]

    def joint_embedding(self, S, T):
        return jep_boolean(S, T)

    def amalgamate(self, S, T1, e1, T2, e2):
        """Amalgam over the normal witness of S when e1, e2 factor through
        it; only single-map systems are supported."""
        raise DomainError("boolean amalgams go through the normal witness")

    def wap_candidates(self, S, bound):
        if S.n != 1:
            raise DomainError("boolean WAP witnesses are for single partial isos")
        coarse, base, _ = wap_witness(S.isos[0])
        Sh = PartialIsoSystem.single(coarse)
        yield Sh, SystemEmbedding(base, S, Sh)

    def probes(self, S):
        """One-atom splits of S, each with every way of refining the lifted
        map by cutting one block pair in two."""
        out = [(S, SystemEmbedding.identity(S))]
        for a in S.ambient:
            T, e = split_system(S, a, 2)
            out.append((T, e))
            psi = T.isos[0]
            for b, c in psi.pairs:
                if len(b) < 2 or len(c) < 2:
                    continue
                bs, cs = sorted(b), sorted(c)
                for cut_b, cut_c in ((bs[:1], cs[:1]), (bs[:1], cs[-1:])):
                    b1, c1 = frozenset(cut_b), frozenset(cut_c)
                    pairs = {x: y for x, y in psi.pairs if x != b}
                    pairs[b1] = c1
                    pairs[b - b1] = c - c1
                    T2 = PartialIsoSystem.single(PartialIso.from_map(T.ambient, pairs))
                    out.append((T2, SystemEmbedding(e.base, S, T2)))
        return out

    def compose(self, e1, e2):
        return e1.compose(e2)

    def valid(self, e, S, T):
        return is_system_embedding(e.base, S, T)

    def amalgamate_over_witness(self, Sh, T1, e1, T2, e2):
        am = amalgamate_over_normal(Sh, e1, e2)
        return am.system, am.left, am.right

    def pinned_systems(self, base, n, bound):
        B = PartialIsoSystem(base, tuple(PartialIso.identity(Subalgebra.discrete(base))
                                         for _ in range(n)))
        out = []
        for T in self.systems(n, bound):
            if len(T.ambient) < len(base):
                continue
            e = embed_system(B, T)
            if e is not None:
                out.append((T, e))
        return B, out

    def fiber_product(self, B, T1, e1, T2, e2):
        """Joint embedding of T1, T2 agreeing on a pinned base with identity
        maps: atoms are pairs lying over the same base atom."""
        cells = [(s, t) for s in T1.ambient for t in T2.ambient
                 if e1.base.preimage_atom(s) == e2.base.preimage_atom(t)]
        name = {st: str(i) for i, st in enumerate(cells)}
        amb = AmbientAlgebra(tuple(name.values()))

        def prod(x, y):
            return frozenset(name[(s, t)] for s in x for t in y if (s, t) in name)

        isos = []
        for psi, phi in zip(T1.isos, T2.isos):
            mapping = {}
            for b in psi.domain.blocks:
                for d in phi.domain.blocks:
                    blk = prod(b, d)
                    if blk:
                        mapping[blk] = prod(psi(b), phi(d))
            isos.append(PartialIso.from_map(amb, mapping))
        U = PartialIsoSystem(amb, tuple(isos))
        g1 = AlgebraEmbedding.from_map(T1.ambient, amb, {s: prod([s], T2.ambient.atoms) for s in T1.ambient})
        g2 = AlgebraEmbedding.from_map(T2.ambient, amb, {t: prod(T1.ambient.atoms, [t]) for t in T2.ambient})
        return U, SystemEmbedding(g1, T1, U), SystemEmbedding(g2, T2, U)

    def in_cofinal(self, S):
        return S.n == 1 and is_normal(S.isos[0])

    def cofinal_extension(self, S):
        return next(iter(self.wap_candidates(S, 0)))


def get_driver(name: str, cofinal: str | None = None) -> ClassDriver:
    table = {"equiv2": rel.EQUIV2, "linear-order": rel.LINEAR_ORDER,
             "graph": rel.GRAPH, "metric": rel.METRIC12}
    if name == "boolean":
        return BooleanDriver()
    if name == "metric":
        return MetricDriver(cofinal)
    if name in table:
        return RelationalDriver(table[name], cofinal)
    raise DomainError(f"unknown class {name!r}")


CLASS_NAMES = ("equiv2", "linear-order", "graph", "metric", "boolean")


# ----------------------------------------------------------------- checkers


def _jep_bound_text(driver) -> str:
    if driver.exhaustive_jep:
        return "targets of size |S|+|T| (every joint embedding restricts to one)"
    return "constructive product witness, validated"


def check_jep(driver: ClassDriver, n: int, bound: int, pinned_base=None) -> CheckReport:
    """Every pair of n-systems up to the bound embeds jointly (into a common
    system agreeing on the pinned base, when one is given)."""
    prop = "CJEP" if pinned_base is not None else "JEP"
    report = CheckReport(prop, n, bound, HOLDS, driver.name, _jep_bound_text(driver))
    if pinned_base is not None:
        return _check_cjep(driver, n, bound, pinned_base, report)
    systems = driver.systems(n, bound)
    for i, S in enumerate(systems):
        for T in systems[i:]:
            report.checked += 1
            found = driver.joint_embedding(S, T)
            if found is None:
                report.verdict = COUNTEREXAMPLE
                report.bound_independent = driver.exhaustive_jep
                report.counterexample = {"S": driver.describe(S), "T": driver.describe(T)}
                report.witness = []
                return report
            U, eS, eT = found
            if not (driver.valid(eS, S, U) and driver.valid(eT, T, U)):
                raise AssertionError("joint embedding failed validation")
            report.witness.append({"S": i, "T": systems.index(T), "size": driver.size(U)})
    return report


def _check_cjep(driver, n, bound, base, report: CheckReport) -> CheckReport:
    B, pinned = driver.pinned_systems(base, n, bound)
    for i, (S, eS) in enumerate(pinned):
        for T, eT in pinned[i:]:
            report.checked += 1
            if isinstance(driver, BooleanDriver):
                found = driver.fiber_product(B, S, eS, T, eT)
            else:
                found = driver.amalgamate(B, S, eS, T, eT)
            if found is None:
                report.verdict = COUNTEREXAMPLE
                report.counterexample = {"S": driver.describe(S), "T": driver.describe(T)}
                return report
            U, g1, g2 = found
            if not (driver.valid(g1, S, U) and driver.valid(g2, T, U)):
                raise AssertionError("pinned joint embedding failed validation")
            if driver.compose(eS, g1) != driver.compose(eT, g2):
                raise AssertionError("pinned joint embedding moves the base")
            report.witness.append({"S": driver.describe(S), "T": driver.describe(T),
                                   "size": driver.size(U)})
    return report


def _amalgamates(driver, S, Sh, i, probes) -> Optional[tuple]:
    """First pair of probe extensions of S_hat with no amalgam over S."""
    for a, (T1, e1) in enumerate(probes):
        for T2, e2 in probes[a:]:
            if isinstance(driver, BooleanDriver):
                U, g1, g2 = driver.amalgamate_over_witness(Sh, T1, e1, T2, e2)
            else:
                found = driver.amalgamate(S, T1, driver.compose(i, e1), T2, driver.compose(i, e2))
                if found is None:
                    return T1, T2
                U, g1, g2 = found
            if not (driver.valid(g1, T1, U) and driver.valid(g2, T2, U)):
                raise AssertionError("amalgam failed validation")
            if driver.compose(driver.compose(i, e1), g1) != driver.compose(driver.compose(i, e2), g2):
                raise AssertionError("amalgam does not commute over S")
    return None


def check_wap(driver: ClassDriver, n: int, bound: int) -> CheckReport:
    """For every system S up to the bound, find an extension S_hat within
    2|S| such that every pair of probe extensions of S_hat amalgamates over S."""
    report = CheckReport("WAP", n, bound, HOLDS, driver.name,
                         "witness extensions up to 2|S|; probes are one-step extensions")
    for S in driver.systems(n, bound):
        report.checked += 1
        last = None
        for Sh, i in driver.wap_candidates(S, 2 * driver.size(S)):
            if not driver.valid(i, S, Sh):
                raise AssertionError("WAP candidate is not an extension")
            last = _amalgamates(driver, S, Sh, i, driver.probes(Sh))
            if last is None:
                report.witness.append({"S": driver.describe(S), "S_hat": driver.describe(Sh)})
                break
        else:
            report.verdict = COUNTEREXAMPLE
            report.counterexample = {"S": driver.describe(S),
                                     "T1": driver.describe(last[0]) if last else None,
                                     "T2": driver.describe(last[1]) if last else None}
            return report
    return report


def check_cap(driver: ClassDriver, n: int, bound: int) -> CheckReport:
    """(a) every system up to the bound embeds into a member of the cofinal
    subclass; (b) probe extensions of members that are members again
    amalgamate over the member."""
    report = CheckReport("CAP", n, bound, HOLDS, driver.name,
                         "cofinal witnesses from the driver; probes are one-step extensions")
    members = []
    for S in driver.systems(n, bound):
        report.checked += 1
        T, e = driver.cofinal_extension(S)
        if not driver.in_cofinal(T) or not driver.valid(e, S, T):
            report.verdict = COUNTEREXAMPLE
            report.counterexample = {"clause": "a", "S": driver.describe(S)}
            return report
        members.append(T)
    seen = []
    for T in members:
        if any(T == U for U in seen):
            continue
        seen.append(T)
        ident = driver.compose(_identity(driver, T), _identity(driver, T))
        probes = [(U, e) for U, e in driver.probes(T) if driver.in_cofinal(U)]
        bad = _amalgamates(driver, T, T, ident, probes)
        if bad is not None:
            report.verdict = COUNTEREXAMPLE
            report.counterexample = {"clause": "b", "S": driver.describe(T),
                                     "T1": driver.describe(bad[0]), "T2": driver.describe(bad[1])}
            return report
        report.witness.append({"member": driver.describe(T), "spans": len(probes) * (len(probes) + 1) // 2})
    return report


def _identity(driver, S):
    if isinstance(driver, BooleanDriver):
        return SystemEmbedding.identity(S)
    return tuple(range(S.size))
