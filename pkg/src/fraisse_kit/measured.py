"""Finite Boolean algebras carrying exact rational probability measures."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Mapping

from .chains import jep_boolean
from .core import (
    AlgebraEmbedding,
    AmbientAlgebra,
    Atom,
    DomainError,
    MalformedError,
    PartialIso,
    PartialIsoSystem,
    SystemEmbedding,
    child_labels,
    rational,
    sort_atoms,
)


def is_dyadic(q: Fraction) -> bool:
    d = q.denominator
    return d & (d - 1) == 0


@dataclass(frozen=True)
class RationalMeasure:
    ambient: AmbientAlgebra
    mass: tuple[tuple[Atom, Fraction], ...]
    dyadic: bool = False

    def __post_init__(self):
        m = {a: rational(q) for a, q in dict(self.mass).items()}
        if set(m) != set(self.ambient.atoms):
            raise MalformedError("measure must weigh every ambient atom")
        if any(q <= 0 for q in m.values()):
            raise MalformedError("atom masses must be strictly positive")
        if sum(m.values()) != 1:
            raise MalformedError("atom masses must sum to 1")
        if self.dyadic and not all(is_dyadic(q) for q in m.values()):
            raise DomainError("dyadic measure has a non-dyadic mass")
        object.__setattr__(self, "mass", tuple((a, m[a]) for a in self.ambient))
        object.__setattr__(self, "_m", m)

    @classmethod
    def of(cls, masses: Mapping[Atom, object], dyadic: bool = False) -> "RationalMeasure":
        amb = AmbientAlgebra(tuple(masses))
        return cls(amb, tuple((a, rational(q)) for a, q in masses.items()), dyadic)

    @classmethod
    def uniform(cls, ambient: AmbientAlgebra) -> "RationalMeasure":
        q = Fraction(1, len(ambient))
        return cls(ambient, tuple((a, q) for a in ambient), is_dyadic(q))

    def __call__(self, element) -> Fraction:
        return sum((self._m[a] for a in element), Fraction(0))

    def all_dyadic(self) -> bool:
        return all(is_dyadic(q) for q in self._m.values())


@dataclass(frozen=True)
class MeasuredSystem:
    system: PartialIsoSystem
    measure: RationalMeasure

    def __post_init__(self):
        if self.system.ambient != self.measure.ambient:
            raise MalformedError("measure and system live on different algebras")
        for psi in self.system.isos:
            for b, c in psi.pairs:
                if self.measure(b) != self.measure(c):
                    raise MalformedError("partial iso does not preserve mass")


def measure_preserving(emb: AlgebraEmbedding, mu: RationalMeasure, nu: RationalMeasure) -> bool:
    return all(nu(emb([a])) == mu([a]) for a in mu.ambient)


# ------------------------------------------------------------ amalgamation


@dataclass(frozen=True)
class MeasuredAmalgam:
    measure: RationalMeasure
    left: AlgebraEmbedding
    right: AlgebraEmbedding
    cells: tuple[tuple[Atom, Atom], ...]  # (left atom, right atom) per amalgam atom


def amalgamate_measured(mu: RationalMeasure, f: AlgebraEmbedding, nu: RationalMeasure,
                        g: AlgebraEmbedding, rho: RationalMeasure) -> MeasuredAmalgam:
    """Independent amalgam over (A, mu): the atom b (x) c for b, c under the
    same atom a gets mass nu(b) rho(c) / mu(a)."""
    if f.source != mu.ambient or g.source != mu.ambient:
        raise MalformedError("both embeddings must start at the shared algebra")
    if f.target != nu.ambient or g.target != rho.ambient:
        raise MalformedError("embedding targets do not match their measures")
    if not measure_preserving(f, mu, nu) or not measure_preserving(g, mu, rho):
        raise DomainError("embeddings must preserve measure")
    cells = []
    mass = {}
    for a in mu.ambient:
        for b in sort_atoms(f([a])):
            for c in sort_atoms(g([a])):
                cells.append((b, c))
                mass[str(len(cells) - 1)] = nu([b]) * rho([c]) / mu([a])
    dyadic = mu.dyadic and nu.dyadic and rho.dyadic
    if dyadic and not all(is_dyadic(q) for q in mass.values()):
        raise DomainError("dyadic amalgam would need a non-dyadic mass")
    sigma = RationalMeasure.of(mass, dyadic)
    left = {b: set() for b in nu.ambient}
    right = {c: set() for c in rho.ambient}
    for i, (b, c) in enumerate(cells):
        left[b].add(str(i))
        right[c].add(str(i))
    e = AlgebraEmbedding.from_map(nu.ambient, sigma.ambient, left)
    h = AlgebraEmbedding.from_map(rho.ambient, sigma.ambient, right)
    if not measure_preserving(e, nu, sigma) or not measure_preserving(h, rho, sigma):
        raise AssertionError("amalgam embeddings lost mass")
    if f.compose(e) != g.compose(h):
        raise AssertionError("amalgam square does not commute")
    return MeasuredAmalgam(sigma, e, h, tuple(cells))


def jep_measured_systems(S: MeasuredSystem, T: MeasuredSystem):
    """Joint embedding over the two-element algebra: product atoms with
    product masses and tensor partial isos."""
    U, e_S, e_T = jep_boolean(S.system, T.system)
    mass = {}
    for s in S.system.ambient:
        for t in T.system.ambient:
            (cell,) = e_S.base([s]) & e_T.base([t])
            mass[cell] = S.measure([s]) * T.measure([t])
    sigma = RationalMeasure.of(mass, S.measure.dyadic and T.measure.dyadic)
    out = MeasuredSystem(U, sigma)
    for emb, src in ((e_S.base, S.measure), (e_T.base, T.measure)):
        if not measure_preserving(emb, src, sigma):
            raise AssertionError("joint embedding lost mass")
    return out, e_S, e_T


# ------------------------------------------------ equal-mass full extension


@dataclass(frozen=True)
class FullExtension:
    system: MeasuredSystem
    embedding: SystemEmbedding
    grain: int  # every atom has mass 1/grain


def _is_full(psi: PartialIso) -> bool:
    return all(len(b) == 1 and len(c) == 1 for b, c in psi.pairs)


def extend_to_automorphisms(S: MeasuredSystem) -> FullExtension:
    """Split every atom into atoms of mass 1/N, N the lcm of the mass
    denominators, and complete each partial iso to a permutation sending the
    children of a block in label order onto the children of its image."""
    mu = S.measure
    N = lcm(*(q.denominator for _, q in mu.mass))
    kids = {}
    for a, q in mu.mass:
        k = int(q * N)
        kids[a] = [a] if k == 1 else child_labels(a, k)
    amb = AmbientAlgebra(tuple(x for a in mu.ambient for x in kids[a]))
    base = AlgebraEmbedding.from_map(mu.ambient, amb, {a: frozenset(kids[a]) for a in mu.ambient})
    isos = []
    for psi in S.system.isos:
        perm = {}
        for b, c in psi.pairs:
            src = sort_atoms(base(b))
            dst = sort_atoms(base(c))
            perm.update(zip(src, dst))
        isos.append(PartialIso.from_map(amb, {frozenset([x]): frozenset([y]) for x, y in perm.items()}))
    D = PartialIsoSystem(amb, tuple(isos))
    grain = Fraction(1, N)
    measure = RationalMeasure(amb, tuple((x, grain) for x in amb), mu.dyadic)
    return FullExtension(MeasuredSystem(D, measure), SystemEmbedding(base, S.system, D), N)


def amalgamate_full_systems(S: MeasuredSystem, T: MeasuredSystem, R: MeasuredSystem,
                            f: SystemEmbedding, g: SystemEmbedding):
    """Amalgam of two full equal-mass extensions: atoms b (x) c over each
    atom of S, theta_j acting as phi_j (x) chi_j."""
    for M in (S, T, R):
        if not all(_is_full(p) for p in M.system.isos):
            raise DomainError("amalgamation of full systems needs permutations")
        if len({q for _, q in M.measure.mass}) != 1:
            raise DomainError("full systems must have equal-mass atoms")
    amal = amalgamate_measured(S.measure, f.base, T.measure, g.base, R.measure)
    label = {bc: str(i) for i, bc in enumerate(amal.cells)}
    amb = amal.measure.ambient
    isos = []
    for phi, chi in zip(T.system.isos, R.system.isos):
        isos.append(PartialIso.from_map(amb, {
            frozenset([label[(b, c)]]): frozenset([label[(next(iter(phi([b]))), next(iter(chi([c]))))]])
            for b, c in amal.cells}))
    Sa = MeasuredSystem(PartialIsoSystem(amb, tuple(isos)), amal.measure)
    left = SystemEmbedding(amal.left, T.system, Sa.system)
    right = SystemEmbedding(amal.right, R.system, Sa.system)
    if f.compose(left).base != g.compose(right).base:
        raise AssertionError("amalgam embeddings disagree on the base")
    return Sa, left, right


# ------------------------------------------------------- interval algebra


@dataclass(frozen=True)
class IntervalElement:
    """Finite union of half-open intervals [p, q) inside [0, 1)."""

    intervals: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        ivs = sorted((rational(p), rational(q)) for p, q in self.intervals)
        prev = Fraction(0)
        for p, q in ivs:
            if not (0 <= p < q <= 1):
                raise MalformedError(f"bad interval [{p}, {q})")
            if p < prev:
                raise MalformedError("intervals overlap")
            prev = q
        object.__setattr__(self, "intervals", tuple(ivs))

    @property
    def mass(self) -> Fraction:
        return sum((q - p for p, q in self.intervals), Fraction(0))

    def disjoint(self, other: "IntervalElement") -> bool:
        return all(q1 <= p2 or q2 <= p1 for p1, q1 in self.intervals for p2, q2 in other.intervals)


def extend_interval_embedding(f: Mapping[Atom, IntervalElement], mu: RationalMeasure,
                              emb: AlgebraEmbedding, nu: RationalMeasure) -> dict[Atom, IntervalElement]:
    """Carry each atom b of the extension to a piece of f(a), a the atom
    below b, cutting f(a) left to right in label order of the b's."""
    if set(f) != set(mu.ambient.atoms):
        raise MalformedError("interval map must cover every atom")
    if not measure_preserving(emb, mu, nu):
        raise DomainError("extension does not preserve the measure")
    for a in mu.ambient:
        if f[a].mass != mu([a]):
            raise DomainError(f"interval image of {a} has the wrong length")
    out = {}
    for a in mu.ambient:
        pieces = list(f[a].intervals)
        for b in sort_atoms(emb([a])):
            need = nu([b])
            got = []
            while need > 0:
                p, q = pieces[0]
                take = min(need, q - p)
                got.append((p, p + take))
                need -= take
                if p + take == q:
                    pieces.pop(0)
                else:
                    pieces[0] = (p + take, q)
            out[b] = IntervalElement(tuple(got))
    return out
