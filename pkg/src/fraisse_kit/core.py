"""Finite Boolean algebras as partitions of labeled atoms, partial isomorphisms
between subalgebras, systems of such maps, and the embeddings between them.

Atoms are strings carrying split lineage: splitting ``"3"`` yields ``"3.a"``,
``"3.b"`` and so on, so an atom's descendants are exactly the labels that
extend it.  All values are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

Atom = str
Block = frozenset


class MalformedError(ValueError):
    """Input data violates a structural invariant."""


class DomainError(ValueError):
    """A well-formed input lies outside an operation's domain."""


class InvariantViolation(AssertionError):
    """An internal certificate failed; this indicates a defect, not bad input."""


# ---------------------------------------------------------------- rationals


def rational(value) -> Fraction:
    """Parse ``"p/q"``, ints or Fractions into an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise MalformedError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise MalformedError(f"not a rational: {value!r}") from exc
    raise MalformedError(f"not a rational: {value!r}")


def rational_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


# ------------------------------------------------------------------- labels


def _component_key(part: str):
    if part.isdigit():
        return (0, int(part), "")
    return (1, len(part), part)


def label_key(label: Atom) -> tuple:
    """Canonical order: componentwise, numbers before letters, shorter first."""
    return tuple(_component_key(p) for p in label.split("."))


def child_suffix(i: int) -> str:
    """Bijective base-26 letters: 0->a, 25->z, 26->aa; sorts by (len, str)."""
    out = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        out = chr(97 + r) + out
    return out


def child_labels(label: Atom, k: int) -> list[Atom]:
    return [f"{label}.{child_suffix(i)}" for i in range(k)]


def descends(label: Atom, ancestor: Atom) -> bool:
    return label == ancestor or label.startswith(ancestor + ".")


def block_key(block: Iterable[Atom]) -> tuple:
    return tuple(sorted(label_key(a) for a in block))


def sort_atoms(atoms: Iterable[Atom]) -> tuple[Atom, ...]:
    return tuple(sorted(atoms, key=label_key))


def sort_blocks(blocks: Iterable[Iterable[Atom]]) -> tuple[Block, ...]:
    return tuple(sorted((frozenset(b) for b in blocks), key=block_key))


def show_block(block: Iterable[Atom]) -> str:
    return "{" + ",".join(sort_atoms(block)) + "}"


# ---------------------------------------------------------------- algebras


@dataclass(frozen=True)
class AmbientAlgebra:
    atoms: tuple[Atom, ...]

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise MalformedError("ambient algebra needs at least one atom")
        if len(set(atoms)) != len(atoms):
            raise MalformedError("duplicate atom labels")
        for a in atoms:
            if not isinstance(a, str) or not a or any(not p for p in a.split(".")):
                raise MalformedError(f"bad atom label {a!r}")
        object.__setattr__(self, "atoms", sort_atoms(atoms))
        object.__setattr__(self, "_set", frozenset(atoms))

    @classmethod
    def of_size(cls, n: int) -> "AmbientAlgebra":
        return cls(tuple(str(i) for i in range(n)))

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self) -> Iterator[Atom]:
        return iter(self.atoms)

    def __contains__(self, a) -> bool:
        return a in self._set


@dataclass(frozen=True)
class Subalgebra:
    ambient: AmbientAlgebra
    blocks: tuple[Block, ...]

    def __post_init__(self):
        blocks = sort_blocks(self.blocks)
        seen: set = set()
        for b in blocks:
            if not b:
                raise MalformedError("empty block")
            if seen & b:
                raise MalformedError("overlapping blocks")
            seen |= b
        if seen != set(self.ambient.atoms):
            raise MalformedError("blocks do not cover the ambient atoms")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def discrete(cls, ambient: AmbientAlgebra) -> "Subalgebra":
        return cls(ambient, tuple(frozenset([a]) for a in ambient))

    @classmethod
    def trivial(cls, ambient: AmbientAlgebra) -> "Subalgebra":
        return cls(ambient, (frozenset(ambient.atoms),))

    def block_of(self, atom: Atom) -> Block:
        for b in self.blocks:
            if atom in b:
                return b
        raise KeyError(atom)

    def is_element(self, element: Iterable[Atom]) -> bool:
        element = frozenset(element)
        return all(b <= element or not (b & element) for b in self.blocks)

    def coarsens(self, other: "Subalgebra") -> bool:
        """True when every block of ``other`` lies inside a block of self."""
        return all(self.is_element(b) for b in other.blocks) and all(
            any(c <= b for b in self.blocks) for c in other.blocks
        )


def join_subalgebras(B: Subalgebra, C: Subalgebra) -> Subalgebra:
    """Coarsest common refinement of two partitions of one ambient."""
    if B.ambient != C.ambient:
        raise MalformedError("subalgebras live in different ambients")
    parts = [b & c for b in B.blocks for c in C.blocks]
    return Subalgebra(B.ambient, tuple(p for p in parts if p))


@dataclass(frozen=True)
class PartialIso:
    domain: Subalgebra
    range: Subalgebra
    pairs: tuple[tuple[Block, Block], ...]

    def __post_init__(self):
        if self.domain.ambient != self.range.ambient:
            raise MalformedError("domain and range in different ambients")
        pairs = tuple(sorted(((frozenset(b), frozenset(c)) for b, c in self.pairs),
                             key=lambda bc: block_key(bc[0])))
        dom = [b for b, _ in pairs]
        ran = [c for _, c in pairs]
        if sorted(dom, key=block_key) != list(self.domain.blocks):
            raise MalformedError("map is not defined exactly on the domain blocks")
        if sorted(ran, key=block_key) != list(self.range.blocks):
            raise MalformedError("map is not onto the range blocks")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "_fwd", dict(pairs))
        object.__setattr__(self, "_bwd", {c: b for b, c in pairs})

    @classmethod
    def from_map(cls, ambient: AmbientAlgebra, mapping: Mapping) -> "PartialIso":
        pairs = tuple((frozenset(b), frozenset(c)) for b, c in mapping.items())
        return cls(Subalgebra(ambient, tuple(b for b, _ in pairs)),
                   Subalgebra(ambient, tuple(c for _, c in pairs)), pairs)

    @classmethod
    def identity(cls, sub: Subalgebra) -> "PartialIso":
        return cls(sub, sub, tuple((b, b) for b in sub.blocks))

    @property
    def ambient(self) -> AmbientAlgebra:
        return self.domain.ambient

    def __call__(self, block: Block) -> Block:
        return self._fwd[frozenset(block)]

    def inverse_of(self, block: Block) -> Block:
        return self._bwd[frozenset(block)]

    def inverse(self) -> "PartialIso":
        return PartialIso(self.range, self.domain, tuple((c, b) for b, c in self.pairs))

    def image(self, element: Iterable[Atom]) -> frozenset:
        """Image of an element of the domain subalgebra."""
        element = frozenset(element)
        out: set = set()
        for b, c in self.pairs:
            if b <= element:
                out |= c
            elif b & element:
                raise DomainError("element is not in the domain subalgebra")
        return frozenset(out)


@dataclass(frozen=True)
class PartialIsoSystem:
    ambient: AmbientAlgebra
    isos: tuple[PartialIso, ...]

    def __post_init__(self):
        isos = tuple(self.isos)
        if not isos:
            raise MalformedError("a system needs at least one partial iso")
        for psi in isos:
            if not isinstance(psi, PartialIso):
                raise MalformedError("system entries must be PartialIso values")
            if psi.ambient != self.ambient:
                raise MalformedError("partial iso over a different ambient")
        object.__setattr__(self, "isos", isos)

    @classmethod
    def single(cls, psi: PartialIso) -> "PartialIsoSystem":
        return cls(psi.ambient, (psi,))

    @property
    def n(self) -> int:
        return len(self.isos)

    def __len__(self) -> int:
        return len(self.ambient)


def trivial_system(n: int = 1, label: Atom = "0") -> PartialIsoSystem:
    amb = AmbientAlgebra((label,))
    return PartialIsoSystem(amb, tuple(PartialIso.identity(Subalgebra.trivial(amb))
                                       for _ in range(n)))


# --------------------------------------------------------------- embeddings


@dataclass(frozen=True)
class AlgebraEmbedding:
    """Unital embedding: each source atom goes to a nonempty set of target
    atoms, the images partitioning the target."""

    source: AmbientAlgebra
    target: AmbientAlgebra
    image: tuple[tuple[Atom, frozenset], ...]

    def __post_init__(self):
        img = {a: frozenset(t) for a, t in dict(self.image).items()}
        if set(img) != set(self.source.atoms):
            raise MalformedError("embedding must send every source atom somewhere")
        seen: set = set()
        for a in self.source:
            t = img[a]
            if not t:
                raise MalformedError(f"atom {a} has empty image")
            if seen & t:
                raise MalformedError("atom images overlap")
            if not t <= set(self.target.atoms):
                raise MalformedError("image outside the target")
            seen |= t
        if seen != set(self.target.atoms):
            raise MalformedError("embedding is not unital")
        object.__setattr__(self, "image", tuple((a, img[a]) for a in self.source))
        object.__setattr__(self, "_img", img)
        object.__setattr__(self, "_pre", {t: a for a, ts in img.items() for t in ts})

    @classmethod
    def from_map(cls, source, target, mapping: Mapping) -> "AlgebraEmbedding":
        return cls(source, target, tuple((a, frozenset(t)) for a, t in mapping.items()))

    @classmethod
    def identity(cls, ambient: AmbientAlgebra) -> "AlgebraEmbedding":
        return cls(ambient, ambient, tuple((a, frozenset([a])) for a in ambient))

    @classmethod
    def lineage(cls, source: AmbientAlgebra, target: AmbientAlgebra) -> "AlgebraEmbedding":
        """Embedding of an algebra into one of its split refinements."""
        mapping = {a: frozenset(t for t in target if descends(t, a)) for a in source}
        return cls.from_map(source, target, mapping)

    def __call__(self, element: Iterable[Atom]) -> frozenset:
        out: set = set()
        for a in element:
            out |= self._img[a]
        return frozenset(out)

    def preimage_atom(self, target_atom: Atom) -> Atom:
        return self._pre[target_atom]

    def compose(self, after: "AlgebraEmbedding") -> "AlgebraEmbedding":
        """``after`` applied to the result of ``self``."""
        if after.source != self.target:
            raise MalformedError("embeddings do not compose")
        return AlgebraEmbedding.from_map(self.source, after.target,
                                         {a: after(t) for a, t in self._img.items()})


def embedding_violations(base: AlgebraEmbedding, source: PartialIsoSystem,
                         target: PartialIsoSystem) -> list[str]:
    """Reasons ``base`` fails to carry ``source`` into ``target`` (empty if valid)."""
    problems = []
    if base.source != source.ambient or base.target != target.ambient:
        return ["algebra embedding does not match the system ambients"]
    if source.n != target.n:
        return ["systems have different arity"]
    for i, (psi, phi) in enumerate(zip(source.isos, target.isos)):
        for b, c in psi.pairs:
            fb, fc = base(b), base(c)
            if not phi.domain.is_element(fb):
                problems.append(f"iso {i}: image of domain block {show_block(b)} "
                                f"is not a union of domain blocks")
                continue
            if not phi.range.is_element(fc):
                problems.append(f"iso {i}: image of range block {show_block(c)} "
                                f"is not a union of range blocks")
                continue
            if phi.image(fb) != fc:
                problems.append(f"iso {i}: square fails to commute on {show_block(b)}")
    return problems


@dataclass(frozen=True)
class SystemEmbedding:
    base: AlgebraEmbedding
    source: PartialIsoSystem
    target: PartialIsoSystem

    def __post_init__(self):
        problems = embedding_violations(self.base, self.source, self.target)
        if problems:
            raise MalformedError("; ".join(problems))

    def compose(self, after: "SystemEmbedding") -> "SystemEmbedding":
        return SystemEmbedding(self.base.compose(after.base), self.source, after.target)

    @classmethod
    def identity(cls, system: PartialIsoSystem) -> "SystemEmbedding":
        return cls(AlgebraEmbedding.identity(system.ambient), system, system)


def is_system_embedding(base: AlgebraEmbedding, source: PartialIsoSystem,
                        target: PartialIsoSystem) -> bool:
    return not embedding_violations(base, source, target)


# ------------------------------------------------------------- split / coarsen


def split_atom(A: AmbientAlgebra, a: Atom, k: int) -> tuple[AmbientAlgebra, dict]:
    """Replace ``a`` by ``k`` lineage children; return the new algebra and the
    map from old atoms to their descendant sets."""
    if a not in A:
        raise DomainError(f"atom {a} not in ambient")
    if k < 2:
        raise DomainError("split count must be at least 2")
    kids = child_labels(a, k)
    new = AmbientAlgebra(tuple(x for x in A if x != a) + tuple(kids))
    lineage = {x: frozenset(kids) if x == a else frozenset([x]) for x in A}
    return new, lineage


def lift_subalgebra(sub: Subalgebra, target: AmbientAlgebra, emb: AlgebraEmbedding) -> Subalgebra:
    return Subalgebra(target, tuple(emb(b) for b in sub.blocks))


def lift_iso(psi: PartialIso, target: AmbientAlgebra, emb: AlgebraEmbedding) -> PartialIso:
    return PartialIso(lift_subalgebra(psi.domain, target, emb),
                      lift_subalgebra(psi.range, target, emb),
                      tuple((emb(b), emb(c)) for b, c in psi.pairs))


def lift_system(S: PartialIsoSystem, emb: AlgebraEmbedding) -> PartialIsoSystem:
    """Transport S along an algebra embedding (the image copy of S)."""
    return PartialIsoSystem(emb.target, tuple(lift_iso(p, emb.target, emb) for p in S.isos))


def split_system(S: PartialIsoSystem, a: Atom, k: int) -> tuple[PartialIsoSystem, SystemEmbedding]:
    new, _ = split_atom(S.ambient, a, k)
    emb = AlgebraEmbedding.lineage(S.ambient, new)
    T = lift_system(S, emb)
    return T, SystemEmbedding(emb, S, T)


def coarsen(A: AmbientAlgebra, groups: Sequence[Iterable[Atom]]) -> tuple[AmbientAlgebra, AlgebraEmbedding]:
    """Merge atoms into groups, each labeled by its least member; returns the
    coarse algebra and its embedding into ``A``."""
    groups = sort_blocks(groups)
    labels = [sort_atoms(g)[0] for g in groups]
    coarse = AmbientAlgebra(tuple(labels))
    emb = AlgebraEmbedding.from_map(coarse, A, dict(zip(labels, groups)))
    return coarse, emb


# -------------------------------------------------------- exhaustive search


def embed_system(S: PartialIsoSystem, T: PartialIsoSystem) -> SystemEmbedding | None:
    """First system embedding S -> T in lexicographic order of the map that
    assigns each T-atom the S-atom it lies under; None if there is none."""
    if S.n != T.n:
        raise DomainError("systems have different arity")
    s_atoms = list(S.ambient)
    t_atoms = list(T.ambient)
    # atom-level constraints: a target block of phi must sit under one block of psi
    dom_of = [{a: b for b in psi.domain.blocks for a in b} for psi in S.isos]
    ran_of = [{a: b for b in psi.range.blocks for a in b} for psi in S.isos]
    tdom_of = [{a: b for b in phi.domain.blocks for a in b} for phi in T.isos]
    tran_of = [{a: b for b in phi.range.blocks for a in b} for phi in T.isos]
    assign: dict[Atom, Atom] = {}

    def consistent(x: Atom) -> bool:
        sx = assign[x]
        for i, (psi, phi) in enumerate(zip(S.isos, T.isos)):
            # x and its domain-block mates share one psi-domain block
            b_s = dom_of[i][sx]
            for y in tdom_of[i][x]:
                if y in assign and dom_of[i][assign[y]] != b_s:
                    return False
            c_s = ran_of[i][sx]
            for y in tran_of[i][x]:
                if y in assign and ran_of[i][assign[y]] != c_s:
                    return False
            # commuting square, atom by atom in both directions
            img_target = psi(b_s)
            for y in phi(tdom_of[i][x]):
                if y in assign and assign[y] not in img_target:
                    return False
            pre_target = psi.inverse_of(c_s)
            for y in phi.inverse_of(tran_of[i][x]):
                if y in assign and assign[y] not in pre_target:
                    return False
        return True

    def search(idx: int):
        if idx == len(t_atoms):
            if set(assign.values()) != set(s_atoms):
                return None
            base = AlgebraEmbedding.from_map(
                S.ambient, T.ambient,
                {a: frozenset(x for x in t_atoms if assign[x] == a) for a in s_atoms})
            if is_system_embedding(base, S, T):
                return SystemEmbedding(base, S, T)
            return None
        x = t_atoms[idx]
        remaining = len(t_atoms) - idx
        for a in s_atoms:
            assign[x] = a
            missing = len(set(s_atoms) - set(assign.values()))
            if missing <= remaining - 1 and consistent(x):
                found = search(idx + 1)
                if found is not None:
                    return found
            del assign[x]
        return None

    return search(0)


def all_partitions(items: Sequence) -> Iterator[list[list]]:
    """Set partitions in restricted-growth order."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in all_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def all_subalgebras(A: AmbientAlgebra) -> list[Subalgebra]:
    return sorted({Subalgebra(A, tuple(frozenset(p) for p in part))
                   for part in all_partitions(A.atoms)},
                  key=lambda s: (len(s.blocks), [block_key(b) for b in s.blocks]))


def all_partial_isos(A: AmbientAlgebra, max_blocks: int | None = None) -> Iterator[PartialIso]:
    from itertools import permutations
    subs = all_subalgebras(A)
    if max_blocks is not None:
        subs = [s for s in subs if len(s.blocks) <= max_blocks]
    for B in subs:
        for C in subs:
            if len(B.blocks) != len(C.blocks):
                continue
            for perm in permutations(C.blocks):
                yield PartialIso(B, C, tuple(zip(B.blocks, perm)))


def system_signature(S: PartialIsoSystem) -> tuple:
    """Relabeling-invariant-free encoding used for deterministic ordering."""
    return tuple(tuple((block_key(b), block_key(c)) for b, c in p.pairs) for p in S.isos)



def embed_join_system(S: PartialIsoSystem, T: PartialIsoSystem) -> SystemEmbedding | None:
    """A system embedding of a single partial iso over its own join algebra
    into a single partial iso T, or None.

    Each atom of S is the meet of one domain and one range block, so an
    embedding is a choice of S-domain block for every T-domain block D, with
    the range block over phi(D) forced to psi of that choice.  Every T-atom x
    then reads off the S-atom d(D_x) & psi(d(phi^-1 R_x)), which must exist.
    Components of this constraint graph are searched separately and combined
    to cover every S-atom."""
    if S.n != 1 or T.n != 1:
        raise DomainError("join embedding handles single partial isos")
    psi, phi = S.isos[0], T.isos[0]
    dom_of = {a: b for b in psi.domain.blocks for a in b}
    ran_of = {a: c for c in psi.range.blocks for a in c}
    cell = {(dom_of[a], ran_of[a]): a for a in S.ambient}
    if len(cell) != len(S.ambient.atoms):
        raise DomainError("source ambient is not the join of its domain and range")
    s_index = {a: i for i, a in enumerate(S.ambient)}
    choices = sort_blocks(psi.domain.blocks)
    t_dom = sort_blocks(phi.domain.blocks)
    var_of = {x: i for i, D in enumerate(t_dom) for x in D}
    pre_of = {x: var_of[next(iter(phi.inverse_of(R)))] for R in phi.range.blocks for x in R}
    atoms_at: dict[tuple[int, int], list[Atom]] = {}
    for x in T.ambient:
        atoms_at.setdefault((var_of[x], pre_of[x]), []).append(x)
    nbrs: dict[int, set[int]] = {i: set() for i in range(len(t_dom))}
    for i, j in atoms_at:
        nbrs[i].add(j)
        nbrs[j].add(i)

    def read(bi: Block, bj: Block):
        return cell.get((bi, psi(bj)))

    seen: set[int] = set()
    combos: dict[int, dict[int, Block]] = {0: {}}
    for start in range(len(t_dom)):
        if start in seen:
            continue
        order, queue = [], [start]
        seen.add(start)
        while queue:
            v = queue.pop(0)
            order.append(v)
            for w in sorted(nbrs[v]):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        found: dict[int, dict[int, Block]] = {}
        assign: dict[int, Block] = {}

        def search(k: int, mask: int) -> None:
            if len(found) == 1 << len(S.ambient.atoms):
                return
            if k == len(order):
                found.setdefault(mask, dict(assign))
                return
            v = order[k]
            for b in choices:
                assign[v] = b
                m, ok = mask, True
                for w in nbrs[v]:
                    if w not in assign:
                        continue
                    for i, j in ((v, w), (w, v)):
                        if (i, j) in atoms_at:
                            a = read(assign[i], assign[j])
                            if a is None:
                                ok = False
                                break
                            m |= 1 << s_index[a]
                    if not ok:
                        break
                if ok:
                    search(k + 1, m)
                del assign[v]

        search(0, 0)
        if not found:
            return None
        nxt: dict[int, dict[int, Block]] = {}
        for m0, a0 in combos.items():
            for m1, a1 in found.items():
                nxt.setdefault(m0 | m1, {**a0, **a1})
        combos = nxt
    full = (1 << len(S.ambient.atoms)) - 1
    if full not in combos:
        return None
    d = combos[full]
    image: dict[Atom, set] = {a: set() for a in S.ambient}
    for (i, j), xs in atoms_at.items():
        image[read(d[i], d[j])].update(xs)
    base = AlgebraEmbedding.from_map(S.ambient, T.ambient,
                                     {a: frozenset(v) for a, v in image.items()})
    return SystemEmbedding(base, S, T)
