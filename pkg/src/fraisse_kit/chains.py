"""Chain structure of a partial automorphism of a finite Boolean algebra.

A partial iso psi: B -> C is normal when every B- or C-block that is not an
atom of the join B v C ends a stable chain, and every join atom is a term of
a cyclic, stable or linking chain or is free in a stable chain.  This module
classifies join atoms into those roles, refines an arbitrary psi until the
first clause holds (the second then follows), and provides the product-style
joint embedding of two systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .core import (
    AlgebraEmbedding,
    AmbientAlgebra,
    Atom,
    Block,
    DomainError,
    InvariantViolation,
    MalformedError,
    PartialIso,
    PartialIsoSystem,
    Subalgebra,
    SystemEmbedding,
    block_key,
    child_labels,
    coarsen,
    join_subalgebras,
    lift_system,
    show_block,
    sort_atoms,
    sort_blocks,
)


@dataclass(frozen=True)
class StableChain:
    orientation: str  # "I": forward through psi, "II": through psi^-1
    terms: tuple[Block, ...]  # a_0 .. a_n, a_0 is the beginning
    end: Block
    free: tuple[Block, ...]

    @property
    def beginning(self) -> Block:
        return self.terms[0]


@dataclass(frozen=True)
class ChainDecomposition:
    cyclic: tuple[tuple[Block, ...], ...]
    stable: tuple[StableChain, ...]
    linking: tuple[tuple[Block, ...], ...]
    assignment: dict = field(compare=False)

    def roles(self, atom: Block) -> tuple[str, ...]:
        return self.assignment.get(frozenset(atom), ())


@dataclass(frozen=True)
class NotNormal:
    clause: str  # "i" or "ii"
    atom: Block
    side: str  # "B", "C" or "join"
    reason: str


# ------------------------------------------------------------ working state


class _Work:
    """Mutable copy of a partial iso used while refining."""

    def __init__(self, atoms, pairs):
        self.atoms = list(atoms)
        self.pairs: dict[Block, Block] = dict(pairs)

    @classmethod
    def of(cls, psi: PartialIso) -> "_Work":
        return cls(psi.ambient.atoms, psi.pairs)

    def inverted(self) -> "_Work":
        return _Work(self.atoms, {c: b for b, c in self.pairs.items()})

    def freeze(self) -> PartialIso:
        return PartialIso.from_map(AmbientAlgebra(tuple(self.atoms)), self.pairs)

    def split_atoms(self, atoms, k: int) -> dict[Atom, list[Atom]]:
        kids = {a: child_labels(a, k) for a in atoms}
        self.atoms = [x for a in self.atoms for x in kids.get(a, [a])]

        def grow(block):
            if not any(a in kids for a in block):
                return block
            return frozenset(x for a in block for x in kids.get(a, [a]))

        self.pairs = {grow(b): grow(c) for b, c in self.pairs.items()}
        return kids

    def split_join_atoms(self, join_atoms, k: int) -> list[list[Block]]:
        """Split every ambient atom of each join atom into k children; piece l
        of a join atom collects the l-th children."""
        members = [a for j in join_atoms for a in j]
        kids = self.split_atoms(members, k)
        return [[frozenset(kids[a][l] for a in j) for l in range(k)] for j in join_atoms]


def _join(pairs: dict) -> list[Block]:
    parts = {b & c for b in pairs for c in pairs.values()}
    return sort_blocks(p for p in parts if p)


def _atoms_below(join: list[Block], element: Block) -> list[Block]:
    return [j for j in join if j <= element]


def _trace_end(fwd: dict, bwd: dict, join_set: set, end: Block):
    """Walk back from ``end`` through join atoms; return terms a_0..a_n or None."""
    cur = bwd[end]
    terms = [cur]
    while True:
        if cur not in join_set:
            return None
        if cur <= end:
            return list(reversed(terms))
        if cur not in bwd:
            return None
        cur = bwd[cur]
        if cur in terms:
            return None
        terms.append(cur)


def _stable_chains(pairs: dict, join: list[Block]):
    """All valid stable chains, keyed by end, plus the non-join blocks that
    fail to be ends (B-side and C-side)."""
    join_set = set(join)
    fwd, bwd = pairs, {c: b for b, c in pairs.items()}
    chains: dict[tuple[str, Block], StableChain] = {}
    bad: list[tuple[Block, str]] = []
    for side, blocks, f, b in (("C", list(bwd), fwd, bwd), ("B", list(fwd), bwd, fwd)):
        for end in sort_blocks(blocks):
            if end in join_set:
                continue
            terms = _trace_end(f, b, join_set, end)
            if terms is None:
                bad.append((end, side))
                continue
            free = tuple(j for j in _atoms_below(join, end) if j != terms[0])
            orient = "I" if side == "C" else "II"
            chains[(side, end)] = StableChain(orient, tuple(terms), end, free)
    return chains, bad


def _violation_key(item):
    block, side = item
    return (block_key(block), 0 if side == "B" else 1)


def _decompose_pairs(pairs: dict) -> Union[ChainDecomposition, NotNormal]:
    join = _join(pairs)
    join_set = set(join)
    chains, bad = _stable_chains(pairs, join)
    if bad:
        block, side = min(bad, key=_violation_key)
        return NotNormal("i", block, side,
                         f"{side}-atom {show_block(block)} is not a join atom and "
                         f"ends no stable chain")
    fwd = pairs
    in_b, in_c = set(fwd), set(fwd.values())
    roles: dict[Block, list[str]] = {j: [] for j in join}

    cyclic = []
    seen: set = set()
    for a in join:
        if a in seen or a not in in_b or a not in in_c:
            continue
        orbit = [a]
        cur = fwd[a]
        while cur != a and cur in join_set and cur in in_b and cur not in orbit:
            orbit.append(cur)
            cur = fwd[cur]
        if cur == a:
            seen.update(orbit)
            cyclic.append(tuple(orbit))
    for idx, orbit in enumerate(cyclic):
        for a in orbit:
            roles[a].append(f"cyclic:{idx}")

    stable = [chains[k] for k in sorted(chains, key=lambda k: (k[0] == "B", block_key(k[1])))]
    free_in: dict[Block, list[int]] = {}
    for idx, ch in enumerate(stable):
        for a in ch.terms:
            roles[a].append(f"stable:{idx}:term")
        for a in ch.free:
            roles[a].append(f"stable:{idx}:free")
            free_in.setdefault(a, []).append(idx)

    linking = []
    for a in join:
        if a not in free_in:
            continue
        if a not in in_b:
            if a not in in_c:
                linking.append((a,))
            continue
        seq = [a]
        cur = fwd[a]
        while cur in join_set and cur not in seq:
            seq.append(cur)
            if cur in free_in or cur not in in_b:
                break
            cur = fwd[cur]
        if len(seq) >= 2 and seq[-1] in free_in and seq[-1] in join_set:
            linking.append(tuple(seq))
    for idx, seq in enumerate(linking):
        for a in seq:
            roles[a].append(f"linking:{idx}")

    orphans = [j for j in join if not roles[j]]
    if orphans:
        a = orphans[0]
        return NotNormal("ii", a, "join",
                         f"join atom {show_block(a)} has no chain role and is not free")
    return ChainDecomposition(tuple(cyclic), tuple(stable), tuple(linking),
                              {j: tuple(r) for j, r in roles.items()})


def decompose(psi: PartialIso) -> Union[ChainDecomposition, NotNormal]:
    """Chain decomposition certifying normality, or the least violation."""
    return _decompose_pairs(dict(psi.pairs))


def is_normal(psi: PartialIso) -> bool:
    return isinstance(decompose(psi), ChainDecomposition)


def violation_count(psi_or_pairs) -> int:
    """Number of B- and C-blocks that are not join atoms."""
    pairs = dict(psi_or_pairs.pairs) if isinstance(psi_or_pairs, PartialIso) else psi_or_pairs
    join = set(_join(pairs))
    return sum(b not in join for b in pairs) + sum(c not in join for c in pairs.values())


# --------------------------------------------------------------- refinement


def _grouped(parts: list[Block], r: int) -> list[Block]:
    """First r-1 parts singly, the rest joined into the last group."""
    if len(parts) == r:
        return parts
    return parts[: r - 1] + [frozenset().union(*parts[r - 1:])]


def _refine_step(w: _Work, x: Block) -> None:
    """One induction step for a B-side non-join atom x that ends no chain."""
    join = _join(w.pairs)
    join_set = set(join)
    in_b = set(w.pairs)
    chain: list[Block] = []
    cur = w.pairs[x]
    while cur in join_set and cur in in_b:
        if cur in chain:
            raise InvariantViolation("trace from a non-join atom returned to itself")
        chain.append(cur)
        cur = w.pairs[cur]
    cs = _atoms_below(join, x)
    if cur not in join_set:
        # the trace stops at a_n with a non-join image y
        y = cur
        ds = _atoms_below(join, y)
        r = min(len(cs), len(ds))
        xg, yg = _grouped(cs, r), _grouped(ds, r)
        pieces = w.split_join_atoms(chain, r)
        grow = _growth(w, xg + yg)
        xg, yg = [grow(g) for g in xg], [grow(g) for g in yg]
        del w.pairs[_find(w, x)]
        for a in pieces:
            del w.pairs[frozenset().union(*a)]
        if not chain:
            for l in range(r):
                w.pairs[xg[l]] = yg[l]
            return
        for l in range(r):
            w.pairs[xg[l]] = pieces[0][l]
            for i in range(len(chain) - 1):
                w.pairs[pieces[i][l]] = pieces[i + 1][l]
            w.pairs[pieces[-1][l]] = yg[l]
        return
    # the trace stops at b_n, a C-block join atom outside B
    chain.append(cur)
    if cur <= x:
        raise InvariantViolation("atom already ends a stable chain")
    p = len(cs)
    pieces = w.split_join_atoms(chain, p)
    grow = _growth(w, cs)
    cs = [grow(c) for c in cs]
    del w.pairs[_find(w, x)]
    for a in pieces[:-1]:
        del w.pairs[frozenset().union(*a)]
    for l in range(p):
        w.pairs[cs[l]] = pieces[0][l]
        for i in range(len(chain) - 1):
            w.pairs[pieces[i][l]] = pieces[i + 1][l]


def _growth(w: _Work, blocks):
    """Map a pre-split block to its post-split version (atoms untouched by
    the split keep their labels; split atoms are replaced by all children)."""
    present = set(w.atoms)

    def grow(block: Block) -> Block:
        out = set()
        for a in block:
            if a in present:
                out.add(a)
            else:
                out.update(x for x in w.atoms if x.startswith(a + "."))
        return frozenset(out)

    return grow


def _find(w: _Work, block: Block) -> Block:
    grown = _growth(w, [block])(block)
    if grown not in w.pairs:
        raise InvariantViolation(f"lost track of block {show_block(block)}")
    return grown


def refine_condition_i(psi: PartialIso, trace: list | None = None) -> PartialIso:
    """Refinement of psi in which every non-join B- or C-atom ends a stable
    chain.  Lineage labels make the result an extension of psi.  If ``trace``
    is a list, the violation count before each step is appended to it."""
    w = _Work.of(psi)
    while True:
        join = _join(w.pairs)
        _, bad = _stable_chains(w.pairs, join)
        if not bad:
            return w.freeze()
        if trace is not None:
            trace.append(violation_count(w.pairs))
        block, side = min(bad, key=_violation_key)
        if side == "B":
            _refine_step(w, block)
        else:
            inv = w.inverted()
            _refine_step(inv, block)
            w = inv.inverted()


def normalize(psi: PartialIso) -> tuple[PartialIso, ChainDecomposition]:
    """Normal refinement of psi together with its certificate."""
    refined = refine_condition_i(psi)
    dec = decompose(refined)
    if not isinstance(dec, ChainDecomposition):
        raise InvariantViolation(f"normal-form certificate failed: {dec.reason}")
    return refined, dec


def refinement_embedding(psi: PartialIso, refined: PartialIso) -> SystemEmbedding:
    """Lineage embedding of <A, psi> into <A', psi'> for a split refinement."""
    base = AlgebraEmbedding.lineage(psi.ambient, refined.ambient)
    return SystemEmbedding(base, PartialIsoSystem.single(psi), PartialIsoSystem.single(refined))


# ------------------------------------------------ helpers for amalgamation


def coarsen_to_join(psi: PartialIso) -> tuple[PartialIso, AlgebraEmbedding]:
    """Same partial iso over the join algebra; returns it and the embedding of
    the join algebra into the original ambient."""
    join = join_subalgebras(psi.domain, psi.range)
    coarse, emb = coarsen(psi.ambient, join.blocks)
    label = {b: sort_atoms(b)[0] for b in join.blocks}

    def down(block):
        return frozenset(label[j] for j in join.blocks if j <= block)

    return PartialIso.from_map(coarse, {down(b): down(c) for b, c in psi.pairs}), emb


def extend_domain(psi: PartialIso) -> PartialIso:
    """Extension of psi (by splitting) whose domain contains every ambient
    atom, so each ambient atom becomes a union of join atoms."""
    w = _Work.of(psi)
    for b in sort_blocks(psi.domain.blocks):
        atoms = sort_atoms(b)
        if len(atoms) == 1:
            continue
        grow = _growth(w, [b])
        cur_b = grow(b)
        c = w.pairs[cur_b]
        k = len(atoms)
        c_atoms = sort_atoms(c)
        if len(c_atoms) < k:
            kids = w.split_atoms([c_atoms[-1]], k - len(c_atoms) + 1)
            c_atoms = c_atoms[:-1] + tuple(kids[c_atoms[-1]])
            cur_b = _growth(w, [b])(b)
            c = w.pairs[cur_b]
        grow = _growth(w, [b])
        targets = _grouped([frozenset([a]) for a in c_atoms], k)
        del w.pairs[cur_b]
        for a, t in zip(atoms, targets):
            w.pairs[grow(frozenset([a]))] = t
    return w.freeze()


def wap_witness(psi: PartialIso) -> tuple[PartialIso, AlgebraEmbedding, ChainDecomposition]:
    """A normal system over its own join algebra that extends psi, with the
    embedding of psi's ambient into it."""
    wide = extend_domain(psi)
    refined, _ = normalize(wide)
    coarse, emb = coarsen_to_join(refined)
    dec = decompose(coarse)
    if not isinstance(dec, ChainDecomposition):
        raise InvariantViolation("coarsening broke normality")
    lineage = AlgebraEmbedding.lineage(psi.ambient, refined.ambient)
    image = {}
    for a in psi.ambient:
        below = lineage([a])
        img = frozenset(c for c in coarse.ambient if emb([c]) <= below)
        if frozenset().union(*(emb([c]) for c in img)) != below:
            raise InvariantViolation("ambient atom is not a union of join atoms")
        image[a] = img
    base = AlgebraEmbedding.from_map(psi.ambient, coarse.ambient, image)
    SystemEmbedding(base, PartialIsoSystem.single(psi), PartialIsoSystem.single(coarse))
    return coarse, base, dec


# -------------------------------------------------------- joint embedding


def jep_boolean(S: PartialIsoSystem, T: PartialIsoSystem):
    """Joint embedding on the product of atoms: U has one atom per pair
    (s, t) and each partial iso acts as the tensor of the two given ones."""
    if not isinstance(S, PartialIsoSystem) or not isinstance(T, PartialIsoSystem):
        raise MalformedError("joint embedding expects two Boolean systems")
    if S.n != T.n:
        raise DomainError("systems have different arity")
    cells = [(s, t) for s in S.ambient for t in T.ambient]
    name = {st: str(i) for i, st in enumerate(cells)}
    U_amb = AmbientAlgebra(tuple(name.values()))

    def prod(x: Block, y: Block) -> Block:
        return frozenset(name[(s, t)] for s in x for t in y)

    isos = []
    for psi, phi in zip(S.isos, T.isos):
        isos.append(PartialIso.from_map(
            U_amb, {prod(b, d): prod(psi(b), phi(d)) for b in psi.domain.blocks
                    for d in phi.domain.blocks}))
    U = PartialIsoSystem(U_amb, tuple(isos))
    e_S = AlgebraEmbedding.from_map(S.ambient, U_amb,
                                    {s: prod([s], T.ambient.atoms) for s in S.ambient})
    e_T = AlgebraEmbedding.from_map(T.ambient, U_amb,
                                    {t: prod(S.ambient.atoms, [t]) for t in T.ambient})
    return U, SystemEmbedding(e_S, S, U), SystemEmbedding(e_T, T, U)
