"""Amalgamation of two extensions of a normal partial automorphism.

Given a normal system S = <A, psi> with A = B v C and embeddings of S into
S^l and S^r, both extensions are first refined chain by chain so that every
block of theirs sits under a single atom of A and the blocks along each
stable chain line up.  The amalgam then lives on a set E of tensor atoms
x (x) y, where x and y are atoms of the two refined extensions lying under the
same atom of A.  Cyclic and linking chains take every tensor atom; stable
chains take the greatest fixed point of a pruning derivation at their
beginning and propagate it along the chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .chains import ChainDecomposition, StableChain, _grouped, _Work, decompose
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
    SystemEmbedding,
    block_key,
    join_subalgebras,
    label_key,
    sort_atoms,
    sort_blocks,
)

Cell = tuple[Atom, Atom]


# --------------------------------------------------------------- derivation


def _check_partition(blocks: Iterable[Iterable[int]], universe: set, what: str):
    seen: set = set()
    for b in blocks:
        b = set(b)
        if not b or seen & b:
            raise MalformedError(f"{what} blocks must be nonempty and disjoint")
        seen |= b
    if not seen <= universe:
        raise MalformedError(f"{what} blocks leave the index range")


def derivation_step(Y, gamma_l, gamma_r, lambda_l, lambda_r) -> frozenset:
    """Keep (i, j) in Y unless it lies in gamma_l[e] x gamma_r[d] while
    lambda_l[e] x lambda_r[d] misses Y."""
    Y = frozenset(Y)
    out = set()
    for i, j in Y:
        keep = True
        for e, g_l in enumerate(gamma_l):
            if i not in g_l:
                continue
            for d, g_r in enumerate(gamma_r):
                if j in g_r and not any((u, v) in Y for u in lambda_l[e] for v in lambda_r[d]):
                    keep = False
        if keep:
            out.add((i, j))
    return frozenset(out)


def derivation_fixed_point(X0, gamma_l, gamma_r, lambda_l, lambda_r,
                           k_l: int | None = None, k_r: int | None = None) -> frozenset:
    """Iterate the derivation from X0 until it stabilizes.  When the grid
    sizes are given, every row and column must meet the result."""
    if len(gamma_l) != len(lambda_l) or len(gamma_r) != len(lambda_r):
        raise MalformedError("each gamma block needs its lambda block")
    if k_l is not None and k_r is not None:
        for blocks, k, what in ((gamma_l, k_l, "left"), (gamma_r, k_r, "right"),
                                (lambda_l, k_l, "left target"), (lambda_r, k_r, "right target")):
            _check_partition(blocks, set(range(k)), what)
    Y = frozenset(X0)
    while True:
        nxt = derivation_step(Y, gamma_l, gamma_r, lambda_l, lambda_r)
        if nxt == Y:
            break
        Y = nxt
    if k_l is not None and k_r is not None:
        rows = {i for i, _ in Y}
        cols = {j for _, j in Y}
        if rows != set(range(k_l)) or cols != set(range(k_r)):
            raise InvariantViolation("fixed point has an empty row or column")
    return Y


# ----------------------------------------------------------- equalization


class _Side:
    """One refined extension, tracking which atom of A each atom lies under."""

    def __init__(self, psi: PartialIso, under: dict[Atom, Atom]):
        self.w = _Work.of(psi)
        self.under = dict(under)

    def split(self, atom: Atom, k: int) -> list[Atom]:
        kids = self.w.split_atoms([atom], k)[atom]
        for x in kids:
            self.under[x] = self.under[atom]
        del self.under[atom]
        return kids

    def grow(self, block: Block) -> Block:
        present = set(self.w.atoms)
        out = set()
        for a in block:
            if a in present:
                out.add(a)
            else:
                out.update(x for x in self.w.atoms if x.startswith(a + "."))
        return frozenset(out)

    def over(self, block: Block) -> set:
        return {self.under[a] for a in block}

    def blocks_under(self, t: Atom, side: str) -> list[Block]:
        src = self.w.pairs if side == "B" else self.w.pairs.values()
        return sort_blocks(b for b in src if self.over(b) == {t})

    def invert(self) -> None:
        self.w = self.w.inverted()

    def push(self, b: Block, parts: list[Block]) -> None:
        """Refine domain block b into parts, splitting its image to match."""
        m = len(parts)
        c = self.w.pairs[b]
        c_atoms = sort_atoms(c)
        if len(c_atoms) < m:
            self.split(c_atoms[-1], m - len(c_atoms) + 1)
            b, parts = self.grow(b), [self.grow(p) for p in parts]
            c = self.w.pairs[b]
            c_atoms = sort_atoms(c)
        targets = _grouped([frozenset([a]) for a in c_atoms], m)
        del self.w.pairs[b]
        for p, t in zip(sort_blocks(parts), targets):
            self.w.pairs[p] = t

    def pull(self, c: Block, parts: list[Block]) -> None:
        self.invert()
        self.push(c, parts)
        self.invert()


def _refine_against(side: _Side, blocks: list[Block], against: list[Block]) -> list[tuple[Block, list[Block]]]:
    jobs = []
    for b in blocks:
        parts = sort_blocks(p for p in (b & a for a in against) if p)
        if len(parts) >= 2:
            jobs.append((b, parts))
    return jobs


def _equalize_stable(side: _Side, chain: StableChain, end_atoms: list[Atom]) -> None:
    """Forward then backward pass along one stable chain, written for the
    forward orientation (the caller inverts for chains through psi^-1)."""
    terms = _chain_atoms(chain)
    w_len = len(terms)
    for g in range(1, w_len):
        t = terms[g]
        # make the domain partition of t finer than its range partition
        for b, parts in _refine_against(side, side.blocks_under(t, "B"), side.blocks_under(t, "C")):
            side.push(side.grow(b), [side.grow(p) for p in parts])
    # the end's range blocks must not straddle atoms of A
    end_blocks = sort_blocks(c for c in side.w.pairs.values() if side.over(c) <= set(end_atoms))
    for c in end_blocks:
        c = side.grow(c)
        parts = sort_blocks(frozenset(a for a in c if side.under[a] == s) for s in end_atoms)
        parts = [p for p in parts if p]
        if len(parts) >= 2:
            side.pull(c, parts)
    for g in range(w_len - 1, 0, -1):
        t = terms[g]
        for c, parts in _refine_against(side, side.blocks_under(t, "C"), side.blocks_under(t, "B")):
            side.pull(side.grow(c), [side.grow(p) for p in parts])
    for g in range(1, w_len):
        t = terms[g]
        if set(side.blocks_under(t, "B")) != set(side.blocks_under(t, "C")):
            raise InvariantViolation("stable chain term not equalized")


def _chain_atoms(chain: StableChain) -> list[Atom]:
    out = []
    for term in chain.terms:
        if len(term) != 1:
            raise DomainError("system ambient must be its join algebra")
        out.append(next(iter(term)))
    return out


def _equalize(S_psi: PartialIso, dec: ChainDecomposition, T_psi: PartialIso,
              base: AlgebraEmbedding) -> _Side:
    under = {x: base.preimage_atom(x) for x in T_psi.ambient}
    side = _Side(T_psi, under)
    for chain in dec.stable:
        end_atoms = sort_atoms(chain.end)
        if chain.orientation == "II":
            side.invert()
        _equalize_stable(side, chain, end_atoms)
        if chain.orientation == "II":
            side.invert()
    for b in list(side.w.pairs) + list(side.w.pairs.values()):
        if len(side.over(b)) != 1:
            raise InvariantViolation("refined block straddles atoms of the base")
    return side


# -------------------------------------------------------------- amalgam


@dataclass(frozen=True)
class AmalgamCertificate:
    """Refined extensions, the tensor atoms chosen, and the per-atom grids,
    kept so that the amalgam conditions can be re-checked independently."""

    base: PartialIso
    left: PartialIso
    right: PartialIso
    under_left: dict
    under_right: dict
    cells: frozenset  # chosen (left atom, right atom) pairs


@dataclass(frozen=True)
class Amalgam:
    system: PartialIsoSystem
    left: SystemEmbedding
    right: SystemEmbedding
    certificate: AmalgamCertificate
    cell_label: dict


def _stable_cells(chain: StableChain, L: _Side, R: _Side) -> set[Cell]:
    terms = _chain_atoms(chain)
    t1 = terms[0]
    maps = []
    for side in (L, R):
        fwd = dict(side.w.pairs) if chain.orientation == "I" else {c: b for b, c in side.w.pairs.items()}
        maps.append(fwd)

    def fates(side: _Side, fwd: dict):
        """Domain blocks at the beginning, their images along the chain, and
        the atom of A their final image lies under."""
        out = []
        blocks = sort_blocks(b for b in fwd if side.over(b) == {t1})
        for b in blocks:
            path = [b]
            for _ in range(len(terms) - 1):
                path.append(fwd[path[-1]])
            final = fwd[path[-1]]
            (fate,) = side.over(final)
            out.append((path, final, fate))
        return out

    fl, fr = fates(L, maps[0]), fates(R, maps[1])
    rows = sort_atoms(a for a in L.w.atoms if L.under[a] == t1)
    cols = sort_atoms(a for a in R.w.atoms if R.under[a] == t1)
    ri = {a: i for i, a in enumerate(rows)}
    ci = {a: j for j, a in enumerate(cols)}
    X0 = set()
    for pl, _, fate_l in fl:
        for pr, _, fate_r in fr:
            if fate_l == fate_r:
                X0.update((ri[x], ci[y]) for x in pl[0] for y in pr[0])
    gl = [frozenset(ri[x] for x in p[0]) for p, _, f in fl if f == t1]
    ll = [frozenset(ri[x] for x in fin) for _, fin, f in fl if f == t1]
    gr = [frozenset(ci[y] for y in p[0]) for p, _, f in fr if f == t1]
    lr = [frozenset(ci[y] for y in fin) for _, fin, f in fr if f == t1]
    fixed = derivation_fixed_point(X0, gl, gr, ll, lr, len(rows), len(cols))
    cells = {(rows[i], cols[j]) for i, j in fixed}
    for pl, _, fate_l in fl:
        for pr, _, fate_r in fr:
            if fate_l != fate_r:
                continue
            if fate_l == t1 and not any((ri[x], ci[y]) in fixed for x in pl[0] for y in pr[0]):
                continue
            for g in range(1, len(terms)):
                cells.update((x, y) for x in pl[g] for y in pr[g])
    return cells


def amalgamate_over_normal(S, f_left: SystemEmbedding, f_right: SystemEmbedding) -> Amalgam:
    """Amalgam of two extensions of a normal system over its join algebra."""
    if isinstance(S, PartialIso):
        S = PartialIsoSystem.single(S)
    if S.n != 1:
        raise DomainError("amalgamation over normal systems is for a single partial iso")
    psi = S.isos[0]
    if join_subalgebras(psi.domain, psi.range).blocks != tuple(frozenset([a]) for a in S.ambient):
        raise DomainError("system ambient must be its join algebra; coarsen it first")
    dec = decompose(psi)
    if not isinstance(dec, ChainDecomposition):
        raise DomainError(f"system is not normal ({dec.reason}); normalize it first")
    for f in (f_left, f_right):
        if f.source != S:
            raise MalformedError("both embeddings must start at the base system")
        if f.target.n != 1:
            raise DomainError("extensions must be single partial isos")

    L = _equalize(psi, dec, f_left.target.isos[0], f_left.base)
    R = _equalize(psi, dec, f_right.target.isos[0], f_right.base)

    cells: set[Cell] = set()
    stable_atoms: set = set()
    for chain in dec.stable:
        cells |= _stable_cells(chain, L, R)
        stable_atoms.update(next(iter(t)) for t in chain.terms)
    for t in S.ambient:
        if t in stable_atoms:
            continue
        rows = [a for a in L.w.atoms if L.under[a] == t]
        cols = [a for a in R.w.atoms if R.under[a] == t]
        cells.update((x, y) for x in rows for y in cols)

    left_psi, right_psi = L.w.freeze(), R.w.freeze()
    cert = AmalgamCertificate(psi, left_psi, right_psi, dict(L.under), dict(R.under),
                              frozenset(cells))
    problems = amalgam_condition_failures(cert)
    if problems:
        raise InvariantViolation("; ".join(problems))
    return _assemble(S, f_left, f_right, cert)


def _cell_order(cell: Cell):
    return (label_key(cell[0]), label_key(cell[1]))


def _assemble(S, f_left, f_right, cert: AmalgamCertificate) -> Amalgam:
    cells = sorted(cert.cells, key=lambda c: (label_key(cert.under_left[c[0]]),) + _cell_order(c))
    label = {c: str(i) for i, c in enumerate(cells)}
    amb = AmbientAlgebra(tuple(label.values()))
    by_row: dict = {}
    by_col: dict = {}
    for x, y in cells:
        by_row.setdefault(x, set()).add(label[(x, y)])
        by_col.setdefault(y, set()).add(label[(x, y)])

    def block(b_l: Block, b_r: Block) -> frozenset:
        return frozenset(label[(x, y)] for x in b_l for y in b_r if (x, y) in label)

    mapping = {}
    for b_l, c_l in cert.left.pairs:
        (t,) = {cert.under_left[a] for a in b_l}
        for b_r, c_r in cert.right.pairs:
            if {cert.under_right[a] for a in b_r} != {t}:
                continue
            dom = block(b_l, b_r)
            if dom:
                mapping[dom] = block(c_l, c_r)
    psi_a = PartialIso.from_map(amb, mapping)
    Sa = PartialIsoSystem.single(psi_a)
    lin_l = AlgebraEmbedding.lineage(f_left.target.ambient, cert.left.ambient)
    lin_r = AlgebraEmbedding.lineage(f_right.target.ambient, cert.right.ambient)
    to_l = AlgebraEmbedding.from_map(cert.left.ambient, amb,
                                     {x: frozenset(by_row.get(x, ())) for x in cert.left.ambient})
    to_r = AlgebraEmbedding.from_map(cert.right.ambient, amb,
                                     {y: frozenset(by_col.get(y, ())) for y in cert.right.ambient})
    left = SystemEmbedding(lin_l.compose(to_l), f_left.target, Sa)
    right = SystemEmbedding(lin_r.compose(to_r), f_right.target, Sa)
    via_l = f_left.compose(left).base
    via_r = f_right.compose(right).base
    if via_l != via_r:
        raise InvariantViolation("amalgam embeddings disagree on the base system")
    return Amalgam(Sa, left, right, cert, label)


# ------------------------------------------------------- condition checks


def _pair_tables(cert: AmalgamCertificate):
    ul, ur = cert.under_left, cert.under_right

    def at(side_under, block):
        s = {side_under[a] for a in block}
        return next(iter(s)) if len(s) == 1 else None

    dom_pairs = []  # (t, B^l block, B^r block, image pair or None)
    for b_l, c_l in cert.left.pairs:
        for b_r, c_r in cert.right.pairs:
            t = at(ul, b_l)
            if t is None or t != at(ur, b_r):
                continue
            same = at(ul, c_l) is not None and at(ul, c_l) == at(ur, c_r)
            dom_pairs.append((b_l, b_r, (c_l, c_r) if same else None))
    ran_pairs = []
    for b_l, c_l in cert.left.pairs:
        for b_r, c_r in cert.right.pairs:
            m = at(ul, c_l)
            if m is None or m != at(ur, c_r):
                continue
            same = at(ul, b_l) is not None and at(ul, b_l) == at(ur, b_r)
            ran_pairs.append((c_l, c_r, same))
    return dom_pairs, ran_pairs


def _meets(E, b_l, b_r) -> bool:
    return any((x, y) in E for x in b_l for y in b_r)


def amalgam_condition_failures(cert: AmalgamCertificate, cells=None) -> list[str]:
    """Check rows and columns nonempty, nonzero blocks matching nonzero
    images, and blocks with images under two different base atoms empty."""
    E = cert.cells if cells is None else frozenset(cells)
    ul, ur = cert.under_left, cert.under_right
    out = []
    for x in cert.left.ambient:
        if not any(y for (a, y) in E if a == x):
            out.append(f"(a) row {x} is empty")
    for y in cert.right.ambient:
        if not any(x for (x, b) in E if b == y):
            out.append(f"(b) column {y} is empty")
    for x, y in E:
        if ul[x] != ur[y]:
            out.append(f"tensor atom {x}x{y} mixes base atoms")
    dom_pairs, ran_pairs = _pair_tables(cert)
    for b_l, b_r, img in dom_pairs:
        if img is None:
            if _meets(E, b_l, b_r):
                out.append("(d) block with images under different atoms is nonzero")
        elif _meets(E, b_l, b_r) != _meets(E, *img):
            out.append("(c) block and its image disagree on being nonzero")
    for c_l, c_r, same in ran_pairs:
        if not same and _meets(E, c_l, c_r):
            out.append("(d) range block with preimages under different atoms is nonzero")
    return out


def largest_valid_cells(cert: AmalgamCertificate) -> frozenset:
    """Greatest set of tensor atoms closed under the block conditions,
    computed by pruning from all same-atom tensor atoms."""
    ul, ur = cert.under_left, cert.under_right
    E = {(x, y) for x in cert.left.ambient for y in cert.right.ambient if ul[x] == ur[y]}
    dom_pairs, ran_pairs = _pair_tables(cert)

    def drop(b_l, b_r):
        for x in b_l:
            for y in b_r:
                E.discard((x, y))

    for b_l, b_r, img in dom_pairs:
        if img is None:
            drop(b_l, b_r)
    for c_l, c_r, same in ran_pairs:
        if not same:
            drop(c_l, c_r)
    changed = True
    while changed:
        changed = False
        for b_l, b_r, img in dom_pairs:
            if img is None:
                continue
            a, b = _meets(E, b_l, b_r), _meets(E, *img)
            if a and not b:
                drop(b_l, b_r)
                changed = True
            elif b and not a:
                drop(*img)
                changed = True
    return frozenset(E)
