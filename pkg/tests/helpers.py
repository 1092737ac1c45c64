"""Small constructors and independent oracles shared by the test modules."""

from __future__ import annotations

from itertools import product

from fraisse_kit.chains import wap_witness
from fraisse_kit.core import (
    AmbientAlgebra,
    PartialIso,
    PartialIsoSystem,
    join_subalgebras,
)
from fraisse_kit.sampling import random_partial_iso


def iso(atoms, mapping) -> PartialIso:
    """iso("0123", {"01": "2", "2": "3"}): blocks are strings of one-character
    labels or tuples of labels."""
    A = AmbientAlgebra(tuple(atoms))
    return PartialIso.from_map(A, {frozenset(b): frozenset(c) for b, c in mapping.items()})


def system(atoms, mapping) -> PartialIsoSystem:
    return PartialIsoSystem.single(iso(atoms, mapping))


# ------------------------------------------------------------ normality


def chains_by_definition(psi: PartialIso):
    """Every stable, cyclic and linking chain of psi, enumerated directly from
    the definitions over the atoms of the join algebra.

    Stable chains are (terms, end) pairs; cyclic and linking chains are term
    tuples."""
    J = set(join_subalgebras(psi.domain, psi.range).blocks)
    B, C = set(psi.domain.blocks), set(psi.range.blocks)
    fwd = dict(psi.pairs)
    bwd = {c: b for b, c in psi.pairs}
    stable = []
    for step, src in ((fwd, B), (bwd, C)):
        for a0 in J & src:
            seq = [a0]
            while True:
                img = step[seq[-1]]
                if a0 < img:
                    stable.append((tuple(seq), img))
                if img in J and img in src and img not in seq:
                    seq.append(img)
                else:
                    break
    free = set()
    for terms, end in stable:
        free |= {b for b in J if b != terms[0] and b < end}
    cyclic = []
    for a in J & B & C:
        seq = [a]
        while seq[-1] in fwd and fwd[seq[-1]] in J and fwd[seq[-1]] not in seq:
            seq.append(fwd[seq[-1]])
        if seq[-1] in fwd and fwd[seq[-1]] == a and all(x in B and x in C for x in seq):
            cyclic.append(tuple(seq))
    linking = []
    for a1 in free:
        seq = [a1]
        while True:
            if seq[-1] in free:
                linking.append(tuple(seq))
            nxt = fwd.get(seq[-1])
            if nxt is None or nxt not in J or nxt in seq:
                break
            seq.append(nxt)
    return stable, free, cyclic, linking


def normal_by_definition(psi: PartialIso) -> bool:
    J = set(join_subalgebras(psi.domain, psi.range).blocks)
    stable, free, cyclic, linking = chains_by_definition(psi)
    ends = {end for _, end in stable}
    for x in set(psi.domain.blocks) | set(psi.range.blocks):
        if x not in J and x not in ends:
            return False
    covered = set(free)
    for terms, _ in stable:
        covered |= set(terms)
    for seq in cyclic + linking:
        covered |= set(seq)
    return covered == J


def refinements(psi: PartialIso, max_split: int = 2):
    """Every refinement of psi obtained by splitting each ambient atom into at
    most ``max_split`` pieces and cutting each block pair into matching
    pieces; yields (refined iso, lineage map)."""
    from fraisse_kit.core import child_labels
    from itertools import permutations

    atoms = psi.ambient.atoms
    for ks in product(range(1, max_split + 1), repeat=len(atoms)):
        kids = {a: (child_labels(a, k) if k > 1 else [a]) for a, k in zip(atoms, ks)}
        A = AmbientAlgebra(tuple(x for a in atoms for x in kids[a]))

        def lift(block):
            return frozenset(x for a in block for x in kids[a])

        options = []
        for b, c in psi.pairs:
            lb, lc = sorted(lift(b)), sorted(lift(c))
            opts = []
            for pb in _set_partitions(lb):
                for pc in _set_partitions(lc):
                    if len(pb) != len(pc):
                        continue
                    for perm in permutations(pc):
                        opts.append(tuple(zip(pb, perm)))
            options.append(opts)
        for choice in product(*options):
            yield PartialIso.from_map(A, {b: c for pairs in choice for b, c in pairs}), kids


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [frozenset([first])] + part
        for i in range(len(part)):
            yield part[:i] + [part[i] | {first}] + part[i + 1:]


# ----------------------------------------------------------- derivation


def _labelled_partition(k, labels, rng):
    """Random partition of range(k) into ``labels`` nonempty blocks."""
    idx = list(range(k))
    rng.shuffle(idx)
    lab = list(range(labels)) + [rng.randrange(labels) for _ in range(k - labels)]
    blocks = [set() for _ in range(labels)]
    for i, l in zip(idx, lab):
        blocks[l].add(i)
    return [frozenset(b) for b in blocks]


def stable_chain_instance(rng, k_max=8):
    """Partition data at the beginning of a stable chain, the same k, p, q on
    both sides: range(k) splits into p Gamma blocks and q*p Delta blocks,
    Lambda is a partition into p blocks.  Returns (k, X0, gl, gr, ll, lr)."""
    while True:
        p, q = rng.randint(1, 4), rng.randint(1, 4)
        if p * (1 + q) <= k_max:
            break
    k = rng.randint(p * (1 + q), k_max)
    sides = []
    for _ in range(2):
        blocks = _labelled_partition(k, p * (1 + q), rng)
        gamma = blocks[:p]
        delta = [blocks[p + b * p: p + (b + 1) * p] for b in range(q)]
        sides.append((gamma, delta, _labelled_partition(k, p, rng)))
    (gl, dl, ll), (gr, dr, lr) = sides
    X0 = {(i, j) for e in range(p) for d in range(p) for i in gl[e] for j in gr[d]}
    for b in range(q):
        X0 |= {(i, j) for e in range(p) for d in range(p) for i in dl[b][e] for j in dr[b][d]}
    return k, frozenset(X0), gl, gr, ll, lr


def derive_by_definition(Y, gl, gr, ll, lr):
    """The derivation written as its set-builder, one comprehension."""
    return frozenset(
        (i, j) for (i, j) in Y
        if all(any((u, v) in Y for u in ll[e] for v in lr[d])
               for e in range(len(gl)) for d in range(len(gr))
               if i in gl[e] and j in gr[d]))


def stabilize_by_definition(X0, gl, gr, ll, lr):
    Y = frozenset(X0)
    for _ in range(len(Y) + 1):
        nxt = derive_by_definition(Y, gl, gr, ll, lr)
        if nxt == Y:
            return Y
        Y = nxt
    raise AssertionError("derivation did not stabilize within |X0| steps")


def normal_base(rng, max_chains=4) -> PartialIsoSystem:
    """A random WAP witness coarsened to its join, with few chains."""
    while True:
        coarse, _, dec = wap_witness(random_partial_iso(rng.randint(1, 4), rng))
        if len(dec.cyclic) + len(dec.stable) + len(dec.linking) <= max_chains:
            return PartialIsoSystem.single(coarse)
