"""Seeded random instances for randomized suites."""

from __future__ import annotations

import random
from fractions import Fraction

from .core import (
    AlgebraEmbedding,
    AmbientAlgebra,
    PartialIso,
    PartialIsoSystem,
    SystemEmbedding,
    split_system,
)
from .measured import RationalMeasure
from .metric import FiniteMetricSpace


def random_partition(atoms, rng: random.Random, max_blocks: int | None = None) -> list[frozenset]:
    k = rng.randint(1, max_blocks or len(atoms))
    lab = [rng.randrange(k) for _ in atoms]
    return [frozenset(a for a, l in zip(atoms, lab) if l == i) for i in range(k) if i in lab]


def random_partial_iso(n: int, rng: random.Random) -> PartialIso:
    """A partial iso between two random partitions of n atoms with the same
    number of blocks, matched in random order."""
    A = AmbientAlgebra.of_size(n)
    while True:
        B = random_partition(A.atoms, rng)
        C = random_partition(A.atoms, rng)
        if len(B) == len(C):
            break
    rng.shuffle(C)
    return PartialIso.from_map(A, dict(zip(B, C)))


def random_refinement(S: PartialIsoSystem, rng: random.Random, splits: int = 3) -> SystemEmbedding:
    """Split up to ``splits`` atoms, then cut each block pair of the single
    partial iso into matching pieces; returns the embedding S -> refinement."""
    T = S
    f = SystemEmbedding.identity(S)
    for _ in range(rng.randint(0, splits)):
        a = rng.choice(T.ambient.atoms)
        T2, g = split_system(T, a, rng.randint(2, 3))
        f = f.compose(g)
        T = T2
    pairs = {}
    for b, c in T.isos[0].pairs:
        k = rng.randint(1, min(len(b), len(c)))
        bs, cs = sorted(b), sorted(c)
        rng.shuffle(bs)
        rng.shuffle(cs)
        cb = sorted(rng.sample(range(1, len(bs)), k - 1))
        cc = sorted(rng.sample(range(1, len(cs)), k - 1))
        pb = [frozenset(bs[i:j]) for i, j in zip([0] + cb, cb + [len(bs)])]
        pc = [frozenset(cs[i:j]) for i, j in zip([0] + cc, cc + [len(cs)])]
        pairs.update(zip(pb, pc))
    T2 = PartialIsoSystem.single(PartialIso.from_map(T.ambient, pairs))
    return f.compose(SystemEmbedding(AlgebraEmbedding.identity(T.ambient), T, T2))


def random_measure(A: AmbientAlgebra, rng: random.Random, dyadic: bool = False,
                   denominator: int = 12) -> RationalMeasure:
    """Positive masses summing to 1; dyadic ones have power-of-two denominators."""
    n = len(A.atoms)
    den = 2 ** rng.randint(max(1, (n - 1).bit_length()), 6) if dyadic else rng.randint(n, denominator + n)
    cuts = sorted(rng.sample(range(1, den), n - 1))
    sizes = [b - a for a, b in zip([0] + cuts, cuts + [den])]
    return RationalMeasure.of({a: Fraction(s, den) for a, s in zip(A.atoms, sizes)}, dyadic)


def random_split(mu: RationalMeasure, rng: random.Random, dyadic: bool = False):
    """A measure-preserving refinement of ``mu``: each atom is cut into 1-3
    children with random positive shares; returns (nu, embedding)."""
    mass = {}
    image = {}
    for a in mu.ambient:
        k = rng.randint(1, 3)
        total = mu([a])
        if dyadic:
            shares = [Fraction(1, 2 ** (k - 1))] * (2 ** (k - 1))
            k = len(shares)
        else:
            w = [rng.randint(1, 4) for _ in range(k)]
            shares = [Fraction(x, sum(w)) for x in w]
        kids = [f"{a}.{i}" for i in range(k)]
        for kid, s in zip(kids, shares):
            mass[kid] = total * s
        image[a] = frozenset(kids)
    nu = RationalMeasure.of(mass, dyadic)
    return nu, AlgebraEmbedding.from_map(mu.ambient, nu.ambient, image)


def random_metric_space(n: int, rng: random.Random, values=(1, 2)) -> FiniteMetricSpace:
    """Distances drawn from ``values`` until the triangle inequality holds."""
    from itertools import combinations

    pts = tuple(f"p{i}" for i in range(n))
    while True:
        pairs = {pr: rng.choice(values) for pr in combinations(pts, 2)}
        try:
            return FiniteMetricSpace.from_pairs(pts, pairs)
        except ValueError:
            continue
