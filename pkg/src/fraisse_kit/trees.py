"""Finite subtrees of the tree of finite sequences of naturals, partial
isomorphisms between them, and automorphisms of the bounded boxes
width^{<=depth} (sequences of length <= depth with entries < width)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Mapping

from .core import DomainError, MalformedError

Node = tuple[int, ...]


def node_key(u: Node):
    return (len(u), u)


@lru_cache(maxsize=None)
def box(width: int, depth: int) -> tuple[Node, ...]:
    """All sequences of length <= depth with entries < width, by level."""
    out: list[Node] = []
    for k in range(depth + 1):
        out.extend(product(range(width), repeat=k))
    return tuple(out)


def full_tree(m: int) -> tuple[Node, ...]:
    return box(m, m)


@dataclass(frozen=True)
class FiniteTree:
    nodes: frozenset

    def __post_init__(self):
        nodes = frozenset(tuple(int(x) for x in u) for u in self.nodes)
        if () not in nodes:
            raise MalformedError("a tree must contain the root")
        for u in nodes:
            if any(x < 0 for x in u):
                raise MalformedError("tree entries must be naturals")
            if u and u[:-1] not in nodes:
                raise MalformedError(f"tree is not closed under initial segments at {u}")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def of(cls, nodes: Iterable[Iterable[int]]) -> "FiniteTree":
        return cls(frozenset(tuple(u) for u in nodes) | {()})

    def sorted(self) -> list[Node]:
        return sorted(self.nodes, key=node_key)

    def within(self, width: int, depth: int) -> bool:
        return all(len(u) <= depth and all(x < width for x in u) for u in self.nodes)

    def __contains__(self, u) -> bool:
        return tuple(u) in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)


def is_prefix(s: Node, t: Node) -> bool:
    return len(s) <= len(t) and t[: len(s)] == s


def tree_map_failures(mapping: Mapping[Node, Node]) -> list[str]:
    """Root-, level- and prefix-preservation (both ways) of a node map."""
    out = []
    if len(set(mapping.values())) != len(mapping):
        out.append("map is not injective")
    if () in mapping and mapping[()] != ():
        out.append("root not fixed")
    for u, v in mapping.items():
        if len(u) != len(v):
            out.append(f"{u} changes level")
    items = list(mapping.items())
    for u, v in items:
        if u and u[:-1] in mapping and mapping[u[:-1]] != v[:-1]:
            out.append(f"parent of {u} not respected")
    return out


@dataclass(frozen=True)
class TreeIso:
    source: FiniteTree
    target: FiniteTree
    map: tuple[tuple[Node, Node], ...]

    def __post_init__(self):
        m = {tuple(u): tuple(v) for u, v in dict(self.map).items()}
        if set(m) != self.source.nodes or set(m.values()) != self.target.nodes:
            raise MalformedError("tree iso must biject source onto target")
        bad = tree_map_failures(m)
        if bad:
            raise DomainError("; ".join(bad))
        object.__setattr__(self, "map", tuple(sorted(m.items(), key=lambda kv: node_key(kv[0]))))
        object.__setattr__(self, "_m", m)

    @classmethod
    def from_map(cls, mapping: Mapping) -> "TreeIso":
        m = {tuple(u): tuple(v) for u, v in mapping.items()}
        return cls(FiniteTree(frozenset(m)), FiniteTree(frozenset(m.values())), tuple(m.items()))

    def __call__(self, u: Node) -> Node:
        return self._m[tuple(u)]

    def as_dict(self) -> dict:
        return dict(self._m)


@dataclass(frozen=True)
class BoundedTreeAutomorphism:
    """Automorphism of width^{<=depth}; the square box m^{<=m} has
    width = depth = m."""

    width: int
    depth: int
    map: tuple[tuple[Node, Node], ...]

    def __post_init__(self):
        m = {tuple(u): tuple(v) for u, v in dict(self.map).items()}
        nodes = box(self.width, self.depth)
        if set(m) != set(nodes) or set(m.values()) != set(nodes):
            raise MalformedError("automorphism must permute every node of the box")
        bad = tree_map_failures(m)
        if bad:
            raise MalformedError("; ".join(bad))
        object.__setattr__(self, "map", tuple((u, m[u]) for u in nodes))
        object.__setattr__(self, "_m", m)

    @classmethod
    def identity(cls, width: int, depth: int | None = None) -> "BoundedTreeAutomorphism":
        depth = width if depth is None else depth
        return cls(width, depth, tuple((u, u) for u in box(width, depth)))

    @classmethod
    def from_sibling_perms(cls, width: int, depth: int, perms: Mapping[Node, Mapping[int, int]]):
        """g(s^n) = g(s)^pi_s(n), with pi_s the identity where not given."""
        g: dict[Node, Node] = {(): ()}
        for u in box(width, depth)[1:]:
            s, n = u[:-1], u[-1]
            g[u] = g[s] + (perms.get(s, {}).get(n, n),)
        return cls(width, depth, tuple(g.items()))

    @property
    def m(self) -> int:
        if self.width != self.depth:
            raise DomainError("box is not square")
        return self.width

    def __call__(self, u: Node) -> Node:
        return self._m[tuple(u)]

    def as_dict(self) -> dict:
        return dict(self._m)

    def inverse(self) -> "BoundedTreeAutomorphism":
        return BoundedTreeAutomorphism(self.width, self.depth, tuple((v, u) for u, v in self.map))

    def compose(self, after: "BoundedTreeAutomorphism") -> "BoundedTreeAutomorphism":
        """``after`` applied to the result of ``self``."""
        if (self.width, self.depth) != (after.width, after.depth):
            raise MalformedError("automorphisms of different boxes")
        return BoundedTreeAutomorphism(self.width, self.depth,
                                       tuple((u, after(v)) for u, v in self.map))

    def extends(self, mapping: Mapping[Node, Node]) -> bool:
        return all(self._m.get(tuple(u)) == tuple(v) for u, v in mapping.items())

    def restrict(self, width: int, depth: int) -> dict:
        return {u: self._m[u] for u in box(width, depth)}


# ----------------------------------------------------------------- extension


def extend_to_tree_automorphism(phi: TreeIso | Mapping, width: int,
                                depth: int | None = None) -> BoundedTreeAutomorphism:
    """Level-by-level extension of a partial iso to an automorphism of the
    box; each partial sibling bijection is completed by sending the free
    children, in increasing order, to the unused labels in increasing order."""
    depth = width if depth is None else depth
    m = phi.as_dict() if isinstance(phi, TreeIso) else {tuple(u): tuple(v) for u, v in phi.items()}
    bad = tree_map_failures(m)
    if bad:
        raise DomainError("; ".join(bad))
    if () not in m:
        m[()] = ()
    for u in list(m) + list(m.values()):
        if len(u) > depth or any(x >= width for x in u):
            raise DomainError(f"node {u} lies outside the box")
    g: dict[Node, Node] = {(): ()}
    for s in box(width, depth - 1) if depth else ():
        fixed = {u[-1]: m[u][-1] for u in ((s + (n,)) for n in range(width)) if u in m}
        for n, k in fixed.items():
            if m[s + (n,)][:-1] != g[s]:
                raise DomainError(f"children of {s} are not sent below its image")
        unused = iter(k for k in range(width) if k not in set(fixed.values()))
        for n in range(width):
            k = fixed[n] if n in fixed else next(unused)
            g[s + (n,)] = g[s] + (k,)
    out = BoundedTreeAutomorphism(width, depth, tuple(g.items()))
    if not out.extends(m):
        raise AssertionError("extension does not contain the partial iso")
    return out


# ---------------------------------------------------------- common extension


def displacing_conjugator(m: int, n: int) -> BoundedTreeAutomorphism:
    """Automorphism xi of (2n)^{<=2n} fixing m^{<=m} pointwise with
    xi(n^{<=n}) meeting n^{<=n} exactly in m^{<=m}."""
    ell = 2 * n
    perms: dict[Node, dict[int, int]] = {}
    for s in full_tree(m):
        if len(s) < m:
            sw = {j: j + (n - m) for j in range(m, n)}
        else:
            sw = {j: j + n for j in range(n)}
        perms[s] = {**sw, **{v: k for k, v in sw.items()}}
    return BoundedTreeAutomorphism.from_sibling_perms(ell, ell, perms)


@dataclass(frozen=True)
class CommonExtension:
    conjugator: BoundedTreeAutomorphism
    autos: tuple[BoundedTreeAutomorphism, ...]
    ell: int


def common_extension(psis, phis, m: int) -> CommonExtension:
    """Given tuples psis, phis of automorphisms of n^{<=n} agreeing on
    m^{<=m}, find xi and automorphisms of (2n)^{<=2n} extending every psi_i
    and xi phi_i xi^-1."""
    if len(psis) != len(phis) or not psis:
        raise MalformedError("tuples must be nonempty and of equal length")
    n = psis[0].width
    for g in list(psis) + list(phis):
        if g.width != n or g.depth != n:
            raise MalformedError("all automorphisms must live on one square box")
    if m > n:
        raise DomainError("inner box larger than outer box")
    inner = full_tree(m)
    for a, b in zip(psis, phis):
        if any(a(u) != b(u) for u in inner):
            raise DomainError("tuples disagree on the inner box")
        if any(a(u) not in set(inner) for u in inner):
            raise DomainError("inner box is not invariant")
    xi = displacing_conjugator(m, n)
    outer = set(full_tree(n))
    moved = {xi(u) for u in outer}
    if moved & outer != set(inner) or any(xi(u) != u for u in inner):
        raise AssertionError("conjugator does not displace the outer box")
    xi_inv = xi.inverse()
    autos = []
    for a, b in zip(psis, phis):
        union = {u: a(u) for u in outer}
        for v in moved:
            w = xi(b(xi_inv(v)))
            if union.setdefault(v, w) != w:
                raise AssertionError("conjugated map disagrees on the overlap")
        autos.append(extend_to_tree_automorphism(union, 2 * n, 2 * n))
    return CommonExtension(xi, tuple(autos), 2 * n)


# ---------------------------------------------------- stabilizer factorization


@dataclass(frozen=True)
class StabilizerFactorization:
    f: BoundedTreeAutomorphism
    g: BoundedTreeAutomorphism
    bound: int


def factor_through_stabilizers(phi: BoundedTreeAutomorphism, S: FiniteTree,
                               T: FiniteTree) -> StabilizerFactorization:
    """f fixing T pointwise and g extending phi with f^-1 g f fixing S
    pointwise, on the box M^{<=M} with M = 2m.  f swaps a <-> m + a below
    each s in S n T for the labels a with s^a in S but not in S n T; g moves
    the longest prefix inside m^{<=m} by phi and keeps the rest."""
    m = phi.m
    if not S.within(m, m) or not T.within(m, m):
        raise DomainError("subtrees must lie in the box")
    common = S.nodes & T.nodes
    for u in common:
        if phi(u) != u:
            raise DomainError(f"automorphism moves {u} in the common subtree")
    M = 2 * m
    perms = {}
    for s in common:
        A_s = [a for a in range(m) if s + (a,) in S.nodes and s + (a,) not in common]
        sw = {a: m + a for a in A_s}
        perms[s] = {**sw, **{v: k for k, v in sw.items()}}
    f = BoundedTreeAutomorphism.from_sibling_perms(M, M, perms)
    gmap = {}
    for u in box(M, M):
        k = 0
        while k < len(u) and k < m and u[k] < m:
            k += 1
        gmap[u] = phi(u[:k]) + u[k:]
    g = BoundedTreeAutomorphism(M, M, tuple(gmap.items()))
    out = StabilizerFactorization(f, g, M)
    bad = factorization_failures(out, phi, S, T)
    if bad:
        raise AssertionError("; ".join(bad))
    return out


def factorization_failures(fac: StabilizerFactorization, phi: BoundedTreeAutomorphism,
                           S: FiniteTree, T: FiniteTree) -> list[str]:
    f, g = fac.f, fac.g
    out = []
    if not g.extends(phi.as_dict()):
        out.append("g does not extend phi")
    if any(f(u) != u for u in T.nodes):
        out.append("f moves a node of T")
    conj = f.compose(g).compose(f.inverse())
    if any(conj(u) != u for u in S.nodes):
        out.append("f^-1 g f moves a node of S")
    return out


def all_subtrees(width: int, depth: int, max_nodes: int | None = None) -> list[FiniteTree]:
    """Every prefix-closed subset of the box containing the root."""
    nodes = box(width, depth)[1:]
    out = []

    def grow(chosen: frozenset, idx: int):
        if idx == len(nodes):
            out.append(FiniteTree(chosen))
            return
        u = nodes[idx]
        grow(chosen, idx + 1)
        if u[:-1] in chosen and (max_nodes is None or len(chosen) < max_nodes):
            grow(chosen | {u}, idx + 1)

    grow(frozenset({()}), 0)
    return sorted(out, key=lambda t: (len(t), sorted(t.nodes, key=node_key)))


def all_tree_isos(source: FiniteTree, target: FiniteTree) -> list[dict]:
    """Every isomorphism between two finite trees, by backtracking."""
    if len(source) != len(target):
        return []
    order = source.sorted()
    tgt = target.sorted()
    out = []

    def go(i: int, m: dict, used: set):
        if i == len(order):
            out.append(dict(m))
            return
        u = order[i]
        for v in tgt:
            if v in used or len(v) != len(u):
                continue
            if u and m[u[:-1]] != v[:-1]:
                continue
            if not u and v:
                continue
            m[u] = v
            used.add(v)
            go(i + 1, m, used)
            used.discard(v)
            del m[u]

    go(0, {}, set())
    return out


def all_automorphisms(width: int, depth: int) -> list[BoundedTreeAutomorphism]:
    t = FiniteTree(frozenset(box(width, depth)))
    return [BoundedTreeAutomorphism(width, depth, tuple(m.items())) for m in all_tree_isos(t, t)]
